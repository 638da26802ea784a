#pragma once

// Synthetic audit logs with a planted three-stage intrusion:
//   1. exploited web worker opens a shell to a remote controller
//   2. the shell downloads a payload to /tmp and plants a cron job
//   3. cron starts a root shell that runs the payload, which touches the
//      account databases
// Stage 2 and stage 3 share no entity; they are linked only through the
// benign-looking cron run that reads the planted job.

#include <array>
#include <set>
#include <string>
#include <vector>

#include "provhunt/embed.hpp"
#include "provhunt/eval.hpp"
#include "provhunt/ingest.hpp"
#include "provhunt/intel.hpp"
#include "provhunt/partition.hpp"
#include "provhunt/reduce.hpp"

namespace provhunt::synth {

struct Stage {
  std::string label;
  Nanos t_begin = 0;
  Nanos t_end = 0;
  std::set<NodeKey> nodes;
};

struct Scenario {
  std::vector<Event> events;
  std::vector<Stage> stages;
  std::set<NodeKey> attack_nodes;
};

struct ScenarioConfig {
  std::size_t benign_sessions = 2200;
  std::size_t attack_chains = 1;
  std::uint64_t seed = 1;
  Nanos start = 1'700'000'000LL * kNanosPerSecond;
  Nanos session_spacing = 40 * kNanosPerSecond;
};

inline constexpr std::string_view kShellLabel = "T1059";
inline constexpr std::string_view kDownloadLabel = "T1105";
inline constexpr std::string_view kEscalationLabel = "T1068";

/// Intelligence describing the planted stages, two originals per label.
inline std::vector<QueryEntry> stage_intelligence() {
  return {
      {"The adversary exploited the nginx web server and obtained a command shell connected to a remote operator "
       "console.",
       std::string(kShellLabel), "synthetic"},
      {"A shell process was spawned by the compromised web server and connected back to the attacker controller.",
       std::string(kShellLabel), "synthetic"},
      {"The attacker used the shell to connect to a remote server and download a payload file into the temporary "
       "directory.",
       std::string(kDownloadLabel), "synthetic"},
      {"A malicious executable was transferred from an external host, written to /tmp, and a cron job was planted "
       "to run it.",
       std::string(kDownloadLabel), "synthetic"},
      {"The downloaded payload was launched as a new process running as root, reading the shadow password file and "
       "modifying account files.",
       std::string(kEscalationLabel), "synthetic"},
      {"Privilege escalation: the implant ran with root privileges, accessed /etc/shadow and altered /etc/passwd "
       "to add an account.",
       std::string(kEscalationLabel), "synthetic"},
  };
}

/// Recorded paraphrases for stage_intelligence(), three per entry, in the
/// replay-file record shape.
inline std::vector<std::pair<std::string, std::vector<std::string>>> stage_paraphrases() {
  const auto intel = stage_intelligence();
  return {
      {intel[0].text,
       {"Attackers exploited the nginx server to get a shell that talks to a remote operator console.",
        "By exploiting nginx the intruder obtained a command shell linked to an external console.",
        "The web server nginx was compromised, giving the adversary a remote shell to its console."}},
      {intel[1].text,
       {"The compromised web server spawned a shell that connected back to the attacker.",
        "A reverse shell started from the exploited web process and reached the attacker controller.",
        "The hijacked server process launched a shell which called back to the remote controller."}},
      {intel[2].text,
       {"Through the shell the attacker reached a remote host and downloaded a payload into /tmp.",
        "The intruder fetched a payload file from a remote server and stored it in the temporary directory.",
        "Using the shell, a payload was downloaded from an external server to the tmp folder."}},
      {intel[3].text,
       {"An executable was pulled from an outside host, saved in /tmp, and a cron job was added to launch it.",
        "The attacker copied a malicious binary from a remote machine into /tmp and scheduled it through cron.",
        "A payload transferred from an external server was written to tmp and a cron entry planted to start it."}},
      {intel[4].text,
       {"The payload was started as a root process that read the shadow file and changed account files.",
        "Running as root, the downloaded file read the password shadow database and edited account data.",
        "A new root process launched from the payload accessed shadow passwords and modified accounts."}},
      {intel[5].text,
       {"The implant escalated to root, read /etc/shadow and edited /etc/passwd to create an account.",
        "With root rights the implant opened /etc/shadow and changed /etc/passwd to add a user.",
        "Escalating privileges, the implant accessed the shadow file and altered passwd to add an account."}},
  };
}

namespace detail {

class Generator {
 public:
  explicit Generator(const ScenarioConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  Scenario run() {
    const Nanos span = static_cast<Nanos>(cfg_.benign_sessions + 8) * cfg_.session_spacing;
    const Nanos hour = 60 * kNanosPerMinute;
    const std::size_t hours = static_cast<std::size_t>(span / hour) + 2;

    // Hours whose cron run carries a planted job.
    std::set<std::size_t> attack_hours;
    for (std::size_t c = 0; c < cfg_.attack_chains; ++c) {
      const std::size_t slots = std::max<std::size_t>(1, hours / std::max<std::size_t>(1, cfg_.attack_chains));
      attack_hours.insert(1 + c * slots + (slots > 2 ? rng_.below(slots - 1) : 0));
    }

    cron_ = process("cron");
    for (std::size_t h = 0; h < hours; ++h) {
      const Nanos t = cfg_.start + static_cast<Nanos>(h) * hour;
      if (attack_hours.count(h)) {
        attack_chain(t);
      } else {
        cron_run(t, std::nullopt);
      }
    }
    for (std::size_t s = 0; s < cfg_.benign_sessions; ++s) {
      const Nanos t = cfg_.start + static_cast<Nanos>(s) * cfg_.session_spacing +
                      static_cast<Nanos>(rng_.below(static_cast<std::size_t>(cfg_.session_spacing / 2)));
      benign_session(t);
    }
    return std::move(out_);
  }

 private:
  NodeRecord process(const std::string& name) {
    return NodeRecord{NodeType::process, "p" + std::to_string(++pid_), name};
  }
  static NodeRecord file(const std::string& path) { return NodeRecord{NodeType::file, "f:" + path, path}; }
  static NodeRecord sock(const std::string& addr) { return NodeRecord{NodeType::socket, "s:" + addr, addr}; }

  Nanos step() { return static_cast<Nanos>(20 + rng_.below(400)) * 1'000'000; }

  void emit(Nanos ts, const NodeRecord& s, const std::string& op, const NodeRecord& d) {
    out_.events.push_back(Event{ts, s.id, s.type, s.name, op, d.id, d.type, d.name});
    if (current_stage_) {
      current_stage_->nodes.insert(s.key());
      current_stage_->nodes.insert(d.key());
      current_stage_->t_begin = std::min(current_stage_->t_begin, ts);
      current_stage_->t_end = std::max(current_stage_->t_end, ts);
    }
  }

  std::string pick(std::initializer_list<const char*> xs) { return *(xs.begin() + rng_.below(xs.size())); }
  std::string num(std::size_t lo, std::size_t hi) { return std::to_string(lo + rng_.below(hi - lo + 1)); }
  std::string ip_public() { return num(11, 199) + "." + num(1, 254) + "." + num(1, 254) + "." + num(1, 254); }
  std::string random_name(std::size_t len) {
    static constexpr std::string_view alpha = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(alpha[rng_.below(alpha.size())]);
    return s;
  }

  void cron_run(Nanos t, const std::optional<std::pair<NodeRecord, NodeRecord>>& planted) {
    emit(t, cron_, "read", file("/etc/crontab"));
    t += step();
    if (planted) {
      emit(t, cron_, "read", planted->first);
      t += step();
      emit(t, cron_, "clone", planted->second);
      t += step();
    }
    auto rp = process("run-parts");
    emit(t, cron_, "clone", rp);
    t += step();
    const std::string job = pick({"logrotate", "man-db", "apt-compat", "dpkg", "sysstat"});
    emit(t, rp, "read", file("/etc/cron.daily/" + job));
    t += step();
    emit(t, rp, "execute", file("/usr/sbin/" + job));
  }

  void attack_chain(Nanos hour_mark) {
    const std::string c2 = ip_public();
    const std::string payload = random_name(7);
    const std::string job = pick({"sysupdate", "netcheck", "pkgsync", "dbclean"}) + num(1, 9);

    // Stage 1: 50 minutes before the cron run.
    Nanos t = hour_mark - 50 * kNanosPerMinute + static_cast<Nanos>(rng_.below(60)) * kNanosPerSecond;
    auto nginx = process("nginx");
    auto sh = process("sh");
    begin_stage(kShellLabel);
    emit(t, nginx, "connect", sock(c2 + ":" + pick({"80", "443", "8080"})));
    t += step();
    emit(t, nginx, "read", sock(c2 + ":" + pick({"80", "443", "8080"})));
    t += step();
    emit(t, nginx, "clone", sh);
    t += step();
    emit(t, sh, "read", file("/etc/passwd"));
    end_stage();

    // Stage 2: 25 minutes before the cron run.
    t = hour_mark - 25 * kNanosPerMinute + static_cast<Nanos>(rng_.below(60)) * kNanosPerSecond;
    const auto dl = sock(c2 + ":" + pick({"8000", "8443", "9001"}));
    const auto tmp = file("/tmp/" + payload);
    const auto cronjob = file("/etc/cron.d/" + job);
    begin_stage(kDownloadLabel);
    emit(t, sh, "connect", dl);
    t += step();
    emit(t, sh, "read", dl);
    t += step();
    emit(t, sh, "write", tmp);
    t += step();
    emit(t, sh, "write", cronjob);
    end_stage();

    // Cron picks the job up on the hour.
    auto root_sh = process("sh");
    cron_run(hour_mark, std::make_pair(cronjob, root_sh));

    // Stage 3: 25 minutes after the cron run.
    t = hour_mark + 25 * kNanosPerMinute + static_cast<Nanos>(rng_.below(60)) * kNanosPerSecond;
    auto implant = process(payload);
    begin_stage(kEscalationLabel);
    emit(t, root_sh, "clone", implant);
    t += step();
    emit(t, implant, "read", file("/etc/shadow"));
    t += step();
    emit(t, implant, "write", file("/etc/passwd"));
    t += step();
    emit(t, implant, "write", file("/etc/sudoers.d/" + payload));
    end_stage();
  }

  void benign_session(Nanos t) {
    switch (rng_.below(12)) {
      case 0: {  // web request
        auto p = process("nginx");
        emit(t, p, "accept", sock("10.0." + num(0, 3) + "." + num(2, 250) + ":443"));
        t += step();
        emit(t, p, "read", file("/var/www/html/" + pick({"index", "about", "login", "news", "shop"}) + ".html"));
        t += step();
        emit(t, p, "write", file("/var/log/nginx/access.log"));
        break;
      }
      case 1: {  // interactive login
        auto p = process("sshd");
        auto b = process("bash");
        emit(t, p, "accept", sock("10.0.1." + num(2, 250) + ":22"));
        t += step();
        emit(t, p, "read", file("/etc/passwd"));
        t += step();
        emit(t, p, "read", file("/etc/shadow"));
        t += step();
        emit(t, p, "clone", b);
        t += step();
        emit(t, b, "read", file("/home/user/.bashrc"));
        break;
      }
      case 2: {  // directory listing
        auto p = process("bash");
        auto l = process("ls");
        emit(t, p, "clone", l);
        t += step();
        const std::string dir = pick({"docs", "projects", "music", "photos"});
        emit(t, l, "read", file("/home/user"));
        t += step();
        emit(t, l, "read", file("/home/user/" + dir));
        t += step();
        emit(t, l, "read", file("/home/user/" + dir + "/" + pick({"a", "b", "notes", "todo"})));
        break;
      }
      case 3: {  // backup
        auto p = process("tar");
        for (int i = 0; i < 3; ++i) {
          emit(t, p, "read", file("/home/user/docs/report" + num(1, 40) + ".odt"));
          t += step();
        }
        emit(t, p, "write", file("/var/backups/home." + num(1, 30) + ".tar"));
        break;
      }
      case 4: {  // package update
        auto p = process("apt");
        const std::string mirror = "91.189." + num(88, 91) + "." + num(2, 250);
        emit(t, p, "connect", sock(mirror + ":80"));
        t += step();
        emit(t, p, "read", sock(mirror + ":80"));
        t += step();
        emit(t, p, "write", file("/var/cache/apt/archives/" + pick({"libc6", "openssl", "curl", "vim"}) + ".deb"));
        t += step();
        emit(t, p, "read", file("/var/lib/dpkg/status"));
        break;
      }
      case 5: {  // mail client
        auto p = process("alpine");
        emit(t, p, "connect", sock("127.0.0.1:1"));
        t += step() / 4;
        emit(t, p, "read", sock("127.0.0.1:25"));
        t += step();
        const std::string id = num(1000, 1999);
        emit(t, p, "write", file("/var/mail/msg." + id + ".lock"));
        t += step();
        emit(t, p, "write", file("/var/mail/msg." + num(2000, 2999) + ".lock"));
        break;
      }
      case 6: {  // syslog
        auto p = process("rsyslogd");
        emit(t, p, "read", file("/dev/log"));
        t += step();
        emit(t, p, "write", file("/var/log/syslog"));
        t += step();
        emit(t, p, "write", file("/var/log/auth.log"));
        break;
      }
      case 7: {  // application server
        auto p = process("python3");
        emit(t, p, "read", file("/opt/app/config.yaml"));
        t += step();
        emit(t, p, "connect", sock("10.0.0.5:5432"));
        t += step();
        emit(t, p, "write", file("/tmp/app-" + random_name(6) + ".tmp"));
        break;
      }
      case 8: {  // name resolution
        auto p = process("systemd-resolved");
        emit(t, p, "read", file("/etc/resolv.conf"));
        t += step();
        emit(t, p, "sendto", sock(pick({"8.8.8.8", "1.1.1.1", "9.9.9.9"}) + ":53"));
        t += step();
        emit(t, p, "recvfrom", sock(pick({"8.8.8.8", "1.1.1.1", "9.9.9.9"}) + ":53"));
        break;
      }
      case 9: {  // user download
        auto p = process("firefox");
        const std::string cdn = "151.101." + num(1, 200) + "." + num(1, 250);
        emit(t, p, "connect", sock(cdn + ":443"));
        t += step();
        emit(t, p, "read", sock(cdn + ":443"));
        t += step();
        emit(t, p, "write", file("/home/user/Downloads/" + pick({"slides", "paper", "photo", "invoice"}) + num(1, 9) + ".pdf"));
        break;
      }
      case 10: {  // sudo maintenance
        auto p = process("sudo");
        auto c = process("systemctl");
        emit(t, p, "read", file("/etc/sudoers"));
        t += step();
        emit(t, p, "clone", c);
        t += step();
        emit(t, c, "read", file("/etc/systemd/system/" + pick({"nginx", "ssh", "cron"}) + ".service"));
        break;
      }
      default: {  // compile
        auto p = process("make");
        auto cc = process("gcc");
        emit(t, p, "read", file("/home/user/projects/Makefile"));
        t += step();
        emit(t, p, "clone", cc);
        t += step();
        emit(t, cc, "read", file("/home/user/projects/main.c"));
        t += step();
        emit(t, cc, "write", file("/home/user/projects/main.o"));
        break;
      }
    }
  }

  void begin_stage(std::string_view label) {
    out_.stages.push_back(Stage{std::string(label), std::numeric_limits<Nanos>::max(), 0, {}});
    current_stage_ = &out_.stages.back();
  }
  void end_stage() {
    for (const auto& k : current_stage_->nodes) out_.attack_nodes.insert(k);
    current_stage_ = nullptr;
  }

  ScenarioConfig cfg_;
  Rng rng_;
  Scenario out_;
  Stage* current_stage_ = nullptr;
  std::size_t pid_ = 0;
  NodeRecord cron_;
};

}  // namespace detail

inline Scenario make_scenario(const ScenarioConfig& cfg) {
  Scenario s = detail::Generator(cfg).run();
  // Emitted in generation order; shuffled so consumers cannot rely on it.
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  rng.shuffle(s.events);
  return s;
}

/// A subgraph carries a stage label when it holds an edge whose endpoints
/// both belong to that stage and whose time lies inside the stage.
inline std::vector<std::string> label_subgraphs(std::span<const BehaviorSubgraph> subs, const ProvenanceGraph& g,
                                                std::span<const Stage> stages) {
  std::vector<std::set<std::size_t>> stage_nodes;
  for (const auto& st : stages) stage_nodes.push_back(resolve_truth_nodes(st.nodes, g));
  std::vector<std::string> labels;
  labels.reserve(subs.size());
  for (const auto& s : subs) {
    std::string label(kBenignLabel);
    for (auto ei : s.edge_indices) {
      const auto& e = g.edge(ei);
      for (std::size_t k = 0; k < stages.size() && label == kBenignLabel; ++k) {
        if (e.ts < stages[k].t_begin || e.ts > stages[k].t_end) continue;
        if (stage_nodes[k].count(e.src) && stage_nodes[k].count(e.dst)) label = stages[k].label;
      }
      if (label != kBenignLabel) break;
    }
    labels.push_back(std::move(label));
  }
  return labels;
}

/// Labeled log sequences of a scenario after reduction and partitioning.
inline std::vector<LabeledSequence> labeled_sequences(const Scenario& sc, const ReduceConfig& rcfg = {},
                                                      Nanos theta_max = kDefaultThetaMax) {
  const auto g = reduce_all(build_graph(sc.events), rcfg);
  const auto subs = partition(g, theta_max);
  const auto labels = label_subgraphs(subs, g, sc.stages);
  std::vector<LabeledSequence> out;
  out.reserve(subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) out.push_back({to_sequence(subs[i], g).text, labels[i]});
  return out;
}

/// Everything the end-to-end demo needs: a test log with one planted chain,
/// labeled training sequences from an independent log with several chains,
/// the stage intelligence with recorded paraphrases, and a query database.
struct Demo {
  Scenario test;
  std::vector<LabeledSequence> training;
  std::vector<QueryEntry> intel;
  std::vector<std::pair<std::string, std::vector<std::string>>> paraphrases;
  QueryDB query_db;
};

inline Demo make_demo(std::uint64_t seed, std::size_t benign_sessions = 2200,
                      std::span<const QueryEntry> extra_queries = {}) {
  Demo d;
  ScenarioConfig test_cfg;
  test_cfg.seed = seed;
  test_cfg.benign_sessions = benign_sessions;
  d.test = make_scenario(test_cfg);

  // The training log spans about a day so routine hourly jobs are well
  // represented next to the attack chains.
  ScenarioConfig train_cfg;
  train_cfg.seed = seed * 6364136223846793005ULL + 1442695040888963407ULL;
  train_cfg.benign_sessions = 800;
  train_cfg.attack_chains = 8;
  train_cfg.session_spacing = 120 * kNanosPerSecond;
  d.training = labeled_sequences(make_scenario(train_cfg));

  d.intel = stage_intelligence();
  d.paraphrases = stage_paraphrases();
  d.query_db.entries.push_back({std::string(kBenignSentence), std::string(kBenignLabel), "anchor"});
  std::set<std::string> seen{std::string(kBenignSentence)};
  for (const auto& q : d.intel)
    if (seen.insert(q.text).second) d.query_db.entries.push_back(q);
  for (const auto& q : extra_queries)
    if (seen.insert(q.text).second) d.query_db.entries.push_back(q);
  return d;
}

/// Training settings that suit the demo and fixture corpora. Only the
/// learning rate differs from the library defaults.
inline TrainConfig desk_train_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.seed = seed;
  return c;
}

}  // namespace provhunt::synth
