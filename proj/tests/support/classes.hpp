#pragma once

// Twenty behavior classes, each with a log-side and an intelligence-side
// vocabulary. Variants draw a subset of the class words plus shared noise,
// so no two variants of a class need share a text.

#include <array>
#include <string>
#include <vector>

#include "provhunt/embed.hpp"

namespace fixture {

struct ClassSpec {
  std::array<const char*, 4> log_words;
  std::array<const char*, 4> intel_words;
};

inline const std::array<ClassSpec, 20>& class_specs() {
  static const std::array<ClassSpec, 20> specs{{
      {{"nginx", "cgi", "bin", "bash"}, {"web", "exploit", "remote", "shell"}},
      {{"curl", "tmp", "payload", "chmod"}, {"download", "tool", "transfer", "ingress"}},
      {{"shadow", "passwd", "root", "setuid"}, {"privilege", "escalation", "credential", "account"}},
      {{"crontab", "cron", "spool", "job"}, {"scheduled", "task", "persistence", "timer"}},
      {{"ssh", "authorized", "keys", "sshd"}, {"lateral", "movement", "remote", "login"}},
      {{"tar", "gzip", "archive", "staging"}, {"collection", "archive", "compress", "staged"}},
      {{"dns", "txt", "resolver", "53"}, {"tunnel", "dns", "exfiltration", "covert"}},
      {{"rm", "syslog", "wtmp", "truncate"}, {"indicator", "removal", "clear", "logs"}},
      {{"ps", "proc", "uname", "hostname"}, {"discovery", "system", "information", "enumeration"}},
      {{"nmap", "scan", "ports", "sweep"}, {"network", "scanning", "service", "probe"}},
      {{"python", "socket", "pty", "spawn"}, {"interpreter", "scripting", "command", "python"}},
      {{"ld", "preload", "so", "inject"}, {"hijack", "library", "injection", "loader"}},
      {{"mimikatz", "lsass", "dump", "memory"}, {"dumping", "os", "credentials", "memory"}},
      {{"xmrig", "cpu", "pool", "stratum"}, {"resource", "hijacking", "mining", "cryptocurrency"}},
      {{"openssl", "enc", "aes", "locked"}, {"encrypted", "impact", "ransom", "data"}},
      {{"iptables", "flush", "firewall", "ufw"}, {"impair", "defenses", "disable", "firewall"}},
      {{"base64", "decode", "obfuscated", "blob"}, {"obfuscated", "encoded", "deobfuscate", "decode"}},
      {{"smtp", "attachment", "mail", "eml"}, {"phishing", "attachment", "email", "spearphishing"}},
      {{"sudo", "sudoers", "nopasswd", "visudo"}, {"abuse", "elevation", "sudo", "caching"}},
      {{"rsync", "upload", "443", "bulk"}, {"exfiltration", "web", "service", "upload"}},
  }};
  return specs;
}

inline const std::vector<std::string>& log_noise() {
  static const std::vector<std::string> w{"read", "write", "open", "connect", "clone", "execute", "usr", "lib",
                                          "etc", "var", "home", "user", "10", "0", "1", "log"};
  return w;
}

inline const std::vector<std::string>& intel_noise() {
  static const std::vector<std::string> w{"the", "adversary", "attacker", "used", "a", "to", "on", "host",
                                          "victim", "may", "then", "file", "process", "system", "observed", "was"};
  return w;
}

/// One variant: 3 of the 4 class words and 2 noise words, shuffled.
inline std::string variant(const std::array<const char*, 4>& words, const std::vector<std::string>& noise,
                           provhunt::Rng& rng) {
  std::vector<std::string> toks;
  const auto skip = rng.below(4);
  for (std::size_t i = 0; i < 4; ++i)
    if (i != skip) toks.emplace_back(words[i]);
  for (int i = 0; i < 2; ++i) toks.push_back(noise[rng.below(noise.size())]);
  rng.shuffle(toks);
  std::string s;
  for (const auto& t : toks) s += (s.empty() ? "" : " ") + t;
  return s;
}

struct ClassPair {
  std::string log;
  std::string intel;
  std::size_t cls = 0;
};

/// `per_class` pairs for each of the 20 classes.
inline std::vector<ClassPair> class_pairs(std::size_t per_class, std::uint64_t seed) {
  provhunt::Rng rng(seed);
  std::vector<ClassPair> out;
  for (std::size_t c = 0; c < class_specs().size(); ++c)
    for (std::size_t k = 0; k < per_class; ++k)
      out.push_back({variant(class_specs()[c].log_words, log_noise(), rng),
                     variant(class_specs()[c].intel_words, intel_noise(), rng), c});
  return out;
}

}  // namespace fixture
