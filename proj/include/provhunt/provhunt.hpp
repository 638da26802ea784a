#pragma once

#include "provhunt/common.hpp"
#include "provhunt/embed.hpp"
#include "provhunt/embedding_file.hpp"
#include "provhunt/eval.hpp"
#include "provhunt/graph.hpp"
#include "provhunt/hunt.hpp"
#include "provhunt/ingest.hpp"
#include "provhunt/intel.hpp"
#include "provhunt/partition.hpp"
#include "provhunt/pipeline.hpp"
#include "provhunt/reduce.hpp"
#include "provhunt/scenario.hpp"
#include "provhunt/synth.hpp"
#include "provhunt/tokenize.hpp"
