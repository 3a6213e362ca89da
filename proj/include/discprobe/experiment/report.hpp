#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "discprobe/metrics/aggregate.hpp"

namespace discprobe::experiment {

// Scores from a sweep output directory (its records/ subdirectory), a
// directory of record JSONL files, a single JSONL file, or a score CSV
// (model,layer,task,mean,sd).
metrics::ScoreMatrix load_scores(const std::filesystem::path& input);

// Per-instance ordering results under <input>/instances (or <input> itself).
std::vector<metrics::OrderingInstanceResult> load_ordering_results(const std::filesystem::path& input);

struct Report {
  std::string markdown;
  std::string best_layers_csv;  // model,task,best_layer,mean,sd
  std::string ranking_csv;      // rank,model,layer,value (empty when not computable)
  bool empty = true;
};

// Best layer per (model, task) and the normalized-average ranking. Empty
// input gives an empty report and a warning.
Report make_report(const metrics::ScoreMatrix& m);

// Writes report.md, best_layers.csv and, when available, ranking.csv.
void write_report(const Report& r, const std::filesystem::path& dir);

}  // namespace discprobe::experiment
