#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "discprobe/train/run_record.hpp"

namespace discprobe::metrics {

using CellKey = std::pair<std::string, int>;  // (model, layer)

struct CellStat {
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;  // number of seeds behind the cell
};

// task -> (model, layer) -> mean/sd over seeds.
struct ScoreMatrix {
  std::map<std::string, std::map<CellKey, CellStat>> tasks;

  std::vector<std::string> task_names() const;
  std::vector<std::string> model_names() const;
  std::vector<int> layers(const std::string& model) const;
};

struct SeedStat {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single record
  int count = 0;
};

// Mean and sample s.d. of a list of seed values. A single value yields s.d. 0
// and logs a warning.
SeedStat seed_stats(std::span<const double> values);

// Groups records by (model, layer, task) and reduces each group with seed_stats.
ScoreMatrix seed_stats(std::span<const train::RunRecord> records);

// Min-max normalizes one task grid. A constant grid maps every cell to 0.5
// with a warning.
std::map<CellKey, double> min_max_normalize(const std::map<CellKey, CellStat>& grid);

// Per-task min-max normalization over the full model x layer grid, then the
// mean over tasks. Throws ValidationError when the task grids do not cover the
// same cells.
std::map<CellKey, double> aggregate(const ScoreMatrix& matrix);

// Highest-scoring cell; ties go to the cell that sorts first.
std::pair<CellKey, double> argmax(const std::map<CellKey, double>& grid);

// Best layer of `model` in one task grid; ties go to the lowest layer.
std::optional<std::pair<int, CellStat>> best_layer(const ScoreMatrix& matrix,
                                                   const std::string& task,
                                                   const std::string& model);

// CSV "model,layer,task,mean,sd" with a header row.
ScoreMatrix read_score_csv(const std::filesystem::path& path);
ScoreMatrix parse_score_csv(std::string_view csv);
std::string score_csv(const ScoreMatrix& matrix);
// CSV "model,layer,value".
std::string normalized_csv(const std::map<CellKey, double>& grid);

// Per-instance ordering result kept by the sweep for the breakdown analysis.
struct OrderingInstanceResult {
  std::string model;
  int layer = 0;
  int seed = 0;
  int n = 0;  // number of sentences
  double rho = 0.0;
};

nlohmann::json to_json(const OrderingInstanceResult& r);
OrderingInstanceResult ordering_result_from_json(const nlohmann::json& j);
std::vector<OrderingInstanceResult> read_ordering_results(const std::filesystem::path& jsonl);

// Layer of `model` with the highest mean rho over all instances (ties: lowest
// layer). Throws ValidationError if the model has no per-instance results.
int best_ordering_layer(std::span<const OrderingInstanceResult> results, const std::string& model);

struct BreakdownBucket {
  double mean_rho = 0.0;
  std::size_t count = 0;
};

// Mean rho per sentence count n for (model, layer); `layer` defaults to the
// model's best ordering layer.
std::map<int, BreakdownBucket> ordering_breakdown(std::span<const OrderingInstanceResult> results,
                                                  const std::string& model,
                                                  std::optional<int> layer = std::nullopt);

}  // namespace discprobe::metrics
