#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace discprobe::train {

// One (model, layer, task, seed) result.
struct RunRecord {
  std::string model;
  int layer = 0;
  std::string task;
  int seed = 0;
  std::string metric;  // "accuracy", "spearman" or "macro_f1"
  double value = 0.0;
  int epochs = 0;
  double wall_time_s = 0.0;
  // "encoder" or "decoder"; encoder-decoder models label layers above the
  // encoder depth as decoder layers. Empty for single-stack models.
  std::string stack;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

std::vector<RunRecord> read_run_records(const std::filesystem::path& jsonl);
// Reads every *.jsonl in a directory (sorted by file name).
std::vector<RunRecord> read_run_records_dir(const std::filesystem::path& dir);
void append_run_record(const std::filesystem::path& jsonl, const RunRecord& r);

}  // namespace discprobe::train
