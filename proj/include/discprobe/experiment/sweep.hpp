#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "discprobe/experiment/config.hpp"

namespace discprobe::experiment {

struct SweepSummary {
  std::size_t planned = 0;    // (model, layer, task, seed) cells requested
  std::size_t completed = 0;  // trained in this invocation
  std::size_t skipped = 0;    // already present in the record files
  std::size_t failed = 0;
  std::vector<nlohmann::json> failures;  // {model, task, layer?, seed?, error}
};

// File-system friendly model name ('/' becomes '_').
std::string safe_name(const std::string& model);

// <out>/records/<model>__<task>.jsonl
std::filesystem::path records_path(const std::filesystem::path& out, const std::string& model, tasks::Task task);

// Trains and evaluates every missing (model, layer, task, seed) cell and
// appends one RunRecord per cell. Records already on disk are skipped, so an
// interrupted sweep resumes where it stopped. A failing cell is logged, listed
// in the manifest and does not stop the sweep. Configuration problems (see
// validate_config) throw before any work starts.
SweepSummary cmd_sweep(const ExperimentConfig& config);

// Instances of one split, truncated to the config's subsample cap.
train::InstanceList load_split_instances(const ExperimentConfig& config, tasks::Task task, const std::string& model,
                                         const std::string& split, std::vector<std::string>* label_inventory = nullptr);

}  // namespace discprobe::experiment
