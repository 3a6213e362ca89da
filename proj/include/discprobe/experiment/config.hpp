#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "discprobe/encoder/encoder.hpp"
#include "discprobe/encoder/registry.hpp"
#include "discprobe/probe/heads.hpp"
#include "discprobe/tasks/instances.hpp"
#include "discprobe/train/dataset.hpp"
#include "discprobe/train/trainer.hpp"

namespace discprobe::experiment {

// Everything a sweep needs. Relative paths in a config file are resolved
// against the file's directory.
struct ExperimentConfig {
  std::filesystem::path registry;                  // model registry JSON
  std::vector<std::filesystem::path> model_roots;  // extra checkpoint search roots
  std::vector<std::string> models;                 // empty: every registry entry
  std::vector<tasks::Task> tasks;                  // empty: all seven
  std::vector<int> layers;                         // empty: every layer of each model
  std::vector<int> seeds = {1, 2, 3};
  std::filesystem::path data_dir = "datasets";     // <data_dir>/<task> unless overridden
  std::map<tasks::Task, std::filesystem::path> datasets;
  std::filesystem::path out = "out";
  std::filesystem::path cache_dir;                 // empty: <out>/cache
  // Keys "model" or "model:task"; values "cls" or "mean".
  std::map<std::string, std::string> pooling;
  probe::DecodeMode decode_mode = probe::DecodeMode::kAssignment;
  train::ContextPooling context_pooling = train::ContextPooling::kWhole;
  nlohmann::json train = nlohmann::json::object();  // TrainConfig overrides
  // Keep at most this many instances of a split ("train", "dev", "test").
  std::map<std::string, std::size_t> subsample;

  std::vector<tasks::Task> effective_tasks() const;
  std::filesystem::path effective_cache_dir() const { return cache_dir.empty() ? out / "cache" : cache_dir; }

  // Directory of a built dataset. Segmentation data is tokenizer-specific:
  // <dir>/<model> is used when it holds a manifest.
  std::filesystem::path dataset_dir(tasks::Task task, const std::string& model) const;

  encoder::Pooling pooling_for(const encoder::EncoderSpec& spec, tasks::Task task) const;
  train::TrainConfig train_config(tasks::Task task) const;
  std::vector<int> layers_for(const encoder::EncoderSpec& spec) const;
  std::vector<std::string> model_names(const encoder::ModelRegistry& registry) const;
};

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Default registry location: DISCPROBE_REGISTRY, else data/models/registry.json
// next to the source tree.
std::filesystem::path default_registry_path();

// Registry with the config's roots followed by DISCPROBE_MODEL_DIR roots.
encoder::ModelRegistry open_registry(const ExperimentConfig& c);

// Throws ValidationError (unknown model, layer out of range for a model,
// missing dataset directory) or IoError (unresolvable checkpoint).
void validate_config(const ExperimentConfig& c, encoder::ModelRegistry& registry);

// Parses "1,2,5-8" style lists.
std::vector<int> parse_int_list(const std::string& s);

}  // namespace discprobe::experiment
