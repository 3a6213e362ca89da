#include "discprobe/experiment/config.hpp"

#include <algorithm>
#include <cstdlib>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using tasks::Task;

std::vector<Task> ExperimentConfig::effective_tasks() const { return tasks.empty() ? tasks::all_tasks() : tasks; }

fs::path ExperimentConfig::dataset_dir(Task task, const std::string& model) const {
  const auto it = datasets.find(task);
  const fs::path dir = it != datasets.end() ? it->second : data_dir / std::string(tasks::to_string(task));
  if (task == Task::kSegmentation && fs::exists(dir / model / "manifest.json")) return dir / model;
  return dir;
}

encoder::Pooling ExperimentConfig::pooling_for(const encoder::EncoderSpec& spec, Task task) const {
  if (auto it = pooling.find(spec.name + ":" + std::string(tasks::to_string(task))); it != pooling.end()) {
    return encoder::pooling_from_string(it->second);
  }
  if (auto it = pooling.find(spec.name); it != pooling.end()) return encoder::pooling_from_string(it->second);
  const bool pair = task != Task::kOrdering && task != Task::kSegmentation;
  return encoder::default_pooling(spec, pair);
}

train::TrainConfig ExperimentConfig::train_config(Task task) const {
  auto c = train::train_config_from_json(train, train::TrainConfig::for_task(task));
  c.seeds = seeds;
  c.validate();
  return c;
}

std::vector<int> ExperimentConfig::layers_for(const encoder::EncoderSpec& spec) const {
  if (!layers.empty()) return layers;
  std::vector<int> all;
  for (int l = 1; l <= spec.num_layers; ++l) all.push_back(l);
  return all;
}

std::vector<std::string> ExperimentConfig::model_names(const encoder::ModelRegistry& registry) const {
  return models.empty() ? registry.names() : models;
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  static const std::vector<std::string> known = {"registry", "model_roots", "models",  "tasks",
                                                 "layers",   "seeds",       "data_dir", "datasets",
                                                 "out",      "cache_dir",   "pooling", "decode_mode",
                                                 "context_pooling", "train", "subsample"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ValidationError(fmt::format("experiment config: unknown field '{}'", k));
    }
  }
  ExperimentConfig c;
  try {
    c.registry = resolve(j.value("registry", std::string()), base);
    for (const auto& r : j.value("model_roots", std::vector<std::string>{})) c.model_roots.push_back(resolve(r, base));
    c.models = j.value("models", c.models);
    for (const auto& t : j.value("tasks", std::vector<std::string>{})) c.tasks.push_back(tasks::task_from_string(t));
    c.layers = j.value("layers", c.layers);
    c.seeds = j.value("seeds", c.seeds);
    c.data_dir = resolve(j.value("data_dir", c.data_dir.string()), base);
    for (const auto& [t, p] : j.value("datasets", std::map<std::string, std::string>{})) {
      c.datasets[tasks::task_from_string(t)] = resolve(p, base);
    }
    c.out = resolve(j.value("out", c.out.string()), base);
    c.cache_dir = resolve(j.value("cache_dir", std::string()), base);
    c.pooling = j.value("pooling", c.pooling);
    for (const auto& [k, v] : c.pooling) encoder::pooling_from_string(v);
    c.decode_mode = probe::decode_mode_from_string(j.value("decode_mode", std::string("assignment")));
    c.context_pooling = train::context_pooling_from_string(j.value("context_pooling", std::string("whole")));
    c.train = j.value("train", json::object());
    c.subsample = j.value("subsample", c.subsample);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("experiment config: {}", e.what()));
  }
  for (const auto& [k, v] : c.subsample) {
    if (k != "train" && k != "dev" && k != "test") throw ValidationError(fmt::format("subsample: unknown split '{}'", k));
  }
  if (c.seeds.empty()) throw ValidationError("experiment config: seeds must not be empty");
  train::train_config_from_json(c.train);
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["registry"] = c.registry.string();
  j["model_roots"] = json::array();
  for (const auto& r : c.model_roots) j["model_roots"].push_back(r.string());
  j["models"] = c.models;
  j["tasks"] = json::array();
  for (auto t : c.tasks) j["tasks"].push_back(std::string(tasks::to_string(t)));
  j["layers"] = c.layers;
  j["seeds"] = c.seeds;
  j["data_dir"] = c.data_dir.string();
  j["datasets"] = json::object();
  for (const auto& [t, p] : c.datasets) j["datasets"][std::string(tasks::to_string(t))] = p.string();
  j["out"] = c.out.string();
  j["cache_dir"] = c.cache_dir.string();
  j["pooling"] = c.pooling;
  j["decode_mode"] = std::string(probe::to_string(c.decode_mode));
  j["context_pooling"] = std::string(train::to_string(c.context_pooling));
  j["train"] = c.train;
  j["subsample"] = c.subsample;
  return j;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return config_from_json(io::read_json(path), path.parent_path());
}

fs::path default_registry_path() {
  if (const char* env = std::getenv("DISCPROBE_REGISTRY"); env != nullptr && *env != '\0') return env;
  return fs::path(DISCPROBE_SOURCE_DIR) / "data" / "models" / "registry.json";
}

encoder::ModelRegistry open_registry(const ExperimentConfig& c) {
  auto roots = c.model_roots;
  for (auto& r : encoder::model_roots_from_env()) roots.push_back(std::move(r));
  return encoder::ModelRegistry::load(c.registry.empty() ? default_registry_path() : c.registry, roots);
}

void validate_config(const ExperimentConfig& c, encoder::ModelRegistry& registry) {
  for (const auto& name : c.model_names(registry)) {
    const auto& spec = registry.spec(name);
    for (int l : c.layers_for(spec)) spec.check_layer(l);
    for (Task t : c.effective_tasks()) {
      const fs::path dir = c.dataset_dir(t, name);
      if (!fs::exists(dir / "manifest.json")) {
        throw ValidationError(fmt::format("dataset for task '{}' not found at '{}' (run `discprobe build` first)",
                                          tasks::to_string(t), dir.string()));
      }
    }
  }
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& raw : io::split(s, ',')) {
    const std::string part(io::trim(raw));
    if (part.empty()) continue;
    try {
      const auto dash = part.find('-', 1);
      if (dash == std::string::npos) {
        out.push_back(std::stoi(part));
      } else {
        const int lo = std::stoi(part.substr(0, dash));
        const int hi = std::stoi(part.substr(dash + 1));
        if (hi < lo) throw ValidationError(fmt::format("empty range '{}'", part));
        for (int v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const std::logic_error&) {
      throw ValidationError(fmt::format("not an integer list: '{}'", s));
    }
  }
  return out;
}

}  // namespace discprobe::experiment
