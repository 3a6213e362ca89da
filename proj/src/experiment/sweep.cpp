#include "discprobe/experiment/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <set>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/encoder/safetensors.hpp"
#include "discprobe/metrics/aggregate.hpp"
#include "discprobe/train/run_record.hpp"

namespace discprobe::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using tasks::Task;

std::string safe_name(const std::string& model) {
  std::string s = model;
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

fs::path records_path(const fs::path& out, const std::string& model, Task task) {
  return out / "records" / fmt::format("{}__{}.jsonl", safe_name(model), tasks::to_string(task));
}

namespace {

template <typename T>
std::vector<T> pick(const tasks::DatasetSplit<T>& s, const std::string& split) {
  if (split == "train") return s.train;
  if (split == "dev") return s.dev;
  if (split == "test") return s.test;
  throw ValidationError(fmt::format("unknown split '{}'", split));
}

template <typename T>
void cap(std::vector<T>& v, const ExperimentConfig& c, const std::string& split) {
  if (auto it = c.subsample.find(split); it != c.subsample.end() && v.size() > it->second) v.resize(it->second);
}

}  // namespace

train::InstanceList load_split_instances(const ExperimentConfig& c, Task task, const std::string& model,
                                         const std::string& split, std::vector<std::string>* inventory) {
  const fs::path dir = c.dataset_dir(task, model);
  auto finish = [&](auto data) -> train::InstanceList {
    if (inventory != nullptr) *inventory = data.label_inventory;
    auto v = pick(data, split);
    cap(v, c, split);
    return v;
  };
  if (task == Task::kOrdering) return finish(tasks::read_ordering_split(dir));
  if (task == Task::kSegmentation) return finish(tasks::read_segmentation_split(dir));
  return finish(tasks::read_pair_split(dir, task));
}

namespace {

struct ModelState {
  std::optional<encoder::Encoder> enc;
  std::string checksum_before;
};

struct Cell {
  int layer;
  int seed;
  bool operator<(const Cell& o) const { return std::tie(layer, seed) < std::tie(o.layer, o.seed); }
};

json failure(const std::string& model, Task task, std::optional<int> layer, std::optional<int> seed,
             const std::string& what) {
  json f{{"model", model}, {"task", std::string(tasks::to_string(task))}, {"error", what}};
  if (layer) f["layer"] = *layer;
  if (seed) f["seed"] = *seed;
  return f;
}

void write_manifest(const ExperimentConfig& c, const json& models, const SweepSummary& s, const std::string& status) {
  json m{{"status", status},
         {"config", to_json(c)},
         {"models", models},
         {"cells", {{"planned", s.planned}, {"completed", s.completed}, {"skipped", s.skipped}, {"failed", s.failed}}},
         {"failures", s.failures}};
  io::write_file_atomic(c.out / "manifest.json", m.dump(2) + "\n");
}

class Sweep {
 public:
  explicit Sweep(const ExperimentConfig& c) : c_(c), registry_(open_registry(c)), cache_(c.effective_cache_dir()) {}

  SweepSummary run() {
    validate_config(c_, registry_);
    fs::create_directories(c_.out / "records");
    fs::create_directories(c_.out / "logs");
    fs::create_directories(c_.out / "instances");
    const auto names = c_.model_names(registry_);
    for (const auto& name : names) {
      const auto& spec = registry_.spec(name);
      s_.planned += c_.layers_for(spec).size() * c_.seeds.size() * c_.effective_tasks().size();
      models_[name] = {{"arch", std::string(encoder::to_string(spec.arch))},
                       {"num_layers", spec.num_layers},
                       {"encoder_layers", spec.encoder_layers},
                       {"hidden_dim", spec.hidden_dim},
                       {"checkpoint", spec.checkpoint.string()}};
    }
    write_manifest(c_, models_, s_, "running");
    for (const auto& name : names) run_model(name);
    write_manifest(c_, models_, s_, s_.failed == 0 ? "complete" : "complete_with_failures");
    spdlog::info("sweep: {} planned, {} completed, {} skipped, {} failed", s_.planned, s_.completed, s_.skipped,
                 s_.failed);
    return s_;
  }

 private:
  void run_model(const std::string& name) {
    const auto& spec = registry_.spec(name);
    ModelState state;
    for (Task task : c_.effective_tasks()) {
      try {
        run_task(spec, task, state);
      } catch (const std::exception& e) {
        fail(failure(name, task, std::nullopt, std::nullopt, e.what()), remaining_);
      }
    }
    if (state.enc) {
      // Re-hash the checkpoint on disk; probing must never have modified it.
      const std::string after = encoder::tensor_checksum(encoder::load_checkpoint_tensors(spec.checkpoint));
      models_[name]["weights_checksum_before"] = state.checksum_before;
      models_[name]["weights_checksum_after"] = after;
      if (after != state.checksum_before) spdlog::error("checkpoint of '{}' changed during the sweep", name);
    }
  }

  void fail(const json& f, std::size_t cells) {
    spdlog::error("sweep failure {}", f.dump());
    s_.failures.push_back(f);
    s_.failed += cells;
  }

  void run_task(const encoder::EncoderSpec& spec, Task task, ModelState& state) {
    const auto layers = c_.layers_for(spec);
    remaining_ = layers.size() * c_.seeds.size();
    const fs::path rec_file = records_path(c_.out, spec.name, task);
    std::set<Cell> done;
    if (fs::exists(rec_file)) {
      for (const auto& r : train::read_run_records(rec_file)) done.insert({r.layer, r.seed});
    }
    std::vector<Cell> todo;
    for (int l : layers) {
      for (int seed : c_.seeds) {
        if (done.count({l, seed})) {
          ++s_.skipped;
        } else {
          todo.push_back({l, seed});
        }
      }
    }
    remaining_ = todo.size();
    if (todo.empty()) return;

    std::vector<std::string> inventory;
    const auto train_set = load_split_instances(c_, task, spec.name, "train", &inventory);
    const auto dev_set = load_split_instances(c_, task, spec.name, "dev");
    const auto test_set = load_split_instances(c_, task, spec.name, "test");
    const int classes = static_cast<int>(inventory.size());
    const auto train_layout = train::make_layout(task, train_set, classes);
    const auto dev_layout = train::make_layout(task, dev_set, classes);
    const auto test_layout = train::make_layout(task, test_set, classes);
    const auto cfg = c_.train_config(task);
    const train::FeatureOptions fopts{c_.pooling_for(spec, task), c_.context_pooling};
    const train::EvalOptions eopts{c_.decode_mode};

    if (!state.enc) {
      state.enc.emplace(spec);
      state.checksum_before = state.enc->weights_checksum();
    }
    const auto& enc = *state.enc;

    for (int layer : layers) {
      std::vector<Cell> cells;
      for (const auto& cell : todo) {
        if (cell.layer == layer) cells.push_back(cell);
      }
      if (cells.empty()) continue;
      std::optional<probe::Matrix> xtr, xdv, xte;
      try {
        xtr = encoder::FeatureMatrix(train::cached_features(enc, cache_, task, "train", train_set, fopts, layer));
        xdv = encoder::FeatureMatrix(train::cached_features(enc, cache_, task, "dev", dev_set, fopts, layer));
        xte = encoder::FeatureMatrix(train::cached_features(enc, cache_, task, "test", test_set, fopts, layer));
      } catch (const std::exception& e) {
        remaining_ -= cells.size();
        fail(failure(spec.name, task, layer, std::nullopt, e.what()), cells.size());
        continue;
      }
      for (const auto& cell : cells) {
        --remaining_;
        try {
          run_cell(spec, task, cell, *xtr, *xdv, *xte, train_layout, dev_layout, test_layout, cfg, eopts, rec_file);
          ++s_.completed;
        } catch (const std::exception& e) {
          fail(failure(spec.name, task, cell.layer, cell.seed, e.what()), 1);
        }
      }
    }
    remaining_ = 0;
  }

  void run_cell(const encoder::EncoderSpec& spec, Task task, const Cell& cell, const probe::Matrix& xtr,
                const probe::Matrix& xdv, const probe::Matrix& xte, const train::ProbeLayout& ltr,
                const train::ProbeLayout& ldv, const train::ProbeLayout& lte, const train::TrainConfig& cfg,
                const train::EvalOptions& eopts, const fs::path& rec_file) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = train::train_probe({xtr, ltr}, {xdv, ldv}, cfg, static_cast<std::uint64_t>(cell.seed), eopts);
    const auto eval = train::evaluate(result.head, xte, lte, eopts);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string stem = fmt::format("{}__{}__L{:02d}__s{}", safe_name(spec.name), tasks::to_string(task), cell.layer, cell.seed);
    train::write_training_log(c_.out / "logs" / (stem + ".csv"), result.log);
    if (task == Task::kOrdering) {
      std::string lines;
      for (std::size_t i = 0; i < eval.instance_rho.size(); ++i) {
        metrics::OrderingInstanceResult r{spec.name, cell.layer, cell.seed, eval.instance_n[i], eval.instance_rho[i]};
        lines += metrics::to_json(r).dump() + "\n";
      }
      io::write_file_atomic(c_.out / "instances" / (stem + ".jsonl"), lines);
    }
    train::RunRecord rec;
    rec.model = spec.name;
    rec.layer = cell.layer;
    rec.task = std::string(tasks::to_string(task));
    rec.seed = cell.seed;
    rec.metric = std::string(metrics::to_string(eval.metric));
    rec.value = eval.value;
    rec.epochs = result.epochs;
    rec.wall_time_s = secs;
    rec.stack = spec.stack_of(cell.layer);
    train::append_run_record(rec_file, rec);
    spdlog::info("{} {} layer {} seed {}: {} = {:.4f} ({} epochs)", spec.name, rec.task, cell.layer, cell.seed,
                 rec.metric, rec.value, rec.epochs);
  }

  const ExperimentConfig& c_;
  encoder::ModelRegistry registry_;
  encoder::FeatureCache cache_;
  SweepSummary s_;
  json models_ = json::object();
  std::size_t remaining_ = 0;
};

}  // namespace

SweepSummary cmd_sweep(const ExperimentConfig& config) { return Sweep(config).run(); }

}  // namespace discprobe::experiment
