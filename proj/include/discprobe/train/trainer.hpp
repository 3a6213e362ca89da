#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "discprobe/probe/mlp.hpp"
#include "discprobe/tasks/instances.hpp"
#include "discprobe/train/dataset.hpp"
#include "discprobe/train/run_record.hpp"

namespace discprobe::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double max_grad_norm = 1.0;
  int max_epochs = 20;
  double warmup_fraction = 0.10;
  int patience = 5;
  int batch_size = 32;
  int hidden_dim = 0;  // probe hidden width; 0 = input width
  std::vector<int> seeds = {1, 2, 3};

  // Throws ValidationError unless 0 < warmup_fraction < 1, 1 <= patience <=
  // max_epochs, batch_size >= 1, learning_rate > 0 and seeds is non-empty.
  void validate() const;

  // Defaults with patience 10 for ordering and connective, 5 otherwise.
  static TrainConfig for_task(tasks::Task task);
};

nlohmann::json to_json(const TrainConfig& c);
// Missing fields keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

int warmup_steps(int total_steps, double warmup_fraction);

// Linear warmup from 0 to the base rate over `warmup` steps, then constant.
// `step` counts from 1.
double learning_rate_at(int step, int warmup, double base);

// Rescales every gradient so the global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(std::vector<probe::Matrix>& grads, double max_norm);

class Adam {
 public:
  Adam(const std::vector<probe::Matrix>& params, double beta1, double beta2, double epsilon);
  void step(std::vector<probe::Matrix>& params, const std::vector<probe::Matrix>& grads, double lr);

 private:
  double beta1_, beta2_, epsilon_;
  int t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

// Tracks the best dev metric; stops after `patience` epochs without a strict
// improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool update(int epoch, double metric);
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_ = 0.0;
  int since_best_ = 0;
  bool improved_ = false;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
};

struct TrainResult {
  probe::Mlp head;
  int best_epoch = 0;
  int epochs = 0;
  double best_dev = 0.0;
  std::vector<EpochLog> log;
};

struct ProbeData {
  const probe::Matrix& x;
  const ProbeLayout& layout;
};

// Mini-batch training of a fresh head (initialized from `seed`) on frozen
// features; rows are reshuffled every epoch. Returns the head of the best dev
// epoch. Throws ValidationError on a feature/label count mismatch or an empty
// dev split and NumericalError on a non-finite loss.
TrainResult train_probe(const ProbeData& train, const ProbeData& dev, const TrainConfig& config, std::uint64_t seed,
                        const EvalOptions& eval = {});

void write_training_log(const std::filesystem::path& csv, const std::vector<EpochLog>& log);

}  // namespace discprobe::train
