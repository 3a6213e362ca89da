#include "discprobe/train/trainer.hpp"

#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/common/rng.hpp"

namespace discprobe::train {

void TrainConfig::validate() const {
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) throw ValidationError("warmup_fraction must lie in (0, 1)");
  if (max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
  if (patience < 1 || patience > max_epochs) throw ValidationError("patience must lie in 1..max_epochs");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (max_grad_norm <= 0.0) throw ValidationError("max_grad_norm must be positive");
  if (seeds.empty()) throw ValidationError("at least one seed is required");
}

TrainConfig TrainConfig::for_task(tasks::Task task) {
  TrainConfig c;
  c.patience = task == tasks::Task::kOrdering || task == tasks::Task::kConnective ? 10 : 5;
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"adam_beta1", c.adam_beta1},   {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},   {"max_grad_norm", c.max_grad_norm}, {"max_epochs", c.max_epochs},
          {"warmup_fraction", c.warmup_fraction}, {"patience", c.patience}, {"batch_size", c.batch_size},
          {"hidden_dim", c.hidden_dim},       {"seeds", c.seeds}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.patience = j.value("patience", c.patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.seeds = j.value("seeds", c.seeds);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("train config: {}", e.what()));
  }
  c.validate();
  return c;
}

int warmup_steps(int total_steps, double warmup_fraction) {
  return static_cast<int>(std::ceil(warmup_fraction * total_steps - 1e-9));
}

double learning_rate_at(int step, int warmup, double base) {
  if (warmup <= 0 || step >= warmup) return base;
  return base * static_cast<double>(step) / warmup;
}

double clip_grad_norm(std::vector<probe::Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const auto scale = static_cast<float>(max_norm / (norm + 1e-6));
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

Adam::Adam(const std::vector<probe::Matrix>& params, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (const auto& p : params) {
    m_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  }
}

void Adam::step(std::vector<probe::Matrix>& params, const std::vector<probe::Matrix>& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::MatrixXd g = grads[i].cast<double>();
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const Eigen::MatrixXd update = (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + epsilon_);
    params[i] -= (lr * update).cast<float>();
  }
}

bool EarlyStopping::update(int epoch, double metric) {
  improved_ = best_epoch_ == 0 || metric > best_;
  if (improved_) {
    best_ = metric;
    best_epoch_ = epoch;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

namespace {

void check(const ProbeData& d, const char* what) {
  if (static_cast<std::size_t>(d.x.rows()) != d.layout.rows()) {
    throw ValidationError(fmt::format("{} split has {} feature rows for {} labels", what, d.x.rows(), d.layout.rows()));
  }
}

}  // namespace

TrainResult train_probe(const ProbeData& train, const ProbeData& dev, const TrainConfig& config, std::uint64_t seed,
                        const EvalOptions& eval) {
  config.validate();
  check(train, "train");
  check(dev, "dev");
  if (train.layout.rows() == 0) throw ValidationError("train split is empty");
  if (dev.layout.rows() == 0) throw ValidationError("dev split is empty");
  if (train.x.cols() != dev.x.cols()) throw ValidationError("train and dev feature widths differ");

  probe::ProbeConfig pc;
  pc.input_dim = static_cast<int>(train.x.cols());
  pc.hidden_dim = config.hidden_dim;
  pc.num_classes = train.layout.num_classes;
  pc.kind = head_for(train.layout.task);
  pc.seed = seed;
  probe::Mlp head(pc);

  const auto n = static_cast<std::size_t>(train.x.rows());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const int steps_per_epoch = static_cast<int>((n + batch - 1) / batch);
  const int warmup = warmup_steps(steps_per_epoch * config.max_epochs, config.warmup_fraction);

  Adam adam(head.parameters(), config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  EarlyStopping stopper(config.patience);
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{head, 0, 0, 0.0, {}};
  std::vector<probe::Matrix> grads;
  probe::Matrix xb;
  std::vector<int> yb;
  int step = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      xb.resize(static_cast<Eigen::Index>(end - start), train.x.cols());
      yb.assign(end - start, 0);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = train.x.row(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = train.layout.labels[order[i]];
      }
      const double loss = head.loss_and_gradient(xb, yb, grads);
      const double norm = clip_grad_norm(grads, config.max_grad_norm);
      if (!std::isfinite(loss) || !std::isfinite(norm)) {
        throw NumericalError(fmt::format("non-finite loss {} at epoch {} step {} (seed {}); check the input features",
                                         loss, epoch, step + 1, seed));
      }
      ++step;
      adam.step(head.parameters(), grads, learning_rate_at(step, warmup, config.learning_rate));
      loss_sum += loss * static_cast<double>(end - start);
    }
    const double dev_metric = evaluate(head, dev.x, dev.layout, eval).value;
    result.log.push_back({epoch, loss_sum / static_cast<double>(n), dev_metric});
    result.epochs = epoch;
    const bool stop = stopper.update(epoch, dev_metric);
    if (stopper.improved()) result.head = head;
    if (stop) break;
  }
  result.best_epoch = stopper.best_epoch();
  result.best_dev = stopper.best_metric();
  return result;
}

void write_training_log(const std::filesystem::path& csv, const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,dev_metric\n";
  for (const auto& e : log) out += fmt::format("{},{:.9g},{:.9g}\n", e.epoch, e.train_loss, e.dev_metric);
  if (!csv.parent_path().empty()) std::filesystem::create_directories(csv.parent_path());
  io::write_file_atomic(csv, out);
}

}  // namespace discprobe::train
