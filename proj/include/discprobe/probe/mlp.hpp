#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace discprobe::probe {

using Matrix = Eigen::MatrixXf;
using Vector = Eigen::VectorXf;

enum class HeadKind { kPairMlp, kRankLabeler, kTokenTagger };

std::string_view to_string(HeadKind k);
HeadKind head_kind_from_string(std::string_view s);

inline constexpr int kMaxRank = 7;

struct ProbeConfig {
  int input_dim = 0;
  int hidden_dim = 0;  // 0 means "same as input_dim"
  int num_classes = 2;
  HeadKind kind = HeadKind::kPairMlp;
  std::uint64_t seed = 1;

  int effective_hidden() const { return hidden_dim > 0 ? hidden_dim : input_dim; }
  // Throws ValidationError: input_dim < 1, num_classes < 2, a rank labeler
  // without 7 classes, or a tagger without 2.
  void validate() const;
};

// input -> tanh hidden layer -> log-softmax over classes.
class Mlp {
 public:
  // Xavier-uniform weights drawn from the config seed, zero biases.
  explicit Mlp(const ProbeConfig& config);

  const ProbeConfig& config() const { return config_; }

  // Rows of `x` are instances. Returns log-probabilities, one row each.
  Matrix forward(const Matrix& x) const;
  Vector forward(const Vector& x) const;

  // Mean negative log-likelihood over the rows of `x` and its gradient with
  // respect to every parameter (same order and shapes as parameters()).
  double loss_and_gradient(const Matrix& x, const std::vector<int>& labels,
                           std::vector<Matrix>& grads) const;

  // W1 (hidden x in), b1 (hidden x 1), W2 (classes x hidden), b2 (classes x 1).
  std::vector<Matrix>& parameters() { return params_; }
  const std::vector<Matrix>& parameters() const { return params_; }

  void set_zero();

  // Binary float32 blob at `path` plus a JSON config sidecar at path + ".json".
  void save(const std::filesystem::path& path) const;
  static Mlp load(const std::filesystem::path& path);

 private:
  void check_width(Eigen::Index cols) const;

  ProbeConfig config_;
  std::vector<Matrix> params_;
};

}  // namespace discprobe::probe
