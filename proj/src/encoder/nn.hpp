#pragma once

// Building blocks shared by the transformer implementations. Internal to the
// encoder module.

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "discprobe/encoder/safetensors.hpp"
#include "discprobe/encoder/transformer.hpp"

namespace discprobe::encoder::nn {

using Mat = Eigen::MatrixXf;
using RowVec = Eigen::RowVectorXf;

// Prefix-scoped view over a checkpoint's tensors.
class Weights {
 public:
  Weights(const TensorMap& tensors, std::string prefix) : t_(&tensors), prefix_(std::move(prefix)) {}

  Weights sub(const std::string& p) const { return Weights(*t_, prefix_ + p + "."); }
  bool has(const std::string& name) const;
  // LayerNorm parameters saved as gamma/beta are accepted for weight/bias.
  const Tensor& get(const std::string& name) const;
  Mat matrix(const std::string& name) const;
  RowVec vector(const std::string& name) const;

 private:
  const Tensor* find(const std::string& name) const;

  const TensorMap* t_;
  std::string prefix_;
};

struct Linear {
  Mat wt;  // in x out
  RowVec b;

  Mat operator()(const Mat& x) const;
  // torch.nn.Linear stores [out, in]; GPT-2's Conv1D stores [in, out].
  static Linear torch(const Weights& w, const std::string& name, bool bias = true);
  static Linear conv1d(const Weights& w, const std::string& name);
};

struct LayerNorm {
  RowVec g, b;
  float eps = 1e-12f;
  Mat operator()(const Mat& x) const;
  static LayerNorm load(const Weights& w, const std::string& name, float eps);
};

// Scale-only RMS normalization (no mean subtraction, no bias).
struct RmsNorm {
  RowVec g;
  float eps = 1e-6f;
  Mat operator()(const Mat& x) const;
};

enum class Act { kGelu, kGeluTanh, kRelu, kSilu };
Act act_from_string(const std::string& name);
void activate(Mat& x, Act a);

// Multi-head scaled dot-product attention over already projected q, k, v.
// `bias` holds one (n_q x n_k) additive matrix per head, or is empty.
Mat attention(const Mat& q, const Mat& k, const Mat& v, int heads, float scale, bool causal,
              const std::vector<Mat>& bias = {});

Mat gather_rows(const Mat& table, const std::vector<int>& ids, const char* what);

int cfg_int(const nlohmann::json& c, const char* key, int fallback);
float cfg_float(const nlohmann::json& c, const char* key, float fallback);

// Returns the first candidate prefix under which `probe` exists.
std::string detect_prefix(const TensorMap& t, const std::string& probe, const std::vector<std::string>& prefixes);

std::unique_ptr<TransformerModel> make_bert_family(const nlohmann::json& config, TensorMap tensors);
std::unique_ptr<TransformerModel> make_gpt2(const nlohmann::json& config, TensorMap tensors);
std::unique_ptr<TransformerModel> make_bart(const nlohmann::json& config, TensorMap tensors);
std::unique_ptr<TransformerModel> make_t5(const nlohmann::json& config, TensorMap tensors);

}  // namespace discprobe::encoder::nn
