#include <cmath>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "nn.hpp"

namespace discprobe::encoder::nn {

namespace {

// GPT-2: causal pre-LN decoder; the last layer's output passes through ln_f.
class Gpt2 : public TransformerModel {
  struct Block {
    LayerNorm ln1, ln2;
    Linear qkv, proj, fc, fc_proj;
  };

 public:
  Gpt2(const nlohmann::json& c, TensorMap tensors) {
    checksum_ = tensor_checksum(tensors);
    hidden_ = cfg_int(c, "n_embd", 768);
    heads_ = cfg_int(c, "n_head", 12);
    layers_ = cfg_int(c, "n_layer", 12);
    max_pos_ = cfg_int(c, "n_positions", 1024);
    inverse_layer_scale_ = c.value("scale_attn_by_inverse_layer_idx", false);
    const float eps = cfg_float(c, "layer_norm_epsilon", 1e-5f);
    act_ = act_from_string(c.value("activation_function", std::string("gelu_new")));
    const Weights w(tensors, detect_prefix(tensors, "wte.weight", {"", "transformer."}));
    wte_ = w.matrix("wte.weight");
    wpe_ = w.matrix("wpe.weight");
    for (int i = 0; i < layers_; ++i) {
      const Weights b = w.sub(fmt::format("h.{}", i));
      blocks_.push_back({LayerNorm::load(b, "ln_1", eps), LayerNorm::load(b, "ln_2", eps),
                         Linear::conv1d(b, "attn.c_attn"), Linear::conv1d(b, "attn.c_proj"),
                         Linear::conv1d(b, "mlp.c_fc"), Linear::conv1d(b, "mlp.c_proj")});
    }
    ln_f_ = LayerNorm::load(w, "ln_f", eps);
  }

  Arch arch() const override { return Arch::kDec; }
  int num_layers() const override { return layers_; }
  int hidden_dim() const override { return hidden_; }
  int max_positions() const override { return max_pos_; }
  std::string model_type() const override { return "gpt2"; }

  std::vector<States> forward(const std::vector<int>& ids, const std::vector<int>&) const override {
    const auto n = static_cast<Eigen::Index>(ids.size());
    if (n == 0) throw ValidationError("empty input");
    if (n > max_pos_) throw ValidationError(fmt::format("input of {} tokens exceeds the model maximum {}", n, max_pos_));
    Mat x = gather_rows(wte_, ids, "token") + wpe_.topRows(n);
    std::vector<States> out;
    const float base_scale = 1.0f / std::sqrt(static_cast<float>(hidden_ / heads_));
    for (int l = 0; l < layers_; ++l) {
      const auto& b = blocks_[static_cast<std::size_t>(l)];
      const Mat qkv = b.qkv(b.ln1(x));
      const float scale = inverse_layer_scale_ ? base_scale / static_cast<float>(l + 1) : base_scale;
      x += b.proj(attention(qkv.leftCols(hidden_), qkv.middleCols(hidden_, hidden_), qkv.rightCols(hidden_), heads_,
                            scale, true));
      Mat h = b.fc(b.ln2(x));
      activate(h, act_);
      x += b.fc_proj(h);
      out.push_back(l + 1 == layers_ ? ln_f_(x) : x);
    }
    return out;
  }

 private:
  int hidden_ = 0, heads_ = 0, layers_ = 0, max_pos_ = 0;
  bool inverse_layer_scale_ = false;
  Act act_ = Act::kGeluTanh;
  Mat wte_, wpe_;
  std::vector<Block> blocks_;
  LayerNorm ln_f_;
};

}  // namespace

std::unique_ptr<TransformerModel> make_gpt2(const nlohmann::json& config, TensorMap tensors) {
  return std::make_unique<Gpt2>(config, std::move(tensors));
}

}  // namespace discprobe::encoder::nn
