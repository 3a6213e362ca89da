// Encoder-decoder models (BART, T5). Probe layers are the encoder layers
// followed by the decoder layers; the decoder reads the input sequence shifted
// right by one position behind the model's decoder start token.

#include <cmath>
#include <optional>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "nn.hpp"

namespace discprobe::encoder::nn {

namespace {

std::vector<int> shift_right(const std::vector<int>& ids, int start) {
  std::vector<int> out{start};
  out.insert(out.end(), ids.begin(), ids.end() - 1);
  return out;
}

struct AttnProj {
  Linear q, k, v, o;

  static AttnProj load(const Weights& w, const char* q, const char* k, const char* v, const char* o, bool bias) {
    return {Linear::torch(w, q, bias), Linear::torch(w, k, bias), Linear::torch(w, v, bias),
            Linear::torch(w, o, bias)};
  }
};

class Bart : public TransformerModel {
  struct Block {
    AttnProj self_attn;
    LayerNorm self_ln;
    AttnProj cross_attn;  // decoder only
    LayerNorm cross_ln;
    Linear fc1, fc2;
    LayerNorm final_ln;
  };

 public:
  Bart(const nlohmann::json& c, TensorMap tensors) {
    checksum_ = tensor_checksum(tensors);
    d_ = cfg_int(c, "d_model", 768);
    enc_layers_ = cfg_int(c, "encoder_layers", 6);
    dec_layers_ = cfg_int(c, "decoder_layers", 6);
    enc_heads_ = cfg_int(c, "encoder_attention_heads", 12);
    dec_heads_ = cfg_int(c, "decoder_attention_heads", 12);
    max_pos_ = cfg_int(c, "max_position_embeddings", 1024);
    start_ = cfg_int(c, "decoder_start_token_id", 2);
    embed_scale_ = c.value("scale_embedding", false) ? std::sqrt(static_cast<float>(d_)) : 1.0f;
    act_ = act_from_string(c.value("activation_function", std::string("gelu")));
    const std::string prefix = detect_prefix(tensors, "encoder.layers.0.fc1.weight", {"", "model."});
    const Weights w(tensors, prefix);
    embed_ = w.has("shared.weight") ? w.matrix("shared.weight") : w.matrix("encoder.embed_tokens.weight");
    constexpr float eps = 1e-5f;
    for (const char* side : {"encoder", "decoder"}) {
      const Weights s = w.sub(side);
      Stack st;
      st.pos = s.matrix("embed_positions.weight");
      st.ln_emb = LayerNorm::load(s, "layernorm_embedding", eps);
      if (s.has("layer_norm.weight")) st.final = LayerNorm::load(s, "layer_norm", eps);
      const bool dec = std::string(side) == "decoder";
      for (int i = 0; i < (dec ? dec_layers_ : enc_layers_); ++i) {
        const Weights b = s.sub(fmt::format("layers.{}", i));
        Block blk;
        blk.self_attn = AttnProj::load(b, "self_attn.q_proj", "self_attn.k_proj", "self_attn.v_proj",
                                       "self_attn.out_proj", true);
        blk.self_ln = LayerNorm::load(b, "self_attn_layer_norm", eps);
        if (dec) {
          blk.cross_attn = AttnProj::load(b, "encoder_attn.q_proj", "encoder_attn.k_proj", "encoder_attn.v_proj",
                                          "encoder_attn.out_proj", true);
          blk.cross_ln = LayerNorm::load(b, "encoder_attn_layer_norm", eps);
        }
        blk.fc1 = Linear::torch(b, "fc1");
        blk.fc2 = Linear::torch(b, "fc2");
        blk.final_ln = LayerNorm::load(b, "final_layer_norm", eps);
        st.blocks.push_back(std::move(blk));
      }
      (dec ? decoder_ : encoder_) = std::move(st);
    }
  }

  Arch arch() const override { return Arch::kEncDec; }
  int num_layers() const override { return enc_layers_ + dec_layers_; }
  int encoder_layers() const override { return enc_layers_; }
  int hidden_dim() const override { return d_; }
  int max_positions() const override { return max_pos_; }
  std::string model_type() const override { return "bart"; }

  std::vector<States> forward(const std::vector<int>& ids, const std::vector<int>&) const override {
    const auto n = static_cast<Eigen::Index>(ids.size());
    if (n == 0) throw ValidationError("empty input");
    if (n > max_pos_) throw ValidationError(fmt::format("input of {} tokens exceeds the model maximum {}", n, max_pos_));
    std::vector<States> out;
    Mat enc = run(encoder_, ids, enc_heads_, nullptr, out);
    run(decoder_, shift_right(ids, start_), dec_heads_, &enc, out);
    return out;
  }

 private:
  struct Stack {
    Mat pos;
    LayerNorm ln_emb;
    std::optional<LayerNorm> final;
    std::vector<Block> blocks;
  };

  Mat run(const Stack& st, const std::vector<int>& ids, int heads, const Mat* memory, std::vector<States>& out) const {
    const auto n = static_cast<Eigen::Index>(ids.size());
    Mat x = gather_rows(embed_, ids, "token") * embed_scale_ + st.pos.middleRows(2, n);
    x = st.ln_emb(x);
    const float scale = 1.0f / std::sqrt(static_cast<float>(d_ / heads));
    for (std::size_t l = 0; l < st.blocks.size(); ++l) {
      const auto& b = st.blocks[l];
      const auto& sa = b.self_attn;
      x = b.self_ln(x + sa.o(attention(sa.q(x), sa.k(x), sa.v(x), heads, scale, memory != nullptr)));
      if (memory != nullptr) {
        const auto& ca = b.cross_attn;
        x = b.cross_ln(x + ca.o(attention(ca.q(x), ca.k(*memory), ca.v(*memory), heads, scale, false)));
      }
      Mat h = b.fc1(x);
      activate(h, act_);
      x = b.final_ln(x + b.fc2(h));
      if (l + 1 == st.blocks.size() && st.final) x = (*st.final)(x);
      out.push_back(x);
    }
    return x;
  }

  int d_ = 0, enc_layers_ = 0, dec_layers_ = 0, enc_heads_ = 0, dec_heads_ = 0, max_pos_ = 0, start_ = 2;
  float embed_scale_ = 1.0f;
  Act act_ = Act::kGelu;
  Mat embed_;
  Stack encoder_, decoder_;
};

int relative_bucket(int rel, bool bidirectional, int buckets, int max_distance) {
  int ret = 0;
  if (bidirectional) {
    buckets /= 2;
    if (rel > 0) ret += buckets;
    rel = std::abs(rel);
  } else {
    rel = -std::min(rel, 0);
  }
  const int max_exact = buckets / 2;
  if (rel < max_exact) return ret + rel;
  const float ratio = std::log(static_cast<float>(rel) / static_cast<float>(max_exact)) /
                      static_cast<float>(std::log(static_cast<double>(max_distance) / max_exact)) *
                      static_cast<float>(buckets - max_exact);
  return ret + std::min(max_exact + static_cast<int>(ratio), buckets - 1);
}

class T5 : public TransformerModel {
  struct Block {
    RmsNorm self_ln;
    AttnProj self_attn;
    RmsNorm cross_ln;
    AttnProj cross_attn;
    RmsNorm ff_ln;
    Linear wi, wi_gate, wo;
  };
  struct Stack {
    Mat rel_bias;  // buckets x heads
    std::vector<Block> blocks;
    RmsNorm final;
  };

 public:
  T5(const nlohmann::json& c, TensorMap tensors) {
    checksum_ = tensor_checksum(tensors);
    d_ = cfg_int(c, "d_model", 512);
    heads_ = cfg_int(c, "num_heads", 8);
    enc_layers_ = cfg_int(c, "num_layers", 6);
    dec_layers_ = cfg_int(c, "num_decoder_layers", enc_layers_);
    buckets_ = cfg_int(c, "relative_attention_num_buckets", 32);
    max_distance_ = cfg_int(c, "relative_attention_max_distance", 128);
    start_ = cfg_int(c, "decoder_start_token_id", 0);
    const float eps = cfg_float(c, "layer_norm_epsilon", 1e-6f);
    std::string proj = c.value("feed_forward_proj", std::string("relu"));
    gated_ = proj.starts_with("gated-");
    if (gated_) proj = proj.substr(6);
    act_ = act_from_string(gated_ && proj == "gelu" ? "gelu_new" : proj);
    const Weights w(tensors, "");
    embed_ = w.has("shared.weight") ? w.matrix("shared.weight") : w.matrix("encoder.embed_tokens.weight");
    for (const char* side : {"encoder", "decoder"}) {
      const bool dec = std::string(side) == "decoder";
      const Weights s = w.sub(side);
      Stack st;
      st.rel_bias = s.matrix("block.0.layer.0.SelfAttention.relative_attention_bias.weight");
      for (int i = 0; i < (dec ? dec_layers_ : enc_layers_); ++i) {
        const Weights b = s.sub(fmt::format("block.{}", i));
        Block blk;
        blk.self_ln = {b.vector("layer.0.layer_norm.weight"), eps};
        blk.self_attn = AttnProj::load(b, "layer.0.SelfAttention.q", "layer.0.SelfAttention.k",
                                       "layer.0.SelfAttention.v", "layer.0.SelfAttention.o", false);
        const std::string ff = dec ? "layer.2." : "layer.1.";
        if (dec) {
          blk.cross_ln = {b.vector("layer.1.layer_norm.weight"), eps};
          blk.cross_attn = AttnProj::load(b, "layer.1.EncDecAttention.q", "layer.1.EncDecAttention.k",
                                          "layer.1.EncDecAttention.v", "layer.1.EncDecAttention.o", false);
        }
        blk.ff_ln = {b.vector(ff + "layer_norm.weight"), eps};
        if (gated_) {
          blk.wi = Linear::torch(b, ff + "DenseReluDense.wi_0", false);
          blk.wi_gate = Linear::torch(b, ff + "DenseReluDense.wi_1", false);
        } else {
          blk.wi = Linear::torch(b, ff + "DenseReluDense.wi", false);
        }
        blk.wo = Linear::torch(b, ff + "DenseReluDense.wo", false);
        st.blocks.push_back(std::move(blk));
      }
      st.final = {s.vector("final_layer_norm.weight"), eps};
      (dec ? decoder_ : encoder_) = std::move(st);
    }
  }

  Arch arch() const override { return Arch::kEncDec; }
  int num_layers() const override { return enc_layers_ + dec_layers_; }
  int encoder_layers() const override { return enc_layers_; }
  int hidden_dim() const override { return d_; }
  int max_positions() const override { return 0; }
  std::string model_type() const override { return "t5"; }

  std::vector<States> forward(const std::vector<int>& ids, const std::vector<int>&) const override {
    if (ids.empty()) throw ValidationError("empty input");
    std::vector<States> out;
    const Mat enc = run(encoder_, ids, nullptr, out);
    run(decoder_, shift_right(ids, start_), &enc, out);
    return out;
  }

 private:
  std::vector<Mat> position_bias(const Stack& st, Eigen::Index n, bool bidirectional) const {
    std::vector<Mat> bias(static_cast<std::size_t>(heads_), Mat(n, n));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const int bucket = relative_bucket(static_cast<int>(j - i), bidirectional, buckets_, max_distance_);
        for (int h = 0; h < heads_; ++h) bias[static_cast<std::size_t>(h)](i, j) = st.rel_bias(bucket, h);
      }
    }
    return bias;
  }

  Mat run(const Stack& st, const std::vector<int>& ids, const Mat* memory, std::vector<States>& out) const {
    Mat x = gather_rows(embed_, ids, "token");
    const bool dec = memory != nullptr;
    const auto bias = position_bias(st, x.rows(), !dec);
    for (std::size_t l = 0; l < st.blocks.size(); ++l) {
      const auto& b = st.blocks[l];
      const Mat h = b.self_ln(x);
      x += b.self_attn.o(attention(b.self_attn.q(h), b.self_attn.k(h), b.self_attn.v(h), heads_, 1.0f, dec, bias));
      if (dec) {
        const Mat c = b.cross_ln(x);
        const auto& ca = b.cross_attn;
        x += ca.o(attention(ca.q(c), ca.k(*memory), ca.v(*memory), heads_, 1.0f, false));
      }
      Mat f = b.wi(b.ff_ln(x));
      activate(f, act_);
      if (gated_) f = f.cwiseProduct(b.wi_gate(b.ff_ln(x)));
      x += b.wo(f);
      out.push_back(l + 1 == st.blocks.size() ? st.final(x) : x);
    }
    return st.final(x);
  }

  int d_ = 0, heads_ = 0, enc_layers_ = 0, dec_layers_ = 0, buckets_ = 32, max_distance_ = 128, start_ = 0;
  bool gated_ = false;
  Act act_ = Act::kRelu;
  Mat embed_;
  Stack encoder_, decoder_;
};

}  // namespace

std::unique_ptr<TransformerModel> make_bart(const nlohmann::json& config, TensorMap tensors) {
  return std::make_unique<Bart>(config, std::move(tensors));
}

std::unique_ptr<TransformerModel> make_t5(const nlohmann::json& config, TensorMap tensors) {
  return std::make_unique<T5>(config, std::move(tensors));
}

}  // namespace discprobe::encoder::nn
