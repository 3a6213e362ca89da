// BERT-style bidirectional encoders: BERT, RoBERTa, ELECTRA and ALBERT. All
// share post-LN blocks; they differ in position ids, embedding projection and
// (for ALBERT) cross-layer parameter sharing.

#include <cmath>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "nn.hpp"

namespace discprobe::encoder::nn {

namespace {

struct Block {
  Linear q, k, v, o;
  LayerNorm ln_attn;
  Linear ffn_in, ffn_out;
  LayerNorm ln_out;
};

class BertFamily : public TransformerModel {
 public:
  BertFamily(const nlohmann::json& c, TensorMap tensors) : type_(c.at("model_type").get<std::string>()) {
    checksum_ = tensor_checksum(tensors);
    hidden_ = cfg_int(c, "hidden_size", 768);
    heads_ = cfg_int(c, "num_attention_heads", 12);
    layers_ = cfg_int(c, "num_hidden_layers", 12);
    max_pos_ = cfg_int(c, "max_position_embeddings", 512);
    pad_id_ = cfg_int(c, "pad_token_id", 0);
    const float eps = cfg_float(c, "layer_norm_eps", 1e-12f);
    act_ = act_from_string(c.value("hidden_act", std::string("gelu")));
    roberta_positions_ = type_ == "roberta" || type_ == "xlm-roberta" || type_ == "camembert";
    if (hidden_ % heads_ != 0) throw ParseError("hidden_size is not divisible by num_attention_heads");

    const std::string prefix = detect_prefix(tensors, "embeddings.word_embeddings.weight",
                                             {"", type_ + ".", "bert.", "roberta.", "electra.", "albert."});
    const Weights w(tensors, prefix);
    const Weights emb = w.sub("embeddings");
    word_ = emb.matrix("word_embeddings.weight");
    pos_ = emb.matrix("position_embeddings.weight");
    if (emb.has("token_type_embeddings.weight")) type_emb_ = emb.matrix("token_type_embeddings.weight");
    emb_ln_ = LayerNorm::load(emb, "LayerNorm", eps);
    if (w.has("embeddings_project.weight")) project_ = Linear::torch(w, "embeddings_project");
    if (w.has("encoder.embedding_hidden_mapping_in.weight")) {
      project_ = Linear::torch(w, "encoder.embedding_hidden_mapping_in");
    }

    if (type_ == "albert") {
      const int groups = cfg_int(c, "num_hidden_groups", 1);
      const int inner = cfg_int(c, "inner_group_num", 1);
      for (int g = 0; g < groups; ++g) {
        std::vector<Block> group;
        for (int i = 0; i < inner; ++i) {
          group.push_back(load_albert_block(
              w.sub(fmt::format("encoder.albert_layer_groups.{}.albert_layers.{}", g, i)), eps));
        }
        groups_.push_back(std::move(group));
      }
      for (int i = 0; i < layers_; ++i) schedule_.push_back(i * groups / layers_);
    } else {
      std::vector<Block> blocks;
      for (int i = 0; i < layers_; ++i) {
        groups_.push_back({load_bert_block(w.sub(fmt::format("encoder.layer.{}", i)), eps)});
        schedule_.push_back(i);
      }
    }
  }

  Arch arch() const override { return Arch::kEnc; }
  int num_layers() const override { return layers_; }
  int hidden_dim() const override { return hidden_; }
  int max_positions() const override { return roberta_positions_ ? max_pos_ - pad_id_ - 1 : max_pos_; }
  std::string model_type() const override { return type_; }

  std::vector<States> forward(const std::vector<int>& ids, const std::vector<int>& type_ids) const override {
    const auto n = static_cast<int>(ids.size());
    if (n == 0) throw ValidationError("empty input");
    if (n > max_positions()) {
      throw ValidationError(fmt::format("input of {} tokens exceeds the model maximum {}", n, max_positions()));
    }
    Mat x = gather_rows(word_, ids, "token");
    const int pos0 = roberta_positions_ ? pad_id_ + 1 : 0;
    x += pos_.middleRows(pos0, n);
    if (type_emb_.size() > 0) {
      for (int i = 0; i < n; ++i) {
        const int t = i < static_cast<int>(type_ids.size()) && type_ids[i] < type_emb_.rows() ? type_ids[i] : 0;
        x.row(i) += type_emb_.row(t);
      }
    }
    x = emb_ln_(x);
    if (project_.wt.size() > 0) x = project_(x);
    std::vector<States> out;
    out.reserve(static_cast<std::size_t>(layers_));
    for (int g : schedule_) {
      for (const auto& block : groups_[static_cast<std::size_t>(g)]) x = apply(block, x);
      out.push_back(x);
    }
    return out;
  }

 private:
  static Block load_bert_block(const Weights& w, float eps) {
    Block b;
    b.q = Linear::torch(w, "attention.self.query");
    b.k = Linear::torch(w, "attention.self.key");
    b.v = Linear::torch(w, "attention.self.value");
    b.o = Linear::torch(w, "attention.output.dense");
    b.ln_attn = LayerNorm::load(w, "attention.output.LayerNorm", eps);
    b.ffn_in = Linear::torch(w, "intermediate.dense");
    b.ffn_out = Linear::torch(w, "output.dense");
    b.ln_out = LayerNorm::load(w, "output.LayerNorm", eps);
    return b;
  }

  static Block load_albert_block(const Weights& w, float eps) {
    Block b;
    b.q = Linear::torch(w, "attention.query");
    b.k = Linear::torch(w, "attention.key");
    b.v = Linear::torch(w, "attention.value");
    b.o = Linear::torch(w, "attention.dense");
    b.ln_attn = LayerNorm::load(w, "attention.LayerNorm", eps);
    b.ffn_in = Linear::torch(w, "ffn");
    b.ffn_out = Linear::torch(w, "ffn_output");
    b.ln_out = LayerNorm::load(w, "full_layer_layer_norm", eps);
    return b;
  }

  Mat apply(const Block& b, const Mat& x) const {
    const float scale = 1.0f / std::sqrt(static_cast<float>(hidden_ / heads_));
    Mat a = b.ln_attn(x + b.o(attention(b.q(x), b.k(x), b.v(x), heads_, scale, false)));
    Mat h = b.ffn_in(a);
    activate(h, act_);
    return b.ln_out(a + b.ffn_out(h));
  }

  std::string type_;
  int hidden_ = 0, heads_ = 0, layers_ = 0, max_pos_ = 0, pad_id_ = 0;
  Act act_ = Act::kGelu;
  bool roberta_positions_ = false;
  Mat word_, pos_, type_emb_;
  LayerNorm emb_ln_;
  Linear project_;
  std::vector<std::vector<Block>> groups_;
  std::vector<int> schedule_;  // group applied at each layer
};

}  // namespace

std::unique_ptr<TransformerModel> make_bert_family(const nlohmann::json& config, TensorMap tensors) {
  return std::make_unique<BertFamily>(config, std::move(tensors));
}

}  // namespace discprobe::encoder::nn
