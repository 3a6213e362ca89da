#include "discprobe/encoder/encoder.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"

namespace discprobe::encoder {

std::string_view to_string(Pooling p) { return p == Pooling::kCls ? "cls" : "mean"; }

Pooling pooling_from_string(std::string_view s) {
  if (s == "cls") return Pooling::kCls;
  if (s == "mean") return Pooling::kMean;
  throw ValidationError(fmt::format("unknown pooling '{}' (expected cls or mean)", s));
}

Pooling default_pooling(const EncoderSpec& spec, bool pair_task) {
  const bool cls_family = spec.model_type == "bert" || spec.model_type == "albert";
  return cls_family && pair_task ? Pooling::kCls : Pooling::kMean;
}

Eigen::VectorXf LayerRepresentation::concatenated() const {
  Eigen::Index n = 0;
  for (const auto& v : vectors) n += v.size();
  Eigen::VectorXf out(n);
  Eigen::Index at = 0;
  for (const auto& v : vectors) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  return out;
}

Eigen::VectorXf mean_pool(const Eigen::MatrixXf& states, int begin, int end) {
  if (begin < 0 || end > states.rows() || begin >= end) {
    throw ValidationError(fmt::format("cannot mean-pool empty or invalid span [{}, {})", begin, end));
  }
  return states.middleRows(begin, end - begin).colwise().mean().transpose();
}

Encoder::Encoder(EncoderSpec spec) : spec_(std::move(spec)) {
  tokenizer_ = load_tokenizer(spec_.checkpoint);
  model_ = load_transformer(spec_.checkpoint);
  if (model_->num_layers() != spec_.num_layers || model_->hidden_dim() != spec_.hidden_dim) {
    throw ValidationError(fmt::format("checkpoint for '{}' does not match its registered spec", spec_.name));
  }
}

void Encoder::fit_to_model(std::vector<std::vector<Token>>& tokens, const std::vector<SegmentBudget>& budgets) const {
  const std::size_t max = static_cast<std::size_t>(model_->max_positions());
  if (max == 0) return;
  std::size_t total = tokenizer_->num_special_tokens(tokens.size() == 2);
  for (const auto& t : tokens) total += t.size();
  if (total <= max) return;
  std::size_t excess = total - max;
  // Segments kept from the end (contexts) give up their leading tokens first.
  for (std::size_t s = 0; s < tokens.size() && excess > 0; ++s) {
    if (budgets[s].keep != Keep::kLast) continue;
    const std::size_t cut = std::min(excess, tokens[s].size() - 1);
    tokens[s].erase(tokens[s].begin(), tokens[s].begin() + static_cast<std::ptrdiff_t>(cut));
    excess -= cut;
  }
  while (excess > 0) {
    auto longest = std::max_element(tokens.begin(), tokens.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    if (longest->size() <= 1) return;
    longest->pop_back();
    --excess;
  }
}

PreparedInput Encoder::prepare(const std::vector<std::string>& segments,
                               const std::vector<SegmentBudget>& budgets) const {
  if (segments.empty() || segments.size() > 2) {
    throw ValidationError(fmt::format("encode takes one or two segments, got {}", segments.size()));
  }
  if (!budgets.empty() && budgets.size() != segments.size()) {
    throw ValidationError("one truncation budget per segment is required");
  }
  PreparedInput in;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    auto toks = tokenizer_->tokenize(segments[s]);
    if (toks.empty()) throw ValidationError(fmt::format("segment {} produced no tokens", s));
    if (!budgets.empty() && budgets[s].max_tokens > 0 && toks.size() > budgets[s].max_tokens) {
      const auto keep = static_cast<std::ptrdiff_t>(budgets[s].max_tokens);
      if (budgets[s].keep == Keep::kFirst) {
        toks.erase(toks.begin() + keep, toks.end());
      } else {
        toks.erase(toks.begin(), toks.end() - keep);
      }
    }
    in.tokens.push_back(std::move(toks));
  }
  if (!budgets.empty()) fit_to_model(in.tokens, budgets);
  in.encoding = in.tokens.size() == 1 ? tokenizer_->build_single(in.tokens[0])
                                      : tokenizer_->build_pair(in.tokens[0], in.tokens[1]);
  for (std::size_t s = 0; s < in.tokens.size(); ++s) {
    int begin = -1, end = -1;
    for (std::size_t p = 0; p < in.encoding.sequence_ids.size(); ++p) {
      if (in.encoding.sequence_ids[p] != static_cast<int>(s)) continue;
      if (begin < 0) begin = static_cast<int>(p);
      end = static_cast<int>(p) + 1;
    }
    in.spans.emplace_back(begin, end);
  }
  return in;
}

std::vector<States> Encoder::layer_states(const PreparedInput& input) const {
  auto states = model_->forward(input.encoding.ids, input.encoding.type_ids);
  if (spec_.arch == Arch::kEncDec) {
    for (std::size_t l = static_cast<std::size_t>(spec_.encoder_layers); l < states.size(); ++l) {
      States& s = states[l];
      const Eigen::Index n = s.rows();
      // Decoder row p+1 has read input token p; the final input token is never
      // read, so its row keeps the last decoder state.
      if (n > 1) s.topRows(n - 1) = s.bottomRows(n - 1).eval();
    }
  }
  return states;
}

void Encoder::check_pooling(Pooling pooling, bool pair) const {
  if (pooling == Pooling::kCls && tokenizer_->cls_position(pair) < 0) {
    throw ValidationError(fmt::format("model '{}' has no classification token; use mean pooling", spec_.name));
  }
}

Eigen::VectorXf Encoder::pool(const States& states, const PreparedInput& input, int segment, Pooling pooling) const {
  if (pooling == Pooling::kCls) {
    const int pos = tokenizer_->cls_position(input.spans.size() == 2);
    if (pos < 0) {
      throw ValidationError(fmt::format("model '{}' has no classification token; use mean pooling", spec_.name));
    }
    return states.row(pos).transpose();
  }
  const auto [b, e] = input.spans.at(static_cast<std::size_t>(segment));
  return mean_pool(states, b, e);
}

std::vector<LayerRepresentation> Encoder::encode_all(const std::vector<std::string>& segments, Pooling pooling,
                                                     const std::vector<SegmentBudget>& budgets) const {
  check_pooling(pooling, segments.size() == 2);
  const auto input = prepare(segments, budgets);
  const auto states = layer_states(input);
  std::vector<LayerRepresentation> out;
  for (std::size_t l = 0; l < states.size(); ++l) {
    LayerRepresentation r{static_cast<int>(l) + 1, pooling, {}};
    if (pooling == Pooling::kCls) {
      r.vectors.push_back(pool(states[l], input, 0, pooling));
    } else {
      for (std::size_t s = 0; s < segments.size(); ++s) r.vectors.push_back(pool(states[l], input, static_cast<int>(s), pooling));
    }
    out.push_back(std::move(r));
  }
  return out;
}

LayerRepresentation Encoder::encode(const std::vector<std::string>& segments, int layer, Pooling pooling,
                                    const std::vector<SegmentBudget>& budgets) const {
  spec_.check_layer(layer);
  return encode_all(segments, pooling, budgets).at(static_cast<std::size_t>(layer) - 1);
}

std::vector<TokenRepresentation> Encoder::encode_tokens_all(std::string_view text, std::size_t max_tokens) const {
  const auto toks = tokenizer_->tokenize(text);
  if (toks.empty()) throw ValidationError("text produced no tokens");
  const std::size_t total = toks.size() + tokenizer_->num_special_tokens(false);
  if (total > max_tokens) {
    throw ValidationError(fmt::format("text has {} tokens including specials; budget is {}", total, max_tokens));
  }
  PreparedInput in;
  in.tokens.push_back(toks);
  in.encoding = tokenizer_->build_single(toks);
  const auto states = layer_states(in);
  std::vector<int> rows;
  for (std::size_t p = 0; p < in.encoding.sequence_ids.size(); ++p) {
    if (in.encoding.sequence_ids[p] == 0) rows.push_back(static_cast<int>(p));
  }
  std::vector<TokenRepresentation> out;
  for (std::size_t l = 0; l < states.size(); ++l) {
    TokenRepresentation r;
    r.layer = static_cast<int>(l) + 1;
    r.vectors.resize(static_cast<Eigen::Index>(rows.size()), states[l].cols());
    for (std::size_t i = 0; i < rows.size(); ++i) r.vectors.row(static_cast<Eigen::Index>(i)) = states[l].row(rows[i]);
    for (const auto& t : toks) r.offsets.emplace_back(t.begin, t.end);
    out.push_back(std::move(r));
  }
  return out;
}

TokenRepresentation Encoder::encode_tokens(std::string_view text, int layer, std::size_t max_tokens) const {
  spec_.check_layer(layer);
  return encode_tokens_all(text, max_tokens).at(static_cast<std::size_t>(layer) - 1);
}

}  // namespace discprobe::encoder
