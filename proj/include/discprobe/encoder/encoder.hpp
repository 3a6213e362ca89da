#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "discprobe/encoder/hf_tokenizer.hpp"
#include "discprobe/encoder/registry.hpp"
#include "discprobe/encoder/transformer.hpp"

namespace discprobe::encoder {

enum class Pooling { kCls, kMean };

std::string_view to_string(Pooling p);  // "cls", "mean"
Pooling pooling_from_string(std::string_view s);

// Classification-token pooling for BERT and ALBERT on pair tasks, mean
// pooling everywhere else.
Pooling default_pooling(const EncoderSpec& spec, bool pair_task);

enum class Keep { kFirst, kLast };

// Token budget for one segment; 0 means unbounded. kLast keeps the final
// `max_tokens` tokens (contexts), kFirst the leading ones.
struct SegmentBudget {
  std::size_t max_tokens = 0;
  Keep keep = Keep::kFirst;
};

// Model input plus where each segment's tokens landed in it.
struct PreparedInput {
  Encoding encoding;
  std::vector<std::pair<int, int>> spans;   // [begin, end) positions per segment
  std::vector<std::vector<Token>> tokens;   // kept tokens per segment
};

struct LayerRepresentation {
  int layer = 0;
  Pooling pooling = Pooling::kMean;
  std::vector<Eigen::VectorXf> vectors;  // CLS: one vector; MEAN: one per segment

  Eigen::VectorXf concatenated() const;
};

struct TokenRepresentation {
  int layer = 0;
  Eigen::MatrixXf vectors;                               // one row per subword token
  std::vector<std::pair<std::size_t, std::size_t>> offsets;  // byte span of each token
};

// Arithmetic mean of rows [begin, end).
Eigen::VectorXf mean_pool(const Eigen::MatrixXf& states, int begin, int end);

// Frozen encoder: tokenizer plus network, read-only after construction.
class Encoder {
 public:
  explicit Encoder(EncoderSpec spec);

  const EncoderSpec& spec() const { return spec_; }
  const Tokenizer& tokenizer() const { return *tokenizer_; }
  const std::string& weights_checksum() const { return model_->weights_checksum(); }

  // One or two segments; each is truncated to its budget before the model's
  // special-token template is applied. When budgets are given and the result
  // still exceeds the model's position limit, segments kept from the end lose
  // leading tokens first, then the longest segment loses trailing tokens.
  PreparedInput prepare(const std::vector<std::string>& segments, const std::vector<SegmentBudget>& budgets) const;

  // Hidden states for layers 1..num_layers with one row per input position.
  // Decoder layers of ENCDEC models are realigned so that row p holds the
  // state after the decoder has read input token p.
  std::vector<States> layer_states(const PreparedInput& input) const;

  // CLS ignores `segment`; MEAN averages the segment's token rows.
  Eigen::VectorXf pool(const States& states, const PreparedInput& input, int segment, Pooling pooling) const;

  LayerRepresentation encode(const std::vector<std::string>& segments, int layer, Pooling pooling,
                             const std::vector<SegmentBudget>& budgets = {}) const;
  std::vector<LayerRepresentation> encode_all(const std::vector<std::string>& segments, Pooling pooling,
                                              const std::vector<SegmentBudget>& budgets = {}) const;

  // Per-subword vectors of a single text (special tokens excluded). The text
  // must fit `max_tokens` including special tokens.
  TokenRepresentation encode_tokens(std::string_view text, int layer, std::size_t max_tokens = 512) const;
  std::vector<TokenRepresentation> encode_tokens_all(std::string_view text, std::size_t max_tokens = 512) const;

 private:
  void check_pooling(Pooling pooling, bool pair) const;
  void fit_to_model(std::vector<std::vector<Token>>& tokens, const std::vector<SegmentBudget>& budgets) const;

  EncoderSpec spec_;
  std::unique_ptr<HfTokenizer> tokenizer_;
  std::unique_ptr<TransformerModel> model_;
};

}  // namespace discprobe::encoder
