#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace discprobe::encoder {

// One subword with its UTF-8 byte span in the text it came from.
struct Token {
  int id = 0;
  std::string piece;
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

// Model input after the special-token template has been applied.
struct Encoding {
  std::vector<int> ids;
  std::vector<int> type_ids;
  // -1 for template tokens, otherwise the index of the source sequence.
  std::vector<int> sequence_ids;

  std::size_t size() const { return ids.size(); }
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  // Subword tokens of `text` without special tokens.
  virtual std::vector<Token> tokenize(std::string_view text) const = 0;

  // Applies the model's template to one or two token sequences.
  virtual Encoding build_single(const std::vector<Token>& a) const = 0;
  virtual Encoding build_pair(const std::vector<Token>& a, const std::vector<Token>& b) const = 0;

  std::size_t num_special_tokens(bool pair) const;

  // Position of the classification token in a built encoding, or -1.
  virtual int cls_position(bool pair) const = 0;

  virtual std::string name() const = 0;
};

// Splits on Unicode whitespace; ids are running indices. Used when a dataset
// only needs token counts that do not depend on a model vocabulary.
class WhitespaceTokenizer : public Tokenizer {
 public:
  std::vector<Token> tokenize(std::string_view text) const override;
  Encoding build_single(const std::vector<Token>& a) const override;
  Encoding build_pair(const std::vector<Token>& a, const std::vector<Token>& b) const override;
  int cls_position(bool) const override { return -1; }
  std::string name() const override { return "whitespace"; }
};

}  // namespace discprobe::encoder
