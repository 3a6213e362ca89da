#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "discprobe/encoder/tokenizer.hpp"

namespace discprobe::encoder {

namespace detail {
struct Pipeline;
}

// Interpreter for the `tokenizer.json` format written by HF tokenizers.
//
// Supported components:
//   normalizers     BertNormalizer, Lowercase, NFC/NFD/NFKC/NFKD, StripAccents,
//                   Replace, Strip, Prepend, Precompiled, Sequence
//   pre-tokenizers  BertPreTokenizer, Whitespace, WhitespaceSplit, Metaspace,
//                   ByteLevel, Sequence
//   models          WordPiece, BPE, Unigram
//   post-processors TemplateProcessing, BertProcessing, RobertaProcessing,
//                   ByteLevel, Sequence
// Token offsets are UTF-8 byte spans into the original text.
class HfTokenizer : public Tokenizer {
 public:
  explicit HfTokenizer(const nlohmann::json& spec, std::string name = "hf");
  ~HfTokenizer() override;
  HfTokenizer(HfTokenizer&&) noexcept;
  HfTokenizer& operator=(HfTokenizer&&) noexcept;

  static HfTokenizer from_file(const std::filesystem::path& tokenizer_json);

  // WordPiece tokenizer equivalent to BertTokenizerFast built from a plain
  // vocab.txt (one token per line, id = line index).
  static HfTokenizer from_wordpiece_vocab(const std::filesystem::path& vocab_txt, bool lowercase);

  std::vector<Token> tokenize(std::string_view text) const override;
  Encoding build_single(const std::vector<Token>& a) const override;
  Encoding build_pair(const std::vector<Token>& a, const std::vector<Token>& b) const override;
  int cls_position(bool pair) const override;
  std::string name() const override { return name_; }

  std::optional<int> token_to_id(const std::string& token) const;
  std::size_t vocab_size() const;

 private:
  std::unique_ptr<detail::Pipeline> p_;
  std::string name_;
};

// tokenizer.json when present, otherwise vocab.txt (lowercasing taken from
// tokenizer_config.json, default on). Throws IoError when neither exists.
std::unique_ptr<HfTokenizer> load_tokenizer(const std::filesystem::path& checkpoint_dir);

}  // namespace discprobe::encoder
