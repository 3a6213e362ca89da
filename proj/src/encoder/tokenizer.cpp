#include "discprobe/encoder/tokenizer.hpp"

#include <algorithm>

namespace discprobe::encoder {

std::size_t Tokenizer::num_special_tokens(bool pair) const {
  const std::vector<Token> a{Token{0, "a", 0, 1}};
  const Encoding e = pair ? build_pair(a, a) : build_single(a);
  return static_cast<std::size_t>(std::count(e.sequence_ids.begin(), e.sequence_ids.end(), -1));
}

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::vector<Token> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      out.push_back(Token{static_cast<int>(out.size()), std::string(text.substr(start, i - start)), start, i});
    }
  }
  return out;
}

Encoding WhitespaceTokenizer::build_single(const std::vector<Token>& a) const {
  Encoding e;
  for (const auto& t : a) {
    e.ids.push_back(t.id);
    e.type_ids.push_back(0);
    e.sequence_ids.push_back(0);
  }
  return e;
}

Encoding WhitespaceTokenizer::build_pair(const std::vector<Token>& a, const std::vector<Token>& b) const {
  Encoding e = build_single(a);
  for (const auto& t : b) {
    e.ids.push_back(t.id);
    e.type_ids.push_back(1);
    e.sequence_ids.push_back(1);
  }
  return e;
}

}  // namespace discprobe::encoder
