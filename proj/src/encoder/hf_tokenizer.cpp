#include "discprobe/encoder/hf_tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <regex>
#include <unordered_map>
#include <variant>

#include <fmt/core.h>
#include <openssl/evp.h>
#include <unicode/brkiter.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::encoder {

using nlohmann::json;

namespace {

// One code point of the normalized text and the byte span of the original
// text it derives from.
struct NChar {
  std::string s;
  std::size_t b = 0;
  std::size_t e = 0;
};
using NStr = std::vector<NChar>;

std::string encode_cp(UChar32 cp) {
  if (cp < 0 || cp > 0x10FFFF || U_IS_SURROGATE(cp)) cp = 0xFFFD;
  char buf[4];
  int32_t i = 0;
  U8_APPEND_UNSAFE(buf, i, cp);
  return std::string(buf, static_cast<std::size_t>(i));
}

UChar32 decode_cp(const std::string& s) {
  int32_t i = 0;
  UChar32 c = 0;
  U8_NEXT(s.data(), i, static_cast<int32_t>(s.size()), c);
  return c < 0 ? 0xFFFD : c;
}

NStr from_text(std::string_view text, std::size_t base) {
  NStr out;
  int32_t i = 0;
  const auto n = static_cast<int32_t>(text.size());
  while (i < n) {
    const int32_t start = i;
    UChar32 c = 0;
    U8_NEXT(text.data(), i, n, c);
    NChar ch;
    ch.s = c < 0 ? encode_cp(0xFFFD) : std::string(text.substr(start, i - start));
    ch.b = base + start;
    ch.e = base + i;
    out.push_back(std::move(ch));
  }
  return out;
}

std::u32string to_u32(const icu::UnicodeString& u) {
  std::u32string out;
  for (int32_t i = 0; i < u.length();) {
    const UChar32 c = u.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

std::string concat(const NStr& s) {
  std::string out;
  for (const auto& c : s) out += c.s;
  return out;
}

// Replaces every character by f(cp); produced characters inherit the source span.
template <typename F>
void map_chars(NStr& s, F&& f) {
  NStr out;
  out.reserve(s.size());
  for (auto& ch : s) {
    for (char32_t c : f(decode_cp(ch.s))) out.push_back({encode_cp(static_cast<UChar32>(c)), ch.b, ch.e});
  }
  s = std::move(out);
}

bool is_whitespace(UChar32 c) { return u_hasBinaryProperty(c, UCHAR_WHITE_SPACE); }

bool in_gc(UChar32 c, uint32_t mask) { return (U_GET_GC_MASK(c) & mask) != 0; }

bool is_letter(UChar32 c) { return in_gc(c, U_GC_L_MASK); }
bool is_number(UChar32 c) { return in_gc(c, U_GC_N_MASK); }

bool is_word_char(UChar32 c) {
  return u_hasBinaryProperty(c, UCHAR_ALPHABETIC) || in_gc(c, U_GC_M_MASK | U_GC_ND_MASK | U_GC_PC_MASK) ||
         u_hasBinaryProperty(c, UCHAR_JOIN_CONTROL);
}

bool is_chinese_char(UChar32 c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x20000 && c <= 0x2A6DF) ||
         (c >= 0x2A700 && c <= 0x2B73F) || (c >= 0x2B740 && c <= 0x2B81F) || (c >= 0x2B920 && c <= 0x2CEAF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x2F800 && c <= 0x2FA1F);
}

std::u32string lowercase(UChar32 c) {
  icu::UnicodeString u(c);
  u.toLower(icu::Locale::getRoot());
  return to_u32(u);
}

const icu::Normalizer2& normalizer_instance(const std::string& form) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = nullptr;
  if (form == "NFC") n = icu::Normalizer2::getNFCInstance(status);
  if (form == "NFD") n = icu::Normalizer2::getNFDInstance(status);
  if (form == "NFKC") n = icu::Normalizer2::getNFKCInstance(status);
  if (form == "NFKD") n = icu::Normalizer2::getNFKDInstance(status);
  if (n == nullptr || U_FAILURE(status)) throw Error(fmt::format("ICU normalizer {} unavailable", form));
  return *n;
}

std::u32string normalize_u32(const icu::Normalizer2& n, const icu::UnicodeString& in) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = n.normalize(in, status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");
  return to_u32(out);
}

// Unicode normalization. Decomposition forms work per code point; composing
// forms work per normalization segment so combining sequences can fuse.
void unicode_normalize(NStr& s, const std::string& form) {
  const auto& n = normalizer_instance(form);
  if (form == "NFD" || form == "NFKD") {
    map_chars(s, [&](UChar32 c) { return normalize_u32(n, icu::UnicodeString(c)); });
    return;
  }
  NStr out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i + 1;
    while (j < s.size() && !n.hasBoundaryBefore(decode_cp(s[j].s))) ++j;
    icu::UnicodeString seg;
    for (std::size_t k = i; k < j; ++k) seg.append(decode_cp(s[k].s));
    for (char32_t c : normalize_u32(n, seg)) {
      out.push_back({encode_cp(static_cast<UChar32>(c)), s[i].b, s[j - 1].e});
    }
    i = j;
  }
  s = std::move(out);
}

void filter_chars(NStr& s, const std::function<bool(UChar32)>& drop) {
  std::erase_if(s, [&](const NChar& c) { return drop(decode_cp(c.s)); });
}

std::vector<std::uint8_t> base64_decode(const std::string& in) {
  std::vector<std::uint8_t> out(3 * in.size() / 4 + 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(in.data()),
                                static_cast<int>(in.size()));
  if (n < 0) throw ParseError("tokenizer.json: invalid base64 in precompiled_charsmap");
  std::size_t len = static_cast<std::size_t>(n);
  for (auto it = in.rbegin(); it != in.rend() && *it == '='; ++it) --len;
  out.resize(len);
  return out;
}

// SentencePiece precompiled character map: a darts-clone double array trie
// over UTF-8 byte strings whose values index NUL-terminated replacements.
class CharsMap {
 public:
  explicit CharsMap(const std::vector<std::uint8_t>& blob) {
    if (blob.size() < 4) throw ParseError("precompiled_charsmap too short");
    std::uint32_t trie_bytes = 0;
    std::memcpy(&trie_bytes, blob.data(), 4);
    if (4 + static_cast<std::size_t>(trie_bytes) > blob.size() || trie_bytes % 4 != 0) {
      throw ParseError("precompiled_charsmap: bad trie size");
    }
    units_.resize(trie_bytes / 4);
    std::memcpy(units_.data(), blob.data() + 4, trie_bytes);
    normalized_.assign(blob.begin() + 4 + trie_bytes, blob.end());
  }

  std::optional<std::string> transform(std::string_view chunk) const {
    if (units_.empty()) return std::nullopt;
    std::size_t pos = 0;
    std::uint32_t unit = units_[0];
    pos ^= offset(unit);
    for (unsigned char c : chunk) {
      if (c == 0) break;
      pos ^= c;
      if (pos >= units_.size()) return std::nullopt;
      unit = units_[pos];
      if (label(unit) != c) return std::nullopt;
      pos ^= offset(unit);
      if (has_leaf(unit)) {
        if (pos >= units_.size()) return std::nullopt;
        const std::size_t idx = value(units_[pos]);
        std::size_t end = idx;
        while (end < normalized_.size() && normalized_[end] != 0) ++end;
        return std::string(normalized_.begin() + idx, normalized_.begin() + end);
      }
    }
    return std::nullopt;
  }

 private:
  static bool has_leaf(std::uint32_t u) { return ((u >> 8) & 1) != 0; }
  static std::uint32_t value(std::uint32_t u) { return u & ((1u << 31) - 1); }
  static std::uint32_t label(std::uint32_t u) { return u & ((1u << 31) | 0xFF); }
  static std::size_t offset(std::uint32_t u) { return (u >> 10) << ((u & (1u << 9)) >> 6); }

  std::vector<std::uint32_t> units_;
  std::vector<char> normalized_;
};

void apply_charsmap(NStr& s, const CharsMap& map) {
  if (s.empty()) return;
  UErrorCode status = U_ZERO_ERROR;
  std::unique_ptr<icu::BreakIterator> it(icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(), status));
  if (U_FAILURE(status)) throw Error("ICU character break iterator unavailable");
  icu::UnicodeString text;
  std::vector<std::size_t> unit_to_char;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const UChar32 c = decode_cp(s[i].s);
    text.append(c);
    for (int k = 0; k < U16_LENGTH(c); ++k) unit_to_char.push_back(i);
  }
  unit_to_char.push_back(s.size());
  it->setText(text);
  NStr out;
  auto emit = [&](std::string_view repl, std::size_t b, std::size_t e) {
    for (auto& ch : from_text(repl, 0)) out.push_back({ch.s, b, e});
  };
  for (int32_t start = it->first(), end = it->next(); end != icu::BreakIterator::DONE; start = end, end = it->next()) {
    const std::size_t c0 = unit_to_char[start], c1 = unit_to_char[end];
    std::string grapheme;
    for (std::size_t k = c0; k < c1; ++k) grapheme += s[k].s;
    if (grapheme.size() < 6) {
      if (auto r = map.transform(grapheme)) {
        emit(*r, s[c0].b, s[c1 - 1].e);
        continue;
      }
    }
    for (std::size_t k = c0; k < c1; ++k) {
      if (auto r = map.transform(s[k].s)) {
        emit(*r, s[k].b, s[k].e);
      } else {
        out.push_back(s[k]);
      }
    }
  }
  s = std::move(out);
}

// Regex or literal replacement; replacement characters take the span of the match.
void replace_pattern(NStr& s, const json& pattern, const std::string& content) {
  const std::string text = concat(s);
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // byte ranges in `text`
  if (pattern.contains("String")) {
    const auto lit = pattern["String"].get<std::string>();
    if (lit.empty()) return;
    for (std::size_t pos = text.find(lit); pos != std::string::npos; pos = text.find(lit, pos + lit.size())) {
      matches.emplace_back(pos, pos + lit.size());
    }
  } else if (pattern.contains("Regex")) {
    const std::regex re(pattern["Regex"].get<std::string>());
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
      if (it->length() == 0) continue;
      const auto p = static_cast<std::size_t>(it->position());
      matches.emplace_back(p, p + static_cast<std::size_t>(it->length()));
    }
  } else {
    throw ParseError("tokenizer.json: Replace pattern must be String or Regex");
  }
  if (matches.empty()) return;
  NStr out;
  std::size_t byte = 0, mi = 0, i = 0;
  while (i < s.size()) {
    if (mi < matches.size() && byte == matches[mi].first) {
      std::size_t j = i, jb = byte;
      while (jb < matches[mi].second) jb += s[j++].s.size();
      for (auto& ch : from_text(content, 0)) out.push_back({ch.s, s[i].b, s[j - 1].e});
      i = j;
      byte = jb;
      ++mi;
      continue;
    }
    byte += s[i].s.size();
    out.push_back(s[i++]);
  }
  s = std::move(out);
}

using NormFn = std::function<void(NStr&)>;

NormFn make_normalizer(const json& j) {
  if (j.is_null()) return {};
  const auto type = j.at("type").get<std::string>();
  if (type == "Sequence") {
    std::vector<NormFn> parts;
    for (const auto& n : j.at("normalizers")) parts.push_back(make_normalizer(n));
    return [parts](NStr& s) {
      for (const auto& p : parts) {
        if (p) p(s);
      }
    };
  }
  if (type == "BertNormalizer") {
    const bool clean = j.value("clean_text", true);
    const bool chinese = j.value("handle_chinese_chars", true);
    const bool lower = j.value("lowercase", true);
    const bool strip = j.contains("strip_accents") && !j["strip_accents"].is_null() ? j["strip_accents"].get<bool>()
                                                                                      : lower;
    return [=](NStr& s) {
      if (clean) {
        filter_chars(s, [](UChar32 c) {
          if (c == '\t' || c == '\n' || c == '\r') return false;
          return c == 0 || c == 0xFFFD || in_gc(c, U_GC_C_MASK);
        });
        map_chars(s, [](UChar32 c) {
          const bool ws = c == '\t' || c == '\n' || c == '\r' || is_whitespace(c);
          return std::u32string(1, ws ? U' ' : static_cast<char32_t>(c));
        });
      }
      if (chinese) {
        map_chars(s, [](UChar32 c) {
          return is_chinese_char(c) ? std::u32string{U' ', static_cast<char32_t>(c), U' '}
                                    : std::u32string(1, static_cast<char32_t>(c));
        });
      }
      if (strip) {
        unicode_normalize(s, "NFD");
        filter_chars(s, [](UChar32 c) { return in_gc(c, U_GC_MN_MASK); });
      }
      if (lower) map_chars(s, lowercase);
    };
  }
  if (type == "Lowercase") return [](NStr& s) { map_chars(s, lowercase); };
  if (type == "NFC" || type == "NFD" || type == "NFKC" || type == "NFKD") {
    return [type](NStr& s) { unicode_normalize(s, type); };
  }
  if (type == "StripAccents") {
    return [](NStr& s) { filter_chars(s, [](UChar32 c) { return in_gc(c, U_GC_M_MASK); }); };
  }
  if (type == "Replace") {
    const json pattern = j.at("pattern");
    const auto content = j.at("content").get<std::string>();
    return [pattern, content](NStr& s) { replace_pattern(s, pattern, content); };
  }
  if (type == "Strip") {
    const bool left = j.value("strip_left", true), right = j.value("strip_right", true);
    return [=](NStr& s) {
      while (right && !s.empty() && is_whitespace(decode_cp(s.back().s))) s.pop_back();
      std::size_t k = 0;
      while (left && k < s.size() && is_whitespace(decode_cp(s[k].s))) ++k;
      s.erase(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k));
    };
  }
  if (type == "Prepend") {
    const auto prefix = j.at("prepend").get<std::string>();
    return [prefix](NStr& s) {
      if (s.empty()) return;
      NStr pre;
      for (auto& ch : from_text(prefix, 0)) pre.push_back({ch.s, s.front().b, s.front().e});
      s.insert(s.begin(), pre.begin(), pre.end());
    };
  }
  if (type == "Precompiled") {
    const auto b64 = j.value("precompiled_charsmap", std::string());
    if (b64.empty()) return {};
    auto map = std::make_shared<CharsMap>(base64_decode(b64));
    return [map](NStr& s) { apply_charsmap(s, *map); };
  }
  throw ParseError(fmt::format("tokenizer.json: unsupported normalizer '{}'", type));
}

// ---------------------------------------------------------------------------
// Pre-tokenizers

using PreFn = std::function<std::vector<NStr>(std::vector<NStr>)>;

template <typename F>
std::vector<NStr> for_each_split(std::vector<NStr> in, F&& f) {
  std::vector<NStr> out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    for (auto& piece : f(std::move(in[i]), i)) {
      if (!piece.empty()) out.push_back(std::move(piece));
    }
  }
  return out;
}

std::vector<NStr> split_whitespace(NStr s, bool isolate_punct) {
  std::vector<NStr> out;
  NStr cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (auto& ch : s) {
    const UChar32 c = decode_cp(ch.s);
    if (is_whitespace(c)) {
      flush();
    } else if (isolate_punct && (u_ispunct(c) || (c < 128 && std::ispunct(static_cast<int>(c))))) {
      flush();
      out.push_back({ch});
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return out;
}

// \w+|[^\w\s]+
std::vector<NStr> split_word_punct(NStr s) {
  std::vector<NStr> out;
  NStr cur;
  int cur_kind = 0;  // 1 word, 2 other
  for (auto& ch : s) {
    const UChar32 c = decode_cp(ch.s);
    const int kind = is_whitespace(c) ? 0 : (is_word_char(c) ? 1 : 2);
    if (kind != cur_kind && !cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
    cur_kind = kind;
    if (kind != 0) cur.push_back(ch);
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// 's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
std::vector<NStr> split_gpt2(const NStr& s) {
  std::vector<UChar32> cp;
  cp.reserve(s.size());
  for (const auto& ch : s) cp.push_back(decode_cp(ch.s));
  const std::size_t n = cp.size();
  auto other = [&](UChar32 c) { return !is_whitespace(c) && !is_letter(c) && !is_number(c); };
  auto run = [&](std::size_t i, auto pred) {
    while (i < n && pred(cp[i])) ++i;
    return i;
  };
  std::vector<NStr> out;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    if (cp[i] == '\'' && i + 1 < n) {
      const UChar32 a = cp[i + 1];
      const UChar32 b = i + 2 < n ? cp[i + 2] : 0;
      if (a == 's' || a == 't' || a == 'm' || a == 'd') {
        j = i + 2;
      } else if ((a == 'r' && b == 'e') || (a == 'v' && b == 'e') || (a == 'l' && b == 'l')) {
        j = i + 3;
      }
    }
    if (j == i) {
      const std::size_t k = (cp[i] == ' ' && i + 1 < n) ? i + 1 : i;
      if (is_letter(cp[k])) {
        j = run(k, is_letter);
      } else if (is_number(cp[k])) {
        j = run(k, is_number);
      } else if (other(cp[k])) {
        j = run(k, other);
      }
    }
    if (j == i) {
      const std::size_t end = run(i, is_whitespace);
      if (end == n || end - i == 1) {
        j = end == n ? end : i + 1;
      } else {
        j = end - 1;
      }
    }
    out.emplace_back(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(j));
    i = j;
  }
  return out;
}

const std::array<std::string, 256>& byte_chars() {
  static const std::array<std::string, 256> table = [] {
    std::array<std::string, 256> t;
    std::vector<bool> direct(256, false);
    for (int b = '!'; b <= '~'; ++b) direct[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
    int extra = 0;
    for (int b = 0; b < 256; ++b) t[b] = encode_cp(direct[b] ? b : 256 + extra++);
    return t;
  }();
  return table;
}

NStr to_byte_level(const NStr& s) {
  const auto& table = byte_chars();
  NStr out;
  for (const auto& ch : s) {
    for (unsigned char byte : ch.s) out.push_back({table[byte], ch.b, ch.e});
  }
  return out;
}

PreFn make_pre_tokenizer(const json& j) {
  if (j.is_null()) return {};
  const auto type = j.at("type").get<std::string>();
  if (type == "Sequence") {
    std::vector<PreFn> parts;
    for (const auto& p : j.at("pretokenizers")) parts.push_back(make_pre_tokenizer(p));
    return [parts](std::vector<NStr> splits) {
      for (const auto& p : parts) {
        if (p) splits = p(std::move(splits));
      }
      return splits;
    };
  }
  if (type == "BertPreTokenizer") {
    return [](std::vector<NStr> in) {
      return for_each_split(std::move(in), [](NStr s, std::size_t) { return split_whitespace(std::move(s), true); });
    };
  }
  if (type == "WhitespaceSplit") {
    return [](std::vector<NStr> in) {
      return for_each_split(std::move(in), [](NStr s, std::size_t) { return split_whitespace(std::move(s), false); });
    };
  }
  if (type == "Whitespace") {
    return [](std::vector<NStr> in) {
      return for_each_split(std::move(in), [](NStr s, std::size_t) { return split_word_punct(std::move(s)); });
    };
  }
  if (type == "Metaspace") {
    const std::string rep = j.value("replacement", std::string("▁"));
    std::string scheme = j.value("prepend_scheme", std::string());
    if (scheme.empty()) scheme = j.value("add_prefix_space", true) ? "always" : "never";
    const bool split = j.value("split", true);
    return [=](std::vector<NStr> in) {
      return for_each_split(std::move(in), [&](NStr s, std::size_t) {
        for (auto& ch : s) {
          if (ch.s == " ") ch.s = rep;
        }
        const bool starts = !s.empty() && s.front().s == rep;
        const bool prepend = !starts && !s.empty() &&
                             (scheme == "always" || (scheme == "first" && s.front().b == 0));
        if (prepend) s.insert(s.begin(), NChar{rep, s.front().b, s.front().e});
        std::vector<NStr> out;
        if (!split) {
          out.push_back(std::move(s));
          return out;
        }
        for (auto& ch : s) {
          if (ch.s == rep || out.empty()) out.emplace_back();
          out.back().push_back(ch);
        }
        return out;
      });
    };
  }
  if (type == "ByteLevel") {
    const bool prefix = j.value("add_prefix_space", false);
    const bool use_regex = j.value("use_regex", true);
    return [=](std::vector<NStr> in) {
      return for_each_split(std::move(in), [&](NStr s, std::size_t) {
        if (prefix && !s.empty() && s.front().s != " ") s.insert(s.begin(), NChar{" ", s.front().b, s.front().b});
        std::vector<NStr> parts = use_regex ? split_gpt2(s) : std::vector<NStr>{s};
        for (auto& p : parts) p = to_byte_level(p);
        return parts;
      });
    };
  }
  throw ParseError(fmt::format("tokenizer.json: unsupported pre_tokenizer '{}'", type));
}

// ---------------------------------------------------------------------------
// Models

struct Model {
  virtual ~Model() = default;
  virtual void tokenize(const NStr& word, std::vector<Token>& out) const = 0;
  std::unordered_map<std::string, int> vocab;
};

Token make_token(int id, std::string piece, const NStr& w, std::size_t i, std::size_t j) {
  return Token{id, std::move(piece), w[i].b, w[j - 1].e};
}

class WordPieceModel : public Model {
 public:
  explicit WordPieceModel(const json& j) {
    for (const auto& [tok, id] : j.at("vocab").items()) vocab.emplace(tok, id.get<int>());
    unk_ = j.value("unk_token", std::string("[UNK]"));
    prefix_ = j.value("continuing_subword_prefix", std::string("##"));
    max_chars_ = j.value("max_input_chars_per_word", 100);
    if (!vocab.count(unk_)) throw ParseError(fmt::format("WordPiece vocab lacks unk token '{}'", unk_));
  }

  void tokenize(const NStr& w, std::vector<Token>& out) const override {
    if (static_cast<int>(w.size()) > max_chars_) {
      out.push_back(make_token(vocab.at(unk_), unk_, w, 0, w.size()));
      return;
    }
    std::vector<Token> pieces;
    std::size_t start = 0;
    while (start < w.size()) {
      std::size_t end = w.size();
      std::optional<Token> found;
      while (start < end) {
        std::string sub = start > 0 ? prefix_ : std::string();
        for (std::size_t k = start; k < end; ++k) sub += w[k].s;
        if (auto it = vocab.find(sub); it != vocab.end()) {
          found = make_token(it->second, sub, w, start, end);
          break;
        }
        --end;
      }
      if (!found) {
        out.push_back(make_token(vocab.at(unk_), unk_, w, 0, w.size()));
        return;
      }
      pieces.push_back(*found);
      start = end;
    }
    out.insert(out.end(), pieces.begin(), pieces.end());
  }

 private:
  std::string unk_;
  std::string prefix_;
  int max_chars_ = 100;
};

class BpeModel : public Model {
 public:
  explicit BpeModel(const json& j) {
    for (const auto& [tok, id] : j.at("vocab").items()) vocab.emplace(tok, id.get<int>());
    int rank = 0;
    for (const auto& m : j.at("merges")) {
      std::string a, b;
      if (m.is_string()) {
        const auto s = m.get<std::string>();
        const auto sp = s.find(' ');
        if (sp == std::string::npos) throw ParseError(fmt::format("BPE merge '{}' lacks a space", s));
        a = s.substr(0, sp);
        b = s.substr(sp + 1);
      } else {
        a = m.at(0).get<std::string>();
        b = m.at(1).get<std::string>();
      }
      ranks_.emplace(a + '\0' + b, rank++);
    }
    if (j.contains("unk_token") && !j["unk_token"].is_null()) unk_ = j["unk_token"].get<std::string>();
    prefix_ = j.value("continuing_subword_prefix", std::string());
    if (j.contains("continuing_subword_prefix") && j["continuing_subword_prefix"].is_null()) prefix_.clear();
    suffix_ = j.contains("end_of_word_suffix") && j["end_of_word_suffix"].is_string()
                  ? j["end_of_word_suffix"].get<std::string>()
                  : std::string();
    ignore_merges_ = j.value("ignore_merges", false);
  }

  void tokenize(const NStr& w, std::vector<Token>& out) const override {
    if (ignore_merges_) {
      if (auto it = vocab.find(concat(w)); it != vocab.end()) {
        out.push_back(make_token(it->second, it->first, w, 0, w.size()));
        return;
      }
    }
    struct Sym {
      std::string text;
      std::size_t i, j;
    };
    std::vector<Sym> syms;
    for (std::size_t k = 0; k < w.size(); ++k) {
      std::string t = w[k].s;
      if (k > 0) t = prefix_ + t;
      if (k + 1 == w.size()) t += suffix_;
      syms.push_back({t, k, k + 1});
    }
    while (syms.size() > 1) {
      int best = std::numeric_limits<int>::max();
      std::size_t at = 0;
      for (std::size_t k = 0; k + 1 < syms.size(); ++k) {
        if (auto it = ranks_.find(syms[k].text + '\0' + syms[k + 1].text); it != ranks_.end() && it->second < best) {
          best = it->second;
          at = k;
        }
      }
      if (best == std::numeric_limits<int>::max()) break;
      std::string merged = syms[at].text;
      std::string right = syms[at + 1].text;
      if (!prefix_.empty() && right.starts_with(prefix_)) right.erase(0, prefix_.size());
      merged += right;
      syms[at] = {merged, syms[at].i, syms[at + 1].j};
      syms.erase(syms.begin() + static_cast<std::ptrdiff_t>(at) + 1);
    }
    for (const auto& s : syms) {
      if (auto it = vocab.find(s.text); it != vocab.end()) {
        out.push_back(make_token(it->second, s.text, w, s.i, s.j));
      } else if (unk_ && vocab.count(*unk_)) {
        out.push_back(make_token(vocab.at(*unk_), *unk_, w, s.i, s.j));
      }
    }
  }

 private:
  std::unordered_map<std::string, int> ranks_;
  std::optional<std::string> unk_;
  std::string prefix_;
  std::string suffix_;
  bool ignore_merges_ = false;
};

class UnigramModel : public Model {
 public:
  explicit UnigramModel(const json& j) {
    const auto& v = j.at("vocab");
    double min_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto piece = v[i].at(0).get<std::string>();
      const double score = v[i].at(1).get<double>();
      vocab.emplace(piece, static_cast<int>(i));
      scores_.push_back(score);
      pieces_.push_back(piece);
      min_score = std::min(min_score, score);
      max_len_ = std::max(max_len_, piece.size());
    }
    if (j.contains("unk_id") && !j["unk_id"].is_null()) unk_id_ = j["unk_id"].get<int>();
    unk_score_ = min_score - 10.0;
  }

  void tokenize(const NStr& w, std::vector<Token>& out) const override {
    const std::size_t n = w.size();
    struct Node {
      int id = -1;
      double score = 0.0;
      std::optional<std::size_t> start;
    };
    std::vector<Node> best(n + 1);
    best[0].start = 0;
    for (std::size_t s = 0; s < n; ++s) {
      const double base = best[s].score;
      bool single = false;
      std::string sub;
      for (std::size_t e = s + 1; e <= n; ++e) {
        sub += w[e - 1].s;
        if (sub.size() > max_len_) break;
        auto it = vocab.find(sub);
        if (it == vocab.end()) continue;
        const double cand = base + scores_[static_cast<std::size_t>(it->second)];
        if (!best[e].start || cand > best[e].score) best[e] = {it->second, cand, s};
        if (e == s + 1) single = true;
      }
      if (!single) {
        const double cand = base + unk_score_;
        if (!best[s + 1].start || cand > best[s + 1].score) best[s + 1] = {unk_id_.value_or(-1), cand, s};
      }
    }
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::vector<bool> unk;
    for (std::size_t e = n; e > 0;) {
      const std::size_t s = *best[e].start;
      const bool is_unk = unk_id_ && best[e].id == *unk_id_;
      if (is_unk && !unk.empty() && unk.back()) {
        spans.back().first = s;
      } else {
        spans.emplace_back(s, e);
        unk.push_back(is_unk);
      }
      e = s;
    }
    for (std::size_t k = spans.size(); k-- > 0;) {
      const auto [s, e] = spans[k];
      std::string piece;
      for (std::size_t c = s; c < e; ++c) piece += w[c].s;
      auto it = vocab.find(piece);
      const int id = it != vocab.end() ? it->second : unk_id_.value_or(-1);
      if (id < 0) throw ValidationError(fmt::format("Unigram: '{}' is not in the vocabulary and no unk_id", piece));
      out.push_back(make_token(id, piece, w, s, e));
    }
  }

 private:
  std::vector<double> scores_;
  std::vector<std::string> pieces_;
  std::optional<int> unk_id_;
  double unk_score_ = 0.0;
  std::size_t max_len_ = 0;
};

std::unique_ptr<Model> make_model(const json& j) {
  std::string type = j.value("type", std::string());
  if (type.empty()) {
    if (j.contains("merges")) {
      type = "BPE";
    } else if (j.contains("vocab") && j["vocab"].is_array()) {
      type = "Unigram";
    } else {
      type = "WordPiece";
    }
  }
  if (type == "WordPiece") return std::make_unique<WordPieceModel>(j);
  if (type == "BPE") return std::make_unique<BpeModel>(j);
  if (type == "Unigram") return std::make_unique<UnigramModel>(j);
  throw ParseError(fmt::format("tokenizer.json: unsupported model '{}'", type));
}

// ---------------------------------------------------------------------------
// Post-processing templates

struct TemplateItem {
  bool special = false;
  std::vector<int> ids;  // special tokens
  int sequence = 0;      // 0 = A, 1 = B
  int type_id = 0;
};

struct Template {
  std::vector<TemplateItem> single;
  std::vector<TemplateItem> pair;
  std::optional<bool> trim_offsets_prefix;  // set when byte-level offset trimming applies
};

std::vector<TemplateItem> parse_template_items(const json& items, const json& specials) {
  std::vector<TemplateItem> out;
  for (const auto& it : items) {
    TemplateItem t;
    if (it.contains("SpecialToken")) {
      const auto& st = it["SpecialToken"];
      t.special = true;
      t.type_id = st.value("type_id", 0);
      const auto id = st.at("id").get<std::string>();
      if (!specials.contains(id)) throw ParseError(fmt::format("template special token '{}' undefined", id));
      t.ids = specials[id].at("ids").get<std::vector<int>>();
    } else {
      const auto& sq = it.at("Sequence");
      t.sequence = sq.at("id").get<std::string>() == "B" ? 1 : 0;
      t.type_id = sq.value("type_id", 0);
    }
    out.push_back(std::move(t));
  }
  return out;
}

void parse_post_processor(const json& j, Template& t) {
  if (j.is_null()) return;
  const auto type = j.at("type").get<std::string>();
  auto special = [](int id) { return TemplateItem{true, {id}, 0, 0}; };
  auto seq = [](int s, int type_id) { return TemplateItem{false, {}, s, type_id}; };
  if (type == "Sequence") {
    for (const auto& p : j.at("processors")) parse_post_processor(p, t);
  } else if (type == "TemplateProcessing") {
    const json specials = j.value("special_tokens", json::object());
    t.single = parse_template_items(j.at("single"), specials);
    t.pair = parse_template_items(j.at("pair"), specials);
  } else if (type == "BertProcessing" || type == "RobertaProcessing") {
    const int cls = j.at("cls").at(1).get<int>();
    const int sep = j.at("sep").at(1).get<int>();
    t.single = {special(cls), seq(0, 0), special(sep)};
    if (type == "BertProcessing") {
      t.pair = {special(cls), seq(0, 0), special(sep), seq(1, 1), special(sep)};
      t.pair.back().type_id = 1;
    } else {
      t.pair = {special(cls), seq(0, 0), special(sep), special(sep), seq(1, 0), special(sep)};
      if (j.value("trim_offsets", true)) t.trim_offsets_prefix = j.value("add_prefix_space", true);
    }
  } else if (type == "ByteLevel") {
    if (j.value("trim_offsets", true)) t.trim_offsets_prefix = j.value("add_prefix_space", true);
  } else {
    throw ParseError(fmt::format("tokenizer.json: unsupported post_processor '{}'", type));
  }
}

struct AddedToken {
  std::string content;
  int id;
};

}  // namespace

namespace detail {

struct Pipeline {
  NormFn normalizer;
  PreFn pre_tokenizer;
  std::unique_ptr<Model> model;
  Template templ;
  std::vector<AddedToken> added;  // special, matched on raw text; longest first
  std::size_t vocab_size = 0;
};

}  // namespace detail

HfTokenizer::HfTokenizer(const json& spec, std::string name) : p_(std::make_unique<detail::Pipeline>()),
                                                               name_(std::move(name)) {
  try {
    p_->normalizer = make_normalizer(spec.value("normalizer", json()));
    p_->pre_tokenizer = make_pre_tokenizer(spec.value("pre_tokenizer", json()));
    p_->model = make_model(spec.at("model"));
    p_->templ.single = {TemplateItem{false, {}, 0, 0}};
    p_->templ.pair = {TemplateItem{false, {}, 0, 0}, TemplateItem{false, {}, 1, 1}};
    parse_post_processor(spec.value("post_processor", json()), p_->templ);
    int max_id = -1;
    for (const auto& [_, id] : p_->model->vocab) max_id = std::max(max_id, id);
    for (const auto& a : spec.value("added_tokens", json::array())) {
      const int id = a.at("id").get<int>();
      max_id = std::max(max_id, id);
      if (a.value("normalized", false) && !a.value("special", false)) continue;
      p_->added.push_back({a.at("content").get<std::string>(), id});
    }
    std::sort(p_->added.begin(), p_->added.end(),
              [](const AddedToken& x, const AddedToken& y) { return x.content.size() > y.content.size(); });
    p_->vocab_size = static_cast<std::size_t>(max_id + 1);
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("tokenizer.json: {}", e.what()));
  }
}

HfTokenizer::~HfTokenizer() = default;
HfTokenizer::HfTokenizer(HfTokenizer&&) noexcept = default;
HfTokenizer& HfTokenizer::operator=(HfTokenizer&&) noexcept = default;

HfTokenizer HfTokenizer::from_file(const std::filesystem::path& tokenizer_json) {
  return HfTokenizer(io::read_json(tokenizer_json), tokenizer_json.parent_path().filename().string());
}

HfTokenizer HfTokenizer::from_wordpiece_vocab(const std::filesystem::path& vocab_txt, bool lowercase) {
  json vocab = json::object();
  int id = 0;
  for (const auto& line : io::read_lines(vocab_txt)) {
    std::string tok(io::trim(line));
    if (!vocab.contains(tok)) vocab[tok] = id;
    ++id;
  }
  auto id_of = [&](const char* t) {
    if (!vocab.contains(t)) throw ParseError(fmt::format("{}: missing special token {}", vocab_txt.string(), t));
    return vocab[t].get<int>();
  };
  json spec = {
      {"normalizer", {{"type", "BertNormalizer"}, {"lowercase", lowercase}}},
      {"pre_tokenizer", {{"type", "BertPreTokenizer"}}},
      {"model", {{"type", "WordPiece"}, {"vocab", vocab}, {"unk_token", "[UNK]"}}},
      {"post_processor",
       {{"type", "BertProcessing"}, {"cls", {"[CLS]", id_of("[CLS]")}}, {"sep", {"[SEP]", id_of("[SEP]")}}}},
      {"added_tokens", json::array()}};
  for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) {
    if (vocab.contains(t)) spec["added_tokens"].push_back({{"id", vocab[t]}, {"content", t}, {"special", true}});
  }
  return HfTokenizer(spec, vocab_txt.parent_path().filename().string());
}

std::vector<Token> HfTokenizer::tokenize(std::string_view text) const {
  std::vector<Token> out;
  auto run_pipeline = [&](std::size_t begin, std::size_t end) {
    if (begin >= end) return;
    NStr s = from_text(text.substr(begin, end - begin), begin);
    if (p_->normalizer) p_->normalizer(s);
    std::vector<NStr> splits{std::move(s)};
    if (p_->pre_tokenizer) splits = p_->pre_tokenizer(std::move(splits));
    for (const auto& w : splits) {
      if (!w.empty()) p_->model->tokenize(w, out);
    }
  };
  std::size_t start = 0, pos = 0;
  while (pos < text.size()) {
    const AddedToken* hit = nullptr;
    for (const auto& a : p_->added) {
      if (!a.content.empty() && text.substr(pos).starts_with(a.content)) {
        hit = &a;
        break;
      }
    }
    if (hit == nullptr) {
      ++pos;
      continue;
    }
    run_pipeline(start, pos);
    out.push_back(Token{hit->id, hit->content, pos, pos + hit->content.size()});
    pos += hit->content.size();
    start = pos;
  }
  run_pipeline(start, text.size());

  if (p_->templ.trim_offsets_prefix) {
    const std::string& space = byte_chars()[' '];
    const bool add_prefix = *p_->templ.trim_offsets_prefix;
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto& t = out[i];
      const NStr chars = from_text(t.piece, 0);
      auto blank = [&](const NChar& c) { return c.s == space || is_whitespace(decode_cp(c.s)); };
      std::size_t lead = 0, trail = 0;
      while (lead < chars.size() && blank(chars[lead])) ++lead;
      while (trail < chars.size() && blank(chars[chars.size() - 1 - trail])) ++trail;
      if (lead > 0) {
        const bool first = i == 0 || t.begin == 0;
        if (!(add_prefix && first)) t.begin = std::min(t.begin + lead, t.end);
      }
      if (trail > 0 && t.end >= trail) t.end = std::max(t.end - trail, t.begin);
    }
  }
  return out;
}

namespace {

Encoding apply_template(const std::vector<TemplateItem>& items, const std::vector<Token>* a,
                        const std::vector<Token>* b) {
  Encoding e;
  for (const auto& it : items) {
    if (it.special) {
      for (int id : it.ids) {
        e.ids.push_back(id);
        e.type_ids.push_back(it.type_id);
        e.sequence_ids.push_back(-1);
      }
      continue;
    }
    const auto* seq = it.sequence == 0 ? a : b;
    if (seq == nullptr) continue;
    for (const auto& t : *seq) {
      e.ids.push_back(t.id);
      e.type_ids.push_back(it.type_id);
      e.sequence_ids.push_back(it.sequence);
    }
  }
  return e;
}

}  // namespace

Encoding HfTokenizer::build_single(const std::vector<Token>& a) const {
  return apply_template(p_->templ.single, &a, nullptr);
}

Encoding HfTokenizer::build_pair(const std::vector<Token>& a, const std::vector<Token>& b) const {
  return apply_template(p_->templ.pair, &a, &b);
}

int HfTokenizer::cls_position(bool pair) const {
  const auto& items = pair ? p_->templ.pair : p_->templ.single;
  return !items.empty() && items.front().special ? 0 : -1;
}

std::optional<int> HfTokenizer::token_to_id(const std::string& token) const {
  for (const auto& a : p_->added) {
    if (a.content == token) return a.id;
  }
  if (auto it = p_->model->vocab.find(token); it != p_->model->vocab.end()) return it->second;
  return std::nullopt;
}

std::size_t HfTokenizer::vocab_size() const { return p_->vocab_size; }

std::unique_ptr<HfTokenizer> load_tokenizer(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "tokenizer.json")) {
    return std::make_unique<HfTokenizer>(HfTokenizer::from_file(dir / "tokenizer.json"));
  }
  if (std::filesystem::exists(dir / "vocab.txt")) {
    bool lower = true;
    if (std::filesystem::exists(dir / "tokenizer_config.json")) {
      lower = io::read_json(dir / "tokenizer_config.json").value("do_lower_case", true);
    }
    return std::make_unique<HfTokenizer>(HfTokenizer::from_wordpiece_vocab(dir / "vocab.txt", lower));
  }
  throw IoError(fmt::format("no tokenizer.json or vocab.txt in '{}'", dir.string()));
}

}  // namespace discprobe::encoder
