#include "discprobe/corpus/sentence_splitter.hpp"

#include <memory>

#include <fmt/core.h>
#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::corpus {

namespace {

bool icu_has_language(const std::string& language) {
  int32_t count = 0;
  const icu::Locale* locales = icu::Locale::getAvailableLocales(count);
  for (int32_t i = 0; i < count; ++i) {
    if (language == locales[i].getLanguage()) return true;
  }
  return false;
}

}  // namespace

IcuSentenceSplitter::IcuSentenceSplitter(std::string language) : language_(std::move(language)) {
  if (language_.empty() || !icu_has_language(language_)) {
    throw Error(fmt::format("no sentence segmenter available for language '{}'", language_));
  }
}

std::vector<std::string> IcuSentenceSplitter::split(std::string_view text) const {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Locale locale((language_ + "@ss=standard").c_str());
  std::unique_ptr<icu::BreakIterator> it(icu::BreakIterator::createSentenceInstance(locale, status));
  if (U_FAILURE(status)) {
    throw Error(fmt::format("ICU sentence iterator failed: {}", u_errorName(status)));
  }
  const icu::UnicodeString utext = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  it->setText(utext);

  std::vector<std::string> out;
  int32_t start = it->first();
  for (int32_t end = it->next(); end != icu::BreakIterator::DONE; start = end, end = it->next()) {
    std::string piece;
    utext.tempSubStringBetween(start, end).toUTF8String(piece);
    const auto trimmed = io::trim(piece);
    if (!trimmed.empty()) out.emplace_back(trimmed);
  }
  return out;
}

std::unique_ptr<SentenceSplitter> make_splitter(std::string_view language) {
  return std::make_unique<IcuSentenceSplitter>(std::string(language));
}

std::vector<std::string> sentence_split(std::string_view raw_text, const SentenceSplitter& splitter) {
  if (io::trim(raw_text).empty()) {
    throw ValidationError("sentence_split: empty text");
  }
  return splitter.split(raw_text);
}

}  // namespace discprobe::corpus
