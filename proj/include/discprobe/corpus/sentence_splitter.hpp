#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace discprobe::corpus {

// Injected segmenter interface; builders never depend on a concrete splitter.
class SentenceSplitter {
 public:
  virtual ~SentenceSplitter() = default;
  virtual std::vector<std::string> split(std::string_view text) const = 0;
  virtual std::string language() const = 0;
};

// Rule-based default backed by ICU sentence boundaries with the locale's
// abbreviation suppressions (e.g. "Mr." does not end a sentence in English).
class IcuSentenceSplitter : public SentenceSplitter {
 public:
  // Throws Error when ICU has no data for `language` (ISO 639-1 code).
  explicit IcuSentenceSplitter(std::string language);

  std::vector<std::string> split(std::string_view text) const override;
  std::string language() const override { return language_; }

 private:
  std::string language_;
};

std::unique_ptr<SentenceSplitter> make_splitter(std::string_view language);

// Trimmed, non-empty sentences in order. Throws ValidationError on blank input.
std::vector<std::string> sentence_split(std::string_view raw_text, const SentenceSplitter& splitter);

}  // namespace discprobe::corpus
