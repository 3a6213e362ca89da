#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "discprobe/corpus/sentence_splitter.hpp"

namespace discprobe::corpus {

// Raw material for the NSP and sentence-ordering builders.
struct Document {
  std::string id;
  std::vector<std::string> sentences;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class DocumentFormat {
  kPlainText,  // a directory with one document per file; id = file stem
  kJsonl,      // one {"id", "text"|"sentences"} object per line
};

// Throws ValidationError for an empty id, no sentences, or a blank sentence.
void validate(const Document& doc);

// Documents come back sorted by id. Throws IoError, ParseError, or
// ValidationError (duplicate id, blank sentence, record without text).
std::vector<Document> load_documents(const std::filesystem::path& path, DocumentFormat format,
                                     const SentenceSplitter& splitter);

// Picks kPlainText for directories and kJsonl for files.
std::vector<Document> load_documents(const std::filesystem::path& path,
                                     const SentenceSplitter& splitter);

}  // namespace discprobe::corpus
