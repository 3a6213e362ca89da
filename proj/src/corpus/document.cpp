#include "discprobe/corpus/document.hpp"

#include <algorithm>
#include <set>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::corpus {

namespace fs = std::filesystem;

void validate(const Document& doc) {
  if (doc.id.empty()) {
    throw ValidationError("document with empty id");
  }
  if (doc.sentences.empty()) {
    throw ValidationError(fmt::format("document '{}' has no sentences", doc.id));
  }
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    if (io::trim(doc.sentences[i]).empty()) {
      throw ValidationError(fmt::format("document '{}': empty sentence at index {}", doc.id, i));
    }
  }
}

namespace {

std::vector<Document> load_plaintext(const fs::path& dir, const SentenceSplitter& splitter) {
  if (!fs::is_directory(dir)) {
    throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::vector<Document> docs;
  for (const auto& file : files) {
    Document doc{file.stem().string(), {}};
    for (const auto& line : io::read_lines(file)) {
      if (io::trim(line).empty()) continue;
      for (auto& s : sentence_split(line, splitter)) doc.sentences.push_back(std::move(s));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> load_jsonl(const fs::path& file, const SentenceSplitter& splitter) {
  std::vector<Document> docs;
  for (const auto& rec : io::read_jsonl(file)) {
    if (!rec.is_object() || !rec.contains("id")) {
      throw ValidationError(fmt::format("{}: record without 'id'", file.string()));
    }
    Document doc;
    doc.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    if (rec.contains("sentences")) {
      doc.sentences = rec["sentences"].get<std::vector<std::string>>();
    } else if (rec.contains("text")) {
      doc.sentences = sentence_split(rec["text"].get<std::string>(), splitter);
    } else {
      throw ValidationError(
          fmt::format("{}: record '{}' has neither 'text' nor 'sentences'", file.string(), doc.id));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace

std::vector<Document> load_documents(const fs::path& path, DocumentFormat format,
                                     const SentenceSplitter& splitter) {
  if (!fs::exists(path)) {
    throw IoError(fmt::format("corpus '{}' does not exist", path.string()));
  }
  auto docs = format == DocumentFormat::kPlainText ? load_plaintext(path, splitter)
                                                   : load_jsonl(path, splitter);
  std::sort(docs.begin(), docs.end(),
            [](const Document& a, const Document& b) { return a.id < b.id; });
  std::set<std::string> seen;
  for (const auto& d : docs) {
    validate(d);
    if (!seen.insert(d.id).second) {
      throw ValidationError(fmt::format("duplicate document id '{}'", d.id));
    }
  }
  return docs;
}

std::vector<Document> load_documents(const fs::path& path, const SentenceSplitter& splitter) {
  return load_documents(path, fs::is_directory(path) ? DocumentFormat::kPlainText : DocumentFormat::kJsonl,
                        splitter);
}

}  // namespace discprobe::corpus
