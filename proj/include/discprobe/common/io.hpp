#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace discprobe::io {

namespace fs = std::filesystem;
using Json = nlohmann::json;

std::string read_file(const fs::path& path);

// Writes via a sibling temporary file and rename, so readers never observe a
// partially written file.
void write_file_atomic(const fs::path& path, std::string_view contents);

void append_line(const fs::path& path, std::string_view line);

std::vector<std::string> read_lines(const fs::path& path);

// Blank lines are skipped; a malformed line raises ParseError naming the line.
std::vector<Json> read_jsonl(const fs::path& path);

std::string to_jsonl(std::span<const Json> records);

Json read_json(const fs::path& path);

// Splits on a single-character delimiter without collapsing empty fields.
std::vector<std::string> split(std::string_view line, char delim);

std::string_view trim(std::string_view s);

// RFC 4180 CSV: quoted fields may hold commas, doubled quotes and newlines.
// Throws ParseError on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size);
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::string hex_digest();

 private:
  void* ctx_;
};

}  // namespace discprobe::io
