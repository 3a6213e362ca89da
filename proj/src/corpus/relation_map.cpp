#include "discprobe/corpus/relation_map.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::corpus {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<std::string> lookup(const RelationMap& map, std::string key) {
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (auto it = map.fine_to_coarse.find(key); it != map.fine_to_coarse.end()) return it->second;
    const bool suffixed = key.size() > 2 && key[key.size() - 2] == '-' &&
                          (key.back() == 'e' || key.back() == 's' || key.back() == 'n');
    if (!suffixed) break;
    key.resize(key.size() - 2);
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::size_t> expected_relation_count(std::string_view language) {
  if (language == "en") return 18;
  if (language == "zh") return 4;
  if (language == "de") return 31;
  if (language == "es") return 29;
  return std::nullopt;
}

RelationMap parse_relation_map(std::string_view tsv, std::optional<std::size_t> expected_cardinality) {
  RelationMap map;
  map.expected_cardinality = expected_cardinality;
  std::size_t lineno = 0;
  for (const auto& raw : io::split(tsv, '\n')) {
    ++lineno;
    const auto line = io::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = io::split(line, '\t');
    if (cols.size() != 2 || io::trim(cols[0]).empty() || io::trim(cols[1]).empty()) {
      throw ParseError(fmt::format("relation map line {}: expected 'fine<TAB>coarse'", lineno));
    }
    const std::string fine = lower(io::trim(cols[0]));
    const std::string coarse(io::trim(cols[1]));
    auto [it, inserted] = map.fine_to_coarse.emplace(fine, coarse);
    if (!inserted && it->second != coarse) {
      throw ParseError(fmt::format("relation map line {}: '{}' mapped twice", lineno, fine));
    }
    map.inventory.insert(coarse);
  }
  if (expected_cardinality && map.inventory.size() != *expected_cardinality) {
    throw ValidationError(fmt::format("relation map has {} coarse labels, expected {}",
                                      map.inventory.size(), *expected_cardinality));
  }
  return map;
}

RelationMap load_relation_map(const std::filesystem::path& tsv,
                              std::optional<std::size_t> expected_cardinality) {
  return parse_relation_map(io::read_file(tsv), expected_cardinality);
}

std::string map_relation(std::string_view fine, const RelationMap& map) {
  if (auto coarse = lookup(map, lower(fine))) return *coarse;
  throw ValidationError(fmt::format("relation '{}' is not in the relation map", fine));
}

void check_total(const RelationMap& map, const std::set<std::string>& fine_labels) {
  std::string missing;
  for (const auto& f : fine_labels) {
    if (!lookup(map, lower(f))) {
      if (!missing.empty()) missing += ", ";
      missing += f;
    }
  }
  if (!missing.empty()) {
    throw ValidationError(fmt::format("relation map is not total; unmapped: {}", missing));
  }
}

}  // namespace discprobe::corpus
