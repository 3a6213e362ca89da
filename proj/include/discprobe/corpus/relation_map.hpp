#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace discprobe::corpus {

// Fine-grained treebank relation -> coarse probing class.
struct RelationMap {
  std::map<std::string, std::string> fine_to_coarse;  // keys lowercased
  std::set<std::string> inventory;                    // coarse labels
  std::optional<std::size_t> expected_cardinality;
};

// Coarse-class counts per treebank language: en 18, zh 4, de 31, es 29.
std::optional<std::size_t> expected_relation_count(std::string_view language);

// Two-column TSV "fine<TAB>coarse"; '#' starts a comment line. When
// `expected_cardinality` is set the coarse inventory must match it exactly.
RelationMap load_relation_map(const std::filesystem::path& tsv,
                              std::optional<std::size_t> expected_cardinality = std::nullopt);

RelationMap parse_relation_map(std::string_view tsv,
                               std::optional<std::size_t> expected_cardinality = std::nullopt);

// Case-insensitive lookup. RST-DT marks embedded relations with "-e" and
// nuclear/satellite variants with "-n"/"-s"; a label missing from the map is
// retried without that suffix. Throws ValidationError when still unmapped.
std::string map_relation(std::string_view fine, const RelationMap& map);

// Throws ValidationError listing every label in `fine_labels` that the map
// cannot resolve.
void check_total(const RelationMap& map, const std::set<std::string>& fine_labels);

}  // namespace discprobe::corpus
