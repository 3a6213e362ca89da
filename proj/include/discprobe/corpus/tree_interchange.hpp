#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "discprobe/corpus/discourse_tree.hpp"

namespace discprobe::corpus {

// Canonical JSON interchange for treebanks that do not ship .dis files:
//   {"type":"leaf","edu":k,"text":s}
//   {"type":"node","relation":r,"nuclearities":["N","S"],"children":[...]}
// A child may carry "rel2par" when its annotation differs from the default
// (satellites get the node relation; nuclei get "span" next to a satellite,
// otherwise the node relation).
DiscourseTree tree_from_json(const nlohmann::json& j);

// Canonical form: "rel2par" is emitted only where it differs from the default.
nlohmann::json tree_to_json(const DiscourseTree& tree);

// A file holds one tree (JSON object), a JSON array of trees, or JSONL with
// one tree per line. Lines/objects may wrap the tree as {"id": ..., "tree": ...}.
std::vector<DiscourseTree> load_tree_interchange(const std::filesystem::path& path);

struct TreebankDocument {
  std::string id;
  DiscourseTree tree;
};

// Loads every *.dis, *.json and *.jsonl under `dir` (non-recursive), sorted by
// id. Ids are file stems; JSONL entries use their "id" or "<stem>#<line>".
std::vector<TreebankDocument> load_treebank(const std::filesystem::path& dir);

}  // namespace discprobe::corpus
