#include "discprobe/corpus/discourse_tree.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"

namespace discprobe::corpus {

char to_char(Nuclearity n) { return n == Nuclearity::kNucleus ? 'N' : 'S'; }

Nuclearity nuclearity_from_char(char c) {
  switch (c) {
    case 'N':
      return Nuclearity::kNucleus;
    case 'S':
      return Nuclearity::kSatellite;
    default:
      throw ValidationError(fmt::format("invalid nuclearity '{}'", c));
  }
}

std::string_view to_string(NuclearityPair p) {
  switch (p) {
    case NuclearityPair::kNN:
      return "NN";
    case NuclearityPair::kNS:
      return "NS";
    case NuclearityPair::kSN:
      return "SN";
  }
  return "??";
}

NuclearityPair nuclearity_pair_from_string(std::string_view s) {
  if (s == "NN") return NuclearityPair::kNN;
  if (s == "NS") return NuclearityPair::kNS;
  if (s == "SN") return NuclearityPair::kSN;
  throw ValidationError(fmt::format("invalid nuclearity pair '{}'", s));
}

namespace {

template <typename Tree>
void collect_leaves(const Tree& t, std::vector<const EduLeaf*>& out) {
  if (t.is_leaf()) {
    out.push_back(&t.leaf());
    return;
  }
  for (const auto& c : t.internal().children) collect_leaves(c, out);
}

std::string join_texts(const std::vector<const EduLeaf*>& ls) {
  std::string out;
  for (const auto* l : ls) {
    if (!out.empty()) out += ' ';
    out += l->text;
  }
  return out;
}

void validate_node(const DiscourseTree& t, int& next_id) {
  if (t.is_leaf()) {
    if (t.leaf().edu_id != next_id) {
      throw ValidationError(
          fmt::format("leaf ids not consecutive: expected {}, found {}", next_id, t.leaf().edu_id));
    }
    ++next_id;
    return;
  }
  const auto& n = t.internal();
  if (n.children.size() < 2) {
    throw ValidationError("internal node with fewer than two children");
  }
  if (n.nuclearities.size() != n.children.size()) {
    throw ValidationError(fmt::format("nuclearity list has {} entries for {} children",
                                      n.nuclearities.size(), n.children.size()));
  }
  if (std::none_of(n.nuclearities.begin(), n.nuclearities.end(),
                   [](Nuclearity x) { return x == Nuclearity::kNucleus; })) {
    throw ValidationError("internal node without a nucleus");
  }
  for (const auto& c : n.children) validate_node(c, next_id);
}

}  // namespace

std::vector<const EduLeaf*> leaves(const DiscourseTree& tree) {
  std::vector<const EduLeaf*> out;
  collect_leaves(tree, out);
  return out;
}

std::size_t edu_count(const DiscourseTree& tree) { return leaves(tree).size(); }

std::string text_of(const DiscourseTree& tree) { return join_texts(leaves(tree)); }

void validate(const DiscourseTree& tree) {
  int next_id = 1;
  validate_node(tree, next_id);
}

std::string derive_relation(const std::vector<DiscourseTree>& children,
                            const std::vector<Nuclearity>& nuclearities) {
  for (std::size_t i = 0; i < children.size() && i < nuclearities.size(); ++i) {
    if (nuclearities[i] == Nuclearity::kSatellite) return children[i].parent_relation;
  }
  for (const auto& c : children) {
    if (c.parent_relation != kSpanRelation) return c.parent_relation;
  }
  return children.empty() ? std::string{} : children.front().parent_relation;
}

std::vector<const EduLeaf*> leaves(const BinaryDiscourseTree& tree) {
  std::vector<const EduLeaf*> out;
  collect_leaves(tree, out);
  return out;
}

std::string text_of(const BinaryDiscourseTree& tree) { return join_texts(leaves(tree)); }

std::size_t internal_count(const BinaryDiscourseTree& tree) {
  if (tree.is_leaf()) return 0;
  const auto& n = tree.internal();
  return 1 + internal_count(n.left()) + internal_count(n.right());
}

}  // namespace discprobe::corpus
