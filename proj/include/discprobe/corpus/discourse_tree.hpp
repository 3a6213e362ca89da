#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace discprobe::corpus {

enum class Nuclearity { kNucleus, kSatellite };

char to_char(Nuclearity n);
Nuclearity nuclearity_from_char(char c);

inline constexpr std::string_view kRootRelation = "ROOT";
// rel2par value carried by the nucleus of a mononuclear relation.
inline constexpr std::string_view kSpanRelation = "span";

struct DiscourseTree;

struct EduLeaf {
  int edu_id = 0;  // 1-based, consecutive left to right
  std::string text;

  friend bool operator==(const EduLeaf&, const EduLeaf&) = default;
};

struct RelationNode {
  std::vector<DiscourseTree> children;
  std::vector<Nuclearity> nuclearities;  // one per child
  // Relation holding among the children: the first satellite's rel2par, or
  // the shared label of a multinuclear node.
  std::string relation;

  friend bool operator==(const RelationNode&, const RelationNode&);
};

struct DiscourseTree {
  std::variant<EduLeaf, RelationNode> node;
  // rel2par annotation of this node; the root carries kRootRelation.
  std::string parent_relation{kRootRelation};

  bool is_leaf() const { return std::holds_alternative<EduLeaf>(node); }
  const EduLeaf& leaf() const { return std::get<EduLeaf>(node); }
  const RelationNode& internal() const { return std::get<RelationNode>(node); }
  RelationNode& internal() { return std::get<RelationNode>(node); }

  friend bool operator==(const DiscourseTree&, const DiscourseTree&) = default;
};

inline bool operator==(const RelationNode& a, const RelationNode& b) {
  return a.children == b.children && a.nuclearities == b.nuclearities && a.relation == b.relation;
}

// Leaves in left-to-right order.
std::vector<const EduLeaf*> leaves(const DiscourseTree& tree);

std::size_t edu_count(const DiscourseTree& tree);

// EDU texts joined with single spaces.
std::string text_of(const DiscourseTree& tree);

// Throws ValidationError naming the first broken invariant: leaf ids not
// 1..k in order, an internal node with fewer than two children, mismatched
// nuclearity list, or no nucleus among the children.
void validate(const DiscourseTree& tree);

// Relation of an internal node derived from its children's rel2par labels.
std::string derive_relation(const std::vector<DiscourseTree>& children,
                            const std::vector<Nuclearity>& nuclearities);

enum class NuclearityPair { kNN, kNS, kSN };

std::string_view to_string(NuclearityPair p);
NuclearityPair nuclearity_pair_from_string(std::string_view s);

struct BinaryDiscourseTree;

struct BinaryRelationNode {
  std::vector<BinaryDiscourseTree> children;  // exactly two: left, right
  NuclearityPair nuclearity = NuclearityPair::kNS;
  std::string relation;

  const BinaryDiscourseTree& left() const { return children[0]; }
  const BinaryDiscourseTree& right() const { return children[1]; }

  friend bool operator==(const BinaryRelationNode&, const BinaryRelationNode&);
};

struct BinaryDiscourseTree {
  std::variant<EduLeaf, BinaryRelationNode> node;

  bool is_leaf() const { return std::holds_alternative<EduLeaf>(node); }
  const EduLeaf& leaf() const { return std::get<EduLeaf>(node); }
  const BinaryRelationNode& internal() const { return std::get<BinaryRelationNode>(node); }

  friend bool operator==(const BinaryDiscourseTree&, const BinaryDiscourseTree&) = default;
};

inline bool operator==(const BinaryRelationNode& a, const BinaryRelationNode& b) {
  return a.children == b.children && a.nuclearity == b.nuclearity && a.relation == b.relation;
}

std::vector<const EduLeaf*> leaves(const BinaryDiscourseTree& tree);
std::string text_of(const BinaryDiscourseTree& tree);
std::size_t internal_count(const BinaryDiscourseTree& tree);

}  // namespace discprobe::corpus
