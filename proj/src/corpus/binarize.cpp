#include "discprobe/corpus/binarize.hpp"

#include <algorithm>
#include <span>

namespace discprobe::corpus {

namespace {

struct Part {
  BinaryDiscourseTree tree;
  Nuclearity nuclearity;
  std::string relation;  // rel2par of the part when it is a single original child
};

NuclearityPair pair_of(Nuclearity a, Nuclearity b) {
  if (a == Nuclearity::kNucleus && b == Nuclearity::kNucleus) return NuclearityPair::kNN;
  return a == Nuclearity::kNucleus ? NuclearityPair::kNS : NuclearityPair::kSN;
}

std::string multinuclear_relation(const RelationNode& node) {
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (node.nuclearities[i] == Nuclearity::kNucleus &&
        node.children[i].parent_relation != kSpanRelation) {
      return node.children[i].parent_relation;
    }
  }
  return node.relation;
}

Part join(Part left, Part right, const std::string& nn_relation) {
  BinaryRelationNode n;
  n.nuclearity = pair_of(left.nuclearity, right.nuclearity);
  switch (n.nuclearity) {
    case NuclearityPair::kNN:
      n.relation = nn_relation;
      break;
    case NuclearityPair::kNS:
      n.relation = right.relation;
      break;
    case NuclearityPair::kSN:
      n.relation = left.relation;
      break;
  }
  const bool has_nucleus =
      left.nuclearity == Nuclearity::kNucleus || right.nuclearity == Nuclearity::kNucleus;
  n.children.push_back(std::move(left.tree));
  n.children.push_back(std::move(right.tree));
  return Part{BinaryDiscourseTree{std::move(n)},
              has_nucleus ? Nuclearity::kNucleus : Nuclearity::kSatellite, std::string{}};
}

bool any_nucleus(std::span<const Part> parts) {
  return std::any_of(parts.begin(), parts.end(),
                     [](const Part& p) { return p.nuclearity == Nuclearity::kNucleus; });
}

Part fold(std::span<Part> parts, const std::string& nn_relation) {
  if (parts.size() == 1) return std::move(parts.front());
  if (any_nucleus(parts.subspan(1))) {
    Part rest = fold(parts.subspan(1), nn_relation);
    return join(std::move(parts.front()), std::move(rest), nn_relation);
  }
  Part head = fold(parts.first(parts.size() - 1), nn_relation);
  return join(std::move(head), std::move(parts.back()), nn_relation);
}

}  // namespace

BinaryDiscourseTree binarize(const DiscourseTree& tree) {
  if (tree.is_leaf()) return BinaryDiscourseTree{tree.leaf()};
  const auto& node = tree.internal();
  std::vector<Part> parts;
  parts.reserve(node.children.size());
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    parts.push_back(
        Part{binarize(node.children[i]), node.nuclearities[i], node.children[i].parent_relation});
  }
  const std::string nn_relation = multinuclear_relation(node);
  if (parts.size() == 2) {
    // Already binary: keep the node's own relation label.
    BinaryRelationNode n;
    n.nuclearity = pair_of(parts[0].nuclearity, parts[1].nuclearity);
    n.relation = node.relation;
    n.children.push_back(std::move(parts[0].tree));
    n.children.push_back(std::move(parts[1].tree));
    return BinaryDiscourseTree{std::move(n)};
  }
  return fold(parts, nn_relation).tree;
}

}  // namespace discprobe::corpus
