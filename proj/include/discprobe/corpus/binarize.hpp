#pragma once

#include "discprobe/corpus/discourse_tree.hpp"

namespace discprobe::corpus {

// Right-branching binarization: children c1..cn become (c1, bin(c2..cn)) for
// as long as the remainder still holds a nucleus. When the remainder is all
// satellites (a lone nucleus followed by its satellites) the node is split as
// (bin(c1..cn-1), cn) instead, so no introduced node is satellite-only.
//
// An introduced pair takes the rel2par of its satellite side; a
// nucleus-nucleus pair takes the parent's multinuclear relation. Binary nodes
// and leaves are copied unchanged.
BinaryDiscourseTree binarize(const DiscourseTree& tree);

}  // namespace discprobe::corpus
