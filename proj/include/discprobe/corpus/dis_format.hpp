#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "discprobe/corpus/discourse_tree.hpp"

namespace discprobe::corpus {

// Parses one RST-DT style lisp tree:
//   ( Root (span 1 2)
//     ( Nucleus (leaf 1) (rel2par span) (text _!First EDU,_!) )
//     ( Satellite (leaf 2) (rel2par elaboration-additional) (text _!second._!) )
//   )
// Throws ParseError on unbalanced parentheses, unknown node tags, a leaf
// without a text payload, inconsistent spans, or non-consecutive leaf ids.
DiscourseTree parse_dis(std::string_view text);

DiscourseTree read_dis_file(const std::filesystem::path& path);

// Canonical form: two-space indentation, one node per line, spans recomputed
// from the leaves. parse_dis(serialize_dis(t)) == t.
std::string serialize_dis(const DiscourseTree& tree);

}  // namespace discprobe::corpus
