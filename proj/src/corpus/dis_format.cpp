#include "discprobe/corpus/dis_format.hpp"

#include <cctype>
#include <optional>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::corpus {

namespace {

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void expect(char c) {
    if (peek() != c) {
      if (pos_ >= text_.size()) {
        throw ParseError(fmt::format("unbalanced parentheses: expected '{}' at end of input", c));
      }
      throw ParseError(fmt::format("expected '{}' at offset {}, found '{}'", c, pos_, text_[pos_]));
    }
    ++pos_;
  }

  std::string atom() {
    skip_ws();
    const std::size_t b = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')') {
      ++pos_;
    }
    if (b == pos_) {
      throw ParseError(pos_ >= text_.size()
                           ? std::string("unbalanced parentheses: unexpected end of input")
                           : fmt::format("expected an atom at offset {}", pos_));
    }
    return std::string(text_.substr(b, pos_ - b));
  }

  // The atom following the next '(' without consuming anything.
  std::string peek_tag() {
    const std::size_t saved = pos_;
    expect('(');
    std::string tag = atom();
    pos_ = saved;
    return tag;
  }

  int integer() {
    const std::string a = atom();
    try {
      std::size_t used = 0;
      const int v = std::stoi(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      return v;
    } catch (const std::exception&) {
      throw ParseError(fmt::format("expected an integer, found '{}'", a));
    }
  }

  // Text payload delimited by _! ... _! (RST-DT); the payload may contain
  // parentheses, so it is scanned up to the closing delimiter before ')'.
  std::string payload() {
    skip_ws();
    if (text_.compare(pos_, 2, "_!") != 0) {
      throw ParseError(fmt::format("leaf text at offset {} does not start with _!", pos_));
    }
    const std::size_t b = pos_ + 2;
    for (std::size_t i = b; i + 1 < text_.size(); ++i) {
      const bool close = text_.compare(i, 2, "_!") == 0 || text_.compare(i, 2, "!_") == 0;
      if (!close) continue;
      std::size_t j = i + 2;
      while (j < text_.size() && std::isspace(static_cast<unsigned char>(text_[j]))) ++j;
      if (j < text_.size() && text_[j] == ')') {
        pos_ = i + 2;
        return std::string(text_.substr(b, i - b));
      }
    }
    throw ParseError("unterminated leaf text payload");
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

bool is_node_tag(const std::string& t) { return t == "Root" || t == "Nucleus" || t == "Satellite"; }

struct ParsedNode {
  DiscourseTree tree;
  Nuclearity nuclearity = Nuclearity::kNucleus;
  std::pair<int, int> span{0, 0};
};

ParsedNode parse_node(Lexer& lx, bool is_root) {
  lx.expect('(');
  const std::string tag = lx.atom();
  if (!is_node_tag(tag)) {
    throw ParseError(fmt::format("unknown node tag '{}'", tag));
  }
  if (is_root != (tag == "Root")) {
    throw ParseError(fmt::format("'{}' node in {} position", tag, is_root ? "root" : "child"));
  }

  std::optional<int> leaf_id;
  std::optional<std::pair<int, int>> span;
  std::optional<std::string> rel2par;
  std::optional<std::string> text;
  std::vector<ParsedNode> children;

  while (lx.peek() != ')') {
    if (lx.peek() != '(') {
      if (lx.at_end()) throw ParseError("unbalanced parentheses: unexpected end of input");
      throw ParseError(fmt::format("unexpected token at offset {}", lx.pos()));
    }
    const std::string sub = lx.peek_tag();
    if (is_node_tag(sub)) {
      children.push_back(parse_node(lx, false));
      continue;
    }
    lx.expect('(');
    lx.atom();
    if (sub == "span") {
      const int a = lx.integer();
      const int b = lx.integer();
      span = {a, b};
    } else if (sub == "leaf") {
      leaf_id = lx.integer();
    } else if (sub == "rel2par") {
      rel2par = lx.atom();
    } else if (sub == "text") {
      text = lx.payload();
    } else {
      throw ParseError(fmt::format("unknown node tag '{}'", sub));
    }
    lx.expect(')');
  }
  lx.expect(')');

  ParsedNode out;
  out.nuclearity = tag == "Satellite" ? Nuclearity::kSatellite : Nuclearity::kNucleus;
  out.tree.parent_relation = is_root ? std::string(kRootRelation) : rel2par.value_or("");
  if (!is_root && !rel2par) {
    throw ParseError(fmt::format("{} node without rel2par", tag));
  }

  if (leaf_id) {
    if (!children.empty()) throw ParseError(fmt::format("leaf {} has child nodes", *leaf_id));
    if (!text) throw ParseError(fmt::format("leaf {} without text payload", *leaf_id));
    out.tree.node = EduLeaf{*leaf_id, *text};
    out.span = {*leaf_id, *leaf_id};
    return out;
  }
  if (text) throw ParseError("text payload on a non-leaf node");
  if (children.empty()) throw ParseError(fmt::format("{} node with neither leaf nor children", tag));

  RelationNode node;
  for (auto& c : children) {
    node.nuclearities.push_back(c.nuclearity);
    node.children.push_back(std::move(c.tree));
  }
  node.relation = derive_relation(node.children, node.nuclearities);
  out.span = {children.front().span.first, children.back().span.second};
  if (span && *span != out.span) {
    throw ParseError(fmt::format("span ({} {}) does not match children ({} {})", span->first,
                                 span->second, out.span.first, out.span.second));
  }
  out.tree.node = std::move(node);
  return out;
}

void write_node(const DiscourseTree& t, std::string_view tag, int depth, std::string& out) {
  const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  out += indent;
  out += "( ";
  out += tag;
  const bool root = tag == "Root";
  if (t.is_leaf()) {
    out += fmt::format(" (leaf {})", t.leaf().edu_id);
    if (!root) out += fmt::format(" (rel2par {})", t.parent_relation);
    out += fmt::format(" (text _!{}_!) )\n", t.leaf().text);
    return;
  }
  const auto ls = leaves(t);
  out += fmt::format(" (span {} {})", ls.front()->edu_id, ls.back()->edu_id);
  if (!root) out += fmt::format(" (rel2par {})", t.parent_relation);
  out += '\n';
  const auto& n = t.internal();
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    write_node(n.children[i], n.nuclearities[i] == Nuclearity::kNucleus ? "Nucleus" : "Satellite",
               depth + 1, out);
  }
  out += indent;
  out += ")\n";
}

}  // namespace

DiscourseTree parse_dis(std::string_view text) {
  Lexer lx(text);
  if (lx.at_end()) throw ParseError("empty .dis input");
  ParsedNode root = parse_node(lx, true);
  if (!lx.at_end()) {
    throw ParseError(fmt::format("unbalanced parentheses: trailing input at offset {}", lx.pos()));
  }
  try {
    validate(root.tree);
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  return std::move(root.tree);
}

DiscourseTree read_dis_file(const std::filesystem::path& path) {
  try {
    return parse_dis(io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string serialize_dis(const DiscourseTree& tree) {
  std::string out;
  write_node(tree, "Root", 0, out);
  return out;
}

}  // namespace discprobe::corpus
