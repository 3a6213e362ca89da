#include "discprobe/corpus/tree_interchange.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/corpus/dis_format.hpp"

namespace discprobe::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string default_rel2par(const RelationNode& node, std::size_t child) {
  const bool has_satellite = std::any_of(node.nuclearities.begin(), node.nuclearities.end(),
                                         [](Nuclearity n) { return n == Nuclearity::kSatellite; });
  if (node.nuclearities[child] == Nuclearity::kNucleus && has_satellite) {
    return std::string(kSpanRelation);
  }
  return node.relation;
}

const json& field(const json& j, const char* name) {
  if (!j.contains(name)) {
    throw ValidationError(fmt::format("tree JSON: missing field '{}'", name));
  }
  return j.at(name);
}

DiscourseTree parse_json_node(const json& j) {
  if (!j.is_object()) throw ValidationError("tree JSON: node is not an object");
  const std::string type = field(j, "type").get<std::string>();
  if (type == "leaf") {
    DiscourseTree t;
    t.node = EduLeaf{field(j, "edu").get<int>(), field(j, "text").get<std::string>()};
    return t;
  }
  if (type != "node") {
    throw ValidationError(fmt::format("tree JSON: unknown node type '{}'", type));
  }
  const auto& kids = field(j, "children");
  const auto& nucs = field(j, "nuclearities");
  if (!kids.is_array() || !nucs.is_array()) {
    throw ValidationError("tree JSON: 'children' and 'nuclearities' must be arrays");
  }
  if (kids.size() != nucs.size()) {
    throw ValidationError(fmt::format("tree JSON: {} nuclearities for {} children", nucs.size(),
                                      kids.size()));
  }
  RelationNode node;
  node.relation = field(j, "relation").get<std::string>();
  for (std::size_t i = 0; i < kids.size(); ++i) {
    const std::string n = nucs[i].get<std::string>();
    if (n.size() != 1) throw ValidationError(fmt::format("tree JSON: bad nuclearity '{}'", n));
    node.nuclearities.push_back(nuclearity_from_char(n[0]));
    node.children.push_back(parse_json_node(kids[i]));
  }
  for (std::size_t i = 0; i < kids.size(); ++i) {
    node.children[i].parent_relation = kids[i].contains("rel2par")
                                           ? kids[i]["rel2par"].get<std::string>()
                                           : default_rel2par(node, i);
  }
  DiscourseTree t;
  t.node = std::move(node);
  return t;
}

json node_to_json(const DiscourseTree& t) {
  if (t.is_leaf()) {
    return json{{"type", "leaf"}, {"edu", t.leaf().edu_id}, {"text", t.leaf().text}};
  }
  const auto& n = t.internal();
  json kids = json::array();
  json nucs = json::array();
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    json c = node_to_json(n.children[i]);
    if (n.children[i].parent_relation != default_rel2par(n, i)) {
      c["rel2par"] = n.children[i].parent_relation;
    }
    kids.push_back(std::move(c));
    nucs.push_back(std::string(1, to_char(n.nuclearities[i])));
  }
  return json{{"type", "node"}, {"relation", n.relation}, {"nuclearities", nucs}, {"children", kids}};
}

const json& unwrap(const json& j) { return j.is_object() && j.contains("tree") ? j.at("tree") : j; }

}  // namespace

DiscourseTree tree_from_json(const json& j) {
  DiscourseTree t;
  try {
    t = parse_json_node(j);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("tree JSON schema violation: {}", e.what()));
  }
  validate(t);
  return t;
}

json tree_to_json(const DiscourseTree& tree) { return node_to_json(tree); }

namespace {

std::vector<std::pair<std::string, json>> read_tree_records(const fs::path& path) {
  std::vector<std::pair<std::string, json>> out;
  const std::string stem = path.stem().string();
  if (path.extension() == ".jsonl") {
    std::size_t line = 0;
    for (auto& rec : io::read_jsonl(path)) {
      ++line;
      std::string id = rec.is_object() && rec.contains("id") ? rec["id"].get<std::string>()
                                                             : fmt::format("{}#{}", stem, line);
      out.emplace_back(std::move(id), std::move(rec));
    }
    return out;
  }
  json doc = io::read_json(path);
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      std::string id = doc[i].is_object() && doc[i].contains("id") ? doc[i]["id"].get<std::string>()
                                                                   : fmt::format("{}#{}", stem, i + 1);
      out.emplace_back(std::move(id), doc[i]);
    }
  } else {
    std::string id = doc.is_object() && doc.contains("id") ? doc["id"].get<std::string>() : stem;
    out.emplace_back(std::move(id), std::move(doc));
  }
  return out;
}

}  // namespace

std::vector<DiscourseTree> load_tree_interchange(const fs::path& path) {
  std::vector<DiscourseTree> trees;
  for (const auto& [id, rec] : read_tree_records(path)) {
    try {
      trees.push_back(tree_from_json(unwrap(rec)));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{} ({}): {}", path.string(), id, e.what()));
    }
  }
  return trees;
}

std::vector<TreebankDocument> load_treebank(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError(fmt::format("treebank directory '{}' does not exist", dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension();
    if (ext == ".dis" || ext == ".json" || ext == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TreebankDocument> docs;
  for (const auto& f : files) {
    if (f.extension() == ".dis") {
      docs.push_back({f.stem().string(), read_dis_file(f)});
      continue;
    }
    for (const auto& [id, rec] : read_tree_records(f)) {
      try {
        docs.push_back({id, tree_from_json(unwrap(rec))});
      } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{} ({}): {}", f.string(), id, e.what()));
      }
    }
  }
  std::sort(docs.begin(), docs.end(),
            [](const TreebankDocument& a, const TreebankDocument& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < docs.size(); ++i) {
    if (docs[i].id == docs[i - 1].id) {
      throw ValidationError(fmt::format("duplicate treebank document id '{}'", docs[i].id));
    }
  }
  return docs;
}

}  // namespace discprobe::corpus
