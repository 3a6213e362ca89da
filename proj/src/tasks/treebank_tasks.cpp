// Nuclearity, relation and EDU segmentation builders over discourse treebanks.
#include <algorithm>
#include <numeric>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/corpus/binarize.hpp"
#include "discprobe/tasks/builders.hpp"

namespace discprobe::tasks {

namespace fs = std::filesystem;

TreebankSplits load_treebank_splits(const fs::path& dir, std::uint64_t seed, double dev_fraction) {
  if (!fs::is_directory(dir)) throw IoError(fmt::format("treebank '{}' is not a directory", dir.string()));
  TreebankSplits out;
  const bool has_train = fs::is_directory(dir / "train");
  const bool has_dev = fs::is_directory(dir / "dev");
  const bool has_test = fs::is_directory(dir / "test");
  Rng rng(seed);
  if (!has_train && !has_dev && !has_test) {
    auto docs = corpus::load_treebank(dir);
    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const auto sizes = split_sizes(docs.size(), SplitFractions{});
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto& dest = i < sizes[0] ? out.train : i < sizes[0] + sizes[1] ? out.dev : out.test;
      dest.push_back(std::move(docs[order[i]]));
    }
  } else {
    if (!has_train || !has_test) {
      throw IoError(fmt::format("treebank '{}' needs both train/ and test/ subdirectories", dir.string()));
    }
    out.train = corpus::load_treebank(dir / "train");
    out.test = corpus::load_treebank(dir / "test");
    if (has_dev) {
      out.dev = corpus::load_treebank(dir / "dev");
    } else {
      std::vector<std::size_t> order(out.train.size());
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      const auto n_dev = static_cast<std::size_t>(static_cast<double>(order.size()) * dev_fraction + 1e-9);
      std::vector<bool> to_dev(order.size(), false);
      for (std::size_t i = 0; i < n_dev; ++i) to_dev[order[i]] = true;
      std::vector<corpus::TreebankDocument> train;
      for (std::size_t i = 0; i < out.train.size(); ++i) {
        (to_dev[i] ? out.dev : train).push_back(std::move(out.train[i]));
      }
      out.train = std::move(train);
    }
  }
  auto by_id = [](const corpus::TreebankDocument& a, const corpus::TreebankDocument& b) { return a.id < b.id; };
  std::sort(out.train.begin(), out.train.end(), by_id);
  std::sort(out.dev.begin(), out.dev.end(), by_id);
  std::sort(out.test.begin(), out.test.end(), by_id);
  return out;
}

const std::vector<std::string>& nuclearity_labels() {
  static const std::vector<std::string> labels = {"NN", "NS", "SN"};
  return labels;
}

namespace {

void walk(const corpus::BinaryDiscourseTree& t, const corpus::RelationMap& map,
          const std::vector<std::string>& inventory, const std::string& doc_id, std::vector<PairInstance>& nuc,
          std::vector<PairInstance>& rel) {
  if (t.is_leaf()) return;
  const auto& n = t.internal();
  const std::string a = corpus::text_of(n.left());
  const std::string b = corpus::text_of(n.right());
  PairInstance pn;
  pn.task = Task::kNuclearity;
  pn.segments = {a, b};
  pn.label = static_cast<int>(n.nuclearity);
  pn.label_name = std::string(corpus::to_string(n.nuclearity));
  pn.doc_id = doc_id;
  PairInstance pr = pn;
  pr.task = Task::kRelation;
  pr.label_name = corpus::map_relation(n.relation, map);
  auto it = std::find(inventory.begin(), inventory.end(), pr.label_name);
  if (it == inventory.end()) {
    throw ValidationError(fmt::format("relation '{}' is not in the coarse inventory", pr.label_name));
  }
  pr.label = static_cast<int>(it - inventory.begin());
  nuc.push_back(std::move(pn));
  rel.push_back(std::move(pr));
  walk(n.left(), map, inventory, doc_id, nuc, rel);
  walk(n.right(), map, inventory, doc_id, nuc, rel);
}

}  // namespace

std::pair<std::vector<PairInstance>, std::vector<PairInstance>> rst_pairs_of(
    const corpus::BinaryDiscourseTree& tree, const corpus::RelationMap& map,
    const std::vector<std::string>& relation_inventory, const std::string& doc_id) {
  std::pair<std::vector<PairInstance>, std::vector<PairInstance>> out;
  walk(tree, map, relation_inventory, doc_id, out.first, out.second);
  return out;
}

std::pair<DatasetSplit<PairInstance>, DatasetSplit<PairInstance>> build_rst_pairs(const TreebankSplits& trees,
                                                                                  const corpus::RelationMap& map) {
  const std::vector<std::string> inventory(map.inventory.begin(), map.inventory.end());
  DatasetSplit<PairInstance> nuc, rel;
  nuc.label_inventory = nuclearity_labels();
  rel.label_inventory = inventory;
  const std::array<const std::vector<corpus::TreebankDocument>*, 3> src = {&trees.train, &trees.dev, &trees.test};
  const std::array<std::vector<PairInstance>*, 3> nd = {&nuc.train, &nuc.dev, &nuc.test};
  const std::array<std::vector<PairInstance>*, 3> rd = {&rel.train, &rel.dev, &rel.test};
  for (int s = 0; s < 3; ++s) {
    for (const auto& doc : *src[s]) {
      try {
        auto [n, r] = rst_pairs_of(corpus::binarize(doc.tree), map, inventory, doc.id);
        nd[s]->insert(nd[s]->end(), n.begin(), n.end());
        rd[s]->insert(rd[s]->end(), r.begin(), r.end());
      } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("document '{}': {}", doc.id, e.what()));
      }
    }
  }
  nlohmann::json prov{{"builder", "rst_pairs"},
                      {"documents", {trees.train.size(), trees.dev.size(), trees.test.size()}},
                      {"relation_classes", inventory.size()}};
  nuc.provenance = prov;
  rel.provenance = prov;
  return {std::move(nuc), std::move(rel)};
}

std::vector<int> boundary_labels(const std::vector<int>& edu_token_lengths) {
  std::vector<int> labels;
  for (int len : edu_token_lengths) {
    if (len < 1) throw ValidationError("EDU tokenizes to zero tokens");
    labels.insert(labels.end(), static_cast<std::size_t>(len - 1), 0);
    labels.push_back(1);
  }
  return labels;
}

namespace {

struct Tokenized {
  std::string text;
  std::vector<int> lengths;
};

// Tokenizes the space-joined EDUs and counts tokens per EDU by start offset.
Tokenized tokenize_edus(const std::vector<std::string>& edus, std::size_t first, std::size_t last,
                        const encoder::Tokenizer& tok) {
  Tokenized out;
  std::vector<std::size_t> starts;
  for (std::size_t e = first; e < last; ++e) {
    if (e > first) out.text += ' ';
    starts.push_back(out.text.size());
    out.text += edus[e];
  }
  out.lengths.assign(last - first, 0);
  for (const auto& t : tok.tokenize(out.text)) {
    const auto it = std::upper_bound(starts.begin(), starts.end(), t.begin);
    out.lengths[static_cast<std::size_t>(it - starts.begin()) - 1]++;
  }
  return out;
}

int total(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

}  // namespace

std::vector<SegmentationInstance> segment_document(const std::vector<std::string>& edus,
                                                   const encoder::Tokenizer& tokenizer, const std::string& doc_id,
                                                   std::size_t max_tokens) {
  if (edus.empty()) throw ValidationError(fmt::format("document '{}' has no EDUs", doc_id));
  const std::size_t specials = tokenizer.num_special_tokens(false);
  if (max_tokens <= specials) throw ValidationError("segmentation token budget leaves no room for text");
  const int budget = static_cast<int>(max_tokens - specials);

  const auto whole = tokenize_edus(edus, 0, edus.size(), tokenizer);
  for (std::size_t e = 0; e < edus.size(); ++e) {
    if (whole.lengths[e] == 0) {
      throw ValidationError(fmt::format("document '{}': EDU {} tokenizes to zero tokens", doc_id, e + 1));
    }
  }

  std::vector<SegmentationInstance> out;
  auto emit = [&](Tokenized t) {
    SegmentationInstance inst{std::move(t.text), t.lengths, boundary_labels(t.lengths), doc_id, tokenizer.name()};
    out.push_back(std::move(inst));
  };

  std::size_t first = 0;
  while (first < edus.size()) {
    Tokenized chunk = tokenize_edus(edus, first, first + 1, tokenizer);
    if (total(chunk.lengths) > budget) {
      // A single EDU over the budget: keep its leading tokens only.
      auto toks = tokenizer.tokenize(chunk.text);
      std::size_t keep = static_cast<std::size_t>(budget);
      while (true) {
        chunk.text = chunk.text.substr(0, toks[keep - 1].end);
        toks = tokenizer.tokenize(chunk.text);
        if (static_cast<int>(toks.size()) <= budget) break;
        keep = std::min(keep - 1, static_cast<std::size_t>(budget));
        if (keep == 0) throw ValidationError(fmt::format("document '{}': cannot truncate EDU to fit", doc_id));
      }
      chunk.lengths = {static_cast<int>(toks.size())};
      emit(std::move(chunk));
      ++first;
      continue;
    }
    std::size_t last = first + 1;
    while (last < edus.size()) {
      Tokenized wider = tokenize_edus(edus, first, last + 1, tokenizer);
      if (total(wider.lengths) > budget) break;
      chunk = std::move(wider);
      ++last;
    }
    if (std::find(chunk.lengths.begin(), chunk.lengths.end(), 0) != chunk.lengths.end()) {
      throw ValidationError(fmt::format("document '{}': an EDU tokenizes to zero tokens", doc_id));
    }
    emit(std::move(chunk));
    first = last;
  }
  return out;
}

DatasetSplit<SegmentationInstance> build_edu_segmentation(const TreebankSplits& trees,
                                                          const encoder::Tokenizer& tokenizer,
                                                          std::size_t max_tokens) {
  DatasetSplit<SegmentationInstance> out;
  const std::array<const std::vector<corpus::TreebankDocument>*, 3> src = {&trees.train, &trees.dev, &trees.test};
  const std::array<std::vector<SegmentationInstance>*, 3> dst = {&out.train, &out.dev, &out.test};
  for (int s = 0; s < 3; ++s) {
    for (const auto& doc : *src[s]) {
      std::vector<std::string> edus;
      for (const auto* leaf : corpus::leaves(doc.tree)) edus.push_back(leaf->text);
      auto chunks = segment_document(edus, tokenizer, doc.id, max_tokens);
      dst[s]->insert(dst[s]->end(), chunks.begin(), chunks.end());
    }
  }
  out.provenance = {{"builder", "segmentation"},
                    {"tokenizer", tokenizer.name()},
                    {"max_tokens", max_tokens},
                    {"documents", {trees.train.size(), trees.dev.size(), trees.test.size()}}};
  return out;
}

}  // namespace discprobe::tasks
