// NSP and sentence-ordering builders over plain document corpora.
#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/tasks/builders.hpp"

namespace discprobe::tasks {

std::array<std::size_t, 3> split_sizes(std::size_t count, const SplitFractions& f) {
  if (f.train < 0 || f.dev < 0 || f.test < 0 || std::abs(f.train + f.dev + f.test - 1.0) > 1e-9) {
    throw ValidationError("split fractions must be non-negative and sum to 1");
  }
  const auto dev = static_cast<std::size_t>(static_cast<double>(count) * f.dev + 1e-9);
  const auto test = static_cast<std::size_t>(static_cast<double>(count) * f.test + 1e-9);
  return {count - dev - test, dev, test};
}

std::string_view to_string(DistractorScope s) {
  return s == DistractorScope::kCrossDocument ? "cross-document" : "same-document";
}

DistractorScope distractor_scope_from_string(std::string_view s) {
  if (s == "cross-document") return DistractorScope::kCrossDocument;
  if (s == "same-document") return DistractorScope::kSameDocument;
  throw ValidationError(fmt::format("unknown distractor_scope '{}'", s));
}

namespace {

constexpr const char* kSplitNames[3] = {"train", "dev", "test"};

// Seeded document-level split: indices of the documents in each split, in
// shuffled order.
std::array<std::vector<std::size_t>, 3> assign_documents(std::size_t count, const SplitFractions& f, Rng& rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const auto sizes = split_sizes(count, f);
  std::array<std::vector<std::size_t>, 3> out;
  auto it = order.begin();
  for (int s = 0; s < 3; ++s) {
    out[s].assign(it, it + static_cast<std::ptrdiff_t>(sizes[s]));
    it += static_cast<std::ptrdiff_t>(sizes[s]);
  }
  return out;
}

void validate_documents(const std::vector<corpus::Document>& docs) {
  std::unordered_set<std::string> ids;
  for (const auto& d : docs) {
    corpus::validate(d);
    if (!ids.insert(d.id).second) throw ValidationError(fmt::format("duplicate document id '{}'", d.id));
  }
}

// Takes the first unused document (in split order) with at least min_len
// sentences; returns its index or SIZE_MAX.
std::size_t take_document(const std::vector<corpus::Document>& docs, std::vector<std::size_t>& pool,
                          std::size_t min_len) {
  for (auto it = pool.begin(); it != pool.end(); ++it) {
    if (docs[*it].sentences.size() >= min_len) {
      const std::size_t d = *it;
      pool.erase(it);
      return d;
    }
  }
  return SIZE_MAX;
}

struct NspSampler {
  const std::vector<corpus::Document>& docs;
  const std::vector<std::size_t>& split_docs;
  const std::unordered_set<std::string>* forbidden;  // test sentences, for train only
  const NspConfig& cfg;
  Rng& rng;

  bool allowed(const std::string& text, const std::vector<std::string>& chosen) const {
    if (std::find(chosen.begin(), chosen.end(), text) != chosen.end()) return false;
    return forbidden == nullptr || forbidden->count(text) == 0;
  }

  std::vector<std::string> cross_document(std::size_t source, const std::string& positive) {
    std::vector<std::string> chosen{positive};
    std::vector<std::size_t> used_docs{source};
    const int want = cfg.distractors_per_instance;
    for (int attempt = 0; static_cast<int>(chosen.size()) < want + 1; ++attempt) {
      if (attempt > 200 * want) {
        throw ValidationError(fmt::format(
            "NSP: cannot find {} distinct distractors for document '{}' (split has {} documents)", want,
            docs[source].id, split_docs.size()));
      }
      const std::size_t d = split_docs[rng.index(split_docs.size())];
      if (std::find(used_docs.begin(), used_docs.end(), d) != used_docs.end()) continue;
      const auto& sents = docs[d].sentences;
      const std::string& s = sents[rng.index(sents.size())];
      if (!allowed(s, chosen)) continue;
      chosen.push_back(s);
      used_docs.push_back(d);
    }
    chosen.erase(chosen.begin());
    return chosen;
  }

  std::vector<std::string> same_document(std::size_t source, std::size_t start, int k, const std::string& positive) {
    const auto& sents = docs[source].sentences;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < sents.size(); ++i) {
      if (i < start || i > start + k) pool.push_back(i);
    }
    rng.shuffle(pool);
    std::vector<std::string> chosen{positive};
    for (std::size_t i : pool) {
      if (static_cast<int>(chosen.size()) == cfg.distractors_per_instance + 1) break;
      if (allowed(sents[i], chosen)) chosen.push_back(sents[i]);
    }
    if (static_cast<int>(chosen.size()) < cfg.distractors_per_instance + 1) return {};
    chosen.erase(chosen.begin());
    return chosen;
  }
};

}  // namespace

DatasetSplit<PairInstance> build_nsp(const std::vector<corpus::Document>& documents, const NspConfig& cfg) {
  validate_documents(documents);
  if (cfg.distractors_per_instance < 1) throw ValidationError("NSP needs at least one distractor");
  for (const auto& [k, _] : cfg.counts_per_context_size) {
    if (k < 1) throw ValidationError(fmt::format("invalid NSP context size {}", k));
  }
  Rng rng(cfg.seed);
  auto split_docs = assign_documents(documents.size(), cfg.fractions, rng);

  std::unordered_set<std::string> test_pool;
  for (std::size_t d : split_docs[2]) {
    for (const auto& s : documents[d].sentences) test_pool.insert(s);
  }

  DatasetSplit<PairInstance> out;
  std::array<std::vector<PairInstance>*, 3> dest = {&out.train, &out.dev, &out.test};
  const bool same_doc = cfg.distractor_scope == DistractorScope::kSameDocument;
  for (int s = 0; s < 3; ++s) {
    std::vector<std::size_t> pool = split_docs[s];
    NspSampler sampler{documents, split_docs[s], s == 0 ? &test_pool : nullptr, cfg, rng};
    // Longest contexts first: they have the fewest eligible documents.
    for (auto it = cfg.counts_per_context_size.rbegin(); it != cfg.counts_per_context_size.rend(); ++it) {
      const int k = it->first;
      const std::size_t target = split_sizes(it->second, cfg.fractions)[s];
      const std::size_t min_len = static_cast<std::size_t>(k) + 1 + (same_doc ? cfg.distractors_per_instance : 0);
      std::size_t made = 0;
      while (made < target) {
        const std::size_t d = take_document(documents, pool, min_len);
        if (d == SIZE_MAX) {
          throw ValidationError(fmt::format(
              "NSP: corpus exhausted in {} split for context size {} ({} of {} instances built)",
              kSplitNames[s], k, made, target));
        }
        const auto& sents = documents[d].sentences;
        const std::size_t start = rng.index(sents.size() - static_cast<std::size_t>(k));
        const std::string& positive = sents[start + k];
        auto distractors = same_doc ? sampler.same_document(d, start, k, positive)
                                    : sampler.cross_document(d, positive);
        if (distractors.empty()) continue;
        PairInstance inst;
        inst.task = Task::kNsp;
        inst.doc_id = documents[d].id;
        inst.segments.assign(sents.begin() + static_cast<std::ptrdiff_t>(start),
                             sents.begin() + static_cast<std::ptrdiff_t>(start) + k);
        std::vector<std::size_t> slots(distractors.size() + 1);
        std::iota(slots.begin(), slots.end(), 0);
        rng.shuffle(slots);
        inst.candidates.resize(slots.size());
        inst.candidates[slots[0]] = positive;
        for (std::size_t j = 0; j < distractors.size(); ++j) inst.candidates[slots[j + 1]] = distractors[j];
        inst.label = static_cast<int>(slots[0]);
        dest[s]->push_back(std::move(inst));
        ++made;
      }
    }
    rng.shuffle(*dest[s]);
  }

  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [k, c] : cfg.counts_per_context_size) counts[std::to_string(k)] = c;
  out.provenance = {{"builder", "nsp"},
                    {"seed", cfg.seed},
                    {"documents", documents.size()},
                    {"counts_per_context_size", counts},
                    {"distractors_per_instance", cfg.distractors_per_instance},
                    {"distractor_scope", to_string(cfg.distractor_scope)},
                    {"fractions", {cfg.fractions.train, cfg.fractions.dev, cfg.fractions.test}}};
  return out;
}

OrderingInstance shuffle_window(const std::vector<std::string>& window, Rng& rng) {
  const std::size_t n = window.size();
  if (n < 2) throw ValidationError("cannot shuffle fewer than 2 sentences");
  std::vector<int> perm(n);
  bool identity = true;
  while (identity) {
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    identity = std::is_sorted(perm.begin(), perm.end());
  }
  OrderingInstance inst;
  for (std::size_t i = 0; i < n; ++i) {
    inst.sentences.push_back(window[perm[i]]);
    inst.gold_ranks.push_back(perm[i] + 1);
  }
  return inst;
}

DatasetSplit<OrderingInstance> build_ordering(const std::vector<corpus::Document>& documents,
                                              const OrderingConfig& cfg) {
  validate_documents(documents);
  for (const auto& [n, _] : cfg.counts_per_n) {
    if (n < 3 || n > 7) throw ValidationError(fmt::format("ordering n must be in 3..7, got {}", n));
  }
  Rng rng(cfg.seed);
  auto split_docs = assign_documents(documents.size(), cfg.fractions, rng);
  DatasetSplit<OrderingInstance> out;
  std::array<std::vector<OrderingInstance>*, 3> dest = {&out.train, &out.dev, &out.test};
  for (int s = 0; s < 3; ++s) {
    std::vector<std::size_t> pool = split_docs[s];
    for (auto it = cfg.counts_per_n.rbegin(); it != cfg.counts_per_n.rend(); ++it) {
      const int n = it->first;
      const std::size_t target = split_sizes(it->second, cfg.fractions)[s];
      for (std::size_t made = 0; made < target; ++made) {
        const std::size_t d = take_document(documents, pool, static_cast<std::size_t>(n));
        if (d == SIZE_MAX) {
          throw ValidationError(fmt::format(
              "ordering: corpus exhausted in {} split for n = {} ({} of {} instances built)", kSplitNames[s],
              n, made, target));
        }
        const auto& sents = documents[d].sentences;
        const std::size_t start = rng.index(sents.size() - static_cast<std::size_t>(n) + 1);
        std::vector<std::string> window(sents.begin() + static_cast<std::ptrdiff_t>(start),
                                        sents.begin() + static_cast<std::ptrdiff_t>(start) + n);
        auto inst = shuffle_window(window, rng);
        inst.doc_id = documents[d].id;
        dest[s]->push_back(std::move(inst));
      }
    }
    rng.shuffle(*dest[s]);
  }
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [n, c] : cfg.counts_per_n) counts[std::to_string(n)] = c;
  out.provenance = {{"builder", "ordering"},
                    {"seed", cfg.seed},
                    {"documents", documents.size()},
                    {"counts_per_n", counts},
                    {"fractions", {cfg.fractions.train, cfg.fractions.dev, cfg.fractions.test}}};
  return out;
}

}  // namespace discprobe::tasks
