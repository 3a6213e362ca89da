// Acceptance checks, one per criterion: `acceptance <1..8>`.
// Each run prints a single "criterion N: PASS|FAIL <detail>" line and exits
// non-zero on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <fmt/core.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/common/rng.hpp"
#include "discprobe/corpus/binarize.hpp"
#include "discprobe/corpus/dis_format.hpp"
#include "discprobe/corpus/tree_interchange.hpp"
#include "discprobe/encoder/hf_tokenizer.hpp"
#include "discprobe/experiment/config.hpp"
#include "discprobe/experiment/sweep.hpp"
#include "discprobe/metrics/aggregate.hpp"
#include "discprobe/metrics/metrics.hpp"
#include "discprobe/probe/heads.hpp"
#include "discprobe/tasks/builders.hpp"
#include "discprobe/train/run_record.hpp"

namespace fs = std::filesystem;
namespace dc = discprobe::corpus;
using namespace discprobe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Decoder against exhaustive search

probe::RankDistribution random_distribution(Rng& rng, int n, bool coarse) {
  probe::RankDistribution d;
  d.n = n;
  d.probs = Eigen::MatrixXd::Zero(n, 7);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int r = 0; r < 7; ++r) {
      // Coarse rows draw from a handful of values so tied optima are common.
      const double v = coarse ? static_cast<double>(1 + rng.index(3)) : -std::log(1.0 - rng.uniform());
      d.probs(i, r) = v;
      total += v;
    }
    d.probs.row(i) /= total;
  }
  return d;
}

Outcome criterion_decode() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  int agree = 0, total = 0;
  std::string first_miss;
  for (int n = 3; n <= 7; ++n) {
    for (int k = 0; k < 1000; ++k) {
      const auto d = random_distribution(rng, n, k % 4 == 0);
      const auto fast = probe::decode_order(d);
      const auto brute = probe::decode_order_brute_force(d.probs.array().log().matrix(), n);
      ++total;
      if (fast == brute) {
        ++agree;
      } else if (first_miss.empty()) {
        first_miss = fmt::format(" first mismatch n={} #{}: {} vs {}", n, k, fast, brute);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {agree == total && secs < 60.0,
          fmt::format("{}/{} distributions agree with n! search, {:.2f}s{}", agree, total, secs, first_miss)};
}

// ---------------------------------------------------------------------------
// 2. Metric oracles

double pearson_of_ranks(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double f1_oracle(const std::vector<int>& p, const std::vector<int>& g, int classes) {
  double sum = 0;
  for (int c = 0; c < classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      tp += p[i] == c && g[i] == c;
      fp += p[i] == c && g[i] != c;
      fn += p[i] != c && g[i] == c;
    }
    if (tp == 0) continue;
    const double prec = static_cast<double>(tp) / (tp + fp);
    const double rec = static_cast<double>(tp) / (tp + fn);
    sum += 2 * prec * rec / (prec + rec);
  }
  return sum / classes;
}

Outcome criterion_metrics() {
  Rng rng(77);
  double worst_rho = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 2 + static_cast<int>(rng.index(19));
    std::vector<int> a(n), b(n);
    std::iota(a.begin(), a.end(), 1);
    std::iota(b.begin(), b.end(), 1);
    rng.shuffle(a);
    rng.shuffle(b);
    worst_rho = std::max(worst_rho, std::abs(metrics::spearman(a, b) - pearson_of_ranks(a, b)));
  }

  // Two literal cases worked out by hand before the random ones.
  double worst_f1 = std::max(
      std::abs(metrics::macro_f1(std::vector<int>{0, 1, 1, 0}, std::vector<int>{0, 1, 0, 0}, 2) - (0.8 + 2.0 / 3) / 2),
      std::abs(metrics::macro_f1(std::vector<int>{2, 2, 2}, std::vector<int>{0, 1, 2}, 3) - 0.5 / 3));
  for (int k = 0; k < 50; ++k) {
    const int len = 1 + static_cast<int>(rng.index(12));
    const int classes = 2 + static_cast<int>(rng.index(3));
    std::vector<int> p(len), g(len);
    for (int i = 0; i < len; ++i) {
      p[i] = static_cast<int>(rng.index(classes));
      g[i] = static_cast<int>(rng.index(classes));
    }
    worst_f1 = std::max(worst_f1, std::abs(metrics::macro_f1(p, g, classes) - f1_oracle(p, g, classes)));
  }

  bool acc_exact = true;
  for (int k = 0; k < 200; ++k) {
    const int len = 1 + static_cast<int>(rng.index(40));
    std::vector<int> p(len), g(len);
    int hits = 0;
    for (int i = 0; i < len; ++i) {
      p[i] = static_cast<int>(rng.index(3));
      g[i] = static_cast<int>(rng.index(3));
      hits += p[i] == g[i];
    }
    acc_exact &= metrics::accuracy(p, g) == static_cast<double>(hits) / len;
  }

  return {worst_rho <= 1e-9 && worst_f1 <= 1e-9 && acc_exact,
          fmt::format("max |spearman - pearson-on-ranks| {:.2e}, max |macro_f1 - oracle| {:.2e}, accuracy exact: {}",
                      worst_rho, worst_f1, acc_exact)};
}

// ---------------------------------------------------------------------------
// 3. Aggregation of the shipped score tables

Outcome criterion_aggregate() {
  const auto t0 = Clock::now();
  const auto m = metrics::read_score_csv(fs::path(DISCPROBE_DATA) / "appendix" / "english_base.csv");
  bool extremes = true;
  std::string bad_task;
  for (const auto& [task, grid] : m.tasks) {
    const auto norm = metrics::min_max_normalize(grid);
    double lo = 1e9, hi = -1e9;
    for (const auto& [_, v] : norm) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo != 0.0 || hi != 1.0) {
      extremes = false;
      bad_task = task;
    }
  }
  const auto avg = metrics::aggregate(m);
  const bool deterministic = metrics::aggregate(m) == avg;
  const auto [cell, value] = metrics::argmax(avg);
  const double secs = seconds_since(t0);
  const bool family = cell.first.rfind("roberta", 0) == 0 || cell.first.rfind("bart", 0) == 0;
  const bool location = family && cell.second <= 6;
  return {extremes && deterministic && location && secs < 1.0,
          fmt::format("{} tasks normalized to [0,1] exactly: {}{}; global max {} layer {} = {:.4f} "
                      "(RoBERTa/BART layer <= 6: {}); deterministic: {}; {:.3f}s",
                      m.tasks.size(), extremes, bad_task.empty() ? "" : " (failed on " + bad_task + ")",
                      cell.first, cell.second, value, location, deterministic, secs)};
}

// ---------------------------------------------------------------------------
// 4. DIS round trip and binarization

dc::DiscourseTree leaf(int id, const std::string& rel) {
  dc::DiscourseTree t;
  t.node = dc::EduLeaf{id, fmt::format("unit {} text.", id)};
  t.parent_relation = rel;
  return t;
}

// Random n-ary tree over EDUs first..first+count-1 with at most 8 children per node.
dc::DiscourseTree random_tree(Rng& rng, int first, int count, const std::string& rel) {
  if (count == 1) return leaf(first, rel);
  const int kids = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(std::min(count, 8) - 1)));
  std::vector<int> sizes(kids, 1);
  for (int extra = count - kids; extra > 0; --extra) sizes[rng.index(kids)]++;
  static const std::vector<std::string> rels = {"elaboration", "attribution", "contrast", "background", "cause"};
  const bool multinuclear = rng.index(3) == 0;
  const std::string multi = rng.index(2) ? "list" : "sequence";
  const std::size_t nucleus = rng.index(kids);
  dc::RelationNode node;
  int at = first;
  for (int k = 0; k < kids; ++k) {
    const bool nuc = multinuclear || static_cast<std::size_t>(k) == nucleus;
    const std::string r = multinuclear ? multi : nuc ? std::string("span") : rels[rng.index(rels.size())];
    node.children.push_back(random_tree(rng, at, sizes[k], r));
    node.nuclearities.push_back(nuc ? dc::Nuclearity::kNucleus : dc::Nuclearity::kSatellite);
    at += sizes[k];
  }
  node.relation = dc::derive_relation(node.children, node.nuclearities);
  dc::DiscourseTree t;
  t.node = std::move(node);
  t.parent_relation = rel;
  return t;
}

template <typename Tree>
std::vector<std::pair<int, std::string>> leaf_sequence(const Tree& t) {
  std::vector<std::pair<int, std::string>> out;
  for (const auto* l : dc::leaves(t)) out.emplace_back(l->edu_id, l->text);
  return out;
}

Outcome criterion_dis() {
  const auto t0 = Clock::now();
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(fs::path(DISCPROBE_FIXTURES) / "dis")) {
    if (e.path().extension() == ".dis") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::size_t round_trips = 0;
  std::string failure;
  for (const auto& f : files) {
    try {
      const auto t = dc::read_dis_file(f);
      if (dc::parse_dis(dc::serialize_dis(t)) == t) {
        ++round_trips;
      } else if (failure.empty()) {
        failure = " round trip differs for " + f.filename().string();
      }
    } catch (const Error& e) {
      if (failure.empty()) failure = fmt::format(" {}: {}", f.filename().string(), e.what());
    }
  }

  Rng rng(4242);
  int preserved = 0;
  for (int k = 0; k < 1000; ++k) {
    const int edus = 1 + static_cast<int>(rng.index(30));
    const auto t = random_tree(rng, 1, edus, "ROOT");
    const auto b = dc::binarize(t);
    preserved += leaf_sequence(b) == leaf_sequence(t);
  }
  const double secs = seconds_since(t0);
  return {!files.empty() && round_trips == files.size() && preserved == 1000 && secs < 60.0,
          fmt::format("{}/{} .dis fixtures round-trip; {}/1000 binarized trees keep EDU count and order; {:.2f}s{}",
                      round_trips, files.size(), preserved, secs, failure)};
}

// ---------------------------------------------------------------------------
// 5. Builder distributions

std::vector<dc::Document> synthetic_corpus(std::size_t docs, std::size_t sentences) {
  static const std::vector<std::string> nouns = {"harbor", "council", "orchard", "engine", "archive",
                                                 "valley", "market", "signal", "bridge", "library"};
  static const std::vector<std::string> verbs = {"opened", "closed", "moved", "grew", "faded", "returned"};
  Rng rng(99);
  std::vector<dc::Document> out;
  out.reserve(docs);
  for (std::size_t d = 0; d < docs; ++d) {
    dc::Document doc;
    doc.id = fmt::format("synthetic-{:05}", d);
    for (std::size_t s = 0; s < sentences; ++s) {
      // Every fifth sentence comes from a small shared pool, so the same
      // sentence appears in documents of every split.
      if (s % 5 == 4) {
        doc.sentences.push_back(fmt::format("The {} {} again.", nouns[rng.index(nouns.size())],
                                            verbs[rng.index(verbs.size())]));
      } else {
        doc.sentences.push_back(fmt::format("In document {} the {} {} at step {}.", d, nouns[(d + s) % nouns.size()],
                                            verbs[(d * 7 + s) % verbs.size()], s));
      }
    }
    out.push_back(std::move(doc));
  }
  return out;
}

template <typename T, typename F>
std::map<int, std::size_t> histogram(const tasks::DatasetSplit<T>& split, F size_of) {
  std::map<int, std::size_t> h;
  for (const auto* part : {&split.train, &split.dev, &split.test}) {
    for (const auto& inst : *part) h[size_of(inst)]++;
  }
  return h;
}

std::string show(const std::map<int, std::size_t>& h) {
  std::string s;
  for (const auto& [k, v] : h) s += fmt::format("{}{}:{}", s.empty() ? "" : " ", k, v);
  return s;
}

Outcome criterion_builders() {
  const auto corpus = synthetic_corpus(13000, 10);
  const auto nsp = tasks::build_nsp(corpus, tasks::NspConfig{});
  const auto nsp_hist = histogram(nsp, [](const tasks::PairInstance& i) { return static_cast<int>(i.segments.size()); });
  const std::map<int, std::size_t> nsp_want = {{2, 2500}, {4, 2500}, {6, 2500}, {8, 2500}};

  std::map<std::string, const dc::Document*> by_id;
  for (const auto& d : corpus) by_id[d.id] = &d;
  std::unordered_set<std::string> test_sentences;
  for (const auto& inst : nsp.test) {
    for (const auto& s : by_id.at(inst.doc_id)->sentences) test_sentences.insert(s);
  }
  std::size_t leaks = 0, checked = 0;
  for (const auto& inst : nsp.train) {
    for (std::size_t c = 0; c < inst.candidates.size(); ++c) {
      if (static_cast<int>(c) == inst.label) continue;
      ++checked;
      leaks += test_sentences.count(inst.candidates[c]);
    }
  }

  const auto ord = tasks::build_ordering(corpus, tasks::OrderingConfig{});
  const auto ord_hist =
      histogram(ord, [](const tasks::OrderingInstance& i) { return static_cast<int>(i.sentences.size()); });
  const std::map<int, std::size_t> ord_want = {{3, 2000}, {4, 2000}, {5, 2000}, {6, 2000}, {7, 2000}};

  // Segmentation over random treebank documents, with a budget small enough
  // that long documents are split.
  const auto tok = encoder::load_tokenizer(fs::path(DISCPROBE_FIXTURES) / "models" / "tiny-bert");
  Rng rng(5);
  tasks::TreebankSplits trees;
  std::size_t edus_total = 0;
  for (int d = 0; d < 300; ++d) {
    const int edus = 1 + static_cast<int>(rng.index(40));
    edus_total += static_cast<std::size_t>(edus);
    auto& part = d % 10 == 0 ? trees.test : d % 10 == 1 ? trees.dev : trees.train;
    part.push_back({fmt::format("tree-{:03}", d), random_tree(rng, 1, edus, "ROOT")});
  }
  const auto seg = tasks::build_edu_segmentation(trees, *tok, 48);
  std::size_t seg_ok = 0, seg_n = 0, edus_seen = 0;
  for (const auto* part : {&seg.train, &seg.dev, &seg.test}) {
    for (const auto& inst : *part) {
      ++seg_n;
      const int ones = std::accumulate(inst.boundary_labels.begin(), inst.boundary_labels.end(), 0);
      seg_ok += static_cast<std::size_t>(ones) == inst.edu_token_lengths.size();
      edus_seen += inst.edu_token_lengths.size();
    }
  }

  const bool pass = nsp_hist == nsp_want && leaks == 0 && ord_hist == ord_want && seg_n > 0 && seg_ok == seg_n &&
                    edus_seen == edus_total;
  return {pass, fmt::format("NSP per context size [{}]; {} train distractors, {} from test documents; "
                            "ordering per n [{}]; segmentation sum(labels)=#EDUs on {}/{} instances "
                            "({} of {} EDUs covered)",
                            show(nsp_hist), checked, leaks, show(ord_hist), seg_ok, seg_n, edus_seen, edus_total)};
}

// ---------------------------------------------------------------------------
// 6 and 7. Probing a base-size bidirectional encoder on NSP

struct ProbeRun {
  std::map<int, train::RunRecord> by_layer;
  nlohmann::json manifest;
};

fs::path work_dir() {
  if (const char* w = std::getenv("DISCPROBE_ACCEPTANCE_WORK")) return w;
  return fs::path(DISCPROBE_BINARY_DIR) / "acceptance_work";
}

// Returns an empty string when the inputs exist, otherwise the reason they do not.
std::string probe_inputs(fs::path& checkpoint, fs::path& dataset) {
  const char* ckpt = std::getenv("DISCPROBE_BERT_BASE");
  const char* data = std::getenv("DISCPROBE_NSP_DATASET");
  if (!ckpt || !fs::exists(fs::path(ckpt) / "config.json")) {
    return "no 12-layer base checkpoint: set DISCPROBE_BERT_BASE to a bert-base-uncased directory "
           "(config.json, weights, vocab)";
  }
  if (!data || !fs::exists(fs::path(data) / "manifest.json")) {
    return "no NSP dataset: set DISCPROBE_NSP_DATASET to the output of `discprobe build --task nsp`";
  }
  checkpoint = ckpt;
  dataset = data;
  return {};
}

ProbeRun run_nsp_probe(const fs::path& checkpoint, const fs::path& dataset, const std::string& run_name) {
  const fs::path root = work_dir();
  fs::create_directories(root);
  nlohmann::json reg = {{"models", {{{"name", "bert-base-uncased"},
                                     {"checkpoint", fs::absolute(checkpoint).string()},
                                     {"arch", "ENC"},
                                     {"num_layers", 12}}}}};
  io::write_file_atomic(root / "registry.json", reg.dump(2));

  experiment::ExperimentConfig cfg;
  cfg.registry = root / "registry.json";
  cfg.models = {"bert-base-uncased"};
  cfg.tasks = {tasks::Task::kNsp};
  cfg.layers = {1, 12};
  cfg.seeds = {1};
  cfg.datasets[tasks::Task::kNsp] = dataset;
  cfg.subsample = {{"train", 1000}, {"dev", 500}, {"test", 500}};
  cfg.out = root / run_name;
  cfg.cache_dir = root / "cache";
  fs::remove_all(cfg.out);
  const auto summary = experiment::cmd_sweep(cfg);
  if (summary.failed > 0) {
    throw ValidationError(fmt::format("sweep failed: {}", summary.failures.front().dump()));
  }
  ProbeRun run;
  for (const auto& r : train::read_run_records(experiment::records_path(cfg.out, "bert-base-uncased", tasks::Task::kNsp))) {
    run.by_layer[r.layer] = r;
  }
  run.manifest = io::read_json(cfg.out / "manifest.json");
  return run;
}

Outcome criterion_probe() {
  fs::path checkpoint, dataset;
  if (auto why = probe_inputs(checkpoint, dataset); !why.empty()) return {false, why};
  const auto t0 = Clock::now();
  const auto run = run_nsp_probe(checkpoint, dataset, "probe");
  const double l1 = run.by_layer.at(1).value;
  const double l12 = run.by_layer.at(12).value;
  return {l12 - l1 >= 0.30 && l12 >= 0.80,
          fmt::format("layer 1 accuracy {:.3f}, layer 12 accuracy {:.3f}, gap {:.3f} (need >= 0.30 and layer 12 >= 0.80); "
                      "{:.0f}s",
                      l1, l12, l12 - l1, seconds_since(t0))};
}

Outcome criterion_determinism() {
  fs::path checkpoint, dataset;
  if (auto why = probe_inputs(checkpoint, dataset); !why.empty()) return {false, why};
  const auto a = run_nsp_probe(checkpoint, dataset, "repeat_a");
  const auto b = run_nsp_probe(checkpoint, dataset, "repeat_b");
  bool same = a.by_layer.size() == b.by_layer.size();
  for (const auto& [layer, r] : a.by_layer) {
    const auto it = b.by_layer.find(layer);
    same &= it != b.by_layer.end() && it->second.value == r.value &&
            it->second.epochs == r.epochs;
  }
  bool weights = true;
  for (const auto* m : {&a.manifest, &b.manifest}) {
    const auto& entry = (*m)["models"]["bert-base-uncased"];
    weights &= entry["weights_checksum_before"] == entry["weights_checksum_after"];
  }
  weights &= a.manifest["models"]["bert-base-uncased"]["weights_checksum_before"] ==
             b.manifest["models"]["bert-base-uncased"]["weights_checksum_before"];
  return {same && weights, fmt::format("run records bit-identical across repeats: {}; weight checksums unchanged: {}",
                                       same, weights)};
}

// ---------------------------------------------------------------------------
// 8. Ordering breakdown on a noisy predictor

Outcome criterion_breakdown() {
  Rng rng(8);
  std::vector<metrics::OrderingInstanceResult> results;
  for (int n = 3; n <= 7; ++n) {
    const double noise = 0.4 * (n - 2);  // rank noise grows with n
    for (int k = 0; k < 1000; ++k) {
      std::vector<int> gold(n);
      std::iota(gold.begin(), gold.end(), 1);
      rng.shuffle(gold);
      // Each sentence gets a distribution over ranks centred on a noisy copy
      // of its gold rank; the decoder turns these into a permutation.
      probe::RankDistribution d;
      d.n = n;
      d.probs = Eigen::MatrixXd::Zero(n, 7);
      for (int i = 0; i < n; ++i) {
        const double centre = gold[i] + rng.normal(0.0, noise);
        double total = 0;
        for (int r = 1; r <= 7; ++r) {
          d.probs(i, r - 1) = std::exp(-0.5 * (r - centre) * (r - centre));
          total += d.probs(i, r - 1);
        }
        d.probs.row(i) /= total;
      }
      const auto pred = probe::decode_order(d);
      results.push_back({"synthetic", 1, 1, n, metrics::spearman(pred, gold)});
    }
  }
  const auto buckets = metrics::ordering_breakdown(results, "synthetic", 1);
  bool decreasing = buckets.size() == 5;
  std::string means;
  double prev = 2.0;
  for (const auto& [n, b] : buckets) {
    decreasing &= b.mean_rho < prev;
    prev = b.mean_rho;
    means += fmt::format("{}n={}:{:.3f}", means.empty() ? "" : " ", n, b.mean_rho);
  }
  return {decreasing, fmt::format("mean rho by n [{}], strictly decreasing: {}", means, decreasing)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome()>> criteria = {
      {1, criterion_decode},      {2, criterion_metrics}, {3, criterion_aggregate},   {4, criterion_dis},
      {5, criterion_builders},    {6, criterion_probe},   {7, criterion_determinism}, {8, criterion_breakdown}};
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (const auto& [k, _] : criteria) which.push_back(k);
  }
  bool all = true;
  for (int k : which) {
    const auto it = criteria.find(k);
    Outcome o;
    if (it == criteria.end()) {
      o = {false, "unknown criterion"};
    } else {
      try {
        o = it->second();
      } catch (const std::exception& e) {
        o = {false, fmt::format("error: {}", e.what())};
      }
    }
    std::cout << fmt::format("criterion {}: {} {}", k, o.pass ? "PASS" : "FAIL", o.detail) << std::endl;
    all &= o.pass;
  }
  return all ? 0 : 1;
}
