#include "discprobe/train/dataset.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::train {

using encoder::Encoder;
using encoder::FeatureMatrix;
using encoder::Pooling;
using encoder::SegmentBudget;
using tasks::OrderingInstance;
using tasks::PairInstance;
using tasks::SegmentationInstance;
using tasks::Task;

std::size_t instance_count(const InstanceList& list) {
  return std::visit([](const auto& v) { return v.size(); }, list);
}

metrics::MetricKind metric_for(Task task) {
  switch (task) {
    case Task::kOrdering: return metrics::MetricKind::kSpearman;
    case Task::kSegmentation: return metrics::MetricKind::kMacroF1;
    default: return metrics::MetricKind::kAccuracy;
  }
}

probe::HeadKind head_for(Task task) {
  switch (task) {
    case Task::kOrdering: return probe::HeadKind::kRankLabeler;
    case Task::kSegmentation: return probe::HeadKind::kTokenTagger;
    default: return probe::HeadKind::kPairMlp;
  }
}

std::size_t ProbeLayout::num_groups() const { return groups.empty() ? 0 : static_cast<std::size_t>(groups.back()) + 1; }

namespace {

template <typename T>
const std::vector<T>& expect(const InstanceList& list, Task task) {
  if (const auto* v = std::get_if<std::vector<T>>(&list)) return *v;
  throw ValidationError(fmt::format("instances do not match task '{}'", tasks::to_string(task)));
}

bool has_candidates(Task t) { return t == Task::kNsp || t == Task::kCloze; }

}  // namespace

ProbeLayout make_layout(Task task, const InstanceList& instances, int num_classes) {
  ProbeLayout l;
  l.task = task;
  if (has_candidates(task)) {
    l.kind = EvalKind::kGroupArgmax;
    l.num_classes = 2;
    const auto& v = expect<PairInstance>(instances, task);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].candidates.size() < 2) throw ValidationError(fmt::format("instance {} has fewer than 2 candidates", i));
      for (std::size_t c = 0; c < v[i].candidates.size(); ++c) {
        l.labels.push_back(static_cast<int>(c) == v[i].label ? 1 : 0);
        l.groups.push_back(static_cast<int>(i));
      }
      l.group_labels.push_back(v[i].label);
    }
  } else if (task == Task::kOrdering) {
    l.kind = EvalKind::kOrdering;
    l.num_classes = probe::kMaxRank;
    const auto& v = expect<OrderingInstance>(instances, task);
    for (std::size_t i = 0; i < v.size(); ++i) {
      tasks::validate(v[i]);
      for (int r : v[i].gold_ranks) {
        l.labels.push_back(r - 1);
        l.groups.push_back(static_cast<int>(i));
      }
      l.gold_ranks.push_back(v[i].gold_ranks);
    }
  } else if (task == Task::kSegmentation) {
    l.kind = EvalKind::kTagging;
    l.num_classes = 2;
    const auto& v = expect<SegmentationInstance>(instances, task);
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (int b : v[i].boundary_labels) {
        l.labels.push_back(b);
        l.groups.push_back(static_cast<int>(i));
      }
    }
  } else {
    l.kind = EvalKind::kClassify;
    l.num_classes = task == Task::kNuclearity ? 3 : num_classes;
    if (l.num_classes < 2) {
      throw ValidationError(fmt::format("task '{}' needs a label inventory of at least 2 classes", tasks::to_string(task)));
    }
    const auto& v = expect<PairInstance>(instances, task);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].label < 0 || v[i].label >= l.num_classes) {
        throw ValidationError(fmt::format("instance {} label {} outside 0..{}", i, v[i].label, l.num_classes - 1));
      }
      l.labels.push_back(v[i].label);
      l.groups.push_back(static_cast<int>(i));
    }
  }
  return l;
}

std::string_view to_string(ContextPooling c) { return c == ContextPooling::kWhole ? "whole" : "per-sentence-padded"; }

ContextPooling context_pooling_from_string(std::string_view s) {
  if (s == "whole") return ContextPooling::kWhole;
  if (s == "per-sentence-padded") return ContextPooling::kPerSentencePadded;
  throw ValidationError(fmt::format("unknown context pooling '{}'", s));
}

std::vector<SegmentBudget> task_budgets(Task task) {
  using encoder::Keep;
  switch (task) {
    case Task::kNsp:
    case Task::kCloze: return {{450, Keep::kLast}, {50, Keep::kFirst}};
    case Task::kConnective:
    case Task::kNuclearity:
    case Task::kRelation: return {{250, Keep::kFirst}, {250, Keep::kFirst}};
    case Task::kOrdering: return {{50, Keep::kFirst}};
    case Task::kSegmentation: return {{512, Keep::kFirst}};
  }
  return {};
}

namespace {

using RowSink = std::function<void(int layer_index, const Eigen::VectorXf& row)>;

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

// Context sentence slots followed by the candidate mean. Sentences beyond the
// last kContextSlots are dropped from the front, and slots whose tokens were
// all truncated stay zero.
Eigen::VectorXf sentence_slots(const Encoder& enc, const encoder::States& states, const encoder::PreparedInput& in,
                               const std::vector<std::string>& sentences) {
  const Eigen::Index h = states.cols();
  Eigen::VectorXf out = Eigen::VectorXf::Zero(h * (kContextSlots + 1));
  std::vector<std::size_t> starts;
  std::size_t at = 0;
  for (const auto& s : sentences) {
    starts.push_back(at);
    at += s.size() + 1;
  }
  const std::size_t first = sentences.size() > kContextSlots ? sentences.size() - kContextSlots : 0;
  std::vector<Eigen::VectorXf> sums(sentences.size(), Eigen::VectorXf::Zero(h));
  std::vector<int> counts(sentences.size(), 0);
  const int base = in.spans[0].first;
  for (std::size_t t = 0; t < in.tokens[0].size(); ++t) {
    const std::size_t b = in.tokens[0][t].begin;
    std::size_t s = static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), b) - starts.begin()) - 1;
    sums[s] += states.row(base + static_cast<int>(t)).transpose();
    ++counts[s];
  }
  for (std::size_t s = first; s < sentences.size(); ++s) {
    if (counts[s] > 0) out.segment(static_cast<Eigen::Index>(s - first) * h, h) = sums[s] / static_cast<float>(counts[s]);
  }
  out.tail(h) = enc.pool(states, in, 1, Pooling::kMean);
  return out;
}

void pair_rows(const Encoder& enc, const std::vector<std::string>& segs, const std::vector<SegmentBudget>& budgets,
               const FeatureOptions& opts, const std::vector<std::string>* context_sentences, const RowSink& sink) {
  const auto in = enc.prepare(segs, budgets);
  const auto states = enc.layer_states(in);
  for (std::size_t l = 0; l < states.size(); ++l) {
    if (context_sentences != nullptr && opts.context_pooling == ContextPooling::kPerSentencePadded) {
      sink(static_cast<int>(l), sentence_slots(enc, states[l], in, *context_sentences));
    } else if (opts.pooling == Pooling::kCls) {
      sink(static_cast<int>(l), enc.pool(states[l], in, 0, Pooling::kCls));
    } else {
      const Eigen::VectorXf a = enc.pool(states[l], in, 0, Pooling::kMean);
      const Eigen::VectorXf b = enc.pool(states[l], in, 1, Pooling::kMean);
      Eigen::VectorXf row(a.size() + b.size());
      row << a, b;
      sink(static_cast<int>(l), row);
    }
  }
}

void extract(const Encoder& enc, Task task, const InstanceList& instances, const FeatureOptions& opts,
             const RowSink& sink) {
  const auto budgets = task_budgets(task);
  if (opts.pooling == Pooling::kCls && opts.context_pooling == ContextPooling::kWhole) {
    // Fail before any encoding when the model has no classification token.
    if (enc.tokenizer().cls_position(task != Task::kOrdering && task != Task::kSegmentation) < 0) {
      throw ValidationError(fmt::format("model '{}' has no classification token; use mean pooling", enc.spec().name));
    }
  }
  if (has_candidates(task)) {
    for (const auto& inst : expect<PairInstance>(instances, task)) {
      const std::string ctx = join(inst.segments);
      for (const auto& cand : inst.candidates) pair_rows(enc, {ctx, cand}, budgets, opts, &inst.segments, sink);
    }
  } else if (task == Task::kOrdering) {
    for (const auto& inst : expect<OrderingInstance>(instances, task)) {
      for (const auto& s : inst.sentences) {
        const auto reps = enc.encode_all({s}, opts.pooling, budgets);
        for (std::size_t l = 0; l < reps.size(); ++l) sink(static_cast<int>(l), reps[l].concatenated());
      }
    }
  } else if (task == Task::kSegmentation) {
    for (const auto& inst : expect<SegmentationInstance>(instances, task)) {
      const auto reps = enc.encode_tokens_all(inst.text, budgets[0].max_tokens);
      const auto expected = static_cast<Eigen::Index>(inst.boundary_labels.size());
      if (reps.front().vectors.rows() != expected) {
        throw ValidationError(fmt::format(
            "document '{}' has {} tokens under '{}' but its labels cover {}; rebuild segmentation data with this "
            "model's tokenizer",
            inst.doc_id, reps.front().vectors.rows(), enc.spec().name, expected));
      }
      for (std::size_t l = 0; l < reps.size(); ++l) {
        for (Eigen::Index r = 0; r < reps[l].vectors.rows(); ++r) sink(static_cast<int>(l), reps[l].vectors.row(r).transpose());
      }
    }
  } else {
    for (const auto& inst : expect<PairInstance>(instances, task)) {
      if (inst.segments.size() != 2) throw ValidationError("pair instances need exactly two segments");
      pair_rows(enc, inst.segments, budgets, opts, nullptr, sink);
    }
  }
}

}  // namespace

std::vector<FeatureMatrix> extract_features(const Encoder& enc, Task task, const InstanceList& instances,
                                            const FeatureOptions& opts) {
  const auto layers = static_cast<std::size_t>(enc.spec().num_layers);
  std::vector<std::vector<Eigen::VectorXf>> rows(layers);
  extract(enc, task, instances, opts, [&](int l, const Eigen::VectorXf& r) { rows[static_cast<std::size_t>(l)].push_back(r); });
  std::vector<FeatureMatrix> out;
  for (const auto& block : rows) {
    FeatureMatrix m(static_cast<Eigen::Index>(block.size()), block.empty() ? 0 : block.front().size());
    for (std::size_t i = 0; i < block.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = block[i].transpose();
    out.push_back(std::move(m));
  }
  return out;
}

std::string content_hash(Task task, std::string_view split, const InstanceList& instances, const FeatureOptions& opts) {
  io::Sha256 h;
  h.update(fmt::format("task={}\nsplit={}\ncontext={}\n", tasks::to_string(task), split, to_string(opts.context_pooling)));
  for (const auto& b : task_budgets(task)) {
    h.update(fmt::format("budget={}:{}\n", b.max_tokens, b.keep == encoder::Keep::kFirst ? "first" : "last"));
  }
  std::visit(
      [&](const auto& v) {
        for (const auto& inst : v) h.update(tasks::to_json(inst).dump() + "\n");
      },
      instances);
  return h.hex_digest();
}

namespace {

encoder::FeatureMeta key_for(const Encoder& enc, int layer, const FeatureOptions& opts, const std::string& hash) {
  return {enc.spec().name, layer, std::string(encoder::to_string(opts.pooling)), 0, 0, hash};
}

}  // namespace

bool warm_cache(const Encoder& enc, const encoder::FeatureCache& cache, Task task, std::string_view split,
                const InstanceList& instances, const FeatureOptions& opts) {
  const std::string hash = content_hash(task, split, instances, opts);
  bool complete = true;
  for (int l = 1; l <= enc.spec().num_layers && complete; ++l) {
    const auto p = cache.path_for(key_for(enc, l, opts, hash));
    complete = std::filesystem::exists(p) && std::filesystem::exists(p.string() + ".json");
  }
  if (complete) return false;
  spdlog::info("encoding {} {} split with {} ({} instances)", tasks::to_string(task), split, enc.spec().name,
               instance_count(instances));
  std::vector<encoder::FeatureCache::Writer> writers;
  for (int l = 1; l <= enc.spec().num_layers; ++l) writers.push_back(cache.writer(key_for(enc, l, opts, hash)));
  extract(enc, task, instances, opts,
          [&](int l, const Eigen::VectorXf& r) { writers[static_cast<std::size_t>(l)].append(r); });
  for (auto& w : writers) w.commit();
  return true;
}

FeatureMatrix cached_features(const Encoder& enc, const encoder::FeatureCache& cache, Task task, std::string_view split,
                              const InstanceList& instances, const FeatureOptions& opts, int layer) {
  enc.spec().check_layer(layer);
  const std::string hash = content_hash(task, split, instances, opts);
  const auto key = key_for(enc, layer, opts, hash);
  if (auto m = cache.load(key)) return std::move(*m);
  std::filesystem::remove(cache.path_for(key).string() + ".json");
  warm_cache(enc, cache, task, split, instances, opts);
  if (auto m = cache.load(key)) return std::move(*m);
  throw IoError(fmt::format("feature cache entry '{}' unreadable after extraction", cache.path_for(key).string()));
}

EvalResult evaluate(const probe::Mlp& head, const probe::Matrix& x, const ProbeLayout& layout, const EvalOptions& opts) {
  if (layout.rows() == 0) throw ValidationError("cannot evaluate an empty split");
  if (static_cast<std::size_t>(x.rows()) != layout.rows()) {
    throw ValidationError(fmt::format("{} feature rows for {} labels", x.rows(), layout.rows()));
  }
  const probe::Matrix logp = head.forward(x);
  EvalResult r;
  r.metric = metric_for(layout.task);
  const std::size_t n = layout.rows();
  switch (layout.kind) {
    case EvalKind::kClassify: {
      std::vector<int> preds(n);
      for (std::size_t i = 0; i < n; ++i) logp.row(static_cast<Eigen::Index>(i)).maxCoeff(&preds[i]);
      r.value = metrics::accuracy(preds, layout.labels);
      break;
    }
    case EvalKind::kGroupArgmax: {
      std::vector<int> preds;
      std::vector<double> probs;
      for (std::size_t i = 0; i < n; ++i) {
        probs.push_back(std::exp(static_cast<double>(logp(static_cast<Eigen::Index>(i), 1))));
        if (i + 1 == n || layout.groups[i + 1] != layout.groups[i]) {
          preds.push_back(probe::argmax_lowest(probs));
          probs.clear();
        }
      }
      r.value = metrics::accuracy(preds, layout.group_labels);
      break;
    }
    case EvalKind::kOrdering: {
      std::vector<std::vector<int>> pred_ranks;
      std::size_t start = 0;
      for (std::size_t g = 0; g < layout.gold_ranks.size(); ++g) {
        const int k = static_cast<int>(layout.gold_ranks[g].size());
        const Eigen::MatrixXd scores = logp.middleRows(static_cast<Eigen::Index>(start), k).cast<double>();
        auto pred = opts.decode_mode == probe::DecodeMode::kAssignment ? probe::decode_order_log(scores, k)
                                                                        : probe::decode_order_unconstrained(scores, k);
        r.instance_rho.push_back(metrics::spearman(pred, layout.gold_ranks[g]));
        r.instance_n.push_back(k);
        pred_ranks.push_back(std::move(pred));
        start += static_cast<std::size_t>(k);
      }
      r.value = metrics::mean_spearman(pred_ranks, layout.gold_ranks);
      break;
    }
    case EvalKind::kTagging: {
      std::vector<int> preds(n);
      for (std::size_t i = 0; i < n; ++i) {
        preds[i] = std::exp(static_cast<double>(logp(static_cast<Eigen::Index>(i), 1))) > probe::kTagThreshold ? 1 : 0;
      }
      r.value = metrics::macro_f1(preds, layout.labels, 2);
      break;
    }
  }
  return r;
}

}  // namespace discprobe::train
