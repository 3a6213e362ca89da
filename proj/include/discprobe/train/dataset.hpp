#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "discprobe/encoder/encoder.hpp"
#include "discprobe/encoder/feature_cache.hpp"
#include "discprobe/metrics/metrics.hpp"
#include "discprobe/probe/heads.hpp"
#include "discprobe/probe/mlp.hpp"
#include "discprobe/tasks/instances.hpp"

namespace discprobe::train {

using InstanceList = std::variant<std::vector<tasks::PairInstance>, std::vector<tasks::OrderingInstance>,
                                  std::vector<tasks::SegmentationInstance>>;

std::size_t instance_count(const InstanceList& list);

// How rows of a feature matrix are turned back into task predictions.
enum class EvalKind {
  kGroupArgmax,  // NSP, cloze: one binary-scored row per candidate
  kClassify,     // connective, nuclearity, relation: one row per instance
  kOrdering,     // one row per sentence, 7 rank classes, decoded per instance
  kTagging,      // segmentation: one row per subword token
};

metrics::MetricKind metric_for(tasks::Task task);
probe::HeadKind head_for(tasks::Task task);

// Row labels and grouping of a task split; independent of the encoder.
struct ProbeLayout {
  tasks::Task task = tasks::Task::kNsp;
  EvalKind kind = EvalKind::kClassify;
  int num_classes = 2;
  std::vector<int> labels;                   // one per row
  std::vector<int> groups;                   // instance index of each row
  std::vector<int> group_labels;             // kGroupArgmax: gold candidate per instance
  std::vector<std::vector<int>> gold_ranks;  // kOrdering: per instance

  std::size_t rows() const { return labels.size(); }
  std::size_t num_groups() const;
};

// `num_classes` is required for connective and relation (label inventory
// size) and ignored elsewhere.
ProbeLayout make_layout(tasks::Task task, const InstanceList& instances, int num_classes = 0);

enum class ContextPooling { kWhole, kPerSentencePadded };

std::string_view to_string(ContextPooling c);
ContextPooling context_pooling_from_string(std::string_view s);

inline constexpr int kContextSlots = 8;

struct FeatureOptions {
  encoder::Pooling pooling = encoder::Pooling::kMean;
  ContextPooling context_pooling = ContextPooling::kWhole;
};

// Token budgets per task: NSP and cloze keep the last 450 context tokens and
// the first 50 candidate tokens; connective, nuclearity and relation keep the
// first 250 tokens of each segment; ordering sentences are encoded alone and
// keep their first 50; segmentation texts must fit 512 tokens.
std::vector<encoder::SegmentBudget> task_budgets(tasks::Task task);

// Encodes every instance once and returns one row block per layer
// (index 0 = layer 1). Rows follow make_layout's order.
std::vector<encoder::FeatureMatrix> extract_features(const encoder::Encoder& enc, tasks::Task task,
                                                     const InstanceList& instances, const FeatureOptions& opts);

// Cache key of a split: SHA-256 over the task, split name, instance JSON,
// budgets and context pooling.
std::string content_hash(tasks::Task task, std::string_view split, const InstanceList& instances,
                         const FeatureOptions& opts);

// Returns the features of `layer`, extracting and caching all layers in one
// pass when any layer is missing from the cache.
encoder::FeatureMatrix cached_features(const encoder::Encoder& enc, const encoder::FeatureCache& cache,
                                       tasks::Task task, std::string_view split, const InstanceList& instances,
                                       const FeatureOptions& opts, int layer);

// Ensures every layer of the split is cached. Returns true when encoding ran.
bool warm_cache(const encoder::Encoder& enc, const encoder::FeatureCache& cache, tasks::Task task,
                std::string_view split, const InstanceList& instances, const FeatureOptions& opts);

struct EvalResult {
  metrics::MetricKind metric = metrics::MetricKind::kAccuracy;
  double value = 0.0;
  std::vector<double> instance_rho;  // kOrdering only
  std::vector<int> instance_n;       // kOrdering only
};

struct EvalOptions {
  probe::DecodeMode decode_mode = probe::DecodeMode::kAssignment;
};

EvalResult evaluate(const probe::Mlp& head, const probe::Matrix& x, const ProbeLayout& layout,
                    const EvalOptions& opts = {});

}  // namespace discprobe::train
