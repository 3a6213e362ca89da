#include "discprobe/metrics/metrics.hpp"

#include <fmt/core.h>

#include "discprobe/common/error.hpp"

namespace discprobe::metrics {

std::string_view to_string(MetricKind m) {
  switch (m) {
    case MetricKind::kAccuracy:
      return "accuracy";
    case MetricKind::kSpearman:
      return "spearman";
    case MetricKind::kMacroF1:
      return "macro_f1";
  }
  return "?";
}

MetricKind metric_from_string(std::string_view name) {
  if (name == "accuracy") return MetricKind::kAccuracy;
  if (name == "spearman") return MetricKind::kSpearman;
  if (name == "macro_f1") return MetricKind::kMacroF1;
  throw ValidationError(fmt::format("unknown metric '{}'", name));
}

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a == 0 || b == 0) throw ValidationError("metric on empty input");
  if (a != b) throw ValidationError(fmt::format("length mismatch: {} predictions, {} golds", a, b));
}

void check_permutation(std::span<const int> ranks) {
  std::vector<bool> seen(ranks.size() + 1, false);
  for (int r : ranks) {
    if (r < 1 || static_cast<std::size_t>(r) > ranks.size() || seen[r]) {
      throw ValidationError("ranks are not a permutation of 1..n");
    }
    seen[r] = true;
  }
}

}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> golds) {
  check_lengths(preds.size(), golds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == golds[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double spearman(std::span<const int> pred_ranks, std::span<const int> gold_ranks) {
  check_lengths(pred_ranks.size(), gold_ranks.size());
  if (pred_ranks.size() < 2) throw ValidationError("spearman needs n >= 2");
  check_permutation(pred_ranks);
  check_permutation(gold_ranks);
  const double n = static_cast<double>(pred_ranks.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < pred_ranks.size(); ++i) {
    const double d = pred_ranks[i] - gold_ranks[i];
    d2 += d * d;
  }
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

double mean_spearman(const std::vector<std::vector<int>>& pred_ranks,
                     const std::vector<std::vector<int>>& gold_ranks) {
  check_lengths(pred_ranks.size(), gold_ranks.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred_ranks.size(); ++i) total += spearman(pred_ranks[i], gold_ranks[i]);
  return total / static_cast<double>(pred_ranks.size());
}

double macro_f1(std::span<const int> preds, std::span<const int> golds, int num_classes) {
  check_lengths(preds.size(), golds.size());
  if (num_classes < 2) throw ValidationError("macro_f1 needs at least two classes");
  std::vector<double> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], g = golds[i];
    if (p < 0 || p >= num_classes || g < 0 || g >= num_classes) {
      throw ValidationError(fmt::format("label outside 0..{}", num_classes - 1));
    }
    if (p == g) {
      tp[p] += 1;
    } else {
      fp[p] += 1;
      fn[g] += 1;
    }
  }
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double prec = tp[c] + fp[c] > 0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
    const double rec = tp[c] + fn[c] > 0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
    sum += prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  return sum / num_classes;
}

}  // namespace discprobe::metrics
