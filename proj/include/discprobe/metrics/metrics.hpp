#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace discprobe::metrics {

enum class MetricKind { kAccuracy, kSpearman, kMacroF1 };

std::string_view to_string(MetricKind m);
MetricKind metric_from_string(std::string_view name);

// Fraction of positions where preds[i] == golds[i]. Throws ValidationError on
// empty input or a length mismatch.
double accuracy(std::span<const int> preds, std::span<const int> golds);

// rho = 1 - 6 * sum d^2 / (n (n^2 - 1)) for two permutations of 1..n, n >= 2.
double spearman(std::span<const int> pred_ranks, std::span<const int> gold_ranks);

// Unweighted mean of per-instance rho.
double mean_spearman(const std::vector<std::vector<int>>& pred_ranks,
                     const std::vector<std::vector<int>>& gold_ranks);

// Macro F1 over classes 0..num_classes-1. A class absent from both predictions
// and golds contributes 0.
double macro_f1(std::span<const int> preds, std::span<const int> golds, int num_classes = 2);

}  // namespace discprobe::metrics
