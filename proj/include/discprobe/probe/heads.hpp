#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "discprobe/probe/mlp.hpp"

namespace discprobe::probe {

// Index of the largest value; ties go to the lowest index. Throws
// ValidationError on empty input.
int argmax_lowest(std::span<const double> values);

// Positive-class (class 1) probability of each row under a binary head.
std::vector<double> positive_probabilities(const Mlp& head, const Matrix& pair_features);

// Scores every (context, candidate) pair with the binary head and returns the
// candidate with the highest positive-class probability. Rows of
// `pair_features` are the per-candidate pair features.
int score_candidates(const Mlp& head, const Matrix& pair_features);

// Builds each pair feature as [context ; candidate] and scores it.
int score_candidates(const Mlp& head, const Vector& context_vec, std::span<const Vector> candidate_vecs);

// Per-sentence probability rows over rank classes 1..7, of which only the
// first n apply.
struct RankDistribution {
  Eigen::MatrixXd probs;  // n x 7 (or wider)
  int n = 0;

  // Throws ValidationError when n is outside 1..7, a row does not sum to
  // 1 +/- 1e-6, or the shape disagrees with n.
  void validate() const;
};

enum class DecodeMode { kAssignment, kUnconstrained };

std::string_view to_string(DecodeMode m);
DecodeMode decode_mode_from_string(std::string_view s);

// Permutation (1-based ranks, one per sentence) maximizing sum_i log P(r_i | s_i)
// over ranks 1..n. Optimal assignment by the Hungarian method; among tied
// optima, the lexicographically smallest permutation.
std::vector<int> decode_order(const RankDistribution& dist, DecodeMode mode = DecodeMode::kAssignment);

// Core of decode_order on an n x n (or wider) matrix of log-scores.
std::vector<int> decode_order_log(const Eigen::MatrixXd& log_scores, int n);

// Exhaustive n! search with the same tie rule. Used as a correctness oracle.
std::vector<int> decode_order_brute_force(const Eigen::MatrixXd& log_scores, int n);

// Unconstrained decoding: each sentence takes its own most probable rank in
// 1..n; sentences are then ordered by (that rank, sentence index) so the
// result is still a permutation.
std::vector<int> decode_order_unconstrained(const Eigen::MatrixXd& log_scores, int n);

// Minimum-cost assignment of rows to columns for a square cost matrix.
// Returns the column for each row.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

// Boundary probability per token (class 1 of a 2-class head). Throws
// ValidationError for an empty sequence or a non-tagger head.
std::vector<double> tag_tokens(const Mlp& head, const Matrix& token_vectors);

inline constexpr double kTagThreshold = 0.5;

// 1 where the probability exceeds kTagThreshold.
std::vector<int> threshold_tags(std::span<const double> probs);

}  // namespace discprobe::probe
