#include "discprobe/probe/heads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"

namespace discprobe::probe {

int argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw ValidationError("argmax over no candidates");
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<double> positive_probabilities(const Mlp& head, const Matrix& pair_features) {
  if (head.config().num_classes != 2) throw ValidationError("candidate scoring needs a binary head");
  const Matrix logp = head.forward(pair_features);
  std::vector<double> out(logp.rows());
  for (Eigen::Index i = 0; i < logp.rows(); ++i) out[i] = std::exp(static_cast<double>(logp(i, 1)));
  return out;
}

int score_candidates(const Mlp& head, const Matrix& pair_features) {
  if (pair_features.rows() == 0) throw ValidationError("score_candidates: no candidates");
  return argmax_lowest(positive_probabilities(head, pair_features));
}

int score_candidates(const Mlp& head, const Vector& context_vec, std::span<const Vector> candidate_vecs) {
  if (candidate_vecs.empty()) throw ValidationError("score_candidates: no candidates");
  Matrix pairs(static_cast<Eigen::Index>(candidate_vecs.size()), context_vec.size() + candidate_vecs[0].size());
  for (std::size_t i = 0; i < candidate_vecs.size(); ++i) {
    if (candidate_vecs[i].size() != candidate_vecs[0].size()) {
      throw ValidationError("score_candidates: candidate vectors differ in width");
    }
    pairs.row(i) << context_vec.transpose(), candidate_vecs[i].transpose();
  }
  return score_candidates(head, pairs);
}

void RankDistribution::validate() const {
  if (n < 1 || n > kMaxRank) throw ValidationError(fmt::format("rank distribution with n = {}", n));
  if (probs.rows() != n || probs.cols() < n) {
    throw ValidationError(fmt::format("rank distribution shape {}x{} for n = {}", probs.rows(),
                                      probs.cols(), n));
  }
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-6 || (probs.row(i).array() < 0).any()) {
      throw ValidationError(fmt::format("rank distribution row {} is not a distribution", i));
    }
  }
}

std::string_view to_string(DecodeMode m) {
  return m == DecodeMode::kAssignment ? "assignment" : "unconstrained";
}

DecodeMode decode_mode_from_string(std::string_view s) {
  if (s == "assignment") return DecodeMode::kAssignment;
  if (s == "unconstrained") return DecodeMode::kUnconstrained;
  throw ValidationError(fmt::format("unknown decode_mode '{}'", s));
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  // Shortest augmenting path with row/column potentials; 1-based internally.
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ValidationError("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

namespace {

void check_scores(const Eigen::MatrixXd& s, int n) {
  if (n < 1 || n > kMaxRank) throw ValidationError(fmt::format("cannot decode n = {} > {}", n, kMaxRank));
  if (s.rows() != n || s.cols() < n) {
    throw ValidationError(fmt::format("score matrix {}x{} for n = {}", s.rows(), s.cols(), n));
  }
  if (!s.leftCols(n).allFinite()) throw ValidationError("decode_order: non-finite log-score");
}

double total(const Eigen::MatrixXd& s, const std::vector<int>& ranks) {
  double t = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) t += s(static_cast<Eigen::Index>(i), ranks[i] - 1);
  return t;
}

double tolerance(const Eigen::MatrixXd& s, int n) {
  return 1e-9 * std::max(1.0, s.leftCols(n).cwiseAbs().maxCoeff() * n);
}

// Best achievable total when sentences [0, fixed.size()) take the given ranks.
double best_with_prefix(const Eigen::MatrixXd& s, int n, const std::vector<int>& fixed) {
  double t = 0.0;
  std::vector<bool> taken(n, false);
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    t += s(static_cast<Eigen::Index>(i), fixed[i] - 1);
    taken[fixed[i] - 1] = true;
  }
  const int rest = n - static_cast<int>(fixed.size());
  if (rest == 0) return t;
  std::vector<int> free_cols;
  for (int c = 0; c < n; ++c) {
    if (!taken[c]) free_cols.push_back(c);
  }
  Eigen::MatrixXd cost(rest, rest);
  for (int r = 0; r < rest; ++r) {
    for (int c = 0; c < rest; ++c) cost(r, c) = -s(static_cast<Eigen::Index>(fixed.size()) + r, free_cols[c]);
  }
  const auto assign = hungarian(cost);
  for (int r = 0; r < rest; ++r) t -= cost(r, assign[r]);
  return t;
}

}  // namespace

std::vector<int> decode_order_log(const Eigen::MatrixXd& log_scores, int n) {
  check_scores(log_scores, n);
  const double optimum = best_with_prefix(log_scores, n, {});
  const double tol = tolerance(log_scores, n);
  // Fix sentences left to right, each to the smallest rank that still admits
  // an optimal completion.
  std::vector<int> ranks;
  std::vector<bool> taken(n + 1, false);
  for (int i = 0; i < n; ++i) {
    int chosen = 0;
    for (int r = 1; r <= n && chosen == 0; ++r) {
      if (taken[r]) continue;
      ranks.push_back(r);
      if (best_with_prefix(log_scores, n, ranks) >= optimum - tol) {
        chosen = r;
      } else {
        ranks.pop_back();
      }
    }
    if (chosen == 0) throw Error("decode_order: no optimal completion found");
    taken[chosen] = true;
  }
  return ranks;
}

std::vector<int> decode_order_brute_force(const Eigen::MatrixXd& log_scores, int n) {
  check_scores(log_scores, n);
  const double tol = tolerance(log_scores, n);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 1);
  std::vector<int> best = perm;
  double best_total = total(log_scores, perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double t = total(log_scores, perm);
    if (t > best_total + tol) {
      best_total = t;
      best = perm;
    }
  }
  return best;
}

std::vector<int> decode_order_unconstrained(const Eigen::MatrixXd& log_scores, int n) {
  check_scores(log_scores, n);
  std::vector<std::pair<int, int>> keyed;  // (own argmax rank, sentence)
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int r = 1; r < n; ++r) {
      if (log_scores(i, r) > log_scores(i, best)) best = r;
    }
    keyed.emplace_back(best, i);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> ranks(n);
  for (int pos = 0; pos < n; ++pos) ranks[keyed[pos].second] = pos + 1;
  return ranks;
}

std::vector<int> decode_order(const RankDistribution& dist, DecodeMode mode) {
  dist.validate();
  Eigen::MatrixXd logs = dist.probs.leftCols(dist.n).array().max(1e-300).log();
  return mode == DecodeMode::kAssignment ? decode_order_log(logs, dist.n)
                                         : decode_order_unconstrained(logs, dist.n);
}

std::vector<double> tag_tokens(const Mlp& head, const Matrix& token_vectors) {
  if (head.config().kind != HeadKind::kTokenTagger) throw ValidationError("tag_tokens needs a token tagger head");
  if (token_vectors.rows() == 0) throw ValidationError("tag_tokens: empty sequence");
  return positive_probabilities(head, token_vectors);
}

std::vector<int> threshold_tags(std::span<const double> probs) {
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > kTagThreshold ? 1 : 0;
  return out;
}

}  // namespace discprobe::probe
