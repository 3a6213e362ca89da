#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/rng.hpp"
#include "discprobe/metrics/aggregate.hpp"
#include "discprobe/metrics/metrics.hpp"
#include "test_util.hpp"

namespace dm = discprobe::metrics;
using discprobe::ValidationError;

namespace {

std::vector<int> random_perm(discprobe::Rng& rng, int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 1);
  rng.shuffle(p);
  return p;
}

// Pearson correlation of the two rank vectors.
double pearson(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = a.size();
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

}  // namespace

TEST(Accuracy, Examples) {
  EXPECT_DOUBLE_EQ(dm::accuracy(std::vector<int>{1, 1, 0}, std::vector<int>{1, 0, 0}), 2.0 / 3.0);
  EXPECT_EQ(dm::accuracy(std::vector<int>{3, 1, 2}, std::vector<int>{3, 1, 2}), 1.0);
  EXPECT_THROW(dm::accuracy(std::vector<int>{1}, std::vector<int>{1, 0}), ValidationError);
  EXPECT_THROW(dm::accuracy(std::vector<int>{}, std::vector<int>{}), ValidationError);
}

TEST(Spearman, Examples) {
  EXPECT_EQ(dm::spearman(std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3}), 1.0);
  EXPECT_EQ(dm::spearman(std::vector<int>{1, 2, 3}, std::vector<int>{3, 2, 1}), -1.0);
  EXPECT_NEAR(dm::spearman(std::vector<int>{1, 2, 3, 4}, std::vector<int>{2, 1, 4, 3}), 0.6, 1e-12);
  EXPECT_THROW(dm::spearman(std::vector<int>{1, 1, 3}, std::vector<int>{1, 2, 3}), ValidationError);
  EXPECT_THROW(dm::spearman(std::vector<int>{1}, std::vector<int>{1}), ValidationError);
}

TEST(Spearman, MatchesPearsonOfRanks) {
  discprobe::Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(6));
    auto a = random_perm(rng, n), b = random_perm(rng, n);
    EXPECT_NEAR(dm::spearman(a, b), pearson(a, b), 1e-9);
  }
}

TEST(Spearman, DatasetScoreIsInstanceMean) {
  std::vector<std::vector<int>> p = {{1, 2, 3}, {1, 2, 3, 4}};
  std::vector<std::vector<int>> g = {{3, 2, 1}, {2, 1, 4, 3}};
  EXPECT_NEAR(dm::mean_spearman(p, g), (-1.0 + 0.6) / 2, 1e-12);
}

TEST(MacroF1, Examples) {
  EXPECT_EQ(dm::macro_f1(std::vector<int>{0, 1, 0, 1}, std::vector<int>{0, 1, 0, 1}), 1.0);
  const double degenerate = dm::macro_f1(std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 1, 0, 1});
  EXPECT_LT(degenerate, 0.5);
  EXPECT_NEAR(dm::macro_f1(std::vector<int>{1, 0, 1, 0}, std::vector<int>{1, 0, 0, 0}),
              (2.0 / 3.0 + 0.8) / 2.0, 1e-12);
  // Class 1 absent from both sides contributes 0.
  EXPECT_EQ(dm::macro_f1(std::vector<int>{0, 0}, std::vector<int>{0, 0}), 0.5);
  EXPECT_THROW(dm::macro_f1(std::vector<int>{}, std::vector<int>{}), ValidationError);
  EXPECT_THROW(dm::macro_f1(std::vector<int>{2}, std::vector<int>{0}), ValidationError);
}

TEST(Metrics, PermutationInvariant) {
  discprobe::Rng rng(3);
  std::vector<int> p(40), g(40);
  for (int i = 0; i < 40; ++i) {
    p[i] = static_cast<int>(rng.index(2));
    g[i] = static_cast<int>(rng.index(2));
  }
  const double acc = dm::accuracy(p, g), f1 = dm::macro_f1(p, g);
  std::vector<std::size_t> order(40);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<int> p2, g2;
  for (auto i : order) {
    p2.push_back(p[i]);
    g2.push_back(g[i]);
  }
  EXPECT_EQ(dm::accuracy(p2, g2), acc);
  EXPECT_DOUBLE_EQ(dm::macro_f1(p2, g2), f1);
}

TEST(MetricKind, Names) {
  for (auto m : {dm::MetricKind::kAccuracy, dm::MetricKind::kSpearman, dm::MetricKind::kMacroF1}) {
    EXPECT_EQ(dm::metric_from_string(dm::to_string(m)), m);
  }
  EXPECT_THROW(dm::metric_from_string("bleu"), ValidationError);
}

TEST(SeedStats, Examples) {
  auto a = dm::seed_stats(std::vector<double>{0.5, 0.5, 0.5});
  EXPECT_EQ(a.mean, 0.5);
  EXPECT_EQ(a.sd, 0.0);
  auto b = dm::seed_stats(std::vector<double>{0.4, 0.6});
  EXPECT_NEAR(b.mean, 0.5, 1e-12);
  EXPECT_NEAR(b.sd, 0.1414213562, 1e-9);
  auto c = dm::seed_stats(std::vector<double>{0.7});
  EXPECT_EQ(c.sd, 0.0);
  EXPECT_EQ(c.count, 1);
}

TEST(SeedStats, GroupsRecords) {
  std::vector<discprobe::train::RunRecord> recs;
  for (int seed = 1; seed <= 3; ++seed) {
    recs.push_back({"m", 1, "nsp", seed, "accuracy", 0.1 * seed, 3, 0.0, ""});
    recs.push_back({"m", 2, "nsp", seed, "accuracy", 0.5, 3, 0.0, ""});
  }
  auto m = dm::seed_stats(recs);
  ASSERT_EQ(m.tasks.size(), 1u);
  EXPECT_NEAR(m.tasks["nsp"][dm::CellKey("m", 1)].mean, 0.2, 1e-12);
  EXPECT_NEAR(m.tasks["nsp"][dm::CellKey("m", 1)].sd, 0.1, 1e-12);
  EXPECT_EQ(m.tasks["nsp"][dm::CellKey("m", 2)].count, 3);
}

namespace {

dm::ScoreMatrix toy_matrix() {
  dm::ScoreMatrix m;
  m.tasks["a"][dm::CellKey("x", 1)] = {0.2, 0, 1};
  m.tasks["a"][dm::CellKey("x", 2)] = {0.4, 0, 1};
  m.tasks["a"][dm::CellKey("x", 3)] = {0.8, 0, 1};
  m.tasks["b"][dm::CellKey("x", 1)] = {0.1, 0, 1};
  m.tasks["b"][dm::CellKey("x", 2)] = {0.3, 0, 1};
  m.tasks["b"][dm::CellKey("x", 3)] = {0.9, 0, 1};
  return m;
}

}  // namespace

TEST(Aggregate, MinMaxExample) {
  auto n = dm::min_max_normalize(toy_matrix().tasks["a"]);
  EXPECT_EQ(n[dm::CellKey("x", 1)], 0.0);
  EXPECT_NEAR(n[dm::CellKey("x", 2)], 1.0 / 3.0, 1e-12);
  EXPECT_EQ(n[dm::CellKey("x", 3)], 1.0);
}

TEST(Aggregate, PerTaskMaxGivesOne) {
  auto avg = dm::aggregate(toy_matrix());
  EXPECT_EQ(avg[dm::CellKey("x", 3)], 1.0);
  EXPECT_EQ(avg[dm::CellKey("x", 1)], 0.0);
}

TEST(Aggregate, ConstantGridIsHalf) {
  dm::ScoreMatrix m;
  m.tasks["a"][dm::CellKey("x", 1)] = {0.3, 0, 1};
  m.tasks["a"][dm::CellKey("x", 2)] = {0.3, 0, 1};
  auto avg = dm::aggregate(m);
  EXPECT_EQ(avg[dm::CellKey("x", 1)], 0.5);
  EXPECT_EQ(avg[dm::CellKey("x", 2)], 0.5);
}

TEST(Aggregate, IncompleteGridIsError) {
  auto m = toy_matrix();
  m.tasks["b"].erase({"x", 2});
  EXPECT_THROW(dm::aggregate(m), ValidationError);
}

TEST(Aggregate, AffineInvariance) {
  auto base = dm::aggregate(toy_matrix());
  auto m = toy_matrix();
  for (auto& [_, c] : m.tasks["a"]) c.mean = 3.0 * c.mean - 7.0;
  for (auto& [_, c] : m.tasks["b"]) c.mean = 0.25 * c.mean + 100.0;
  auto scaled = dm::aggregate(m);
  for (const auto& [k, v] : base) EXPECT_NEAR(scaled[k], v, 1e-12);
}

TEST(Aggregate, ShippedEnglishFixture) {
  auto m = dm::read_score_csv(testutil::data_dir() / "appendix" / "english_base.csv");
  EXPECT_EQ(m.tasks.size(), 7u);
  EXPECT_EQ(m.model_names().size(), 7u);
  for (const auto& [task, grid] : m.tasks) {
    EXPECT_EQ(grid.size(), 84u) << task;
    auto n = dm::min_max_normalize(grid);
    double lo = 1, hi = 0;
    for (const auto& [_, v] : n) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_EQ(lo, 0.0);
    EXPECT_EQ(hi, 1.0);
  }
  // Argmax of the normalized average computed independently from the
  // fixture values (see README, "Known deviations").
  auto [cell, value] = dm::argmax(dm::aggregate(m));
  EXPECT_EQ(cell.first, "electra-base-discriminator");
  EXPECT_EQ(cell.second, 11);
  EXPECT_NEAR(value, 0.9067, 1e-4);
}

TEST(Aggregate, BestLayerLookups) {
  auto m = dm::read_score_csv(testutil::data_dir() / "appendix" / "english_base.csv");
  auto best = dm::best_layer(m, "nsp", "bert-base-uncased");
  ASSERT_TRUE(best);
  EXPECT_EQ(best->first, 12);
  EXPECT_EQ(best->second.mean, 0.99);
  EXPECT_EQ(m.tasks["nsp"][dm::CellKey("bert-base-uncased", 1)].mean, 0.36);
  EXPECT_FALSE(dm::best_layer(m, "nsp", "nobody"));
}

TEST(ScoreCsv, RoundTrip) {
  auto m = toy_matrix();
  m.tasks["a"][dm::CellKey("x", 1)].sd = 0.01;
  auto back = dm::parse_score_csv(dm::score_csv(m));
  for (const auto& [task, grid] : m.tasks) {
    for (const auto& [k, c] : grid) {
      EXPECT_DOUBLE_EQ(back.tasks[task][k].mean, c.mean);
      EXPECT_DOUBLE_EQ(back.tasks[task][k].sd, c.sd);
    }
  }
  EXPECT_THROW(dm::parse_score_csv("model,layer,task,mean,sd\nx,1,a,zz,0\n"), discprobe::ParseError);
  EXPECT_THROW(dm::parse_score_csv("x,1,a\n"), discprobe::ParseError);
}

TEST(OrderingBreakdown, SingleBucket) {
  std::vector<dm::OrderingInstanceResult> r = {{"m", 1, 1, 3, 0.5}, {"m", 1, 1, 3, 1.0}};
  auto b = dm::ordering_breakdown(r, "m");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b.begin()->first, 3);
  EXPECT_DOUBLE_EQ(b.begin()->second.mean_rho, 0.75);
}

TEST(OrderingBreakdown, BestLayerAndRecombination) {
  discprobe::Rng rng(11);
  std::vector<dm::OrderingInstanceResult> r;
  for (int layer = 1; layer <= 3; ++layer) {
    for (int i = 0; i < 300; ++i) {
      const int n = 3 + static_cast<int>(rng.index(5));
      r.push_back({"m", layer, 1, n, (layer == 2 ? 0.6 : 0.2) + rng.uniform(-0.1, 0.1)});
    }
  }
  EXPECT_EQ(dm::best_ordering_layer(r, "m"), 2);
  auto b = dm::ordering_breakdown(r, "m");
  double weighted = 0;
  std::size_t total = 0;
  for (const auto& [n, bucket] : b) {
    weighted += bucket.mean_rho * bucket.count;
    total += bucket.count;
  }
  double overall = 0;
  for (const auto& x : r) {
    if (x.layer == 2) overall += x.rho;
  }
  EXPECT_EQ(total, 300u);
  EXPECT_NEAR(weighted / total, overall / 300, 1e-12);
  EXPECT_THROW(dm::ordering_breakdown(r, "other"), ValidationError);
}
