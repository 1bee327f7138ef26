#include <gtest/gtest.h>

#include <algorithm>

#include "netsel/rng.hpp"
#include "netsel/selection.hpp"

using namespace netsel;

namespace {

std::string key(const std::string& task, const std::string& model, const std::string& locality, int seed = 1) {
  return task + "|linear-svm|" + model + "|INT|0.01|" + locality + "|" + std::to_string(seed);
}

EvaluationRecord rec(const std::string& k, double val, double test) {
  EvaluationRecord r;
  r.config_key = k;
  r.precision_validation = val;
  r.precision_testing = test;
  return r;
}

std::vector<EvaluationRecord> simple(const std::vector<std::pair<double, double>>& vt) {
  std::vector<EvaluationRecord> out;
  for (std::size_t i = 0; i < vt.size(); ++i)
    out.push_back(rec(key("CC", "KNN", "c" + std::to_string(100 + i)), vt[i].first, vt[i].second));
  return out;
}

struct PairCounts {
  double concordant = 0, discordant = 0, tie_x = 0, tie_y = 0;
};

PairCounts brute_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  PairCounts c;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0) c.tie_x += 1;
      if (dy == 0) c.tie_y += 1;
      if (dx * dy > 0) c.concordant += 1;
      if (dx * dy < 0) c.discordant += 1;
    }
  return c;
}

double brute_tau(const std::vector<double>& x, const std::vector<double>& y) {
  const auto c = brute_pairs(x, y);
  const double n = static_cast<double>(x.size());
  const double n0 = n * (n - 1) / 2;
  const double denom = (n0 - c.tie_x) * (n0 - c.tie_y);
  return denom <= 0 ? 0.0 : (c.concordant - c.discordant) / std::sqrt(denom);
}

PredictionRecord pr(Role part, NodeId node, std::uint8_t pred, std::uint8_t act) {
  return {part, node, "t" + std::to_string(node), pred, act, false};
}

}  // namespace

TEST(SelectModel, Examples) {
  EXPECT_EQ(select_model({rec("A", 0.3, 0), rec("B", 0.9, 0), rec("C", 0.5, 0)}), "B");
  EXPECT_EQ(select_model({rec("B", 0.7, 0), rec("A", 0.7, 0)}), "A");
  EXPECT_EQ(select_model({rec("Z", 0.1, 0)}), "Z");
  EXPECT_THROW(select_model({}), Error);
}

TEST(SelectionStats, HandExample) {
  auto r = selection_stats({rec("a", 0.1, 0.9), rec("b", 0.95, 0.8), rec("c", 0.2, 0.7), rec("d", 0.3, 0.1)});
  EXPECT_DOUBLE_EQ(r.mu, 0.625);
  EXPECT_DOUBLE_EQ(r.p1, 0.9);
  EXPECT_DOUBLE_EQ(r.delta_p1, 0.8 - 0.9);
  EXPECT_DOUBLE_EQ(r.selected_rank, 2.0 / 3.0);
  EXPECT_EQ(r.selected_key, "b");
  EXPECT_DOUBLE_EQ(r.mu_top10, 0.625);
  EXPECT_DOUBLE_EQ(r.delta_mu, (0.1 + 0.95 + 0.2 + 0.3 - 2.5) / 4);
  EXPECT_TRUE(r.bold_delta_p1);
  EXPECT_FALSE(r.bold_rank);
}

TEST(SelectionStats, PerfectAndWorstSelection) {
  auto best = selection_stats(simple({{0.9, 0.8}, {0.1, 0.5}, {0.2, 0.3}}));
  EXPECT_EQ(best.delta_p1, 0.0);
  EXPECT_EQ(best.selected_rank, 1.0);
  EXPECT_TRUE(best.bold_delta_p1);
  EXPECT_TRUE(best.bold_rank);
  auto worst = selection_stats(simple({{0.9, 0.1}, {0.1, 0.5}, {0.2, 0.3}, {0.3, 0.4}, {0.4, 0.6}}));
  EXPECT_EQ(worst.selected_rank, 0.0);
}

TEST(SelectionStats, Properties) {
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::pair<double, double>> vt;
    const auto n = rng.between(2, 40);
    for (int i = 0; i < n; ++i) vt.push_back({rng.below(5) / 4.0, rng.below(5) / 4.0});
    auto recs = simple(vt);
    auto r = selection_stats(recs);
    EXPECT_LE(r.delta_p1, 0.0);
    const double sel_test = r.delta_p1 + r.p1;
    double vmax = 0;
    for (auto [v, t] : vt) vmax = std::max(vmax, v);
    EXPECT_EQ(r.delta_p1 == 0.0, sel_test == r.p1);
    EXPECT_GE(r.selected_rank, 0.0);
    EXPECT_LE(r.selected_rank, 1.0);
    EXPECT_LE(r.intersection10, 10u);
    auto shuffled = recs;
    rng.shuffle(std::span<EvaluationRecord>(shuffled));
    auto s = selection_stats(shuffled);
    EXPECT_EQ(s.selected_key, r.selected_key);
    EXPECT_EQ(s.selected_rank, r.selected_rank);
    EXPECT_EQ(s.intersection10, r.intersection10);
    EXPECT_NEAR(s.mu, r.mu, 1e-12);
    EXPECT_NEAR(s.tau, r.tau, 1e-12);
  }
}

TEST(SelectionStats, RankStrictlyMonotone) {
  std::vector<std::pair<double, double>> vt;
  for (int i = 0; i < 7; ++i) vt.push_back({0.0, 0.1 * i});
  auto recs = simple(vt);
  double prev = 2.0;
  for (int i = 6; i >= 0; --i) {
    const double r = normalized_rank(recs, recs[static_cast<std::size_t>(i)].config_key);
    EXPECT_LT(r, prev);
    prev = r;
  }
  EXPECT_EQ(prev, 0.0);
}

TEST(Kendall, Examples) {
  std::vector<double> a{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(kendall_tau(a, a).tau, 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(a, {5, 4, 3, 2, 1}).tau, -1.0);
  EXPECT_DOUBLE_EQ(kendall_tau({1, 2, 3, 4}, {1, 3, 2, 4}).tau, 2.0 / 3.0);
  EXPECT_THROW(kendall_tau({1}, {1}), Error);
  EXPECT_THROW(kendall_tau({1, 2}, {1}), Error);
  auto flat = kendall_tau({1, 1, 1}, {1, 2, 3});
  EXPECT_EQ(flat.tau, 0.0);
  EXPECT_EQ(flat.p_value, 1.0);
}

TEST(Kendall, MatchesPairEnumeration) {
  Rng rng(12);
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = static_cast<std::size_t>(rng.between(2, 500));
    const auto levels = rep % 3 == 0 ? 1000000 : rng.between(2, 20);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels)));
      y[i] = rng.bernoulli(0.5) ? x[i] : static_cast<double>(rng.below(static_cast<std::uint64_t>(levels)));
    }
    EXPECT_EQ(kendall_tau(x, y).tau, brute_tau(x, y)) << "n=" << n;
  }
}

TEST(Kendall, PValueMatchesAsymptoticReference) {
  auto a = kendall_tau({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {2, 1, 4, 3, 6, 5, 8, 7, 10, 9});
  EXPECT_NEAR(a.tau, 0.7777777777777777, 1e-12);
  EXPECT_NEAR(a.p_value, 0.001745118699528905, 1e-12);
  auto b = kendall_tau({1, 1, 2, 2, 3, 3, 4, 5}, {1, 2, 1, 3, 3, 4, 4, 4});
  EXPECT_NEAR(b.tau, 0.7506518906054692, 1e-12);
  EXPECT_NEAR(b.p_value, 0.017315600388161698, 1e-12);
}

TEST(Kendall, PValueCloseToExactPermutation) {
  std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8}, y{2, 1, 3, 5, 4, 8, 6, 7};
  const double observed = std::abs(brute_tau(x, y));
  std::vector<double> perm = y;
  std::sort(perm.begin(), perm.end());
  std::size_t extreme = 0, total = 0;
  do {
    ++total;
    if (std::abs(brute_tau(x, perm)) >= observed - 1e-12) ++extreme;
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double exact = static_cast<double>(extreme) / static_cast<double>(total);
  EXPECT_NEAR(kendall_tau(x, y).p_value, exact, 0.02);
}

TEST(TopK, Examples) {
  std::vector<std::pair<double, double>> same;
  for (int i = 0; i < 15; ++i) same.push_back({0.05 * i, 0.05 * i});
  EXPECT_EQ(topk_intersection(simple(same)).count, 10u);

  std::vector<std::pair<double, double>> disjoint;
  for (int i = 0; i < 20; ++i) disjoint.push_back(i < 10 ? std::pair{0.9, 0.1} : std::pair{0.1, 0.9});
  EXPECT_EQ(topk_intersection(simple(disjoint)).count, 0u);

  // Five configs strong on both, five strong only on validation, five only on testing.
  std::vector<std::pair<double, double>> five;
  for (int i = 0; i < 5; ++i) five.push_back({0.9, 0.9});
  for (int i = 0; i < 5; ++i) five.push_back({0.8, 0.1});
  for (int i = 0; i < 5; ++i) five.push_back({0.1, 0.8});
  for (int i = 0; i < 5; ++i) five.push_back({0.0, 0.0});
  EXPECT_EQ(topk_intersection(simple(five)).count, 5u);

  auto few = topk_intersection(simple({{0.1, 0.2}, {0.3, 0.1}}));
  EXPECT_EQ(few.effective_k, 2u);
  EXPECT_EQ(few.count, 2u);
}

TEST(TopK, SymmetricAndOrderInvariant) {
  Rng rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::pair<double, double>> vt, swapped;
    for (int i = 0; i < 25; ++i) {
      vt.push_back({rng.below(6) / 5.0, rng.below(6) / 5.0});
      swapped.push_back({vt.back().second, vt.back().first});
    }
    auto recs = simple(vt);
    const auto k = topk_intersection(recs).count;
    EXPECT_EQ(topk_intersection(simple(swapped)).count, k);
    rng.shuffle(std::span<EvaluationRecord>(recs));
    EXPECT_EQ(topk_intersection(recs).count, k);
  }
}

TEST(MatchMismatch, Examples) {
  std::vector<EvaluationRecord> two{rec(key("CC", "KNN", "global"), 0, 0.9), rec(key("CC", "TH", "global", 2), 0, 0.9),
                                    rec(key("CC", "KNN", "community"), 0, 0.1),
                                    rec(key("CC", "TH", "community", 2), 0, 0.1)};
  EXPECT_NEAR(match_mismatch(two, GroupBy::Locality), -0.8, 1e-12);
  for (auto& r : two) r.precision_testing = 0.4;
  EXPECT_EQ(match_mismatch(two, GroupBy::Locality), 0.0);
  std::vector<EvaluationRecord> one{rec(key("CC", "KNN", "global"), 0, 0.9), rec(key("CC", "TH", "global"), 0, 0.1)};
  EXPECT_THROW(match_mismatch(one, GroupBy::Locality), Error);
  EXPECT_THROW(match_mismatch(one, GroupBy::Model), Error);
}

TEST(CrossTask, IdenticalSetsGiveEqualCells) {
  Rng rng(4);
  std::vector<EvaluationRecord> cc, lp;
  for (int i = 0; i < 12; ++i) {
    const double v = rng.uniform(), t = rng.uniform();
    cc.push_back(rec(key("CC", "KNN", "l" + std::to_string(i)), v, t));
    lp.push_back(rec(key("LP", "KNN", "l" + std::to_string(i)), v, t));
  }
  auto table = cross_task(cc, lp);
  for (std::size_t s = 0; s < 3; ++s) {
    ASSERT_TRUE(table.cells[s][0] && table.cells[s][1]);
    EXPECT_EQ(table.cells[s][0]->delta_p1, table.cells[s][1]->delta_p1);
    EXPECT_EQ(table.cells[s][0]->rank, table.cells[s][1]->rank);
  }
  EXPECT_EQ(table.cells[0][0]->delta_p1, table.cells[1][0]->delta_p1);
}

TEST(CrossTask, DivergentFixture) {
  std::vector<EvaluationRecord> cc{rec(key("CC", "KNN", "x"), 0.9, 0.9), rec(key("CC", "KNN", "y"), 0.2, 0.2),
                                   rec(key("CC", "KNN", "z"), 0.5, 0.5)};
  std::vector<EvaluationRecord> lp{rec(key("LP", "KNN", "x"), 0.1, 0.1), rec(key("LP", "KNN", "y"), 0.95, 0.95),
                                   rec(key("LP", "KNN", "z"), 0.5, 0.5)};
  auto t = cross_task(cc, lp);
  EXPECT_EQ(t.cells[0][0]->delta_p1, 0.0);
  EXPECT_EQ(t.cells[1][1]->delta_p1, 0.0);
  EXPECT_LT(t.cells[0][1]->delta_p1, t.cells[1][1]->delta_p1);
  EXPECT_LT(t.cells[1][0]->delta_p1, t.cells[0][0]->delta_p1);
  EXPECT_NEAR(t.cells[0][1]->delta_p1, 0.1 - 0.95, 1e-12);
  EXPECT_EQ(t.cells[1][0]->selected_key, key("CC", "KNN", "y"));
  EXPECT_EQ(t.cells[1][0]->rank, 0.0);
  // Averages: x 0.5, y 0.575, z 0.5.
  EXPECT_EQ(t.cells[2][0]->selected_key, key("CC", "KNN", "y"));
}

TEST(CrossTask, AverageRowMatchesScan) {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<EvaluationRecord> cc, lp;
    const auto n = rng.between(2, 20);
    for (int i = 0; i < n; ++i) {
      const auto loc = "l" + std::to_string(10 + i);
      cc.push_back(rec(key("CC", "TH", loc), rng.below(4) / 4.0, rng.uniform()));
      lp.push_back(rec(key("LP", "TH", loc), rng.below(4) / 4.0, rng.uniform()));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < cc.size(); ++i) {
      const double m = (cc[i].precision_validation + lp[i].precision_validation) / 2;
      const double mb = (cc[best].precision_validation + lp[best].precision_validation) / 2;
      if (m > mb) best = i;
    }
    auto t = cross_task(cc, lp);
    EXPECT_EQ(t.cells[2][0]->selected_key, cc[best].config_key);
    EXPECT_EQ(t.cells[2][1]->selected_key, lp[best].config_key);
  }
}

TEST(CrossTask, UnmatchedConfigIsMissing) {
  std::vector<EvaluationRecord> cc{rec(key("CC", "KNN", "x"), 0.9, 0.9)};
  std::vector<EvaluationRecord> lp{rec(key("LP", "KNN", "y"), 0.9, 0.9)};
  auto t = cross_task(cc, lp);
  EXPECT_TRUE(t.cells[0][0].has_value());
  EXPECT_FALSE(t.cells[0][1].has_value());
  EXPECT_FALSE(t.cells[2][0].has_value());
}

TEST(NodeDifficulty, Examples) {
  PredictionBatch lp{key("LP", "KNN", "global"), Task::LP,
                     {pr(Role::Validation, 3, 1, 1), pr(Role::Testing, 3, 1, 0), pr(Role::Testing, 4, 1, 1),
                      pr(Role::Validation, 4, 1, 1), pr(Role::Testing, 5, 0, 1)}};
  auto rows = node_difficulty({lp});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].node, 3u);
  EXPECT_DOUBLE_EQ(rows[0].precision, 0.5);
  EXPECT_EQ(rows[0].records, 2u);
  EXPECT_DOUBLE_EQ(rows[1].precision, 1.0);
  EXPECT_TRUE(rows[2].empty);
}

TEST(NodeDifficulty, UnionOfTopSets) {
  std::vector<PredictionBatch> same, split;
  for (int b = 0; b < 8; ++b) {
    const std::uint8_t good = b < 5;
    same.push_back({key("CC", "KNN", "l" + std::to_string(b)), Task::CC,
                    {pr(Role::Validation, 0, good, 1), pr(Role::Testing, 0, good, 1)}});
    // Batches 0-4 lead on validation, 3-7 on testing.
    split.push_back({key("CC", "KNN", "l" + std::to_string(b)), Task::CC,
                     {pr(Role::Validation, 0, b < 5, 1), pr(Role::Testing, 0, b >= 3, 1)}});
  }
  auto rows = node_difficulty(same);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].records, 10u);
  EXPECT_DOUBLE_EQ(rows[0].precision, 1.0);
  rows = node_difficulty(split);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].records, 16u);
}

TEST(NodeDifficulty, CellsSeparateByTaskAndClassifier) {
  PredictionBatch a{"CC|linear-svm|KNN|INT|0.01|global|1", Task::CC, {pr(Role::Testing, 0, 1, 1)}};
  PredictionBatch b{"CC|random-forest|KNN|INT|0.01|global|1", Task::CC, {pr(Role::Testing, 0, 0, 1)}};
  auto rows = node_difficulty({a, b});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].classifier, "linear-svm");
  EXPECT_EQ(rows[0].precision, 1.0);
  EXPECT_EQ(rows[1].classifier, "random-forest");
  EXPECT_EQ(rows[1].precision, 0.0);
}
