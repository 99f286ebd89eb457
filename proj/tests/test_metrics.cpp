#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "refsel/errors.hpp"
#include "refsel/metrics.hpp"
#include "refsel/rng.hpp"

using namespace refsel;

TEST(Rmse, HandCases) {
  const Eigen::Vector2d a(0, 0), b(3, 4);
  EXPECT_DOUBLE_EQ(rmse(a, a), 0.0);
  EXPECT_NEAR(rmse(a, b), std::sqrt(12.5), 1e-15);
  EXPECT_THROW(rmse(Eigen::VectorXd(), Eigen::VectorXd()), InputError);
  EXPECT_THROW(rmse(a, Eigen::VectorXd::Zero(3)), InputError);
}

TEST(Fdr, HandCases) {
  const std::vector<bool> rel{false, true, true, false};
  EXPECT_DOUBLE_EQ(fdr({1, 2, 3}, rel), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(fdr({}, rel), 0.0);
  EXPECT_DOUBLE_EQ(fdr({0, 3}, rel), 1.0);
  EXPECT_DOUBLE_EQ(fdr({1, 2, 3}, rel) + precision({1, 2, 3}, rel), 1.0);
}

TEST(Sensitivity, HandCases) {
  std::vector<bool> rel(200, false);
  for (int j = 0; j < 100; ++j) rel[static_cast<std::size_t>(j)] = true;
  IndexList sel;
  for (Index j = 0; j < 50; ++j) sel.push_back(j);
  for (Index j = 100; j < 110; ++j) sel.push_back(j);
  EXPECT_DOUBLE_EQ(sensitivity(sel, rel), 0.5);
  EXPECT_DOUBLE_EQ(sensitivity({}, rel), 0.0);
  IndexList all;
  for (Index j = 0; j < 100; ++j) all.push_back(j);
  EXPECT_DOUBLE_EQ(sensitivity(all, rel), 1.0);
  EXPECT_THROW(sensitivity({0}, std::vector<bool>(3, false)), InputError);
}

TEST(Entropy, HandCases) {
  // Two variables with inclusion counts (3, 1).
  SelectionMatrix S = SelectionMatrix::from_sets({{0}, {0}, {0}, {1}}, 2);
  EXPECT_NEAR(inclusion_entropy(S), -(0.75 * std::log(0.75) + 0.25 * std::log(0.25)), 1e-15);
  EXPECT_NEAR(inclusion_entropy(S), 0.5623, 5e-5);
  EXPECT_DOUBLE_EQ(inclusion_entropy(SelectionMatrix::from_sets({{2}, {2}, {2}}, 5)), 0.0);
  EXPECT_NEAR(inclusion_entropy(SelectionMatrix::from_sets({{0, 1, 2, 3}, {0, 1, 2, 3}}, 4)),
              std::log(4.0), 1e-15);
  EXPECT_THROW(inclusion_entropy(SelectionMatrix::from_sets({{}, {}}, 3)), InputError);
}

TEST(Entropy, SetsVariant) {
  const SelectionMatrix S = SelectionMatrix::from_sets({{0, 1}, {0, 1}, {2}, {0}}, 3);
  EXPECT_NEAR(inclusion_entropy(S, EntropyKind::Sets),
              -(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25)), 1e-15);
}

TEST(Entropy, PermutationInvariant) {
  const SelectionMatrix a = SelectionMatrix::from_sets({{0, 3}, {1}, {0, 2, 3}, {3}}, 4);
  const SelectionMatrix b = SelectionMatrix::from_sets({{1, 0}, {3}, {2, 1, 0}, {0}}, 4);  // 0<->3 swapped, rows reordered
  const SelectionMatrix c = SelectionMatrix::from_sets({{3}, {0, 2, 3}, {1}, {0, 3}}, 4);
  EXPECT_NEAR(inclusion_entropy(a), inclusion_entropy(b), 1e-15);
  EXPECT_NEAR(inclusion_entropy(a), inclusion_entropy(c), 1e-15);
}

TEST(Stability, HandCases) {
  const StabilityEstimate same = stability(SelectionMatrix::from_sets({{0, 2}, {0, 2}, {0, 2}}, 4));
  EXPECT_DOUBLE_EQ(same.estimate, 1.0);
  const StabilityEstimate opposite = stability(SelectionMatrix::from_sets({{0}, {1}}, 2));
  EXPECT_DOUBLE_EQ(opposite.estimate, -1.0);
  EXPECT_DOUBLE_EQ(opposite.clipped, 0.0);
  EXPECT_THROW(stability(SelectionMatrix::from_sets({{0}}, 2)), InputError);
  EXPECT_THROW(stability(SelectionMatrix::from_sets({{}, {}}, 2)), NumericalError);
  EXPECT_THROW(stability(SelectionMatrix::from_sets({{0, 1}, {0, 1}}, 2)), NumericalError);
}

TEST(Stability, RandomSelectionNearZero) {
  Engine eng = make_stream(5);
  const Index M = 400, p = 200;
  SelectionMatrix S(M, p);
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < p; ++j) S.Z(i, j) = sample_uniform(eng) < 0.3 ? 1 : 0;
  const StabilityEstimate st = stability(S);
  EXPECT_LE(st.lo, 0.0);
  EXPECT_GE(st.hi, 0.0);
  EXPECT_LT(std::abs(st.estimate), 0.02);
}

TEST(Stability, IntervalContainsEstimate) {
  const SelectionMatrix S = SelectionMatrix::from_sets({{0, 1}, {0, 2}, {0, 1}, {0, 1, 3}, {0}}, 5);
  const StabilityEstimate st = stability(S);
  EXPECT_LE(st.lo, st.estimate);
  EXPECT_GE(st.hi, st.estimate);
  EXPECT_GE(st.variance, 0.0);
  const StabilityEstimate wide = stability(S, 0.99);
  EXPECT_LE(wide.lo, st.lo);
}

TEST(Stability, DuplicatedRowsConverge) {
  std::vector<IndexList> sets{{0, 1}, {0, 2}, {1, 2}, {0, 1, 2}, {0}};
  double prev = stability(SelectionMatrix::from_sets(sets, 6)).estimate;
  double prev_gap = 1e9;
  for (int d = 0; d < 5; ++d) {
    const auto copy = sets;
    sets.insert(sets.end(), copy.begin(), copy.end());
    const double cur = stability(SelectionMatrix::from_sets(sets, 6)).estimate;
    const double gap = std::abs(cur - prev);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
    prev = cur;
  }
  EXPECT_LT(prev_gap, 0.01);
}

TEST(SelectionMatrix, RoundTrip) {
  SelectionMatrix S(2, 5);
  S.set_run(0, {4, 1});
  S.set_run(1, {});
  EXPECT_EQ(S.run(0), (IndexList{1, 4}));
  EXPECT_TRUE(S.run(1).empty());
  EXPECT_DOUBLE_EQ(S.inclusion_frequency()(4), 0.5);
  EXPECT_THROW(S.set_run(0, {5}), InputError);
}

TEST(MetricTable, Format) {
  std::ostringstream os;
  write_metric_table({{"s", "lasso", true, "fdr", 0.25, 0.5, std::nan("")}}, os);
  EXPECT_EQ(os.str(), "scenario,method,filtered,metric,estimate,se_or_ci_lo,ci_hi\ns,lasso,1,fdr,0.25,0.5,\n");
}

TEST(Metrics, Pure) {
  const SelectionMatrix S = SelectionMatrix::from_sets({{0, 1}, {1}, {1, 2}}, 3);
  EXPECT_EQ(stability(S).estimate, stability(S).estimate);
  EXPECT_EQ(inclusion_entropy(S), inclusion_entropy(S));
}
