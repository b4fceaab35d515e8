#include <gtest/gtest.h>

#include <cmath>

#include "hypergrid/evalreport.hpp"
#include "oracles.hpp"

using namespace hypergrid;

namespace {

ConfusionMatrix from_counts(std::size_t k, std::vector<std::uint64_t> counts) {
  ConfusionMatrix cm(k);
  cm.counts = std::move(counts);
  cm.empty = cm.total() == 0;
  return cm;
}

MetricSet with_oa(double oa) {
  MetricSet m;
  m.oa = oa;
  m.aa = oa / 2;
  m.kappa = oa - 0.1;
  return m;
}

}  // namespace

TEST(Confusion, PerfectPredictionIsDiagonal) {
  LabelMap gt(3, 4);
  gt.labels = {1, 1, 2, 0, 3, 3, 2, 0, 1, 2, 3, 0};
  const auto cm = confusion_matrix(gt, gt);
  EXPECT_EQ(cm.classes, 3u);
  EXPECT_EQ(cm.total(), 9u);
  EXPECT_FALSE(cm.empty);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(cm.at(t, p), t == p ? 3u : 0u);
  const auto m = metrics(cm);
  EXPECT_DOUBLE_EQ(m.oa, 1.0);
  EXPECT_DOUBLE_EQ(m.aa, 1.0);
  EXPECT_DOUBLE_EQ(m.kappa, 1.0);
}

TEST(Confusion, ExcludesTrainingAndBackground) {
  LabelMap gt(2, 2), pred(2, 2);
  gt.labels = {1, 2, 0, 2};
  pred.labels = {2, 2, 1, 1};
  const auto cm = confusion_matrix(gt, pred, {{0, 1}});
  EXPECT_EQ(cm.total(), 2u);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(1, 0), 1u);
  const auto all_out = confusion_matrix(gt, pred, {{0, 0}, {0, 1}, {1, 1}});
  EXPECT_TRUE(all_out.empty);
  EXPECT_THROW(metrics(all_out), EvaluationError);
}

TEST(Confusion, ErrorsOnUnlabeledPredictionAndShape) {
  LabelMap gt(1, 2), pred(1, 2), wide(1, 3);
  gt.labels = {1, 2};
  pred.labels = {1, 0};
  EXPECT_THROW(confusion_matrix(gt, pred), EvaluationError);
  EXPECT_THROW(confusion_matrix(gt, wide), DimensionError);
}

TEST(Metrics, HandExample) {
  // truth 0: 8 right, 2 as class 1; truth 1: 5 right, 5 as class 0
  const auto m = metrics(from_counts(2, {8, 2, 5, 5}));
  EXPECT_DOUBLE_EQ(m.oa, 13.0 / 20.0);
  EXPECT_DOUBLE_EQ(m.aa, (0.8 + 0.5) / 2);
  const double pe = (10.0 / 20) * (13.0 / 20) + (10.0 / 20) * (7.0 / 20);
  EXPECT_NEAR(m.kappa, (0.65 - pe) / (1 - pe), 1e-15);
  ASSERT_EQ(m.per_class_recall.size(), 2u);
  EXPECT_DOUBLE_EQ(m.per_class_recall[0], 0.8);
}

TEST(Metrics, AbsentClassIsNanAndOutOfAverage) {
  const auto m = metrics(from_counts(3, {4, 0, 1, 0, 0, 0, 1, 0, 3}));
  EXPECT_TRUE(std::isnan(m.per_class_recall[1]));
  EXPECT_DOUBLE_EQ(m.aa, (0.8 + 0.75) / 2);
}

TEST(Metrics, SingleClassAllCorrectHasKappaOne) {
  const auto m = metrics(from_counts(2, {7, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(m.oa, 1.0);
  EXPECT_DOUBLE_EQ(m.kappa, 1.0);
}

TEST(Metrics, MatchTallyOracleOnRandomMatrices) {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng.below(7);
    std::vector<std::uint64_t> counts(k * k);
    for (auto& c : counts) c = rng.below(4) == 0 ? 0 : rng.below(30);
    counts[0] += 1;
    const auto m = metrics(from_counts(k, counts));
    const auto o = oracle::tally_metrics(counts, k);
    EXPECT_NEAR(m.oa, o.oa, 1e-12);
    EXPECT_NEAR(m.aa, o.aa, 1e-12);
    EXPECT_NEAR(m.kappa, o.kappa, 1e-12);
  }
}

TEST(UTest, CompleteSeparationSizeThree) {
  const std::vector<double> a{4, 5, 6}, b{1, 2, 3};
  const auto r = mann_whitney_u(a, b);
  EXPECT_DOUBLE_EQ(r.u_statistic, 9.0);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_value, 0.05, 1e-12);
  EXPECT_NEAR(mann_whitney_u(b, a).p_value, 1.0, 1e-12);
}

TEST(UTest, IdenticalSamplesAreNotSignificant) {
  const std::vector<double> a{0.5, 0.6, 0.7, 0.8};
  EXPECT_GE(mann_whitney_u(a, a).p_value, 0.5);
}

TEST(UTest, DistributionCountsArrangements) {
  for (std::size_t n1 = 1; n1 <= 6; ++n1)
    for (std::size_t n2 = 1; n2 <= 6; ++n2) {
      const auto d = u_distribution(n1, n2);
      ASSERT_EQ(d.size(), n1 * n2 + 1);
      double total = 0;
      for (double v : d) total += v;
      double binom = 1;
      for (std::size_t i = 1; i <= n1; ++i) binom = binom * static_cast<double>(n2 + i) / static_cast<double>(i);
      EXPECT_NEAR(total, binom, 1e-9);
      for (std::size_t u = 0; u < d.size(); ++u) EXPECT_DOUBLE_EQ(d[u], d[d.size() - 1 - u]);
    }
}

TEST(UTest, ExactMatchesEnumeration) {
  Rng rng(5);
  for (std::size_t n1 = 1; n1 <= 6; ++n1)
    for (std::size_t n2 = 1; n2 <= 6; ++n2)
      for (int rep = 0; rep < 4; ++rep) {
        std::vector<double> a(n1), b(n2);
        for (auto& v : a) v = rng.uniform(0.0, 1.0);
        for (auto& v : b) v = rng.uniform(0.0, 1.0);
        const auto r = mann_whitney_u(a, b);
        ASSERT_TRUE(r.exact);
        EXPECT_DOUBLE_EQ(r.u_statistic, oracle::pair_count_u(a, b));
        EXPECT_NEAR(r.p_value, oracle::exact_u_p_value(n1, n2, r.u_statistic), 1e-12);
        EXPECT_DOUBLE_EQ(r.u_statistic + mann_whitney_u(b, a).u_statistic, static_cast<double>(n1 * n2));
      }
}

TEST(UTest, NormalApproximationTracksEnumeration) {
  Rng rng(6);
  for (std::size_t n1 = 8; n1 <= 9; ++n1)
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> a(n1), b(9);
      for (auto& v : a) v = rng.normal(0.5, 1.0);
      for (auto& v : b) v = rng.normal(0.0, 1.0);
      const auto r = mann_whitney_u(a, b);
      ASSERT_FALSE(r.exact);
      EXPECT_NEAR(r.p_value, oracle::exact_u_p_value(n1, 9, r.u_statistic), 0.02);
    }
}

TEST(UTest, TiesUseMidranks) {
  const std::vector<double> a{1, 2, 2, 3}, b{2, 2, 0, 0};
  const auto r = mann_whitney_u(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_DOUBLE_EQ(r.u_statistic, oracle::pair_count_u(a, b));
  const std::vector<double> same{1, 1, 1};
  EXPECT_DOUBLE_EQ(mann_whitney_u(same, same).p_value, 1.0);
  EXPECT_THROW(mann_whitney_u(std::vector<double>{}, same), ParameterError);
}

TEST(ClassifyFullImage, ConstantCubeGivesUniformMap) {
  Rng rng(3);
  auto model = build_model(ModelSpec::make(Arch::A3, 4, 5), rng);
  HyperCube cube(9, 7, 4);
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t r = 0; r < 9; ++r)
      for (std::size_t c = 0; c < 7; ++c) cube.at(b, r, c) = 0.3f * static_cast<float>(b) - 0.2f;
  const auto map = classify_full_image(model, cube, {}, 10);
  EXPECT_EQ(map.height, 9u);
  EXPECT_EQ(map.width, 7u);
  for (auto v : map.labels) EXPECT_EQ(v, map.labels[0]);
  EXPECT_GE(map.labels[0], 1);
  EXPECT_LE(map.labels[0], 5);
}

TEST(ClassifyFullImage, MatchesPerPixelPredictionAndRelabels) {
  Rng rng(4);
  auto model = build_model(ModelSpec::make(Arch::A3, 3, 4), rng);
  HyperCube cube(6, 8, 3);
  for (auto& v : cube.values) v = static_cast<float>(rng.normal());
  const std::vector<std::uint16_t> names{10, 20, 30, 40};
  const auto map = classify_full_image(model, cube, names, 7);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 8; ++c) {
      const auto patch = extract_patch(cube, {r, c}, 5);
      EXPECT_EQ(map.at(r, c), names[predict(model, patch)]);
    }
  auto other = build_model(ModelSpec::make(Arch::A3, 5, 4), rng);
  EXPECT_THROW(classify_full_image(other, cube), DimensionError);
}

TEST(Aggregate, IdenticalRunsHaveZeroSpread) {
  const std::vector<MetricSet> runs(4, with_oa(0.9));
  const auto s = aggregate_runs(runs);
  EXPECT_EQ(s.runs, 4u);
  EXPECT_DOUBLE_EQ(s.oa.mean, 0.9);
  EXPECT_DOUBLE_EQ(s.oa.stddev, 0.0);
}

TEST(Aggregate, TwoRunsSampleStd) {
  const std::vector<MetricSet> runs{with_oa(0.6), with_oa(0.8)};
  const auto s = aggregate_runs(runs);
  EXPECT_NEAR(s.oa.mean, 0.7, 1e-15);
  EXPECT_NEAR(s.oa.stddev, std::sqrt(0.02), 1e-15);
  EXPECT_NEAR(s.aa.mean, 0.35, 1e-15);
  EXPECT_THROW(aggregate_runs(std::vector<MetricSet>{with_oa(0.5)}), ParameterError);
}

TEST(Aggregate, MatchesTwoPassOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(2 + rng.below(20));
    for (auto& x : v) x = rng.uniform(0.0, 1.0);
    double s = 0;
    for (double x : v) s += x;
    const double mean = s / static_cast<double>(v.size());
    double sq = 0;
    for (double x : v) sq += (x - mean) * (x - mean);
    const auto r = mean_std(v);
    EXPECT_NEAR(r.mean, mean, 1e-14);
    EXPECT_NEAR(r.stddev, std::sqrt(sq / static_cast<double>(v.size() - 1)), 1e-14);
  }
}

TEST(Report, MarkersAndPairedRow) {
  EXPECT_EQ(significance_marker(0.005), "†");
  EXPECT_EQ(significance_marker(0.03), "‡");
  EXPECT_EQ(significance_marker(0.05), "");
  EXPECT_EQ(significance_marker(std::nullopt), "");
  const auto pre = aggregate_runs(std::vector<MetricSet>{with_oa(0.6), with_oa(0.8)});
  const auto scr = aggregate_runs(std::vector<MetricSet>{with_oa(0.5), with_oa(0.5)});
  EXPECT_EQ(paired_row(pre, scr, 0.001), "70.00±14.1† / 50.00±0.0");
  EXPECT_EQ(paired_row(pre, scr, std::nullopt), "70.00±14.1 / 50.00±0.0");
}
