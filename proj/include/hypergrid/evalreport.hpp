#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hypergrid/models.hpp"

namespace hypergrid {

// ---------------------------------------------------------------- confusion matrix and metrics

/// Rows are true classes, columns predicted classes; class i is label i+1.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;
  bool empty = false;  // nothing was evaluated

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t c) : classes(c), counts(c * c, 0) {}

  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * classes + pred]; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
};

inline ConfusionMatrix confusion_matrix(const LabelMap& truth, const LabelMap& pred, const std::set<Pixel>& exclude = {}) {
  if (truth.height != pred.height || truth.width != pred.width)
    throw DimensionError("confusion_matrix: prediction and truth dimensions differ");
  ConfusionMatrix cm(std::max(truth.class_count(), pred.class_count()));
  for (std::size_t r = 0; r < truth.height; ++r)
    for (std::size_t c = 0; c < truth.width; ++c) {
      const auto t = truth.at(r, c);
      if (t == 0 || exclude.count({r, c})) continue;
      const auto p = pred.at(r, c);
      if (p == 0)
        throw EvaluationError("unlabeled prediction at evaluated pixel (" + std::to_string(r) + "," + std::to_string(c) + ")");
      ++cm.at(t - 1u, p - 1u);
    }
  cm.empty = cm.total() == 0;
  return cm;
}

struct MetricSet {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class_recall;  // NaN for classes absent from the evaluated set
};

/// AA averages recall over classes that occur in the evaluated set.
inline MetricSet metrics(const ConfusionMatrix& cm) {
  const double total = static_cast<double>(cm.total());
  if (total == 0) throw EvaluationError("metrics: confusion matrix is empty");
  MetricSet m;
  m.per_class_recall.assign(cm.classes, std::nan(""));
  double trace = 0.0, expected = 0.0, recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < cm.classes; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < cm.classes; ++j) {
      row += static_cast<double>(cm.at(i, j));
      col += static_cast<double>(cm.at(j, i));
    }
    trace += static_cast<double>(cm.at(i, i));
    expected += row * col;
    if (row > 0) {
      m.per_class_recall[i] = static_cast<double>(cm.at(i, i)) / row;
      recall_sum += m.per_class_recall[i];
      ++present;
    }
  }
  m.oa = trace / total;
  m.aa = recall_sum / static_cast<double>(present);
  const double pe = expected / (total * total);
  m.kappa = pe == 1.0 ? 1.0 : (m.oa - pe) / (1.0 - pe);
  return m;
}

// ---------------------------------------------------------------- Mann-Whitney U

struct UTestResult {
  double u_statistic = 0.0;  // U of the first sample
  double p_value = 1.0;      // one-sided: first sample stochastically greater
  bool exact = false;
};

inline constexpr std::size_t kExactUThreshold = 16;

/// Number of arrangements of n1 + n2 distinct values giving each U of the first sample.
inline std::vector<double> u_distribution(std::size_t n1, std::size_t n2) {
  // f[j][u] for the current i; add the largest remaining element each step.
  std::vector<std::vector<std::vector<double>>> f(n1 + 1, std::vector<std::vector<double>>(n2 + 1));
  for (std::size_t i = 0; i <= n1; ++i)
    for (std::size_t j = 0; j <= n2; ++j) {
      f[i][j].assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        f[i][j][0] = 1.0;
        continue;
      }
      for (std::size_t u = 0; u <= i * j; ++u) {
        double v = 0.0;
        if (u >= j && u - j < f[i - 1][j].size()) v += f[i - 1][j][u - j];  // largest is from sample 1
        if (u < f[i][j - 1].size()) v += f[i][j - 1][u];                      // largest is from sample 2
        f[i][j][u] = v;
      }
    }
  return f[n1][n2];
}

inline UTestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ParameterError("mann_whitney_u: both samples must be non-empty");
  const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
  std::vector<std::pair<double, bool>> all;
  for (double v : a) all.push_back({v, true});
  for (double v : b) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  double rank_sum = 0.0, tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += midrank;
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j;
  }
  UTestResult r;
  r.u_statistic = rank_sum - static_cast<double>(n1 * (n1 + 1)) / 2.0;
  if (n <= kExactUThreshold && !ties) {
    const auto dist = u_distribution(n1, n2);
    const double all_ways = std::accumulate(dist.begin(), dist.end(), 0.0);
    double tail = 0.0;
    for (std::size_t u = static_cast<std::size_t>(std::llround(r.u_statistic)); u < dist.size(); ++u) tail += dist[u];
    r.p_value = tail / all_ways;
    r.exact = true;
    return r;
  }
  const double mean = static_cast<double>(n1 * n2) / 2.0;
  const double nd = static_cast<double>(n);
  const double var = static_cast<double>(n1 * n2) / 12.0 * ((nd + 1.0) - tie_term / (nd * (nd - 1.0)));
  if (var <= 0.0) {
    r.p_value = 1.0;
    return r;
  }
  const double z = (r.u_statistic - mean - 0.5) / std::sqrt(var);
  r.p_value = std::clamp(0.5 * std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  return r;
}

// ---------------------------------------------------------------- full-image classification

/// Predicts every pixel; label = class index + 1, or class_labels[index] when given.
inline LabelMap classify_full_image(ModelState& model, const HyperCube& cube,
                                    const std::vector<std::uint16_t>& class_labels = {}, std::size_t chunk = 128) {
  const std::size_t side = model.spec().patch_side;
  if (model.spec().bands != cube.bands) throw DimensionError("classify_full_image: band count mismatch");
  LabelMap out(cube.height, cube.width);
  std::vector<Pixel> centers;
  const std::size_t pixels = cube.pixels();
  for (std::size_t start = 0; start < pixels; start += chunk) {
    const std::size_t end = std::min(pixels, start + chunk);
    centers.clear();
    for (std::size_t p = start; p < end; ++p) centers.push_back({p / cube.width, p % cube.width});
    const auto pred = predict_batch(model, extract_batch(cube, centers, side));
    for (std::size_t p = start; p < end; ++p) {
      const std::size_t k = pred[p - start];
      out.labels[p] = class_labels.empty() ? static_cast<std::uint16_t>(k + 1) : class_labels.at(k);
    }
  }
  return out;
}

// ---------------------------------------------------------------- aggregation

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

struct RunSummary {
  std::size_t runs = 0;
  MeanStd oa, aa, kappa;
};

inline MeanStd mean_std(std::span<const double> v) {
  if (v.size() < 2) throw ParameterError("at least 2 runs are needed for a standard deviation");
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size() - 1))};
}

inline RunSummary aggregate_runs(std::span<const MetricSet> runs) {
  std::vector<double> oa, aa, kappa;
  for (const auto& m : runs) {
    oa.push_back(m.oa);
    aa.push_back(m.aa);
    kappa.push_back(m.kappa);
  }
  return {runs.size(), mean_std(oa), mean_std(aa), mean_std(kappa)};
}

/// Significance marker: "†" for p < 0.01, "‡" for p < 0.05.
inline std::string significance_marker(std::optional<double> p) {
  if (!p) return "";
  if (*p < 0.01) return "†";
  if (*p < 0.05) return "‡";
  return "";
}

/// "mean±std<marker> / mean±std" with OA in percent, pretrained arm first.
inline std::string paired_row(const RunSummary& pretrained, const RunSummary& scratch, std::optional<double> p) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.2f±%.1f%s / %.2f±%.1f", 100 * pretrained.oa.mean,
                100 * pretrained.oa.stddev, significance_marker(p).c_str(), 100 * scratch.oa.mean,
                100 * scratch.oa.stddev);
  return buf;
}

}  // namespace hypergrid
