#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "hypergrid/errors.hpp"

namespace hypergrid {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Compares an analytic gradient against central differences of `loss`.
///
/// The error for one coordinate is |a - cd| / max(|a|, |cd|, eps). When
/// `coords` is empty every coordinate is probed. `skip` marks coordinates
/// whose neighbourhood contains a kink (ReLU at 0, max-pool ties).
inline GradCheckResult finite_difference_check(
    const std::function<double(std::span<const double>)>& loss, std::span<const double> point,
    std::span<const double> analytic, double eps, std::span<const std::size_t> coords = {},
    const std::function<bool(std::size_t)>& skip = nullptr) {
  if (point.size() != analytic.size()) throw DimensionError("gradcheck: gradient length mismatch");
  if (!(eps > 0)) throw ParameterError("gradcheck: eps must be positive");
  std::vector<double> probe(point.begin(), point.end());
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(point.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = all;
  }
  GradCheckResult r;
  for (auto i : coords) {
    if (skip && skip(i)) {
      ++r.skipped;
      continue;
    }
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = loss(probe);
    probe[i] = saved - eps;
    const double down = loss(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) throw DataError("gradcheck: non-finite loss");
    const double cd = (up - down) / (2 * eps);
    const double a = analytic[i];
    const double err = std::abs(a - cd) / std::max({std::abs(a), std::abs(cd), eps});
    if (r.checked == 0 || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
    }
    ++r.checked;
  }
  return r;
}

}  // namespace hypergrid
