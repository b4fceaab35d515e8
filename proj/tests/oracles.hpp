#pragma once

// Direct, unoptimised reference computations the library is checked against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "hypergrid/ops.hpp"
#include "hypergrid/rng.hpp"

namespace oracle {

using hypergrid::Rng;
using hypergrid::Shape;
using hypergrid::Tensor;

inline Tensor<double> random_tensor(Rng& rng, Shape s, double sd = 1.0) {
  Tensor<double> t(std::move(s));
  for (auto& v : t.values()) v = rng.normal(0.0, sd);
  return t;
}

// Accepts (C,H,W) or (N,C,H,W).
inline Tensor<double> conv2d_direct(const hypergrid::ConvParams<double>& p, const Tensor<double>& x) {
  const bool batched = x.rank() == 4;
  const std::size_t n = batched ? x.dim(0) : 1, c = x.dim(batched), h = x.dim(batched + 1), w = x.dim(batched + 2);
  const std::size_t o = p.kernel.dim(0), kh = p.kernel.dim(2), kw = p.kernel.dim(3);
  const std::size_t oh = (h + 2 * p.pad_h - kh) / p.stride + 1, ow = (w + 2 * p.pad_w - kw) / p.stride + 1;
  Tensor<double> y(batched ? Shape{n, o, oh, ow} : Shape{o, oh, ow});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t f = 0; f < o; ++f)
      for (std::size_t yy = 0; yy < oh; ++yy)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = p.bias[f];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long r = static_cast<long>(yy * p.stride + i) - static_cast<long>(p.pad_h);
                const long q = static_cast<long>(xx * p.stride + j) - static_cast<long>(p.pad_w);
                if (r < 0 || q < 0 || r >= static_cast<long>(h) || q >= static_cast<long>(w)) continue;
                acc += p.kernel.at(f, ch, i, j) * x[((s * c + ch) * h + r) * w + q];
              }
          y[((s * o + f) * oh + yy) * ow + xx] = acc;
        }
  return y;
}

inline Tensor<double> max_pool_direct(const Tensor<double>& x, std::size_t ph, std::size_t pw, std::size_t stride) {
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = (h - ph) / stride + 1, ow = (w - pw) / stride + 1;
  Tensor<double> y({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double m = -INFINITY;
        for (std::size_t a = 0; a < ph; ++a)
          for (std::size_t b = 0; b < pw; ++b) m = std::max(m, x.at(ch, i * stride + a, j * stride + b));
        y.at(ch, i, j) = m;
      }
  return y;
}

// Window sum recomputed from scratch at every position; (C,H,W) or (N,C,H,W).
inline Tensor<double> lrn_direct(const hypergrid::LrnParams& p, const Tensor<double>& x) {
  const bool batched = x.rank() == 4;
  const std::size_t n = batched ? x.dim(0) : 1, c = x.dim(batched);
  const std::size_t plane = x.size() / (n * c);
  Tensor<double> y(x.shape());
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t lo = ch >= p.depth_radius ? ch - p.depth_radius : 0;
        const std::size_t hi = std::min(c - 1, ch + p.depth_radius);
        double sum = 0;
        for (std::size_t j = lo; j <= hi; ++j) {
          const double v = x[(s * c + j) * plane + i];
          sum += v * v;
        }
        const std::size_t at = (s * c + ch) * plane + i;
        y[at] = x[at] / std::pow(p.bias_k + p.alpha * sum, p.beta);
      }
  return y;
}

struct TallyMetrics {
  double oa, aa, kappa;
};

// Expands the matrix into one (truth, pred) record per pixel and counts from those records.
inline TallyMetrics tally_metrics(const std::vector<std::uint64_t>& counts, std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> records;
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t p = 0; p < k; ++p)
      for (std::uint64_t r = 0; r < counts[t * k + p]; ++r) records.push_back({t, p});
  const double total = static_cast<double>(records.size());
  double agree = 0;
  for (const auto& [t, p] : records) agree += t == p;
  double recall_sum = 0, classes = 0, chance = 0;
  for (std::size_t cls = 0; cls < k; ++cls) {
    double truth_n = 0, pred_n = 0, hit = 0;
    for (const auto& [t, p] : records) {
      truth_n += t == cls;
      pred_n += p == cls;
      hit += t == cls && p == cls;
    }
    if (truth_n > 0) {
      recall_sum += hit / truth_n;
      classes += 1;
    }
    chance += (truth_n / total) * (pred_n / total);
  }
  const double oa = agree / total;
  return {oa, recall_sum / classes, chance == 1.0 ? 1.0 : (oa - chance) / (1.0 - chance)};
}

// One-sided exact p-value P(U >= u_obs) by listing every assignment of the
// ranks 1..n1+n2 to the first sample.
inline double exact_u_p_value(std::size_t n1, std::size_t n2, double u_obs) {
  const std::size_t n = n1 + n2;
  std::uint64_t at_least = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
    double rank_sum = 0;
    for (std::size_t r = 0; r < n; ++r)
      if (mask >> r & 1u) rank_sum += static_cast<double>(r + 1);
    const double u = rank_sum - static_cast<double>(n1 * (n1 + 1)) / 2.0;
    ++total;
    at_least += u >= u_obs - 1e-9;
  }
  return static_cast<double>(at_least) / static_cast<double>(total);
}

// U of the first sample by counting pairs.
inline double pair_count_u(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0;
  for (double x : a)
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return u;
}

}  // namespace oracle
