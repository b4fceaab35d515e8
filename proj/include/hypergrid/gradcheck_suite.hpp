#pragma once

// Randomised finite-difference checks of every differentiable layer in 64-bit.

#include <string>
#include <vector>

#include "hypergrid/gradcheck.hpp"
#include "hypergrid/ops.hpp"

namespace hypergrid {

struct LayerCheckSummary {
  std::string layer;
  std::size_t instances = 0;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
};

namespace detail {

using DTensor = Tensor<double>;

inline DTensor random_tensor(Rng& rng, Shape s, double sd = 1.0) {
  DTensor t(std::move(s));
  for (auto& v : t.values()) v = rng.normal(0.0, sd);
  return t;
}

// Flat views of several tensors as one parameter vector.
struct Packing {
  std::vector<DTensor*> parts;

  std::vector<double> gather() const {
    std::vector<double> v;
    for (auto* t : parts) v.insert(v.end(), t->values().begin(), t->values().end());
    return v;
  }
  void scatter(std::span<const double> v) const {
    std::size_t o = 0;
    for (auto* t : parts)
      for (auto& x : t->values()) x = v[o++];
  }
};

inline double weighted_sum(const DTensor& out, const DTensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

inline std::vector<double> concat(std::initializer_list<const DTensor*> ts) {
  std::vector<double> v;
  for (const auto* t : ts) v.insert(v.end(), t->values().begin(), t->values().end());
  return v;
}

inline void fold(LayerCheckSummary& s, const GradCheckResult& r) {
  ++s.instances;
  s.coordinates += r.checked;
  s.max_rel_error = std::max(s.max_rel_error, r.max_rel_error);
}

inline constexpr double kStep = 1e-4;  // probe step and relative-error floor

}  // namespace detail

/// conv2d with a square kernel of side k and same-size padding, gradients
/// with respect to input, kernel and bias at once.
inline LayerCheckSummary check_conv2d(Rng& rng, std::size_t k, std::size_t instances) {
  using namespace detail;
  LayerCheckSummary s{"conv2d " + std::to_string(k) + "x" + std::to_string(k)};
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(3), o = 1 + rng.below(3);
    const std::size_t h = k + rng.below(3), w = k + rng.below(3);
    DTensor x = random_tensor(rng, {n, c, h, w});
    ConvParams<double> p{random_tensor(rng, {o, c, k, k}, 0.5), random_tensor(rng, {o}, 0.5), k / 2, k / 2, 1};
    const DTensor y = conv2d(p, x);
    const DTensor wt = random_tensor(rng, y.shape());
    const auto g = conv2d_backward(p, x, wt);
    const Packing pack{{&x, &p.kernel, &p.bias}};
    const auto point = pack.gather();
    const auto analytic = concat({&g.input, &g.kernel, &g.bias});
    auto loss = [&](std::span<const double> v) {
      pack.scatter(v);
      return weighted_sum(conv2d(p, x), wt);
    };
    fold(s, finite_difference_check(loss, point, analytic, kStep));
    pack.scatter(point);
  }
  return s;
}

inline LayerCheckSummary check_dense(Rng& rng, std::size_t instances) {
  using namespace detail;
  LayerCheckSummary s{"dense"};
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng.below(3), in = 1 + rng.below(6), out = 1 + rng.below(5);
    DTensor x = random_tensor(rng, {n, in});
    DenseParams<double> p{random_tensor(rng, {out, in}, 0.5), random_tensor(rng, {out}, 0.5)};
    const DTensor wt = random_tensor(rng, {n, out});
    const auto g = dense_backward(p, x, wt);
    const Packing pack{{&x, &p.weight, &p.bias}};
    const auto point = pack.gather();
    auto loss = [&](std::span<const double> v) {
      pack.scatter(v);
      return weighted_sum(dense(p, x), wt);
    };
    fold(s, finite_difference_check(loss, point, concat({&g.input, &g.weight, &g.bias}), kStep));
  }
  return s;
}

/// LRN with an enlarged alpha so the cross-channel term is not negligible.
inline LayerCheckSummary check_lrn(Rng& rng, std::size_t instances) {
  using namespace detail;
  LayerCheckSummary s{"lrn"};
  for (std::size_t i = 0; i < instances; ++i) {
    const LrnParams lp{1 + rng.below(5), rng.uniform(0.5, 2.0), rng.uniform(0.01, 0.5), rng.uniform(0.5, 1.0)};
    DTensor x = random_tensor(rng, {1 + rng.below(2), 1 + rng.below(12), 1 + rng.below(3), 1 + rng.below(3)});
    const DTensor wt = random_tensor(rng, x.shape());
    const auto analytic = lrn_backward(lp, x, wt);
    const Packing pack{{&x}};
    auto loss = [&](std::span<const double> v) {
      pack.scatter(v);
      return weighted_sum(lrn(lp, x), wt);
    };
    const auto point = pack.gather();
    fold(s, finite_difference_check(loss, point, analytic.values(), kStep));
  }
  return s;
}

inline LayerCheckSummary check_global_avg_pool(Rng& rng, std::size_t instances) {
  using namespace detail;
  LayerCheckSummary s{"global_avg_pool"};
  for (std::size_t i = 0; i < instances; ++i) {
    DTensor x = random_tensor(rng, {1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(5), 1 + rng.below(5)});
    const DTensor y = global_avg_pool(x);
    const DTensor wt = random_tensor(rng, y.shape());
    const auto analytic = global_avg_pool_backward(x.shape(), wt);
    const Packing pack{{&x}};
    auto loss = [&](std::span<const double> v) {
      pack.scatter(v);
      return weighted_sum(global_avg_pool(x), wt);
    };
    const auto point = pack.gather();
    fold(s, finite_difference_check(loss, point, analytic.values(), kStep));
  }
  return s;
}

/// Max pooling on inputs whose pool windows have a clear winner (no near-ties).
inline LayerCheckSummary check_max_pool(Rng& rng, std::size_t instances) {
  using namespace detail;
  LayerCheckSummary s{"max_pool2d"};
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(3), h = 2 + rng.below(5), w = 2 + rng.below(5);
    // Distinct values spaced far beyond the probe step: a shuffled ramp plus small jitter.
    DTensor x({n, c, h, w});
    std::vector<double> ramp(x.size());
    for (std::size_t j = 0; j < ramp.size(); ++j) ramp[j] = 0.1 * static_cast<double>(j) + rng.uniform(0.0, 0.01);
    for (std::size_t j = ramp.size(); j > 1; --j) std::swap(ramp[j - 1], ramp[rng.below(j)]);
    std::copy(ramp.begin(), ramp.end(), x.data());
    const auto pooled = max_pool2d(x, 2, 2, 2);
    const DTensor wt = random_tensor(rng, pooled.output.shape());
    const auto analytic = max_pool2d_backward(x.shape(), pooled.argmax, wt);
    const Packing pack{{&x}};
    auto loss = [&](std::span<const double> v) {
      pack.scatter(v);
      return weighted_sum(max_pool2d(x, 2, 2, 2).output, wt);
    };
    const auto point = pack.gather();
    fold(s, finite_difference_check(loss, point, analytic.values(), kStep));
  }
  return s;
}

/// dense -> ReLU -> dense, redrawn until no pre-activation sits near the kink.
inline LayerCheckSummary check_relu_composite(Rng& rng, std::size_t instances) {
  using namespace detail;
  LayerCheckSummary s{"relu composite"};
  for (std::size_t i = 0; i < instances;) {
    const std::size_t n = 1 + rng.below(3), in = 2 + rng.below(4), hid = 2 + rng.below(5), out = 1 + rng.below(3);
    DTensor x = random_tensor(rng, {n, in});
    DenseParams<double> p1{random_tensor(rng, {hid, in}), random_tensor(rng, {hid})};
    DenseParams<double> p2{random_tensor(rng, {out, hid}), random_tensor(rng, {out})};
    const DTensor z = dense(p1, x);
    bool near_kink = false;
    for (auto v : z.values()) near_kink = near_kink || std::abs(v) < 1e-3;
    if (near_kink) continue;
    const DTensor a = relu(z);
    const DTensor wt = random_tensor(rng, {n, out});
    const auto g2 = dense_backward(p2, a, wt);
    const auto gz = relu_backward(z, g2.input);
    const auto g1 = dense_backward(p1, x, gz);
    const Packing pack{{&x, &p1.weight, &p1.bias, &p2.weight, &p2.bias}};
    const auto point = pack.gather();
    auto loss = [&](std::span<const double> v) {
      pack.scatter(v);
      return weighted_sum(dense(p2, relu(dense(p1, x))), wt);
    };
    fold(s, finite_difference_check(loss, point, concat({&g1.input, &g1.weight, &g1.bias, &g2.weight, &g2.bias}),
                                    kStep));
    ++i;
  }
  return s;
}

inline LayerCheckSummary check_softmax_cross_entropy(Rng& rng, std::size_t instances) {
  using namespace detail;
  LayerCheckSummary s{"softmax_cross_entropy"};
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng.below(4), f = 2 + rng.below(6);
    DTensor logits = random_tensor(rng, {n, f}, 2.0);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = rng.below(f);
    const auto r = softmax_cross_entropy(logits, std::span<const std::size_t>(labels));
    const Packing pack{{&logits}};
    const auto point = pack.gather();
    auto loss = [&](std::span<const double> v) {
      pack.scatter(v);
      return softmax_cross_entropy(logits, std::span<const std::size_t>(labels)).loss;
    };
    fold(s, finite_difference_check(loss, point, r.grad.values(), kStep));
  }
  return s;
}

inline std::vector<LayerCheckSummary> run_gradcheck_suite(std::uint64_t seed, std::size_t instances = 20) {
  Rng rng(seed);
  std::vector<LayerCheckSummary> out;
  for (std::size_t k : {1, 3, 5}) {
    Rng r = rng.child(k);
    out.push_back(check_conv2d(r, k, instances));
  }
  Rng r1 = rng.child(10), r2 = rng.child(11), r3 = rng.child(12), r4 = rng.child(13), r5 = rng.child(14),
      r6 = rng.child(15);
  out.push_back(check_dense(r1, instances));
  out.push_back(check_lrn(r2, instances));
  out.push_back(check_global_avg_pool(r3, instances));
  out.push_back(check_max_pool(r4, instances));
  out.push_back(check_relu_composite(r5, instances));
  out.push_back(check_softmax_cross_entropy(r6, instances));
  return out;
}

}  // namespace hypergrid
