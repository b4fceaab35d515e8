#pragma once

#include <cmath>

#include "hypergrid/rng.hpp"
#include "hypergrid/tensor.hpp"

namespace hypergrid {

template <typename T>
Tensor<T> init_constant(const Shape& shape, double value) {
  return Tensor<T>(shape, static_cast<T>(value));
}

template <typename T>
Tensor<T> init_gaussian(Rng& rng, const Shape& shape, double mean, double stddev) {
  if (!(stddev >= 0.0)) throw ParameterError("init_gaussian: negative standard deviation");
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal(mean, stddev));
  return t;
}

/// fan_in / fan_out for a conv kernel (out,in,kh,kw) or a dense weight (out,in).
inline std::pair<std::size_t, std::size_t> fans(const Shape& shape) {
  if (shape.size() == 2) return {shape[1], shape[0]};
  if (shape.size() == 4) {
    const std::size_t receptive = shape[2] * shape[3];
    return {shape[1] * receptive, shape[0] * receptive};
  }
  throw DimensionError("fans: need a dense (out,in) or conv (out,in,kh,kw) shape, got " + shape_str(shape));
}

/// Uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> init_glorot_uniform(Rng& rng, const Shape& shape) {
  const auto [fan_in, fan_out] = fans(shape);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

}  // namespace hypergrid
