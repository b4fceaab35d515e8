#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hypergrid/tensor.hpp"

namespace hypergrid {

enum class OptimizerKind { sgd_momentum, sgd_plain, adam };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd_momentum: return "sgd_momentum";
    case OptimizerKind::sgd_plain: return "sgd_plain";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd_plain;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// A trainable tensor and the gradient accumulated for it.
template <typename T>
struct ParamRef {
  Tensor<T>* value;
  Tensor<T>* grad;
};

/// Auxiliary buffers are created on the first step and then bound to the
/// shapes of the parameter list they were created for.
template <typename T>
struct OptimizerState {
  OptimizerConfig config;
  std::vector<Tensor<T>> first;   // momentum velocity, or Adam first moment
  std::vector<Tensor<T>> second;  // Adam second moment
  std::size_t step = 0;

  OptimizerState() = default;
  explicit OptimizerState(OptimizerConfig c) : config(c) {}
};

namespace detail {
template <typename T>
void bind_buffers(OptimizerState<T>& state, std::span<const ParamRef<T>> params, bool need_second) {
  for (const auto& p : params)
    if (p.value->shape() != p.grad->shape())
      throw DimensionError("optimizer: gradient shape " + shape_str(p.grad->shape()) +
                           " does not match parameter " + shape_str(p.value->shape()));
  if (state.first.empty()) {
    for (const auto& p : params) {
      state.first.emplace_back(p.value->shape());
      if (need_second) state.second.emplace_back(p.value->shape());
    }
    return;
  }
  if (state.first.size() != params.size()) throw DimensionError("optimizer: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.first[i].shape() != params[i].value->shape())
      throw DimensionError("optimizer: buffer shape mismatch for parameter " + std::to_string(i));
}
}  // namespace detail

/// momentum: v <- m*v + g, p <- p - lr*v.  plain: p <- p - lr*g.
template <typename T>
void sgd_step(OptimizerState<T>& state, std::span<const ParamRef<T>> params, double lr) {
  const auto kind = state.config.kind;
  if (kind != OptimizerKind::sgd_momentum && kind != OptimizerKind::sgd_plain)
    throw ParameterError("sgd_step: optimizer state is " + to_string(kind));
  if (kind == OptimizerKind::sgd_plain) {
    for (const auto& p : params)
      if (p.value->shape() != p.grad->shape()) throw DimensionError("sgd_step: gradient shape mismatch");
    const T rate = static_cast<T>(lr);
    for (const auto& p : params)
      for (std::size_t i = 0; i < p.value->size(); ++i) (*p.value)[i] -= rate * (*p.grad)[i];
    ++state.step;
    return;
  }
  detail::bind_buffers(state, params, false);
  const T m = static_cast<T>(state.config.momentum);
  const T rate = static_cast<T>(lr);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = state.first[k];
    auto& value = *params[k].value;
    const auto& grad = *params[k].grad;
    for (std::size_t i = 0; i < value.size(); ++i) {
      v[i] = m * v[i] + grad[i];
      value[i] -= rate * v[i];
    }
  }
  ++state.step;
}

/// Adam with bias correction: p <- p - lr * m_hat / (sqrt(v_hat) + eps).
template <typename T>
void adam_step(OptimizerState<T>& state, std::span<const ParamRef<T>> params, double lr) {
  if (state.config.kind != OptimizerKind::adam)
    throw ParameterError("adam_step: optimizer state is " + to_string(state.config.kind));
  detail::bind_buffers(state, params, true);
  ++state.step;
  const double b1 = state.config.beta1;
  const double b2 = state.config.beta2;
  const double t = static_cast<double>(state.step);
  const T corr1 = static_cast<T>(1.0 / (1.0 - std::pow(b1, t)));
  const T corr2 = static_cast<T>(1.0 / (1.0 - std::pow(b2, t)));
  const T eps = static_cast<T>(state.config.epsilon);
  const T rate = static_cast<T>(lr);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first[k];
    auto& v = state.second[k];
    auto& value = *params[k].value;
    const auto& grad = *params[k].grad;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const T g = grad[i];
      m[i] = tb1 * m[i] + (T{1} - tb1) * g;
      v[i] = tb2 * v[i] + (T{1} - tb2) * g * g;
      const T m_hat = m[i] * corr1;
      const T v_hat = v[i] * corr2;
      value[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
void optimizer_step(OptimizerState<T>& state, std::span<const ParamRef<T>> params, double lr) {
  if (state.config.kind == OptimizerKind::adam)
    adam_step(state, params, lr);
  else
    sgd_step(state, params, lr);
}

}  // namespace hypergrid
