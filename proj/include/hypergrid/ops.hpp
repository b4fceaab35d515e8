#pragma once

// Forward and backward kernels for every layer type the three networks use.
//
// Image tensors are either a single sample (C,H,W) or a batch (N,C,H,W);
// vector tensors are (F) or (N,F). Outputs keep the rank of the input.
// Backward kernels return the gradient w.r.t. the input and, where the layer
// has weights, the weight gradients summed over the batch.

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <type_traits>
#include <utility>

#include "hypergrid/rng.hpp"
#include "hypergrid/tensor.hpp"

namespace hypergrid {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Branch-free "keep ? v : 0". Sign patterns of activations are random, so a
// data-dependent branch here mispredicts about half the time.
template <typename T>
using SameWidthUint = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

template <typename T>
inline T keep_if(bool keep, T v) {
  using U = SameWidthUint<T>;
  return std::bit_cast<T>(std::bit_cast<U>(v) & (U{0} - static_cast<U>(keep)));
}

// x > 0 from the bit pattern: positive floats are exactly the positive signed integers (NaN aside).
template <typename T>
inline bool positive_bits(T x) {
  using S = std::make_signed_t<SameWidthUint<T>>;
  return std::bit_cast<S>(x) > 0;
}

struct ImageDims {
  std::size_t n, c, h, w;
  bool batched;
};

template <typename T>
ImageDims image_dims(const Tensor<T>& x, const char* op) {
  if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2), false};
  if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), true};
  throw DimensionError(std::string(op) + ": expected (C,H,W) or (N,C,H,W), got " +
                       shape_str(x.shape()));
}

inline Shape image_shape(const ImageDims& d, std::size_t c, std::size_t h, std::size_t w) {
  return d.batched ? Shape{d.n, c, h, w} : Shape{c, h, w};
}

struct VecDims {
  std::size_t n, f;
  bool batched;
};

template <typename T>
VecDims vec_dims(const Tensor<T>& x, const char* op) {
  if (x.rank() == 1) return {1, x.dim(0), false};
  if (x.rank() == 2) return {x.dim(0), x.dim(1), true};
  throw DimensionError(std::string(op) + ": expected (F) or (N,F), got " + shape_str(x.shape()));
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw DimensionError(std::string(op) + ": shape " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace detail

// ---------------------------------------------------------------- conv2d

template <typename T>
struct ConvParams {
  Tensor<T> kernel;  // (out, in, kh, kw)
  Tensor<T> bias;    // (out)
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t stride = 1;

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }
  std::size_t kh() const { return kernel.dim(2); }
  std::size_t kw() const { return kernel.dim(3); }
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> kernel;
  Tensor<T> bias;
};

namespace detail {

struct ConvGeom {
  ImageDims in;
  std::size_t out_c, kh, kw, oh, ow;
  std::size_t pad_h, pad_w, stride;
  std::size_t patch() const { return in.c * kh * kw; }
  std::size_t positions() const { return oh * ow; }
};

template <typename T>
ConvGeom conv_geometry(const ConvParams<T>& p, const Tensor<T>& x) {
  if (p.kernel.rank() != 4) throw DimensionError("conv2d: kernel must be (out,in,kh,kw)");
  if (p.bias.rank() != 1 || p.bias.dim(0) != p.out_channels())
    throw DimensionError("conv2d: bias length must equal out_channels");
  if (p.stride == 0) throw ParameterError("conv2d: stride must be positive");
  auto d = image_dims(x, "conv2d");
  if (d.c != p.in_channels())
    throw DimensionError("conv2d: input has " + std::to_string(d.c) + " channels, kernel expects " +
                         std::to_string(p.in_channels()));
  const std::size_t ph = d.h + 2 * p.pad_h;
  const std::size_t pw = d.w + 2 * p.pad_w;
  if (ph < p.kh() || pw < p.kw())
    throw DimensionError("conv2d: padded input " + std::to_string(ph) + "x" + std::to_string(pw) +
                         " smaller than kernel");
  ConvGeom g{d,        p.out_channels(), p.kh(), p.kw(), (ph - p.kh()) / p.stride + 1,
             (pw - p.kw()) / p.stride + 1, p.pad_h, p.pad_w, p.stride};
  return g;
}

// Column matrix of shape (C*kh*kw, N*OH*OW).
template <typename T>
RowMat<T> im2col(const ConvGeom& g, const T* x) {
  const std::size_t cols = g.in.n * g.positions();
  RowMat<T> col = RowMat<T>::Zero(static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(cols));
  const std::size_t plane = g.in.h * g.in.w;
  for (std::size_t c = 0; c < g.in.c; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = col.data() + ((c * g.kh + ky) * g.kw + kx) * cols;
        for (std::size_t n = 0; n < g.in.n; ++n) {
          const T* src = x + (n * g.in.c + c) * plane;
          T* dst = row + n * g.positions();
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad_h);
            if (iy < 0 || iy >= static_cast<long>(g.in.h)) continue;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad_w);
              if (ix < 0 || ix >= static_cast<long>(g.in.w)) continue;
              dst[oy * g.ow + ox] = src[static_cast<std::size_t>(iy) * g.in.w + static_cast<std::size_t>(ix)];
            }
          }
        }
      }
  return col;
}

template <typename T>
void col2im(const ConvGeom& g, const RowMat<T>& col, T* gx) {
  const std::size_t cols = g.in.n * g.positions();
  const std::size_t plane = g.in.h * g.in.w;
  for (std::size_t c = 0; c < g.in.c; ++c)
    for (std::size_t ky = 0; ky < g.kh; ++ky)
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col.data() + ((c * g.kh + ky) * g.kw + kx) * cols;
        for (std::size_t n = 0; n < g.in.n; ++n) {
          T* dst = gx + (n * g.in.c + c) * plane;
          const T* src = row + n * g.positions();
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad_h);
            if (iy < 0 || iy >= static_cast<long>(g.in.h)) continue;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad_w);
              if (ix < 0 || ix >= static_cast<long>(g.in.w)) continue;
              dst[static_cast<std::size_t>(iy) * g.in.w + static_cast<std::size_t>(ix)] += src[oy * g.ow + ox];
            }
          }
        }
      }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const ConvParams<T>& p, const Tensor<T>& x) {
  const auto g = detail::conv_geometry(p, x);
  const auto col = detail::im2col(g, x.data());
  detail::ConstMatMap<T> k(p.kernel.data(), static_cast<Eigen::Index>(g.out_c),
                           static_cast<Eigen::Index>(g.patch()));
  const detail::RowMat<T> y = k * col;  // (out, N*P)
  Tensor<T> out(detail::image_shape(g.in, g.out_c, g.oh, g.ow));
  const std::size_t pos = g.positions();
  for (std::size_t n = 0; n < g.in.n; ++n)
    for (std::size_t o = 0; o < g.out_c; ++o) {
      T* dst = out.data() + (n * g.out_c + o) * pos;
      const T* src = y.data() + o * g.in.n * pos + n * pos;
      const T b = p.bias[o];
      for (std::size_t i = 0; i < pos; ++i) dst[i] = src[i] + b;
    }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const ConvParams<T>& p, const Tensor<T>& x, const Tensor<T>& grad_out,
                             bool input_grad = true) {
  const auto g = detail::conv_geometry(p, x);
  detail::require_same_shape(grad_out.shape(), detail::image_shape(g.in, g.out_c, g.oh, g.ow),
                             "conv2d_backward");
  const std::size_t pos = g.positions();
  const std::size_t cols = g.in.n * pos;
  detail::RowMat<T> gy(static_cast<Eigen::Index>(g.out_c), static_cast<Eigen::Index>(cols));
  for (std::size_t n = 0; n < g.in.n; ++n)
    for (std::size_t o = 0; o < g.out_c; ++o)
      std::copy_n(grad_out.data() + (n * g.out_c + o) * pos, pos, gy.data() + o * cols + n * pos);

  ConvGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(p.kernel.shape()), Tensor<T>(p.bias.shape())};
  const auto col = detail::im2col(g, x.data());
  detail::MatMap<T> gk(grads.kernel.data(), static_cast<Eigen::Index>(g.out_c),
                       static_cast<Eigen::Index>(g.patch()));
  gk.noalias() = gy * col.transpose();
  for (std::size_t o = 0; o < g.out_c; ++o) grads.bias[o] = gy.row(static_cast<Eigen::Index>(o)).sum();
  if (!input_grad) return grads;  // grads.input stays zero

  detail::ConstMatMap<T> k(p.kernel.data(), static_cast<Eigen::Index>(g.out_c),
                           static_cast<Eigen::Index>(g.patch()));
  const detail::RowMat<T> gcol = k.transpose() * gy;
  detail::col2im(g, gcol, grads.input.data());
  return grads;
}

// ---------------------------------------------------------------- dense

template <typename T>
struct DenseParams {
  Tensor<T> weight;  // (out, in)
  Tensor<T> bias;    // (out)

  std::size_t out_units() const { return weight.dim(0); }
  std::size_t in_units() const { return weight.dim(1); }
};

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

namespace detail {
template <typename T>
VecDims dense_dims(const DenseParams<T>& p, const Tensor<T>& x) {
  if (p.weight.rank() != 2) throw DimensionError("dense: weight must be (out,in)");
  if (p.bias.rank() != 1 || p.bias.dim(0) != p.out_units())
    throw DimensionError("dense: bias length must equal out_units");
  auto d = vec_dims(x, "dense");
  if (d.f != p.in_units())
    throw DimensionError("dense: input length " + std::to_string(d.f) + ", weight expects " +
                         std::to_string(p.in_units()));
  return d;
}
}  // namespace detail

template <typename T>
Tensor<T> dense(const DenseParams<T>& p, const Tensor<T>& x) {
  const auto d = detail::dense_dims(p, x);
  const auto out_units = p.out_units();
  Tensor<T> out(d.batched ? Shape{d.n, out_units} : Shape{out_units});
  detail::ConstMatMap<T> xm(x.data(), static_cast<Eigen::Index>(d.n), static_cast<Eigen::Index>(d.f));
  detail::ConstMatMap<T> w(p.weight.data(), static_cast<Eigen::Index>(out_units),
                           static_cast<Eigen::Index>(d.f));
  detail::MatMap<T> y(out.data(), static_cast<Eigen::Index>(d.n), static_cast<Eigen::Index>(out_units));
  y.noalias() = xm * w.transpose();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(p.bias.data(), static_cast<Eigen::Index>(out_units));
  y.rowwise() += b;
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const DenseParams<T>& p, const Tensor<T>& x, const Tensor<T>& grad_out) {
  const auto d = detail::dense_dims(p, x);
  const auto out_units = p.out_units();
  detail::require_same_shape(grad_out.shape(), d.batched ? Shape{d.n, out_units} : Shape{out_units},
                             "dense_backward");
  DenseGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(p.weight.shape()), Tensor<T>(p.bias.shape())};
  const auto n = static_cast<Eigen::Index>(d.n);
  const auto in = static_cast<Eigen::Index>(d.f);
  const auto out = static_cast<Eigen::Index>(out_units);
  detail::ConstMatMap<T> xm(x.data(), n, in);
  detail::ConstMatMap<T> gy(grad_out.data(), n, out);
  detail::ConstMatMap<T> w(p.weight.data(), out, in);
  detail::MatMap<T> gw(grads.weight.data(), out, in);
  detail::MatMap<T> gx(grads.input.data(), n, in);
  gw.noalias() = gy.transpose() * xm;
  gx.noalias() = gy * w;
  for (Eigen::Index o = 0; o < out; ++o) grads.bias[static_cast<std::size_t>(o)] = gy.col(o).sum();
  return grads;
}

// ---------------------------------------------------------------- relu

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

/// Gradient is 1 for x > 0 and 0 otherwise, including x == 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  detail::require_same_shape(x.shape(), grad_out.shape(), "relu_backward");
  Tensor<T> gx(x.shape());
  const T* xp = x.data();
  const T* gp = grad_out.data();
  T* out = gx.data();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = detail::keep_if(detail::positive_bits(xp[i]), gp[i]);
  return gx;
}

// ---------------------------------------------------------------- max pool

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index feeding each output cell
};

/// Floor-mode max pooling; ties resolve to the first maximum in scan order.
template <typename T>
PoolResult<T> max_pool2d(const Tensor<T>& x, std::size_t pool_h, std::size_t pool_w, std::size_t stride) {
  const auto d = detail::image_dims(x, "max_pool2d");
  if (pool_h == 0 || pool_w == 0 || stride == 0) throw ParameterError("max_pool2d: zero pool or stride");
  if (d.h < pool_h || d.w < pool_w) throw DimensionError("max_pool2d: pool larger than input");
  const std::size_t oh = (d.h - pool_h) / stride + 1;
  const std::size_t ow = (d.w - pool_w) / stride + 1;
  PoolResult<T> r{Tensor<T>(detail::image_shape(d, d.c, oh, ow)), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < d.n * d.c; ++nc) {
    const std::size_t base = nc * d.h * d.w;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + oy * stride * d.w + ox * stride;
        for (std::size_t py = 0; py < pool_h; ++py)
          for (std::size_t px = 0; px < pool_w; ++px) {
            const std::size_t idx = base + (oy * stride + py) * d.w + ox * stride + px;
            if (x[idx] > x[best]) best = idx;
          }
        r.output[o] = x[best];
        r.argmax[o] = best;
      }
  }
  return r;
}

template <typename T>
Tensor<T> max_pool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                              const Tensor<T>& grad_out) {
  if (argmax.size() != grad_out.size()) throw DimensionError("max_pool2d_backward: argmax size mismatch");
  Tensor<T> gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += grad_out[i];
  return gx;
}

// ---------------------------------------------------------------- global average pool

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const auto d = detail::image_dims(x, "global_avg_pool");
  Tensor<T> out(d.batched ? Shape{d.n, d.c} : Shape{d.c});
  const std::size_t plane = d.h * d.w;
  for (std::size_t i = 0; i < d.n * d.c; ++i) {
    T s{0};
    for (std::size_t j = 0; j < plane; ++j) s += x[i * plane + j];
    out[i] = s / static_cast<T>(plane);
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  Tensor<T> gx(input_shape);
  const std::size_t plane = gx.size() / grad_out.size();
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const T g = grad_out[i] / static_cast<T>(plane);
    std::fill_n(gx.data() + i * plane, plane, g);
  }
  return gx;
}

// ---------------------------------------------------------------- local response normalization

struct LrnParams {
  std::size_t depth_radius = 5;
  double bias_k = 1.0;
  double alpha = 1e-4;
  double beta = 0.75;
};

namespace detail {
inline void check_lrn(const LrnParams& p) {
  if (p.depth_radius == 0) throw ParameterError("lrn: depth_radius must be positive");
  if (!(p.bias_k > 0)) throw ParameterError("lrn: bias_k must be positive");
}

// scale[c,y,x] = k + alpha * sum of squares over the clipped channel window
template <typename T>
Tensor<T> lrn_scale(const LrnParams& p, const Tensor<T>& x, const ImageDims& d) {
  Tensor<T> scale(x.shape());
  const std::size_t plane = d.h * d.w;
  const T alpha = static_cast<T>(p.alpha);
  const T k = static_cast<T>(p.bias_k);
  std::vector<T> sq(d.c * plane);
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* in = x.data() + n * d.c * plane;
    T* s = scale.data() + n * d.c * plane;
    for (std::size_t i = 0; i < d.c * plane; ++i) sq[i] = in[i] * in[i];
    // running window sum over channels; sc holds the raw sum until the final pass
    std::vector<T> run(plane, T{0});
    for (std::size_t j = 0; j <= std::min(d.c - 1, p.depth_radius); ++j)
      for (std::size_t i = 0; i < plane; ++i) run[i] += sq[j * plane + i];
    for (std::size_t c = 0; c < d.c; ++c) {
      T* sc = s + c * plane;
      for (std::size_t i = 0; i < plane; ++i) sc[i] = k + alpha * run[i];
      const std::size_t enter = c + p.depth_radius + 1;
      if (enter < d.c)
        for (std::size_t i = 0; i < plane; ++i) run[i] += sq[enter * plane + i];
      if (c >= p.depth_radius)
        for (std::size_t i = 0; i < plane; ++i) run[i] -= sq[(c - p.depth_radius) * plane + i];
    }
  }
  return scale;
}

// s^(-beta), with a cheaper form for the common beta = 3/4
template <typename T>
inline T inv_pow(T s, T beta) {
  if (beta == T(0.75)) {
    const T r = std::sqrt(s);
    return T{1} / (r * std::sqrt(r));
  }
  return std::pow(s, -beta);
}
}  // namespace detail

template <typename T>
struct LrnResult {
  Tensor<T> output;
  Tensor<T> scale;  // k + alpha * window sum, reusable by the backward pass
};

/// out = in / (k + alpha * sum_{|j-c| <= n} in_j^2)^beta, window clipped at the channel boundaries.
template <typename T>
LrnResult<T> lrn_with_scale(const LrnParams& p, const Tensor<T>& x) {
  detail::check_lrn(p);
  const auto d = detail::image_dims(x, "lrn");
  LrnResult<T> r{Tensor<T>(x.shape()), detail::lrn_scale(p, x, d)};
  const T beta = static_cast<T>(p.beta);
  for (std::size_t i = 0; i < x.size(); ++i) r.output[i] = x[i] * detail::inv_pow(r.scale[i], beta);
  return r;
}

template <typename T>
Tensor<T> lrn(const LrnParams& p, const Tensor<T>& x) {
  return lrn_with_scale(p, x).output;
}

template <typename T>
Tensor<T> lrn_backward(const LrnParams& p, const Tensor<T>& x, const Tensor<T>& grad_out,
                       const Tensor<T>* cached_scale = nullptr) {
  detail::check_lrn(p);
  const auto d = detail::image_dims(x, "lrn_backward");
  detail::require_same_shape(x.shape(), grad_out.shape(), "lrn_backward");
  Tensor<T> own;
  if (!cached_scale) own = detail::lrn_scale(p, x, d);
  const Tensor<T>& scale = cached_scale ? *cached_scale : own;
  const T beta = static_cast<T>(p.beta);
  const T coeff = static_cast<T>(2.0 * p.alpha * p.beta);
  // ratio[c] = g_c * x_c * S_c^(-beta-1)
  Tensor<T> ratio(x.shape());
  Tensor<T> gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T inv = detail::inv_pow(scale[i], beta);
    gx[i] = grad_out[i] * inv;
    ratio[i] = grad_out[i] * x[i] * inv / scale[i];
  }
  const std::size_t plane = d.h * d.w;
  std::vector<T> acc(plane);
  for (std::size_t n = 0; n < d.n; ++n) {
    const std::size_t off = n * d.c * plane;
    for (std::size_t j = 0; j < d.c; ++j) {
      if (j == 0) {
        std::fill(acc.begin(), acc.end(), T{0});
        for (std::size_t c = 0; c <= std::min(d.c - 1, p.depth_radius); ++c)
          for (std::size_t i = 0; i < plane; ++i) acc[i] += ratio[off + c * plane + i];
      }
      for (std::size_t i = 0; i < plane; ++i) gx[off + j * plane + i] -= coeff * x[off + j * plane + i] * acc[i];
      const std::size_t enter = j + p.depth_radius + 1;
      if (enter < d.c)
        for (std::size_t i = 0; i < plane; ++i) acc[i] += ratio[off + enter * plane + i];
      if (j >= p.depth_radius)
        for (std::size_t i = 0; i < plane; ++i) acc[i] -= ratio[off + (j - p.depth_radius) * plane + i];
    }
  }
  return gx;
}

// ---------------------------------------------------------------- dropout

template <typename T>
struct DropoutResult {
  Tensor<T> output;
  std::vector<T> mask;  // per-element multiplier: 0 or 1/(1-rate); empty when identity
};

/// Inverted dropout: survivors are scaled at training time, inference is the identity.
template <typename T>
DropoutResult<T> dropout(Rng& rng, double rate, const Tensor<T>& x, bool training) {
  if (!(rate >= 0.0) || rate >= 1.0) throw ParameterError("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return {x, {}};
  DropoutResult<T> r{x, std::vector<T>(x.size())};
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  // Each 64-bit draw decides two elements; an element survives when its
  // 32-bit half, read as a fraction of 2^32, is at least `rate`.
  const auto threshold = static_cast<std::uint64_t>(std::ceil(std::ldexp(rate, 32)));
  const std::size_t n = x.size();
  T* out = r.output.data();
  T* mask = r.mask.data();
  for (std::size_t i = 0; i < n; i += 2) {
    const std::uint64_t bits = rng.next_u64();
    mask[i] = detail::keep_if((bits & 0xFFFFFFFFu) >= threshold, keep_scale);
    if (i + 1 < n) mask[i + 1] = detail::keep_if((bits >> 32) >= threshold, keep_scale);
  }
  for (std::size_t i = 0; i < n; ++i) out[i] *= mask[i];
  return r;
}

template <typename T>
Tensor<T> dropout_backward(const std::vector<T>& mask, const Tensor<T>& grad_out) {
  if (mask.empty()) return grad_out;
  if (mask.size() != grad_out.size()) throw DimensionError("dropout_backward: mask size mismatch");
  Tensor<T> gx = grad_out;
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask[i];
  return gx;
}

// ---------------------------------------------------------------- softmax cross-entropy

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> p(logits.begin(), logits.end());
  const T mx = *std::max_element(p.begin(), p.end());
  T sum{0};
  for (auto& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

template <typename T>
struct LossResult {
  T loss;          // mean over the batch
  Tensor<T> grad;  // d(mean loss)/d(logits)
};

/// labels holds one class index per sample; a single-sample call takes logits of shape (c).
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  const auto d = detail::vec_dims(logits, "softmax_cross_entropy");
  if (labels.size() != d.n)
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(d.n) + " samples");
  LossResult<T> r{T{0}, Tensor<T>(logits.shape())};
  const T inv_n = T{1} / static_cast<T>(d.n);
  for (std::size_t n = 0; n < d.n; ++n) {
    if (labels[n] >= d.f)
      throw ParameterError("softmax_cross_entropy: class " + std::to_string(labels[n]) +
                           " out of range for " + std::to_string(d.f) + " logits");
    std::span<const T> row(logits.data() + n * d.f, d.f);
    const T mx = *std::max_element(row.begin(), row.end());
    T sum{0};
    for (auto v : row) sum += std::exp(v - mx);
    const T log_sum = std::log(sum);
    r.loss += (log_sum - (row[labels[n]] - mx)) * inv_n;
    for (std::size_t c = 0; c < d.f; ++c) {
      const T prob = std::exp(row[c] - mx - log_sum);
      r.grad[n * d.f + c] = (prob - (c == labels[n] ? T{1} : T{0})) * inv_n;
    }
  }
  return r;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::size_t label) {
  return softmax_cross_entropy(logits, std::span<const std::size_t>(&label, 1));
}

}  // namespace hypergrid
