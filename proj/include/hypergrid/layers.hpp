#pragma once

// Stateful layer wrappers around the kernels in ops.hpp. A layer caches
// what its backward pass needs during a training-mode forward; in
// inference mode nothing is cached.

#include <memory>
#include <string>
#include <vector>

#include "hypergrid/ops.hpp"
#include "hypergrid/optim.hpp"

namespace hypergrid {

struct RunContext {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }
  virtual std::string kind() const = 0;

  virtual Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  /// Backward pass for the first layer of a network: parameter gradients only.
  virtual void backward_params(const Tensor<T>& grad_out) { backward(grad_out); }
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// Leaf layers that own weights, in a fixed order.
  virtual void collect_weighted(std::vector<Layer*>&) {}
  virtual void collect_params(std::vector<NamedParam<T>>&) {}
  /// Weighted processing layers; a multi-branch filter bank counts once.
  virtual std::size_t processing_layers() const { return 0; }
  virtual void zero_grad() {}

  /// Parameter tensors of a leaf weighted layer (kernel/weight, bias).
  virtual std::vector<Tensor<T>*> tensors() { return {}; }

 protected:
  std::string name_;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

// ---------------------------------------------------------------- weighted leaves

template <typename T>
class Conv2dLayer final : public Layer<T> {
 public:
  Conv2dLayer(std::string name, ConvParams<T> params)
      : Layer<T>(std::move(name)), params_(std::move(params)),
        grad_kernel_(params_.kernel.shape()), grad_bias_(params_.bias.shape()) {}

  std::string kind() const override { return "conv2d"; }
  ConvParams<T>& params() { return params_; }
  const ConvParams<T>& params() const { return params_; }

  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) override {
    if (ctx.training) input_ = x;
    return conv2d(params_, x);
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    auto grads = conv2d_backward(params_, input_, g);
    accumulate(grad_kernel_, grads.kernel);
    accumulate(grad_bias_, grads.bias);
    return std::move(grads.input);
  }
  void backward_params(const Tensor<T>& g) override {
    auto grads = conv2d_backward(params_, input_, g, false);
    accumulate(grad_kernel_, grads.kernel);
    accumulate(grad_bias_, grads.bias);
  }
  LayerPtr<T> clone() const override { return std::make_unique<Conv2dLayer>(this->name_, params_); }
  void collect_weighted(std::vector<Layer<T>*>& out) override { out.push_back(this); }
  void collect_params(std::vector<NamedParam<T>>& out) override {
    out.push_back({this->name_ + ".kernel", &params_.kernel, &grad_kernel_});
    out.push_back({this->name_ + ".bias", &params_.bias, &grad_bias_});
  }
  std::size_t processing_layers() const override { return 1; }
  void zero_grad() override {
    grad_kernel_.fill(T{0});
    grad_bias_.fill(T{0});
  }
  std::vector<Tensor<T>*> tensors() override { return {&params_.kernel, &params_.bias}; }

 private:
  static void accumulate(Tensor<T>& acc, const Tensor<T>& g) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }
  ConvParams<T> params_;
  Tensor<T> grad_kernel_, grad_bias_;
  Tensor<T> input_;
};

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(std::string name, DenseParams<T> params)
      : Layer<T>(std::move(name)), params_(std::move(params)),
        grad_weight_(params_.weight.shape()), grad_bias_(params_.bias.shape()) {}

  std::string kind() const override { return "dense"; }
  DenseParams<T>& params() { return params_; }
  const DenseParams<T>& params() const { return params_; }

  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) override {
    if (ctx.training) input_ = x;
    return dense(params_, x);
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    auto grads = dense_backward(params_, input_, g);
    for (std::size_t i = 0; i < grad_weight_.size(); ++i) grad_weight_[i] += grads.weight[i];
    for (std::size_t i = 0; i < grad_bias_.size(); ++i) grad_bias_[i] += grads.bias[i];
    return std::move(grads.input);
  }
  LayerPtr<T> clone() const override { return std::make_unique<DenseLayer>(this->name_, params_); }
  void collect_weighted(std::vector<Layer<T>*>& out) override { out.push_back(this); }
  void collect_params(std::vector<NamedParam<T>>& out) override {
    out.push_back({this->name_ + ".weight", &params_.weight, &grad_weight_});
    out.push_back({this->name_ + ".bias", &params_.bias, &grad_bias_});
  }
  std::size_t processing_layers() const override { return 1; }
  void zero_grad() override {
    grad_weight_.fill(T{0});
    grad_bias_.fill(T{0});
  }
  std::vector<Tensor<T>*> tensors() override { return {&params_.weight, &params_.bias}; }

 private:
  DenseParams<T> params_;
  Tensor<T> grad_weight_, grad_bias_;
  Tensor<T> input_;
};

// ---------------------------------------------------------------- parameter-free layers

template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string kind() const override { return "relu"; }
  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) override {
    if (ctx.training) input_ = x;
    return relu(x);
  }
  Tensor<T> backward(const Tensor<T>& g) override { return relu_backward(input_, g); }
  LayerPtr<T> clone() const override { return std::make_unique<ReluLayer>(this->name_); }

 private:
  Tensor<T> input_;
};

template <typename T>
class LrnLayer final : public Layer<T> {
 public:
  LrnLayer(std::string name, LrnParams p) : Layer<T>(std::move(name)), params_(p) {}
  std::string kind() const override { return "lrn"; }
  const LrnParams& params() const { return params_; }
  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) override {
    if (!ctx.training) return lrn(params_, x);
    input_ = x;
    auto r = lrn_with_scale(params_, x);
    scale_ = std::move(r.scale);
    return std::move(r.output);
  }
  Tensor<T> backward(const Tensor<T>& g) override { return lrn_backward(params_, input_, g, &scale_); }
  LayerPtr<T> clone() const override { return std::make_unique<LrnLayer>(this->name_, params_); }

 private:
  LrnParams params_;
  Tensor<T> input_, scale_;
};

template <typename T>
class DropoutLayer final : public Layer<T> {
 public:
  DropoutLayer(std::string name, double rate) : Layer<T>(std::move(name)), rate_(rate) {
    if (!(rate >= 0.0) || rate >= 1.0) throw ParameterError("dropout rate must be in [0,1)");
  }
  std::string kind() const override { return "dropout"; }
  double rate() const { return rate_; }
  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) override {
    if (ctx.training && rate_ > 0.0 && ctx.rng == nullptr)
      throw ParameterError("dropout in training mode needs an rng");
    Rng dummy;
    auto r = dropout(ctx.rng ? *ctx.rng : dummy, rate_, x, ctx.training);
    mask_ = std::move(r.mask);
    return std::move(r.output);
  }
  Tensor<T> backward(const Tensor<T>& g) override { return dropout_backward(mask_, g); }
  LayerPtr<T> clone() const override { return std::make_unique<DropoutLayer>(this->name_, rate_); }

 private:
  double rate_;
  std::vector<T> mask_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  MaxPoolLayer(std::string name, std::size_t pool_h, std::size_t pool_w, std::size_t stride)
      : Layer<T>(std::move(name)), ph_(pool_h), pw_(pool_w), stride_(stride) {}
  std::string kind() const override { return "max_pool2d"; }
  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) override {
    auto r = max_pool2d(x, ph_, pw_, stride_);
    if (ctx.training) {
      in_shape_ = x.shape();
      argmax_ = std::move(r.argmax);
    }
    return std::move(r.output);
  }
  Tensor<T> backward(const Tensor<T>& g) override { return max_pool2d_backward(in_shape_, argmax_, g); }
  LayerPtr<T> clone() const override { return std::make_unique<MaxPoolLayer>(this->name_, ph_, pw_, stride_); }

 private:
  std::size_t ph_, pw_, stride_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class GlobalAvgPoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string kind() const override { return "global_avg_pool"; }
  Tensor<T> forward(const Tensor<T>& x, RunContext&) override {
    in_shape_ = x.shape();
    return global_avg_pool(x);
  }
  Tensor<T> backward(const Tensor<T>& g) override { return global_avg_pool_backward(in_shape_, g); }
  LayerPtr<T> clone() const override { return std::make_unique<GlobalAvgPoolLayer>(this->name_); }

 private:
  Shape in_shape_;
};

/// (N,C,H,W) -> (N,C*H*W); a single (C,H,W) sample flattens to (C*H*W).
template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string kind() const override { return "flatten"; }
  Tensor<T> forward(const Tensor<T>& x, RunContext&) override {
    in_shape_ = x.shape();
    if (x.rank() == 4) return x.reshaped({x.dim(0), x.size() / x.dim(0)});
    if (x.rank() == 3) return x.reshaped({x.size()});
    throw DimensionError("flatten: expected an image tensor, got " + shape_str(x.shape()));
  }
  Tensor<T> backward(const Tensor<T>& g) override { return g.reshaped(in_shape_); }
  LayerPtr<T> clone() const override { return std::make_unique<FlattenLayer>(this->name_); }

 private:
  Shape in_shape_;
};

/// Keeps only the centre pixel of every channel: (N,C,H,W) -> (N,C,1,1).
template <typename T>
class CenterPixelLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string kind() const override { return "center_pixel"; }
  Tensor<T> forward(const Tensor<T>& x, RunContext&) override {
    const auto d = detail::image_dims(x, "center_pixel");
    in_shape_ = x.shape();
    Tensor<T> out(detail::image_shape(d, d.c, 1, 1));
    const std::size_t plane = d.h * d.w;
    const std::size_t centre = (d.h / 2) * d.w + d.w / 2;
    for (std::size_t i = 0; i < d.n * d.c; ++i) out[i] = x[i * plane + centre];
    return out;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> gx(in_shape_);
    const std::size_t h = in_shape_[in_shape_.size() - 2], w = in_shape_.back();
    const std::size_t centre = (h / 2) * w + w / 2;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i * h * w + centre] = g[i];
    return gx;
  }
  LayerPtr<T> clone() const override { return std::make_unique<CenterPixelLayer>(this->name_); }

 private:
  Shape in_shape_;
};

// ---------------------------------------------------------------- composites

template <typename T>
class Sequential : public Layer<T> {
 public:
  explicit Sequential(std::string name) : Layer<T>(std::move(name)) {}
  Sequential(const Sequential& other) : Layer<T>(other.name_) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }

  std::string kind() const override { return "sequential"; }
  void add(LayerPtr<T> layer) { layers_.push_back(std::move(layer)); }
  std::vector<LayerPtr<T>>& layers() { return layers_; }
  const std::vector<LayerPtr<T>>& layers() const { return layers_; }

  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) override {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, ctx);
    return h;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> d = g;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
    return d;
  }
  void backward_params(const Tensor<T>& g) override {
    Tensor<T> d = g;
    for (std::size_t i = layers_.size(); i-- > 1;) d = layers_[i]->backward(d);
    layers_.front()->backward_params(d);
  }
  LayerPtr<T> clone() const override { return std::make_unique<Sequential>(*this); }
  void collect_weighted(std::vector<Layer<T>*>& out) override {
    for (auto& l : layers_) l->collect_weighted(out);
  }
  void collect_params(std::vector<NamedParam<T>>& out) override {
    for (auto& l : layers_) l->collect_params(out);
  }
  std::size_t processing_layers() const override {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->processing_layers();
    return n;
  }
  void zero_grad() override {
    for (auto& l : layers_) l->zero_grad();
  }

 protected:
  std::vector<LayerPtr<T>> layers_;
};

/// body(x) + x; the activation after the addition is a separate layer.
template <typename T>
class ResidualLayer final : public Sequential<T> {
 public:
  using Sequential<T>::Sequential;
  std::string kind() const override { return "residual"; }
  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) override {
    Tensor<T> y = Sequential<T>::forward(x, ctx);
    if (y.shape() != x.shape())
      throw DimensionError("residual: body output " + shape_str(y.shape()) + " vs input " + shape_str(x.shape()));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> d = Sequential<T>::backward(g);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    return d;
  }
  LayerPtr<T> clone() const override { return std::make_unique<ResidualLayer>(*this); }
};

/// Runs every branch on the same input and stacks the outputs along channels.
template <typename T>
class ConcatBranches final : public Sequential<T> {
 public:
  using Sequential<T>::Sequential;
  std::string kind() const override { return "concat_branches"; }
  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) override {
    std::vector<Tensor<T>> outs;
    for (auto& l : this->layers_) outs.push_back(l->forward(x, ctx));
    const auto d0 = detail::image_dims(outs.front(), "concat_branches");
    std::size_t channels = 0;
    split_.clear();
    for (const auto& o : outs) {
      const auto d = detail::image_dims(o, "concat_branches");
      if (d.n != d0.n || d.h != d0.h || d.w != d0.w)
        throw DimensionError("concat_branches: branch outputs are not spatially aligned");
      split_.push_back(d.c);
      channels += d.c;
    }
    Tensor<T> out(detail::image_shape(d0, channels, d0.h, d0.w));
    const std::size_t plane = d0.h * d0.w;
    for (std::size_t n = 0; n < d0.n; ++n) {
      T* dst = out.data() + n * channels * plane;
      for (std::size_t b = 0; b < outs.size(); ++b) {
        const std::size_t len = split_[b] * plane;
        std::copy_n(outs[b].data() + n * len, len, dst);
        dst += len;
      }
    }
    in_shape_ = x.shape();
    return out;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    const auto d = detail::image_dims(g, "concat_branches");
    const std::size_t plane = d.h * d.w;
    Tensor<T> gx(in_shape_);
    std::size_t offset = 0;
    for (std::size_t b = 0; b < this->layers_.size(); ++b) {
      Tensor<T> gb(detail::image_shape(d, split_[b], d.h, d.w));
      const std::size_t len = split_[b] * plane;
      for (std::size_t n = 0; n < d.n; ++n)
        std::copy_n(g.data() + n * d.c * plane + offset, len, gb.data() + n * len);
      offset += len;
      const Tensor<T> part = this->layers_[b]->backward(gb);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += part[i];
    }
    return gx;
  }
  void backward_params(const Tensor<T>& g) override {
    const auto d = detail::image_dims(g, "concat_branches");
    const std::size_t plane = d.h * d.w;
    std::size_t offset = 0;
    for (std::size_t b = 0; b < this->layers_.size(); ++b) {
      Tensor<T> gb(detail::image_shape(d, split_[b], d.h, d.w));
      const std::size_t len = split_[b] * plane;
      for (std::size_t n = 0; n < d.n; ++n)
        std::copy_n(g.data() + n * d.c * plane + offset, len, gb.data() + n * len);
      offset += len;
      this->layers_[b]->backward_params(gb);
    }
  }
  LayerPtr<T> clone() const override { return std::make_unique<ConcatBranches>(*this); }
  std::size_t processing_layers() const override { return 1; }

 private:
  std::vector<std::size_t> split_;
  Shape in_shape_;
};

}  // namespace hypergrid
