#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "hypergrid/checkpoint.hpp"
#include "hypergrid/hsdata.hpp"
#include "hypergrid/init.hpp"
#include "hypergrid/layers.hpp"

namespace hypergrid {

enum class Arch : std::uint32_t { A9 = 9, A3 = 3, A5 = 5 };

inline std::string to_string(Arch a) {
  switch (a) {
    case Arch::A9: return "A9";
    case Arch::A3: return "A3";
    case Arch::A5: return "A5";
  }
  return "?";
}

inline Arch parse_arch(const std::string& s) {
  if (s == "A9" || s == "a9") return Arch::A9;
  if (s == "A3" || s == "a3") return Arch::A3;
  if (s == "A5" || s == "a5") return Arch::A5;
  throw ParameterError("unknown architecture \"" + s + "\" (expected A9, A3 or A5)");
}

inline std::size_t patch_side_for(Arch a) { return a == Arch::A5 ? 9 : 5; }

/// A5 uses 100 filters on cubes with more than 150 bands, otherwise 60.
inline std::size_t default_a5_filters(std::size_t bands) { return bands > 150 ? 100 : 60; }

struct ModelSpec {
  Arch arch = Arch::A3;
  std::size_t bands = 1;
  std::size_t classes = 2;
  std::size_t patch_side = 5;
  std::size_t a5_filters = 0;  // 0 picks default_a5_filters(bands); ignored unless A5

  static ModelSpec make(Arch arch, std::size_t bands, std::size_t classes, std::size_t a5_filters = 0) {
    ModelSpec s{arch, bands, classes, patch_side_for(arch), 0};
    if (arch == Arch::A5) s.a5_filters = a5_filters ? a5_filters : default_a5_filters(bands);
    return s;
  }

  void validate() const {
    if (bands == 0) throw ParameterError("model spec: bands must be positive");
    if (classes < 2) throw ParameterError("model spec: at least 2 classes required");
    if (patch_side != patch_side_for(arch))
      throw ParameterError("model spec: " + to_string(arch) + " expects " + std::to_string(patch_side_for(arch)) +
                           "x" + std::to_string(patch_side_for(arch)) + " patches");
    if (arch == Arch::A5 && a5_filters == 0) throw ParameterError("model spec: A5 filter count must be positive");
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Layer graph plus trained parameters for one architecture.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(ModelSpec spec, std::vector<LayerPtr<T>> layers) : spec_(spec), layers_(std::move(layers)) {}
  Network(const Network& other) : spec_(other.spec_) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Network& operator=(const Network& other) {
    if (this != &other) *this = Network(other);
    return *this;
  }
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  ModelSpec& spec() { return spec_; }
  std::vector<LayerPtr<T>>& layers() { return layers_; }
  const std::vector<LayerPtr<T>>& layers() const { return layers_; }

  Tensor<T> forward(const Tensor<T>& x, RunContext& ctx) {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, ctx);
    return h;
  }

  Tensor<T> infer(const Tensor<T>& x) {
    RunContext ctx;
    return forward(x, ctx);
  }

  void backward(const Tensor<T>& grad_logits) {
    Tensor<T> d = grad_logits;
    for (std::size_t i = layers_.size(); i-- > 1;) d = layers_[i]->backward(d);
    layers_.front()->backward_params(d);
  }

  void zero_grad() {
    for (auto& l : layers_) l->zero_grad();
  }

  std::vector<NamedParam<T>> params() {
    std::vector<NamedParam<T>> out;
    for (auto& l : layers_) l->collect_params(out);
    return out;
  }

  std::vector<ParamRef<T>> param_refs() {
    std::vector<ParamRef<T>> out;
    for (auto& p : params()) out.push_back({p.value, p.grad});
    return out;
  }

  std::vector<Layer<T>*> weighted_layers() {
    std::vector<Layer<T>*> out;
    for (auto& l : layers_) l->collect_weighted(out);
    return out;
  }

  std::size_t processing_layers() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->processing_layers();
    return n;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& p : params()) n += p.value->size();
    return n;
  }

  /// Index of the top-level layer holding the final classification weights.
  std::size_t final_layer_index() const {
    for (std::size_t i = layers_.size(); i-- > 0;)
      if (layers_[i]->processing_layers() > 0) return i;
    throw ParameterError("network has no weighted layer");
  }

  /// Activations entering the final classification layer (inference mode).
  Tensor<T> penultimate(const Tensor<T>& x) {
    RunContext ctx;
    Tensor<T> h = x;
    const std::size_t stop = final_layer_index();
    for (std::size_t i = 0; i < stop; ++i) h = layers_[i]->forward(h, ctx);
    return h;
  }

  std::vector<NamedTensors> named_tensors() const {
    std::vector<NamedTensors> out;
    for (auto* l : const_cast<Network*>(this)->weighted_layers()) {
      NamedTensors nt{l->name(), {}};
      for (auto* t : l->tensors()) nt.tensors.push_back(t->template cast<float>());
      out.push_back(std::move(nt));
    }
    return out;
  }

  void load_named_tensors(const std::vector<NamedTensors>& in) {
    auto layers = weighted_layers();
    if (layers.size() != in.size())
      throw FormatError("checkpoint has " + std::to_string(in.size()) + " weighted layers, model has " +
                        std::to_string(layers.size()));
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i]->name() != in[i].name)
        throw FormatError("checkpoint layer \"" + in[i].name + "\" where \"" + layers[i]->name() + "\" expected");
      auto dst = layers[i]->tensors();
      if (dst.size() != in[i].tensors.size()) throw FormatError("checkpoint tensor count mismatch in " + in[i].name);
      for (std::size_t k = 0; k < dst.size(); ++k) {
        if (dst[k]->shape() != in[i].tensors[k].shape())
          throw FormatError("checkpoint tensor shape mismatch in " + in[i].name);
        *dst[k] = in[i].tensors[k].template cast<T>();
      }
    }
  }

 private:
  ModelSpec spec_;
  std::vector<LayerPtr<T>> layers_;
};

using ModelState = Network<Real>;

// ---------------------------------------------------------------- builders

namespace detail {

template <typename T>
LayerPtr<T> gaussian_conv(Rng& rng, std::string name, std::size_t out, std::size_t in, std::size_t k,
                          std::size_t pad, double stddev, double bias) {
  ConvParams<T> p{init_gaussian<T>(rng, {out, in, k, k}, 0.0, stddev), init_constant<T>({out}, bias), pad, pad, 1};
  return std::make_unique<Conv2dLayer<T>>(std::move(name), std::move(p));
}

template <typename T>
LayerPtr<T> glorot_dense(Rng& rng, std::string name, std::size_t out, std::size_t in) {
  DenseParams<T> p{init_glorot_uniform<T>(rng, {out, in}), init_constant<T>({out}, 0.0)};
  return std::make_unique<DenseLayer<T>>(std::move(name), std::move(p));
}

template <typename T, typename L, typename... A>
LayerPtr<T> make(A&&... args) {
  return std::make_unique<L>(std::forward<A>(args)...);
}

// A9 final layer: Gaussian std 0.005, bias 0.
template <typename T>
LayerPtr<T> a9_head(Rng& rng, std::size_t classes) {
  return gaussian_conv<T>(rng, "cls3", classes, 128, 1, 0, 0.005, 0.0);
}
// A3 final layer: normal std 0.05, bias 0.
template <typename T>
LayerPtr<T> a3_head(Rng& rng, std::size_t classes) {
  return gaussian_conv<T>(rng, "conv3", classes, 64, 1, 0, 0.05, 0.0);
}
// A5 final layer: Glorot uniform, bias 0.
template <typename T>
LayerPtr<T> a5_head(Rng& rng, std::size_t classes) {
  return glorot_dense<T>(rng, "dense4", classes, 300);
}

inline void require_arch(const ModelSpec& spec, Arch arch) {
  spec.validate();
  if (spec.arch != arch) throw ParameterError("builder for " + to_string(arch) + " given a " + to_string(spec.arch) + " spec");
}

}  // namespace detail

/// Multi-scale filter bank, two residual units and three 1x1 classification layers.
///
/// Every layer after the filter bank is position-wise, so the network reads
/// out the centre pixel right after the bank normalisation; the remaining
/// layers then run on a 1x1 map and yield exactly the centre logits of the
/// full-map computation.
template <typename T = Real>
Network<T> build_a9(const ModelSpec& spec, Rng& rng) {
  using namespace detail;
  require_arch(spec, Arch::A9);
  const LrnParams lrn_params{5, 1.0, 1e-4, 0.75};
  const std::size_t b = spec.bands;
  std::vector<LayerPtr<T>> layers;

  auto bank = std::make_unique<ConcatBranches<T>>("bank");
  bank->add(gaussian_conv<T>(rng, "bank.k5", 128, b, 5, 2, 0.01, 1.0));
  bank->add(gaussian_conv<T>(rng, "bank.k3", 128, b, 3, 1, 0.01, 1.0));
  bank->add(gaussian_conv<T>(rng, "bank.k1", 128, b, 1, 0, 0.01, 1.0));
  layers.push_back(std::move(bank));
  layers.push_back(make<T, ReluLayer<T>>("bank.relu"));
  layers.push_back(make<T, LrnLayer<T>>("bank.lrn", lrn_params));
  layers.push_back(make<T, CenterPixelLayer<T>>("center"));

  layers.push_back(gaussian_conv<T>(rng, "entry", 128, 384, 1, 0, 0.01, 1.0));
  layers.push_back(make<T, ReluLayer<T>>("entry.relu"));
  layers.push_back(make<T, LrnLayer<T>>("entry.lrn", lrn_params));

  for (int unit = 1; unit <= 2; ++unit) {
    const std::string prefix = "res" + std::to_string(unit);
    const double stddev = unit == 1 ? 0.005 : 0.01;
    auto res = std::make_unique<ResidualLayer<T>>(prefix);
    res->add(gaussian_conv<T>(rng, prefix + ".conv1", 128, 128, 1, 0, stddev, 1.0));
    res->add(make<T, ReluLayer<T>>(prefix + ".relu1"));
    res->add(gaussian_conv<T>(rng, prefix + ".conv2", 128, 128, 1, 0, stddev, 1.0));
    layers.push_back(std::move(res));
    layers.push_back(make<T, ReluLayer<T>>(prefix + ".relu"));
  }

  layers.push_back(gaussian_conv<T>(rng, "cls1", 128, 128, 1, 0, 0.01, 1.0));
  layers.push_back(make<T, ReluLayer<T>>("cls1.relu"));
  layers.push_back(make<T, DropoutLayer<T>>("cls1.dropout", 0.5));
  layers.push_back(gaussian_conv<T>(rng, "cls2", 128, 128, 1, 0, 0.01, 1.0));
  layers.push_back(make<T, ReluLayer<T>>("cls2.relu"));
  layers.push_back(make<T, DropoutLayer<T>>("cls2.dropout", 0.5));
  layers.push_back(a9_head<T>(rng, spec.classes));
  layers.push_back(make<T, FlattenLayer<T>>("logits"));
  return Network<T>(spec, std::move(layers));
}

/// Three 1x1 convolutions (128, 64, c) with LRN and dropout, then global average pooling.
template <typename T = Real>
Network<T> build_a3(const ModelSpec& spec, Rng& rng) {
  using namespace detail;
  require_arch(spec, Arch::A3);
  const LrnParams lrn_params{3, 1.0, 1e-4, 0.75};
  std::vector<LayerPtr<T>> layers;
  layers.push_back(gaussian_conv<T>(rng, "conv1", 128, spec.bands, 1, 0, 0.05, 0.0));
  layers.push_back(make<T, ReluLayer<T>>("conv1.relu"));
  layers.push_back(make<T, LrnLayer<T>>("conv1.lrn", lrn_params));
  layers.push_back(make<T, DropoutLayer<T>>("conv1.dropout", 0.6));
  layers.push_back(gaussian_conv<T>(rng, "conv2", 64, 128, 1, 0, 0.05, 0.0));
  layers.push_back(make<T, ReluLayer<T>>("conv2.relu"));
  layers.push_back(make<T, LrnLayer<T>>("conv2.lrn", lrn_params));
  layers.push_back(make<T, DropoutLayer<T>>("conv2.dropout", 0.6));
  layers.push_back(a3_head<T>(rng, spec.classes));
  layers.push_back(make<T, GlobalAvgPoolLayer<T>>("gap"));
  return Network<T>(spec, std::move(layers));
}

/// 3x3 conv + ReLU, 2x2/2 max pool, then dense 1000-500-300-c.
template <typename T = Real>
Network<T> build_a5(const ModelSpec& spec, Rng& rng) {
  using namespace detail;
  require_arch(spec, Arch::A5);
  const std::size_t filters = spec.a5_filters;
  std::vector<LayerPtr<T>> layers;
  ConvParams<T> conv{init_glorot_uniform<T>(rng, {filters, spec.bands, 3, 3}), init_constant<T>({filters}, 0.0), 0, 0, 1};
  layers.push_back(std::make_unique<Conv2dLayer<T>>("conv1", std::move(conv)));
  layers.push_back(make<T, ReluLayer<T>>("conv1.relu"));
  layers.push_back(make<T, MaxPoolLayer<T>>("pool", 2, 2, 2));
  layers.push_back(make<T, FlattenLayer<T>>("flatten"));
  layers.push_back(glorot_dense<T>(rng, "dense1", 1000, filters * 3 * 3));
  layers.push_back(make<T, ReluLayer<T>>("dense1.relu"));
  layers.push_back(glorot_dense<T>(rng, "dense2", 500, 1000));
  layers.push_back(make<T, ReluLayer<T>>("dense2.relu"));
  layers.push_back(glorot_dense<T>(rng, "dense3", 300, 500));
  layers.push_back(make<T, ReluLayer<T>>("dense3.relu"));
  layers.push_back(a5_head<T>(rng, spec.classes));
  return Network<T>(spec, std::move(layers));
}

template <typename T = Real>
Network<T> build_model(const ModelSpec& spec, Rng& rng) {
  switch (spec.arch) {
    case Arch::A9: return build_a9<T>(spec, rng);
    case Arch::A3: return build_a3<T>(spec, rng);
    case Arch::A5: return build_a5<T>(spec, rng);
  }
  throw ParameterError("unknown architecture");
}

/// Copies every layer of `pretrained` and swaps the final classification
/// layer for a freshly initialised one with `new_classes` outputs.
template <typename T>
Network<T> transfer_last_layer(const Network<T>& pretrained, std::size_t new_classes, Rng& rng) {
  if (new_classes < 2) throw ParameterError("transfer_last_layer: at least 2 classes required");
  Network<T> out = pretrained;
  out.spec().classes = new_classes;
  const std::size_t idx = out.final_layer_index();
  switch (out.spec().arch) {
    case Arch::A9: out.layers()[idx] = detail::a9_head<T>(rng, new_classes); break;
    case Arch::A3: out.layers()[idx] = detail::a3_head<T>(rng, new_classes); break;
    case Arch::A5: out.layers()[idx] = detail::a5_head<T>(rng, new_classes); break;
  }
  return out;
}

// ---------------------------------------------------------------- prediction

/// Index of the largest value; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

template <typename T>
std::size_t predict(Network<T>& model, const Patch& patch) {
  const auto& s = model.spec();
  if (patch.window.shape() != Shape{s.bands, s.patch_side, s.patch_side})
    throw DimensionError("predict: patch " + shape_str(patch.window.shape()) + " does not fit model input");
  const Tensor<T> logits = model.infer(patch.window.template cast<T>());
  return argmax<T>(logits.values());
}

/// Class index for every sample of an (N,b,s,s) batch.
template <typename T>
std::vector<std::size_t> predict_batch(Network<T>& model, const Tensor<T>& batch) {
  const Tensor<T> logits = model.infer(batch);
  const std::size_t c = logits.dim(1);
  std::vector<std::size_t> out(logits.dim(0));
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = argmax<T>(std::span<const T>(logits.data() + n * c, c));
  return out;
}

// ---------------------------------------------------------------- model checkpoints

/// Spec preamble (arch id, bands, classes, patch side, A5 filters as u32) followed by HGW1.
inline void write_model(std::ostream& os, const ModelState& model) {
  const auto& s = model.spec();
  binio::write_u32(os, static_cast<std::uint32_t>(s.arch));
  binio::write_u32(os, static_cast<std::uint32_t>(s.bands));
  binio::write_u32(os, static_cast<std::uint32_t>(s.classes));
  binio::write_u32(os, static_cast<std::uint32_t>(s.patch_side));
  binio::write_u32(os, static_cast<std::uint32_t>(s.a5_filters));
  write_weights(os, model.named_tensors());
}

inline ModelState read_model(std::istream& is) {
  ModelSpec s;
  const auto arch = binio::read_u32(is, "model preamble");
  if (arch != 9 && arch != 3 && arch != 5) throw FormatError("model checkpoint: unknown arch id " + std::to_string(arch));
  s.arch = static_cast<Arch>(arch);
  s.bands = binio::read_u32(is, "model preamble");
  s.classes = binio::read_u32(is, "model preamble");
  s.patch_side = binio::read_u32(is, "model preamble");
  s.a5_filters = binio::read_u32(is, "model preamble");
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("model checkpoint: ") + e.what());
  }
  Rng rng(0);
  ModelState model = build_model(s, rng);
  model.load_named_tensors(read_weights(is));
  return model;
}

inline void save_model(const ModelState& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_model(os, model);
}

inline ModelState load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_model(is);
}

}  // namespace hypergrid
