#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hypergrid/labeling.hpp"
#include "hypergrid/models.hpp"

namespace hypergrid {

enum class Phase { pretrain, finetune };

struct LrBreakpoint {
  std::size_t start_iteration;
  double lr;
  friend bool operator==(const LrBreakpoint&, const LrBreakpoint&) = default;
};

struct TrainingSchedule {
  OptimizerConfig optimizer;
  std::size_t batch_size = 1;
  std::size_t total_iterations = 0;
  std::vector<LrBreakpoint> lr_plan;

  /// Step function over the breakpoints.
  double lr_at(std::size_t iteration) const {
    double lr = lr_plan.front().lr;
    for (const auto& bp : lr_plan)
      if (iteration >= bp.start_iteration) lr = bp.lr;
    return lr;
  }

  void validate() const {
    if (batch_size == 0) throw ParameterError("schedule: batch_size must be positive");
    if (lr_plan.empty() || lr_plan.front().start_iteration != 0)
      throw ParameterError("schedule: learning-rate plan must start at iteration 0");
    for (std::size_t i = 1; i < lr_plan.size(); ++i)
      if (lr_plan[i].start_iteration <= lr_plan[i - 1].start_iteration)
        throw ParameterError("schedule: breakpoints must be strictly increasing");
  }
};

inline std::size_t scale_count(std::size_t n, double scale) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * scale)));
}

/// The per-architecture training recipe; pretraining and fine-tuning share it.
///
/// `scale` multiplies every iteration count and breakpoint (floored, at least 1)
/// for desk-scale runs. `a9_base_lr` is A9's initial rate.
inline TrainingSchedule schedule_for(Arch arch, Phase /*phase*/, double scale = 1.0, double a9_base_lr = 0.01) {
  if (!(scale > 0)) throw ParameterError("schedule scale must be positive");
  TrainingSchedule s;
  std::vector<LrBreakpoint> plan;
  std::size_t total = 0;
  switch (arch) {
    case Arch::A9:
      s.optimizer = {OptimizerKind::sgd_momentum, 0.9};
      s.batch_size = 10;
      total = 100000;
      plan = {{0, a9_base_lr}, {33333, a9_base_lr / 10}, {66666, a9_base_lr / 100}};
      break;
    case Arch::A3:
      s.optimizer = {OptimizerKind::adam, 0.0, 0.9, 0.999, 1e-8};
      s.batch_size = 8;
      total = 300000;
      plan = {{0, 1e-5}};
      break;
    case Arch::A5:
      s.optimizer = {OptimizerKind::sgd_plain, 0.0};
      s.batch_size = 50;
      total = 100000;
      plan = {{0, 0.01}, {50000, 0.001}};
      break;
  }
  s.total_iterations = scale_count(total, scale);
  for (const auto& bp : plan) {
    const std::size_t at = bp.start_iteration == 0 ? 0 : scale_count(bp.start_iteration, scale);
    if (!s.lr_plan.empty() && s.lr_plan.back().start_iteration >= at)
      s.lr_plan.back().lr = bp.lr;  // collapsed breakpoints: the later rate wins
    else
      s.lr_plan.push_back({at, bp.lr});
  }
  s.validate();
  return s;
}

struct LossSample {
  std::size_t iteration;
  double loss;
  double lr;
};

enum class LabelSource { artificial, ground_truth };

struct TrainRun {
  std::uint64_t seed = 0;
  ModelSpec spec;
  TrainingSchedule schedule;
  LabelSource source = LabelSource::artificial;
  std::vector<LossSample> trace;
  std::size_t iterations = 0;
  ModelState model;
};

inline constexpr std::size_t kTraceEvery = 100;
inline constexpr double kDivergenceFactor = 1e3;
inline constexpr std::size_t kDivergencePatience = 100;

namespace detail {

/// Shared optimisation loop. `draw` fills the batch with (pixel, class) pairs.
template <typename Draw>
void train_loop(ModelState& model, const HyperCube& cube, const TrainingSchedule& schedule, Rng& rng, Draw&& draw,
                std::vector<LossSample>& trace) {
  schedule.validate();
  OptimizerState<Real> opt(schedule.optimizer);
  Rng sampler = rng.child(1);
  Rng dropout_rng = rng.child(2);
  const std::size_t side = model.spec().patch_side;
  std::vector<Pixel> centers(schedule.batch_size);
  std::vector<std::size_t> labels(schedule.batch_size);
  auto params = model.param_refs();
  double initial = 0.0;
  std::size_t over = 0;
  for (std::size_t it = 0; it < schedule.total_iterations; ++it) {
    draw(sampler, centers, labels);
    const Tensor<Real> batch = extract_batch(cube, centers, side);
    RunContext ctx{true, &dropout_rng};
    model.zero_grad();
    const Tensor<Real> logits = model.forward(batch, ctx);
    const auto loss = softmax_cross_entropy(logits, std::span<const std::size_t>(labels));
    if (!std::isfinite(loss.loss)) throw DivergenceError(it, "non-finite loss");
    model.backward(loss.grad);
    const double lr = schedule.lr_at(it);
    optimizer_step<Real>(opt, params, lr);
    if (it % kTraceEvery == 0) {
      trace.push_back({it, loss.loss, lr});
      if (trace.size() == 1) {
        initial = loss.loss;
      } else if (loss.loss > kDivergenceFactor * initial) {
        if (++over >= kDivergencePatience) throw DivergenceError(it, "loss above 1000x its initial value");
      } else {
        over = 0;
      }
    }
  }
}

}  // namespace detail

/// Trains on artificial labels over the whole image, sampling centres uniformly with replacement.
inline TrainRun pretrain(const HyperCube& cube, const LabelMap& artificial, ModelState model,
                         const TrainingSchedule& schedule, Rng& rng) {
  require_same_frame(cube, artificial);
  for (std::size_t i = 0; i < artificial.labels.size(); ++i)
    if (artificial.labels[i] == 0)
      throw CoverageError("artificial labels must cover every pixel; pixel (" + std::to_string(i / artificial.width) +
                          "," + std::to_string(i % artificial.width) + ") is 0");
  if (artificial.class_count() != model.spec().classes)
    throw DimensionError("model has " + std::to_string(model.spec().classes) + " outputs, labels have " +
                         std::to_string(artificial.class_count()) + " classes");
  if (model.spec().bands != cube.bands) throw DimensionError("model band count does not match cube");
  TrainRun run{rng.seed(), model.spec(), schedule, LabelSource::artificial, {}, schedule.total_iterations, {}};
  const std::size_t pixels = cube.pixels();
  detail::train_loop(model, cube, schedule, rng,
                     [&](Rng& s, std::vector<Pixel>& centers, std::vector<std::size_t>& labels) {
                       for (std::size_t i = 0; i < centers.size(); ++i) {
                         const auto p = static_cast<std::size_t>(s.below(pixels));
                         centers[i] = {p / cube.width, p % cube.width};
                         labels[i] = artificial.labels[p] - 1u;
                       }
                     },
                     run.trace);
  run.model = std::move(model);
  return run;
}

/// Pretraining restricted to the nonzero pixels of `labels`, for label maps
/// derived from ground truth (joined or split classes) that leave background unlabeled.
inline TrainRun pretrain_labeled_only(const HyperCube& cube, const LabelMap& labels, ModelState model,
                                      const TrainingSchedule& schedule, Rng& rng) {
  require_same_frame(cube, labels);
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < labels.labels.size(); ++i)
    if (labels.labels[i] != 0) support.push_back(i);
  if (support.empty()) throw CoverageError("pretraining label map has no labeled pixels");
  if (labels.class_count() != model.spec().classes)
    throw DimensionError("model has " + std::to_string(model.spec().classes) + " outputs, labels have " +
                         std::to_string(labels.class_count()) + " classes");
  if (model.spec().bands != cube.bands) throw DimensionError("model band count does not match cube");
  TrainRun run{rng.seed(), model.spec(), schedule, LabelSource::artificial, {}, schedule.total_iterations, {}};
  detail::train_loop(model, cube, schedule, rng,
                     [&](Rng& s, std::vector<Pixel>& centers, std::vector<std::size_t>& out) {
                       for (std::size_t i = 0; i < centers.size(); ++i) {
                         const auto p = support[static_cast<std::size_t>(s.below(support.size()))];
                         centers[i] = {p / cube.width, p % cube.width};
                         out[i] = labels.labels[p] - 1u;
                       }
                     },
                     run.trace);
  run.model = std::move(model);
  return run;
}

/// Builds a fresh model for `spec` and pretrains it.
inline TrainRun pretrain(const HyperCube& cube, const LabelMap& artificial, const ModelSpec& spec,
                         const TrainingSchedule& schedule, Rng& rng) {
  Rng init = rng.child(0);
  return pretrain(cube, artificial, build_model(spec, init), schedule, rng);
}

/// Trains on the selected ground-truth pixels only, with a fresh optimizer.
inline TrainRun finetune(ModelState model, const HyperCube& cube, const SampleSelection& selection,
                         const TrainingSchedule& schedule, Rng& rng) {
  const auto train = selection.training();
  if (train.empty()) throw ParameterError("finetune: empty sample selection");
  if (model.spec().classes != selection.class_count())
    throw DimensionError("finetune: model has " + std::to_string(model.spec().classes) + " outputs, selection has " +
                         std::to_string(selection.class_count()) + " classes");
  if (model.spec().bands != cube.bands) throw DimensionError("model band count does not match cube");
  TrainRun run{rng.seed(), model.spec(), schedule, LabelSource::ground_truth, {}, schedule.total_iterations, {}};
  detail::train_loop(model, cube, schedule, rng,
                     [&](Rng& s, std::vector<Pixel>& centers, std::vector<std::size_t>& labels) {
                       for (std::size_t i = 0; i < centers.size(); ++i) {
                         const auto& lp = train[static_cast<std::size_t>(s.below(train.size()))];
                         centers[i] = lp.pixel;
                         labels[i] = lp.class_index;
                       }
                     },
                     run.trace);
  run.model = std::move(model);
  return run;
}

/// Fraction of `samples` the model classifies correctly (inference mode).
inline double accuracy_on(ModelState& model, const HyperCube& cube, const std::vector<LabeledPixel>& samples,
                          std::size_t chunk = 256) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  std::vector<Pixel> centers;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    centers.clear();
    for (std::size_t i = start; i < end; ++i) centers.push_back(samples[i].pixel);
    const auto pred = predict_batch(model, extract_batch(cube, centers, model.spec().patch_side));
    for (std::size_t i = start; i < end; ++i) correct += pred[i - start] == samples[i].class_index;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

/// "iter <i> loss <v> lr <r>" per trace sample, then the checkpoint path.
inline void write_train_log(std::ostream& os, const TrainRun& run, const std::string& checkpoint_path) {
  for (const auto& s : run.trace)
    os << "iter " << s.iteration << " loss " << std::setprecision(9) << s.loss << " lr " << s.lr << '\n';
  os << "checkpoint " << checkpoint_path << '\n';
}

}  // namespace hypergrid
