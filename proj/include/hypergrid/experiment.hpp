#pragma once

// Config-driven pretrain / fine-tune experiments with a scratch control arm.

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include "hypergrid/config.hpp"
#include "hypergrid/evalreport.hpp"
#include "hypergrid/synth.hpp"
#include "hypergrid/trainer.hpp"

namespace hypergrid {

enum class Preprocess { none, center, standardize };
enum class Labeling { grid, block, stripes, gt_join, gt_split };
enum class SweepAxis { grid_density, stripes, n_per_class };

struct ExperimentConfig {
  std::string scenario = "experiment";

  // data: either files or an inline synthetic scene
  std::string cube_path;
  CubeFormat cube_format = CubeFormat::native;
  std::string ground_truth_path;
  std::optional<SynthParams> synthetic;
  std::vector<std::size_t> exclude_bands;
  std::vector<std::uint16_t> gt_classes;  // empty keeps every class
  Preprocess preprocess = Preprocess::standardize;

  Arch arch = Arch::A3;
  std::size_t a5_filters = 0;  // 0 picks the band-count default

  Labeling labeling = Labeling::grid;
  std::size_t grid_m = 5, grid_n = 5;
  std::size_t block_h = 5, block_w = 5;
  std::size_t stripes = 5;
  std::string join_file;
  std::size_t split_m = 2, split_n = 2;
  std::size_t split_min_fragment = 1;

  std::size_t n_per_class = 5;
  std::size_t repeats = 15;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // overrides seed/repeats when non-empty
  double scale = 1.0;
  double a9_lr = 0.01;
  std::string out = "out";
  std::size_t workers = 1;
  bool save_checkpoints = false;
  bool quiet = false;

  std::optional<SweepAxis> sweep_axis;
  std::vector<double> sweep_values;

  std::vector<std::uint64_t> seed_list() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> s;
    for (std::size_t i = 0; i < repeats; ++i) s.push_back(seed + i);
    return s;
  }

  void validate() const {
    if (cube_path.empty() && !synthetic) throw ConfigError("config needs `cube` (and `ground_truth`) or a [synth] section");
    if (!cube_path.empty()) {
      if (ground_truth_path.empty()) throw ConfigError("`ground_truth` is required with `cube`");
      for (const auto& p : {cube_path, ground_truth_path})
        if (!std::filesystem::exists(p)) throw ConfigError("file not found: " + p);
    }
    if (repeats < 1 && seeds.empty()) throw ConfigError("repeats must be at least 1");
    if (n_per_class < 1) throw ConfigError("n_per_class must be at least 1");
    if (!(scale > 0)) throw ConfigError("scale must be positive");
    if (!(a9_lr > 0)) throw ConfigError("a9_lr must be positive");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (labeling == Labeling::gt_join) {
      if (join_file.empty()) throw ConfigError("labeling gt-join needs `join_file`");
      if (!std::filesystem::exists(join_file)) throw ConfigError("file not found: " + join_file);
    }
    if (labeling == Labeling::grid && (grid_m == 0 || grid_n == 0)) throw ConfigError("grid_m and grid_n must be positive");
    if (labeling == Labeling::block && (block_h == 0 || block_w == 0)) throw ConfigError("block sizes must be positive");
    if (labeling == Labeling::stripes && stripes == 0) throw ConfigError("stripes must be positive");
    if (labeling == Labeling::gt_split && (split_m == 0 || split_n == 0)) throw ConfigError("split grid must be positive");
  }
};

inline std::string to_string(Labeling l) {
  switch (l) {
    case Labeling::grid: return "grid";
    case Labeling::block: return "block";
    case Labeling::stripes: return "stripes";
    case Labeling::gt_join: return "gt-join";
    case Labeling::gt_split: return "gt-split";
  }
  return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "grid-density") return SweepAxis::grid_density;
  if (s == "stripes") return SweepAxis::stripes;
  if (s == "n-per-class") return SweepAxis::n_per_class;
  throw ConfigError("unknown sweep axis \"" + s + "\" (grid-density | stripes | n-per-class)");
}

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::grid_density: return "grid-density";
    case SweepAxis::stripes: return "stripes";
    case SweepAxis::n_per_class: return "n-per-class";
  }
  return "?";
}

inline const std::vector<std::string>& experiment_keys() {
  static const std::vector<std::string> keys = {
      "scenario", "cube", "cube_format", "ground_truth", "exclude_bands", "gt_classes", "preprocess", "arch",
      "a5_filters", "labeling", "grid_m", "grid_n", "block_h", "block_w", "stripes", "join_file", "split_m",
      "split_n", "split_min_fragment", "n_per_class", "repeats", "seed", "seeds", "scale", "a9_lr", "out",
      "workers", "save_checkpoints", "quiet", "sweep_axis", "sweep_values", "synth.size", "synth.bands",
      "synth.classes", "synth.blob_radius", "synth.noise_std", "synth.blobs_per_class", "synth.seed"};
  return keys;
}

namespace detail {
inline std::vector<std::size_t> counts_of(const KeyValueFile& f, const std::string& key) {
  std::vector<std::size_t> out;
  for (double v : f.get_numbers(key)) {
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw ConfigError(key + " entries must be nonnegative integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}
}  // namespace detail

/// Relative paths in the file resolve against `base_dir`.
inline ExperimentConfig experiment_config(const KeyValueFile& f, const std::filesystem::path& base_dir = {}) {
  if (const auto unknown = f.unknown_keys(experiment_keys()); !unknown.empty())
    throw ConfigError("unknown config key \"" + unknown.front() + "\"");
  auto resolve = [&](const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute() || base_dir.empty()) return p;
    return (base_dir / p).string();
  };
  ExperimentConfig c;
  c.scenario = f.get_string("scenario", c.scenario);
  c.cube_path = resolve(f.get_string("cube", ""));
  const auto fmt = f.get_string("cube_format", "native");
  if (fmt == "native") c.cube_format = CubeFormat::native;
  else if (fmt == "envi") c.cube_format = CubeFormat::envi;
  else throw ConfigError("cube_format must be native or envi");
  c.ground_truth_path = resolve(f.get_string("ground_truth", ""));
  c.exclude_bands = detail::counts_of(f, "exclude_bands");
  for (auto v : detail::counts_of(f, "gt_classes")) {
    if (v == 0 || v > 65535) throw ConfigError("gt_classes entries must be labels in 1..65535");
    c.gt_classes.push_back(static_cast<std::uint16_t>(v));
  }
  const auto pre = f.get_string("preprocess", "standardize");
  if (pre == "standardize") c.preprocess = Preprocess::standardize;
  else if (pre == "center") c.preprocess = Preprocess::center;
  else if (pre == "none") c.preprocess = Preprocess::none;
  else throw ConfigError("preprocess must be center, standardize or none");
  try {
    c.arch = parse_arch(f.get_string("arch", "A3"));
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  c.a5_filters = f.get_count("a5_filters", 0);

  const auto lab = f.get_string("labeling", "grid");
  if (lab == "grid") c.labeling = Labeling::grid;
  else if (lab == "block") c.labeling = Labeling::block;
  else if (lab == "stripes") c.labeling = Labeling::stripes;
  else if (lab == "gt-join") c.labeling = Labeling::gt_join;
  else if (lab == "gt-split") c.labeling = Labeling::gt_split;
  else throw ConfigError("labeling must be grid, block, stripes, gt-join or gt-split");
  c.grid_m = f.get_count("grid_m", c.grid_m);
  c.grid_n = f.get_count("grid_n", c.grid_n);
  c.block_h = f.get_count("block_h", c.block_h);
  c.block_w = f.get_count("block_w", c.block_w);
  c.stripes = f.get_count("stripes", c.stripes);
  c.join_file = resolve(f.get_string("join_file", ""));
  c.split_m = f.get_count("split_m", c.split_m);
  c.split_n = f.get_count("split_n", c.split_n);
  c.split_min_fragment = f.get_count("split_min_fragment", c.split_min_fragment);

  c.n_per_class = f.get_count("n_per_class", c.n_per_class);
  c.repeats = f.get_count("repeats", c.repeats);
  c.seed = f.get_count("seed", c.seed);
  for (auto s : detail::counts_of(f, "seeds")) c.seeds.push_back(s);
  c.scale = f.get_number("scale", c.scale);
  c.a9_lr = f.get_number("a9_lr", c.a9_lr);
  c.out = resolve(f.get_string("out", c.out));
  c.workers = f.get_count("workers", c.workers);
  c.save_checkpoints = f.get_bool("save_checkpoints", c.save_checkpoints);
  c.quiet = f.get_bool("quiet", c.quiet);
  if (f.has("sweep_axis")) c.sweep_axis = parse_sweep_axis(f.get_string("sweep_axis", ""));
  c.sweep_values = f.get_numbers("sweep_values");

  if (f.has("synth.size") || f.has("synth.bands") || f.has("synth.classes") || f.has("synth.seed") ||
      f.has("synth.blob_radius") || f.has("synth.noise_std") || f.has("synth.blobs_per_class")) {
    SynthParams s;
    s.size = f.get_count("synth.size", s.size);
    s.bands = f.get_count("synth.bands", s.bands);
    s.classes = f.get_count("synth.classes", s.classes);
    s.blob_radius = f.get_number("synth.blob_radius", s.blob_radius);
    s.noise_std = f.get_number("synth.noise_std", s.noise_std);
    s.blobs_per_class = f.get_count("synth.blobs_per_class", s.blobs_per_class);
    s.seed = f.get_count("synth.seed", s.seed);
    c.synthetic = s;
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  const auto f = KeyValueFile::load(path);
  return experiment_config(f, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------- data preparation

struct ExperimentData {
  HyperCube cube;        // preprocessed, excluded bands removed
  LabelMap ground_truth;  // restricted to gt_classes when given
};

template <typename F>
auto run_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    std::throw_with_nested(StageError(stage, e.what()));
  }
}

inline ExperimentData prepare_data(const ExperimentConfig& c) {
  return run_stage("load data", [&] {
    ExperimentData d;
    if (!c.cube_path.empty()) {
      d.cube = load_cube(c.cube_path, c.cube_format);
      d.ground_truth = load_labelmap(c.ground_truth_path);
    } else {
      auto scene = generate_scene(*c.synthetic);
      d.cube = std::move(scene.cube);
      d.ground_truth = std::move(scene.ground_truth);
    }
    require_same_frame(d.cube, d.ground_truth);
    if (!c.exclude_bands.empty()) d.cube = exclude_bands(d.cube, c.exclude_bands);
    if (c.preprocess != Preprocess::none) {
      const auto stats = band_statistics(d.cube);
      d.cube = c.preprocess == Preprocess::center ? center_bands(std::move(d.cube), stats)
                                                   : standardize_bands(std::move(d.cube), stats);
    }
    if (!c.gt_classes.empty()) d.ground_truth = restrict_classes(d.ground_truth, c.gt_classes);
    return d;
  });
}

/// Pretraining labels for the configured scheme. The bool is true when the
/// map covers every pixel (spatial schemes) and false for ground-truth-derived maps.
inline std::pair<LabelMap, bool> pretraining_labels(const ExperimentConfig& c, const ExperimentData& d) {
  const std::size_t h = d.cube.height, w = d.cube.width;
  switch (c.labeling) {
    case Labeling::grid: return {grid_partition(h, w, GridDivisions{c.grid_m, c.grid_n}), true};
    case Labeling::block: return {grid_partition(h, w, GridBlocks{c.block_h, c.block_w}), true};
    case Labeling::stripes: return {stripe_partition(h, w, c.stripes), true};
    case Labeling::gt_join: return {join_classes(d.ground_truth, load_grouping(c.join_file)), false};
    case Labeling::gt_split:
      return {split_classes(d.ground_truth, grid_partition(h, w, GridDivisions{c.split_m, c.split_n}),
                            c.split_min_fragment),
              false};
  }
  throw ConfigError("unknown labeling");
}

// ---------------------------------------------------------------- one seed

struct ArmResult {
  MetricSet metrics;
  LabelMap map;
};

struct SeedResult {
  std::uint64_t seed = 0;
  ArmResult pretrained;
  ArmResult scratch;
};

// Stream tags under the per-seed root generator.
inline constexpr std::uint64_t kPretrainStream = 10;
inline constexpr std::uint64_t kSelectionStream = 20;
inline constexpr std::uint64_t kTransferStream = 30;
inline constexpr std::uint64_t kFinetuneStream = 40;
inline constexpr std::uint64_t kScratchInitStream = 50;

namespace detail {
inline std::filesystem::path seed_file(const ExperimentConfig& c, const std::string& stem, std::uint64_t seed,
                                       const std::string& ext) {
  return std::filesystem::path(c.out) / (stem + "_seed" + std::to_string(seed) + ext);
}

inline void write_log(const ExperimentConfig& c, const std::string& stem, std::uint64_t seed, const TrainRun& run) {
  std::string ckpt = "-";
  if (c.save_checkpoints) {
    ckpt = seed_file(c, stem, seed, ".hgm").string();
    save_model(run.model, ckpt);
  }
  std::ofstream os(seed_file(c, stem, seed, ".log"));
  if (!os) throw IoError("cannot write log under " + c.out);
  write_train_log(os, run, ckpt);
}

inline ArmResult evaluate_arm(ModelState& model, const ExperimentData& d, const SampleSelection& sel) {
  ArmResult r;
  r.map = classify_full_image(model, d.cube, sel.classes);
  r.metrics = metrics(confusion_matrix(d.ground_truth, r.map, sel.training_set()));
  return r;
}
}  // namespace detail

inline SeedResult run_seed(const ExperimentConfig& c, const ExperimentData& d, std::uint64_t seed) {
  const Rng root(seed);
  const auto pretrain_labels = run_stage("pretraining labels", [&] { return pretraining_labels(c, d); });
  const LabelMap& labels = pretrain_labels.first;
  const bool full_cover = pretrain_labels.second;
  const auto schedule = schedule_for(c.arch, Phase::pretrain, c.scale, c.a9_lr);
  const auto ft_schedule = schedule_for(c.arch, Phase::finetune, c.scale, c.a9_lr);
  const std::size_t a5 = c.a5_filters ? c.a5_filters : default_a5_filters(d.cube.bands);

  TrainRun pre = run_stage("pretrain", [&] {
    Rng rng = root.child(kPretrainStream);
    const auto spec = ModelSpec::make(c.arch, d.cube.bands, labels.class_count(), a5);
    if (full_cover) return pretrain(d.cube, labels, spec, schedule, rng);
    Rng init = rng.child(0);
    return pretrain_labeled_only(d.cube, labels, build_model(spec, init), schedule, rng);
  });
  detail::write_log(c, "pretrain", seed, pre);

  const SampleSelection sel = run_stage("sample selection", [&] {
    Rng rng = root.child(kSelectionStream);
    return select_training_pixels(rng, d.ground_truth, c.n_per_class);
  });

  SeedResult result;
  result.seed = seed;
  TrainRun tuned = run_stage("fine-tune (pretrained)", [&] {
    Rng tr = root.child(kTransferStream);
    auto model = transfer_last_layer(pre.model, sel.class_count(), tr);
    Rng rng = root.child(kFinetuneStream);
    return finetune(std::move(model), d.cube, sel, ft_schedule, rng);
  });
  detail::write_log(c, "finetune_pretrained", seed, tuned);
  result.pretrained = run_stage("evaluate (pretrained)", [&] { return detail::evaluate_arm(tuned.model, d, sel); });

  TrainRun scratch = run_stage("fine-tune (scratch)", [&] {
    Rng init = root.child(kScratchInitStream);
    auto model = build_model(ModelSpec::make(c.arch, d.cube.bands, sel.class_count(), a5), init);
    Rng rng = root.child(kFinetuneStream);
    return finetune(std::move(model), d.cube, sel, ft_schedule, rng);
  });
  detail::write_log(c, "finetune_scratch", seed, scratch);
  result.scratch = run_stage("evaluate (scratch)", [&] { return detail::evaluate_arm(scratch.model, d, sel); });
  return result;
}

// ---------------------------------------------------------------- whole experiment

struct ArmSummary {
  std::vector<double> oa, aa, kappa;
  std::size_t median_run = 0;  // index into ExperimentResult::runs
};

struct ExperimentResult {
  std::vector<SeedResult> runs;  // in seed-list order
  ArmSummary pretrained, scratch;
  std::optional<double> p_value;  // one-sided U test, pretrained OA > scratch OA; needs 2+ runs
};

inline std::size_t worker_slots(std::size_t requested, std::size_t jobs) {
  std::size_t n = std::max<std::size_t>(1, requested);
  if (const char* env = std::getenv("HYPERGRID_THREADS")) {
    char* end = nullptr;
    const unsigned long cap = std::strtoul(env, &end, 10);
    if (end != env && cap > 0) n = std::min<std::size_t>(n, cap);
  }
  return std::min(n, std::max<std::size_t>(1, jobs));
}

namespace detail {
inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::size_t median_index(const std::vector<double>& oa) {
  std::vector<std::size_t> order(oa.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return oa[a] < oa[b]; });
  return order[(order.size() - 1) / 2];
}

inline std::string runs_row(const ExperimentConfig& c, const SeedResult& r, bool pretrained) {
  const auto& m = pretrained ? r.pretrained.metrics : r.scratch.metrics;
  return c.scenario + "," + to_string(c.arch) + "," + std::to_string(c.n_per_class) + "," + std::to_string(r.seed) +
         "," + (pretrained ? "true" : "false") + "," + fmt6(m.oa) + "," + fmt6(m.aa) + "," + fmt6(m.kappa) + "\n";
}
}  // namespace detail

inline constexpr const char* kRunsHeader = "scenario,arch,n_per_class,seed,pretrained,oa,aa,kappa\n";
inline constexpr const char* kSummaryHeader =
    "scenario,arch,n_per_class,pretrained,mean_oa,std_oa,mean_aa,std_aa,mean_kappa,std_kappa,p_value\n";

/// Summary rows (pretrained arm first). Std and p fields stay empty for a single run.
inline std::string summary_rows(const ExperimentConfig& c, const ExperimentResult& r) {
  std::string out;
  for (bool pretrained : {true, false}) {
    const auto& arm = pretrained ? r.pretrained : r.scratch;
    out += c.scenario + "," + to_string(c.arch) + "," + std::to_string(c.n_per_class) + "," +
           (pretrained ? "true" : "false");
    for (const auto* v : {&arm.oa, &arm.aa, &arm.kappa}) {
      if (v->size() >= 2) {
        const auto ms = mean_std(*v);
        out += "," + detail::fmt6(ms.mean) + "," + detail::fmt6(ms.stddev);
      } else {
        out += "," + detail::fmt6(v->front()) + ",";
      }
    }
    out += "," + (r.p_value ? detail::fmt6(*r.p_value) : std::string()) + "\n";
  }
  return out;
}

/// Runs every seed (in parallel worker slots), then writes under `out`:
/// runs.csv, summary.csv, table.txt, per-seed training logs and the
/// median-OA classification map of each arm.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  const auto data = prepare_data(c);
  std::filesystem::create_directories(c.out);
  const auto seeds = c.seed_list();
  const std::filesystem::path out(c.out);

  std::vector<std::optional<SeedResult>> slots(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::mutex mu;
  std::size_t next_to_write = 0;
  std::ofstream runs_csv(out / "runs.csv", std::ios::binary);
  if (!runs_csv) throw IoError("cannot write " + (out / "runs.csv").string());
  runs_csv << kRunsHeader;

  // Completed seeds are appended in seed-list order so the file is deterministic.
  auto flush_ready = [&] {
    while (next_to_write < slots.size() && slots[next_to_write]) {
      runs_csv << detail::runs_row(c, *slots[next_to_write], true) << detail::runs_row(c, *slots[next_to_write], false);
      runs_csv.flush();
      ++next_to_write;
    }
  };

  std::atomic<std::size_t> next_job{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i; !failed && (i = next_job++) < seeds.size();) {
      try {
        auto r = run_seed(c, data, seeds[i]);
        std::lock_guard lock(mu);
        if (!c.quiet)
          std::cerr << c.scenario << " seed " << seeds[i] << ": OA pretrained " << detail::fmt6(r.pretrained.metrics.oa)
                    << " scratch " << detail::fmt6(r.scratch.metrics.oa) << "\n";
        slots[i] = std::move(r);
        flush_ready();
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  const std::size_t n_workers = worker_slots(c.workers, seeds.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult result;
  for (auto& s : slots) result.runs.push_back(std::move(*s));
  for (const auto& r : result.runs) {
    result.pretrained.oa.push_back(r.pretrained.metrics.oa);
    result.pretrained.aa.push_back(r.pretrained.metrics.aa);
    result.pretrained.kappa.push_back(r.pretrained.metrics.kappa);
    result.scratch.oa.push_back(r.scratch.metrics.oa);
    result.scratch.aa.push_back(r.scratch.metrics.aa);
    result.scratch.kappa.push_back(r.scratch.metrics.kappa);
  }
  result.pretrained.median_run = detail::median_index(result.pretrained.oa);
  result.scratch.median_run = detail::median_index(result.scratch.oa);
  if (result.runs.size() >= 2) result.p_value = mann_whitney_u(result.pretrained.oa, result.scratch.oa).p_value;

  {
    std::ofstream os(out / "summary.csv", std::ios::binary);
    os << kSummaryHeader << summary_rows(c, result);
    if (!os) throw IoError("cannot write summary.csv");
  }
  {
    std::ofstream os(out / "table.txt", std::ios::binary);
    os << "scenario " << c.scenario << ", " << to_string(c.arch) << ", n=" << c.n_per_class << ", "
       << result.runs.size() << " runs\n";
    os << "OA pretrained / scratch: ";
    if (result.runs.size() >= 2) {
      const RunSummary pre{result.runs.size(), mean_std(result.pretrained.oa), mean_std(result.pretrained.aa),
                           mean_std(result.pretrained.kappa)};
      const RunSummary scr{result.runs.size(), mean_std(result.scratch.oa), mean_std(result.scratch.aa),
                           mean_std(result.scratch.kappa)};
      os << paired_row(pre, scr, result.p_value) << "\n";
      os << "p (one-sided Mann-Whitney U) = " << detail::fmt6(*result.p_value) << "\n";
    } else {
      os << detail::fmt6(100 * result.pretrained.oa.front()) << " / " << detail::fmt6(100 * result.scratch.oa.front())
         << "\n";
    }
  }
  export_map_image(data.ground_truth, (out / "ground_truth.ppm").string());
  export_map_image(result.runs[result.pretrained.median_run].pretrained.map, (out / "map_pretrained_median.ppm").string());
  export_map_image(result.runs[result.scratch.median_run].scratch.map, (out / "map_scratch_median.ppm").string());
  return result;
}

// ---------------------------------------------------------------- sweeps

struct SweepRow {
  double value = 0;
  ExperimentResult result;
};

inline ExperimentConfig sweep_point(const ExperimentConfig& base, SweepAxis axis, double value) {
  if (!(value >= 1) || value != std::floor(value)) throw ConfigError("sweep values must be positive integers");
  const auto v = static_cast<std::size_t>(value);
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::grid_density:
      c.labeling = Labeling::grid;
      c.grid_m = c.grid_n = v;
      break;
    case SweepAxis::stripes:
      c.labeling = Labeling::stripes;
      c.stripes = v;
      break;
    case SweepAxis::n_per_class:
      c.n_per_class = v;
      break;
  }
  c.out = (std::filesystem::path(base.out) / (to_string(axis) + "_" + std::to_string(v))).string();
  return c;
}

inline std::string sweep_label(SweepAxis axis, double value) {
  const auto v = std::to_string(static_cast<std::size_t>(value));
  return axis == SweepAxis::grid_density ? v + "x" + v : v;
}

/// One experiment per value, in the given order. Writes sweep.csv (one
/// summary row pair per value) and sweep_table.txt under `out`.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  for (double v : values) sweep_point(base, axis, v);  // validate every value before running anything
  std::vector<SweepRow> rows;
  std::filesystem::create_directories(base.out);
  const std::filesystem::path out(base.out);
  std::ofstream csv(out / "sweep.csv", std::ios::binary);
  if (!csv) throw IoError("cannot write sweep.csv");
  csv << "axis,value," << kSummaryHeader;
  for (double v : values) {
    const auto c = sweep_point(base, axis, v);
    rows.push_back({v, run_experiment(c)});
    std::istringstream lines(summary_rows(c, rows.back().result));
    for (std::string line; std::getline(lines, line);) csv << to_string(axis) << "," << sweep_label(axis, v) << "," << line << "\n";
    csv.flush();
  }
  std::ofstream table(out / "sweep_table.txt", std::ios::binary);
  table << to_string(axis) << " | " << to_string(base.arch) << " OA pretrained / scratch\n";
  for (const auto& r : rows) {
    table << sweep_label(axis, r.value) << " | ";
    const auto& res = r.result;
    if (res.runs.size() >= 2) {
      const RunSummary pre{res.runs.size(), mean_std(res.pretrained.oa), mean_std(res.pretrained.aa),
                           mean_std(res.pretrained.kappa)};
      const RunSummary scr{res.runs.size(), mean_std(res.scratch.oa), mean_std(res.scratch.aa),
                           mean_std(res.scratch.kappa)};
      table << paired_row(pre, scr, res.p_value) << "\n";
    } else {
      table << detail::fmt6(100 * res.pretrained.oa.front()) << " / " << detail::fmt6(100 * res.scratch.oa.front()) << "\n";
    }
  }
  return rows;
}

}  // namespace hypergrid
