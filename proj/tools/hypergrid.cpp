// hypergrid command-line front end.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "hypergrid/experiment.hpp"
#include "hypergrid/gradcheck_suite.hpp"

namespace fs = std::filesystem;
using namespace hypergrid;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", f.config, "experiment config file");
  if (needs_config) opt->required();
  cmd->add_option("--seed", f.seed, "base seed (replaces any seeds list)");
  cmd->add_option("--scale", f.scale, "schedule scale factor");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "parallel worker slots");
}

ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig c = load_experiment_config(f.config);
  if (f.seed) {
    c.seed = *f.seed;
    c.seeds.clear();
  }
  if (f.scale) c.scale = *f.scale;
  if (f.out) c.out = *f.out;
  if (f.workers) c.workers = *f.workers;
  c.validate();
  return c;
}

void print_nested(const std::exception& e, int depth = 0) {
  std::cerr << (depth == 0 ? "error: " : "  caused by: ") << e.what() << "\n";
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    if (std::string(inner.what()) != e.what()) print_nested(inner, depth + 1);
  }
}

bool is_config_error(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return true;
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    return is_config_error(inner);
  }
  return false;
}

void write_metrics(const fs::path& path, const MetricSet& m) {
  std::ofstream os(path);
  os << "oa " << detail::fmt6(m.oa) << "\naa " << detail::fmt6(m.aa) << "\nkappa " << detail::fmt6(m.kappa) << "\n";
}

int cmd_pretrain(const CommonFlags& f) {
  const auto c = resolve_config(f);
  const auto data = prepare_data(c);
  fs::create_directories(c.out);
  const auto pretrain_labels = pretraining_labels(c, data);
  const LabelMap& labels = pretrain_labels.first;
  const auto schedule = schedule_for(c.arch, Phase::pretrain, c.scale, c.a9_lr);
  Rng root(c.seed);
  Rng rng = root.child(kPretrainStream);
  const auto spec = ModelSpec::make(c.arch, data.cube.bands, labels.class_count(),
                                    c.a5_filters ? c.a5_filters : default_a5_filters(data.cube.bands));
  TrainRun run = pretrain_labels.second ? pretrain(data.cube, labels, spec, schedule, rng) : [&] {
    Rng init = rng.child(0);
    return pretrain_labeled_only(data.cube, labels, build_model(spec, init), schedule, rng);
  }();
  const auto ckpt = (fs::path(c.out) / "pretrain.hgm").string();
  save_model(run.model, ckpt);
  std::ofstream log(fs::path(c.out) / "pretrain.log");
  write_train_log(log, run, ckpt);
  export_map_image(labels, (fs::path(c.out) / "pretrain_labels.ppm").string());
  std::cout << "pretrained " << to_string(c.arch) << " on " << labels.class_count() << " artificial classes, "
            << run.iterations << " iterations -> " << ckpt << "\n";
  return 0;
}

int cmd_finetune(const CommonFlags& f, const std::string& model_path) {
  const auto c = resolve_config(f);
  const auto data = prepare_data(c);
  fs::create_directories(c.out);
  Rng root(c.seed);
  Rng sel_rng = root.child(kSelectionStream);
  const auto sel = select_training_pixels(sel_rng, data.ground_truth, c.n_per_class);
  ModelState model;
  if (model_path.empty()) {
    Rng init = root.child(kScratchInitStream);
    model = build_model(ModelSpec::make(c.arch, data.cube.bands, sel.class_count(),
                                        c.a5_filters ? c.a5_filters : default_a5_filters(data.cube.bands)),
                        init);
  } else {
    Rng tr = root.child(kTransferStream);
    model = transfer_last_layer(load_model(model_path), sel.class_count(), tr);
  }
  Rng rng = root.child(kFinetuneStream);
  TrainRun run = finetune(std::move(model), data.cube, sel, schedule_for(c.arch, Phase::finetune, c.scale, c.a9_lr), rng);
  const auto ckpt = (fs::path(c.out) / "finetune.hgm").string();
  save_model(run.model, ckpt);
  std::ofstream log(fs::path(c.out) / "finetune.log");
  write_train_log(log, run, ckpt);
  const auto map = classify_full_image(run.model, data.cube, sel.classes);
  const auto m = metrics(confusion_matrix(data.ground_truth, map, sel.training_set()));
  save_labelmap(map, (fs::path(c.out) / "finetune_map.hsl").string());
  export_map_image(map, (fs::path(c.out) / "finetune_map.ppm").string());
  write_metrics(fs::path(c.out) / "metrics.txt", m);
  std::cout << "OA " << detail::fmt6(m.oa) << " AA " << detail::fmt6(m.aa) << " kappa " << detail::fmt6(m.kappa) << "\n";
  return 0;
}

int cmd_experiment(const CommonFlags& f) {
  const auto c = resolve_config(f);
  const auto r = run_experiment(c);
  std::ifstream table(fs::path(c.out) / "table.txt");
  std::cout << table.rdbuf();
  (void)r;
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::string& axis, const std::vector<double>& values) {
  auto c = resolve_config(f);
  const SweepAxis a = !axis.empty() ? parse_sweep_axis(axis)
                      : c.sweep_axis ? *c.sweep_axis
                                     : throw ConfigError("sweep needs --axis or sweep_axis in the config");
  const auto& vals = !values.empty() ? values : c.sweep_values;
  sweep(c, a, vals);
  std::ifstream table(fs::path(c.out) / "sweep_table.txt");
  std::cout << table.rdbuf();
  return 0;
}

int cmd_export_map(const std::string& labels, const std::string& model_path, const CommonFlags& f,
                   const std::string& image) {
  LabelMap map;
  if (!labels.empty()) {
    map = load_labelmap(labels);
  } else {
    if (model_path.empty() || f.config.empty()) throw ConfigError("export-map needs --labels, or --model with --config");
    const auto c = resolve_config(f);
    const auto data = prepare_data(c);
    auto model = load_model(model_path);
    const auto present = data.ground_truth.present_labels();
    map = classify_full_image(model, data.cube, present.size() == model.spec().classes ? present : std::vector<std::uint16_t>{});
  }
  export_map_image(map, image);
  std::cout << "wrote " << image << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, double tolerance) {
  bool ok = true;
  std::printf("%-24s %9s %11s %14s\n", "layer", "instances", "coordinates", "max rel error");
  for (const auto& s : run_gradcheck_suite(seed, instances)) {
    std::printf("%-24s %9zu %11zu %14.3e\n", s.layer.c_str(), s.instances, s.coordinates, s.max_rel_error);
    ok = ok && s.max_rel_error < tolerance;
  }
  std::printf("%s (tolerance %.1e)\n", ok ? "all layers pass" : "FAILED", tolerance);
  return ok ? 0 : 2;
}

int cmd_synth(const SynthParams& p, const std::string& out) {
  fs::create_directories(out);
  const auto scene = generate_scene(p);
  save_cube(scene.cube, (fs::path(out) / "cube.hsc").string());
  save_labelmap(scene.ground_truth, (fs::path(out) / "ground_truth.hsl").string());
  export_map_image(scene.ground_truth, (fs::path(out) / "ground_truth.ppm").string());
  std::cout << "wrote " << p.size << "x" << p.size << "x" << p.bands << " cube with " << p.classes
            << " classes to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypergrid: grid-label pretraining and fine-tuning for hyperspectral classification"};
  app.require_subcommand(1);

  CommonFlags pre_flags, ft_flags, exp_flags, sweep_flags, map_flags;
  auto* pre = app.add_subcommand("pretrain", "pretrain on artificial labels");
  add_common(pre, pre_flags);

  std::string ft_model;
  auto* ft = app.add_subcommand("finetune", "fine-tune a pretrained model (or a fresh one) on ground truth");
  add_common(ft, ft_flags);
  ft->add_option("--model", ft_model, "pretrained model checkpoint; omit to start from scratch");

  auto* exp = app.add_subcommand("experiment", "pretrained vs scratch over several seeds");
  add_common(exp, exp_flags);

  std::string sweep_axis;
  std::vector<double> sweep_values;
  auto* sw = app.add_subcommand("sweep", "one experiment per grid density, stripe count or sample count");
  add_common(sw, sweep_flags);
  sw->add_option("--axis", sweep_axis, "grid-density | stripes | n-per-class");
  sw->add_option("--values", sweep_values, "axis values, in output order");

  std::string map_labels, map_model, map_image;
  auto* em = app.add_subcommand("export-map", "write a label map as a colour PPM image");
  add_common(em, map_flags, false);
  em->add_option("--labels", map_labels, "label map file (HSL1)");
  em->add_option("--model", map_model, "model checkpoint to classify the config's cube with");
  em->add_option("--image", map_image, "output PPM path")->required();

  std::uint64_t gc_seed = 1;
  std::size_t gc_instances = 20;
  double gc_tol = 1e-5;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every layer in 64-bit");
  gc->add_option("--seed", gc_seed, "random instance seed");
  gc->add_option("--instances", gc_instances, "instances per layer type");
  gc->add_option("--tolerance", gc_tol, "maximum relative error");

  SynthParams sp;
  std::string synth_out = "synth";
  auto* sy = app.add_subcommand("synth", "generate a synthetic blob scene");
  sy->add_option("--size", sp.size, "scene side in pixels");
  sy->add_option("--bands", sp.bands, "spectral bands");
  sy->add_option("--classes", sp.classes, "blob classes");
  sy->add_option("--blob-radius", sp.blob_radius, "blob radius in pixels");
  sy->add_option("--noise-std", sp.noise_std, "Gaussian noise standard deviation");
  sy->add_option("--blobs-per-class", sp.blobs_per_class, "blobs per class");
  sy->add_option("--seed", sp.seed, "scene seed");
  sy->add_option("--out", synth_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*pre) return cmd_pretrain(pre_flags);
    if (*ft) return cmd_finetune(ft_flags, ft_model);
    if (*exp) return cmd_experiment(exp_flags);
    if (*sw) return cmd_sweep(sweep_flags, sweep_axis, sweep_values);
    if (*em) return cmd_export_map(map_labels, map_model, map_flags, map_image);
    if (*gc) return cmd_gradcheck(gc_seed, gc_instances, gc_tol);
    if (*sy) return cmd_synth(sp, synth_out);
  } catch (const std::exception& e) {
    print_nested(e);
    return is_config_error(e) ? 1 : 2;
  }
  return 1;
}
