#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hypergrid/experiment.hpp"

using namespace hypergrid;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hypergrid_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

KeyValueFile parse(const std::string& text) {
  std::istringstream is(text);
  return KeyValueFile::parse(is);
}

// A small scene and a very short schedule so a full experiment takes about a second.
ExperimentConfig tiny(const fs::path& out, std::size_t repeats) {
  ExperimentConfig c;
  c.scenario = "tiny";
  SynthParams s;
  s.size = 24;
  s.bands = 6;
  s.classes = 3;
  s.blob_radius = 4;
  s.blobs_per_class = 2;
  s.min_class_pixels = 10;
  c.synthetic = s;
  c.arch = Arch::A3;
  c.grid_m = c.grid_n = 3;
  c.n_per_class = 3;
  c.repeats = repeats;
  c.scale = 2e-4;
  c.out = out.string();
  c.quiet = true;
  return c;
}

const char* kTinyConfig = R"(scenario = "tiny"
arch = "A3"
labeling = "grid"
grid_m = 3
grid_n = 3
n_per_class = 3
repeats = 1
scale = 0.0002
quiet = true

[synth]
size = 24
bands = 6
classes = 3
blob_radius = 4
blobs_per_class = 2
)";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HYPERGRID_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesTypedValuesAndSections) {
  const auto f = parse(R"(# comment
scenario = "ip # not a comment"
scale = 0.5   # trailing
save_checkpoints = true
seeds = [3, 4, 5]
[synth]
size = 30
)");
  EXPECT_EQ(f.get_string("scenario", ""), "ip # not a comment");
  EXPECT_DOUBLE_EQ(f.get_number("scale", 1), 0.5);
  EXPECT_TRUE(f.get_bool("save_checkpoints", false));
  EXPECT_EQ(f.get_numbers("seeds"), (std::vector<double>{3, 4, 5}));
  EXPECT_EQ(f.get_count("synth.size", 0), 30u);
  EXPECT_EQ(f.get_count("missing", 7), 7u);
}

TEST(Config, SyntaxErrorsAreConfigErrors) {
  EXPECT_THROW(parse("scale 0.5\n"), ConfigError);
  EXPECT_THROW(parse("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse("[synth\n"), ConfigError);
  EXPECT_THROW(parse("a = [1, 2\n"), ConfigError);
  EXPECT_THROW(parse("a = \n"), ConfigError);
  EXPECT_THROW(parse("a = \"x\"\n").get_number("a", 0), ConfigError);
  EXPECT_THROW(parse("a = 1.5\n").get_count("a", 0), ConfigError);
}

TEST(Config, DefaultsAndOverrides) {
  const auto d = experiment_config(parse("[synth]\nsize = 30\n"));
  EXPECT_EQ(d.arch, Arch::A3);
  EXPECT_EQ(d.labeling, Labeling::grid);
  EXPECT_EQ(d.preprocess, Preprocess::standardize);
  EXPECT_EQ(d.repeats, 15u);
  EXPECT_DOUBLE_EQ(d.a9_lr, 0.01);
  EXPECT_FALSE(d.save_checkpoints);
  ASSERT_TRUE(d.synthetic);
  EXPECT_EQ(d.synthetic->size, 30u);
  EXPECT_EQ(d.seed_list(), (std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15}));

  const auto c = experiment_config(parse(kTinyConfig));
  EXPECT_EQ(c.grid_m, 3u);
  EXPECT_EQ(c.repeats, 1u);
  EXPECT_DOUBLE_EQ(c.scale, 2e-4);
  EXPECT_NO_THROW(c.validate());

  const auto s = experiment_config(parse("seeds = [9, 4]\nlabeling = \"stripes\"\nstripes = 7\ncube = \"a.hsc\"\n"), "/data");
  EXPECT_EQ(s.seed_list(), (std::vector<std::uint64_t>{9, 4}));
  EXPECT_EQ(s.labeling, Labeling::stripes);
  EXPECT_EQ(s.cube_path, "/data/a.hsc");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(experiment_config(parse("grid_size = 4\n")), ConfigError);
  EXPECT_THROW(experiment_config(parse("[synth]\nradius = 4\n")), ConfigError);
  EXPECT_THROW(experiment_config(parse("arch = \"A7\"\n")), ConfigError);
  EXPECT_THROW(experiment_config(parse("labeling = \"hexagons\"\n")), ConfigError);
  EXPECT_THROW(experiment_config(parse("preprocess = \"whiten\"\n")), ConfigError);
  EXPECT_THROW(experiment_config(parse("repeats = -1\n")), ConfigError);
  EXPECT_THROW(experiment_config(parse("scale = 1\n")).validate(), ConfigError);  // no data source
  EXPECT_THROW(experiment_config(parse("cube = \"/nonexistent.hsc\"\nground_truth = \"/nonexistent.hsl\"\n")).validate(),
               ConfigError);
}

TEST(Experiment, SingleRepeatWritesTwoRowsAndEmptySpread) {
  const auto dir = scratch_dir("single");
  const auto r = run_experiment(tiny(dir, 1));
  EXPECT_EQ(r.runs.size(), 1u);
  EXPECT_FALSE(r.p_value);
  const auto runs = lines_of(slurp(dir / "runs.csv"));
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[0], "scenario,arch,n_per_class,seed,pretrained,oa,aa,kappa");
  EXPECT_EQ(runs[1].rfind("tiny,A3,3,1,true,", 0), 0u);
  EXPECT_EQ(runs[2].rfind("tiny,A3,3,1,false,", 0), 0u);
  const auto summary = lines_of(slurp(dir / "summary.csv"));
  ASSERT_EQ(summary.size(), 3u);
  EXPECT_EQ(summary[1].back(), ',');
  EXPECT_NE(summary[1].find(",,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "table.txt"));
  EXPECT_TRUE(fs::exists(dir / "map_pretrained_median.ppm"));
  EXPECT_TRUE(fs::exists(dir / "map_scratch_median.ppm"));
}

TEST(Experiment, RerunIsByteIdentical) {
  const auto a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
  auto ca = tiny(a, 3), cb = tiny(b, 3);
  cb.workers = 3;
  run_experiment(ca);
  run_experiment(cb);
  for (const char* f : {"runs.csv", "summary.csv", "table.txt", "map_pretrained_median.ppm"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(lines_of(slurp(a / "runs.csv")).size(), 7u);
}

TEST(Experiment, SweepKeepsInputOrder) {
  const auto dir = scratch_dir("sweep");
  const auto rows = sweep(tiny(dir, 1), SweepAxis::grid_density, {5, 2});
  ASSERT_EQ(rows.size(), 2u);
  const auto csv = lines_of(slurp(dir / "sweep.csv"));
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[1].rfind("grid-density,5x5,tiny,A3,3,true,", 0), 0u);
  EXPECT_EQ(csv[2].rfind("grid-density,5x5,tiny,A3,3,false,", 0), 0u);
  EXPECT_EQ(csv[3].rfind("grid-density,2x2,", 0), 0u);
  const auto table = lines_of(slurp(dir / "sweep_table.txt"));
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[1].rfind("5x5 | ", 0), 0u);
  EXPECT_EQ(table[2].rfind("2x2 | ", 0), 0u);
  EXPECT_THROW(sweep(tiny(dir, 1), SweepAxis::stripes, {2, 0}), ConfigError);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("exit");
  {
    std::ofstream os(dir / "ok.toml");
    os << "out = \"" << (dir / "out").string() << "\"\n" << kTinyConfig;
  }
  {
    std::ofstream os(dir / "bad.toml");
    os << "grid_size = 3\n";
  }
  EXPECT_EQ(run_cli("experiment --config " + (dir / "ok.toml").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "runs.csv"));
  EXPECT_EQ(run_cli("experiment --config " + (dir / "bad.toml").string()), 1);
  EXPECT_EQ(run_cli("experiment --config " + (dir / "missing.toml").string()), 1);
  EXPECT_EQ(run_cli("experiment"), 1);
  EXPECT_EQ(run_cli("no-such-command"), 1);
  EXPECT_EQ(run_cli("gradcheck --instances 1"), 0);
  EXPECT_EQ(run_cli("gradcheck --instances 1 --tolerance 1e-30"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, PretrainThenFinetune) {
  const auto dir = scratch_dir("pipeline");
  {
    std::ofstream os(dir / "c.toml");
    os << "out = \"" << (dir / "out").string() << "\"\n" << kTinyConfig;
  }
  const auto cfg = (dir / "c.toml").string();
  ASSERT_EQ(run_cli("pretrain --config " + cfg), 0);
  const auto ckpt = dir / "out" / "pretrain.hgm";
  ASSERT_TRUE(fs::exists(ckpt));
  const auto log = lines_of(slurp(dir / "out" / "pretrain.log"));
  ASSERT_FALSE(log.empty());
  EXPECT_EQ(log.front().rfind("iter 0 loss ", 0), 0u);
  EXPECT_EQ(log.back(), "checkpoint " + ckpt.string());
  ASSERT_EQ(run_cli("finetune --config " + cfg + " --model " + ckpt.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.txt"));
  EXPECT_TRUE(fs::exists(dir / "out" / "finetune_map.ppm"));
  EXPECT_EQ(run_cli("export-map --labels " + (dir / "out" / "finetune_map.hsl").string() + " --image " +
                    (dir / "map.ppm").string()),
            0);
  EXPECT_EQ(slurp(dir / "map.ppm").substr(0, 2), "P6");
  EXPECT_EQ(run_cli("finetune --config " + cfg + " --model " + (dir / "nope.hgm").string()), 2);
}
