#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "mitonet/checkpoint.hpp"
#include "mitonet/commands.hpp"
#include "mitonet/config.hpp"
#include "mitonet/stack_io.hpp"
#include "mitonet/zfilter.hpp"

using namespace mito;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mitonet_test_cmd_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

const std::vector<std::string> kTinyModel{"filters=2,4,8,16,32", "input_size=32", "batch_size=1",
                                          "learning_rate=0.001"};

fs::path synth(const fs::path& dir, int slices, int size, std::uint64_t seed) {
  SynthCommand s;
  s.out_root = dir;
  s.slices = slices;
  s.height = s.width = size;
  s.seed = seed;
  s.blobs.count = 4;
  s.blobs.min_semi_axis = 4;
  s.blobs.max_semi_axis = 8;
  std::ostringstream sink;
  run_synth(s, sink);
  return dir;
}

TrainCommand tiny_train(const fs::path& data, const fs::path& out, int steps) {
  TrainCommand t;
  t.overrides = kTinyModel;
  t.overrides.push_back("steps=" + std::to_string(steps));
  t.data_root = data;
  t.out_dir = out;
  return t;
}

struct Run {
  int code;
  std::string output;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(MITONET_CLI) + " " + args + " 2>&1";
  Run r{0, {}};
  FILE* p = popen(cmd.c_str(), "r");
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), p)) r.output += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace

TEST(Config, ParsesCommentsAndOverrides) {
  auto m = parse_config("# run\nsteps = 12\n\nlearning_rate=0.5\nsteps = 13\n");
  apply_overrides(m, {"seed=4", "rotate=false"});
  const auto rc = make_run_config(m);
  EXPECT_EQ(rc.train.steps, 13);
  EXPECT_EQ(rc.train.seed, 4u);
  EXPECT_DOUBLE_EQ(rc.train.adam.learning_rate, 0.5);
  EXPECT_FALSE(rc.augment.rotate);
  EXPECT_EQ(rc.augment.output_size, rc.model.input_size);
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    (void)make_run_config(parse_config("stepz = 3\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::config);
    EXPECT_NE(std::string(e.what()).find("stepz"), std::string::npos);
  }
}

TEST(Config, BadValuesAndLines) {
  EXPECT_THROW((void)make_run_config(parse_config("steps = many\n")), Error);
  EXPECT_THROW((void)make_run_config(parse_config("filters = 16,32\n")), Error);
  EXPECT_THROW((void)make_run_config(parse_config("rotate = maybe\n")), Error);
  EXPECT_THROW((void)parse_config("just words\n"), Error);
}

TEST(Config, FormatRoundTrips) {
  RunConfig rc;
  rc.train.adam.learning_rate = 0.00123;
  rc.augment.min_coverage = 0.7;
  const auto again = make_run_config(parse_config(format_config(to_config_map(rc))));
  EXPECT_EQ(to_config_map(again), to_config_map(rc));
  EXPECT_EQ(to_config_map(rc).size(), config_keys().size());
}

TEST(Commands, TrainIsDeterministicAndResumable) {
  const auto root = scratch("train");
  const auto data = synth(root / "data", 3, 48, 1);
  std::ostringstream sink;
  run_train(tiny_train(data, root / "a", 6), sink);
  run_train(tiny_train(data, root / "b", 6), sink);
  const std::string log = slurp(root / "a" / kLossLog);
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 6);
  EXPECT_EQ(log, slurp(root / "b" / kLossLog));
  EXPECT_EQ(slurp(root / "a" / kFinalCheckpoint), slurp(root / "b" / kFinalCheckpoint));

  auto part = tiny_train(data, root / "c", 3);
  part.overrides.push_back("checkpoint_every=3");
  run_train(part, sink);
  EXPECT_TRUE(fs::exists(root / "c" / "step-00000003.ckpt"));
  auto rest = tiny_train(data, root / "c", 6);
  rest.resume = root / "c" / "step-00000003.ckpt";
  run_train(rest, sink);
  EXPECT_EQ(slurp(root / "c" / kLossLog), log);
  EXPECT_EQ(slurp(root / "c" / kFinalCheckpoint), slurp(root / "a" / kFinalCheckpoint));
}

TEST(Commands, TrainRequiresMasksAndMatchingResume) {
  const auto root = scratch("train_reject");
  const auto data = synth(root / "data", 2, 48, 1);
  fs::remove_all(data / "masks");
  std::ostringstream sink;
  EXPECT_THROW(run_train(tiny_train(data, root / "out", 2), sink), Error);
}

TEST(Commands, PredictWritesOneMaskPerSliceAndDepthOneIsIdentity) {
  const auto root = scratch("predict");
  const auto data = synth(root / "data", 5, 40, 2);
  save_checkpoint(root / "m.ckpt", UNet(make_run_config(parse_config("filters=2,4,8,16,32\ninput_size=32")).model, 3));
  std::ostringstream sink;
  PredictCommand p;
  p.checkpoint = root / "m.ckpt";
  p.stack_root = data;
  p.out_dir = root / "plain";
  run_predict(p, sink);
  p.out_dir = root / "z1";
  p.zfilter = ZFilterSpec{1};
  run_predict(p, sink);
  EXPECT_EQ(numbered_files(root / "plain" / "masks", ".pgm").size(), 5u);
  for (int z = 0; z < 5; ++z) {
    const auto name = slice_filename(z, ".pgm");
    EXPECT_EQ(slurp(root / "plain" / "masks" / name), slurp(root / "z1" / "masks" / name));
    EXPECT_EQ(slurp(root / "plain" / "probs" / name), slurp(root / "z1" / "probs" / name));
  }
  p.out_dir = root / "exact";
  p.exact = true;
  run_predict(p, sink);
  EXPECT_EQ(numbered_files(root / "exact" / "probs", ".pfm").size(), 5u);
}

TEST(Commands, PostprocessRemovesInjectedSingleSliceBlob) {
  PredictionVolume probs(7, 16, 16);
  for (int z = 1; z < 6; ++z)
    for (int y = 2; y < 7; ++y)
      for (int x = 2; x < 7; ++x) probs.at(z, y, x) = 0.9f;
  for (int y = 10; y < 13; ++y)
    for (int x = 10; x < 13; ++x) probs.at(3, y, x) = 0.95f;
  for (auto mode : {ZFilterMode::binary, ZFilterMode::probability}) {
    const auto m = postprocess(probs, 0.5, ZFilterSpec{3}, mode);
    EXPECT_EQ(m.at(3, 11, 11), 0);
    EXPECT_EQ(m.at(3, 4, 4), 1);
    EXPECT_EQ(m.at(1, 4, 4), 1);
  }
}

TEST(Commands, EvalOfGroundTruthScoresOneAndReportsShapes) {
  const auto root = scratch("eval");
  const auto data = synth(root / "data", 3, 32, 4);
  const auto stack = load_stack(data);
  PredictionVolume probs(stack.depth(), stack.height(), stack.width());
  for (std::size_t i = 0; i < probs.data.size(); ++i) probs.data[i] = stack.labels->data[i];
  write_probability_slices(root / "pred" / "probs", probs, false);
  write_mask_slices(root / "pred" / "masks", *stack.labels);
  std::ostringstream sink;
  EvalCommand e;
  e.pred_dir = root / "pred";
  e.truth_root = data;
  e.json_file = root / "report.json";
  const auto r = run_eval(e, sink);
  EXPECT_EQ(r.fg_iou, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.overall_iou, 1.0);
  const auto j = nlohmann::json::parse(slurp(root / "report.json"));
  EXPECT_EQ(j.size(), eval_report_keys().size());
  e.from_masks = true;
  EXPECT_EQ(run_eval(e, sink).fg_iou, 1.0);

  const auto other = synth(root / "other", 4, 32, 4);
  e.truth_root = other;
  try {
    (void)run_eval(e, sink);
    FAIL();
  } catch (const Error& ex) {
    EXPECT_EQ(ex.category(), ErrorCategory::shape);
    const std::string msg = ex.what();
    EXPECT_NE(msg.find("3x32x32"), std::string::npos);
    EXPECT_NE(msg.find("4x32x32"), std::string::npos);
  }
}

TEST(Commands, BenchRejectsTooFewRunsOrNoWarmup) {
  BenchCommand b;
  b.synthetic = std::vector<int>{1, 32, 32};
  std::ostringstream sink;
  b.options.runs = 2;
  EXPECT_THROW((void)run_bench_command(b, sink), Error);
  b.options.runs = 3;
  b.options.warmup = 0;
  EXPECT_THROW((void)run_bench_command(b, sink), Error);
}

TEST(Commands, BenchReportArithmetic) {
  const auto root = scratch("bench");
  UNetConfig c;
  c.filters = {2, 4, 8, 16, 32};
  c.input_size = 32;
  save_checkpoint(root / "m.ckpt", UNet(c, 1));
  BenchCommand b;
  b.checkpoint = root / "m.ckpt";
  b.synthetic = std::vector<int>{3, 48, 40};
  b.options.zfilter = ZFilterSpec{3};
  std::ostringstream sink;
  const auto r = run_bench_command(b, sink);
  EXPECT_EQ(r.pixels_per_stack, 3 * 48 * 40);
  EXPECT_EQ(r.tiles_per_stack, 3 * 4);
  EXPECT_EQ(r.slice_seconds.count, 3u * 12u);
  EXPECT_EQ(r.stack_seconds.count, 3u);
  EXPECT_NEAR(r.throughput_mps, r.pixels_per_stack / r.stack_seconds.mean / 1e6, 1e-9 * r.throughput_mps);
  EXPECT_NE(sink.str().find("reference_mps 11"), std::string::npos);
  EXPECT_NE(sink.str().find("verdict"), std::string::npos);
  EXPECT_EQ(r.to_json()["runs"], 3);
}

TEST(Commands, BenchThroughputIsStableAcrossRuns) {
  BenchCommand b;
  b.synthetic = std::vector<int>{2, 512, 512};
  std::ostringstream sink;
  const double a = run_bench_command(b, sink).throughput_mps;
  const double c = run_bench_command(b, sink).throughput_mps;
  EXPECT_LT(std::abs(a - c) / std::max(a, c), 0.15) << a << " vs " << c;
}

TEST(Commands, InspectAuditsDefaultModel) {
  const auto root = scratch("inspect");
  const auto data = synth(root / "data", 2, 64, 3);
  InspectCommand i;
  i.probe_root = data;
  std::ostringstream out;
  const auto r = run_inspect(i, out);
  EXPECT_EQ(r.encoder, 1'178'480);
  EXPECT_EQ(r.upsampling, 0);
  EXPECT_EQ(r.transpose_convolutions, 0);
  ASSERT_TRUE(r.utilization.has_value());
  EXPECT_GT(r.utilization->fraction(), 0.0);
  EXPECT_NE(out.str().find("encoder 1178480\n"), std::string::npos);
  EXPECT_NE(out.str().find("utilization " + format_percent(r.utilization->fraction())), std::string::npos);
  EXPECT_EQ(format_percent(0.997), "99.7%");
  EXPECT_EQ(format_percent(1.0), "100.0%");
}

TEST(Cli, ErrorLineAndExitCodes) {
  const auto root = scratch("cli");
  auto r = run_cli("bench --synthetic 1x32x32 --runs 2");
  EXPECT_EQ(r.code, 6);
  EXPECT_EQ(r.output, "error: category=config message=benchmark needs at least 3 timed runs, got 2\n");
  r = run_cli("eval --pred " + (root / "nothing").string() + " --truth " + (root / "nothing").string());
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(r.output.rfind("error: category=io message=", 0), 0u);
  r = run_cli("train --data x");
  EXPECT_EQ(r.code, 6);
  EXPECT_EQ(r.output.rfind("error: category=config", 0), 0u);
  std::ofstream(root / "bad.cfg") << "stepz = 4\n";
  synth(root / "data", 1, 32, 1);
  r = run_cli("train --config " + (root / "bad.cfg").string() + " --data " + (root / "data").string() + " --out " +
              (root / "o").string());
  EXPECT_EQ(r.code, 6);
  EXPECT_NE(r.output.find("stepz"), std::string::npos);
  r = run_cli("synth --out " + (root / "s").string() + " --slices 2 --height 32 --width 32");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(numbered_files(root / "s" / "images", ".pgm").size(), 2u);
}
