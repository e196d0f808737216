// mitonet: train, run and evaluate the slimmed U-Net on EM-style stacks.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "mitonet/commands.hpp"
#include "mitonet/error.hpp"

namespace {

int exit_code(mito::ErrorCategory c) {
  switch (c) {
    case mito::ErrorCategory::shape: return 2;
    case mito::ErrorCategory::value: return 3;
    case mito::ErrorCategory::io: return 4;
    case mito::ErrorCategory::format: return 5;
    case mito::ErrorCategory::config: return 6;
    case mito::ErrorCategory::numeric: return 7;
  }
  return 1;
}

int report_error(std::string_view category, const std::string& message, int code) {
  std::string flat = message;
  for (char& ch : flat)
    if (ch == '\n') ch = ' ';
  std::cerr << "error: category=" << category << " message=" << flat << '\n';
  return code;
}

std::vector<int> parse_extents(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto x = text.find('x', pos);
    const std::string part = text.substr(pos, x == std::string::npos ? std::string::npos : x - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      mito::fail(mito::ErrorCategory::config, "cannot parse synthetic size '" + text + "', expected DxHxW");
    }
    if (x == std::string::npos) break;
    pos = x + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mitonet: mitochondria segmentation for electron microscopy stacks"};
  app.require_subcommand(1);

  mito::TrainCommand train;
  std::string resume, config_file, validation;
  auto* t = app.add_subcommand("train", "train a model on a labelled stack");
  t->add_option("--config", config_file, "key = value configuration file");
  t->add_option("--set", train.overrides, "configuration override key=value (repeatable)");
  t->add_option("--data", train.data_root, "training stack root")->required();
  t->add_option("--out", train.out_dir, "output directory")->required();
  t->add_option("--resume", resume, "checkpoint to resume from");
  t->add_option("--validate", validation, "labelled stack scored after training");

  mito::PredictCommand predict;
  int zdepth = 0;
  std::string zmode = "binary";
  auto* p = app.add_subcommand("predict", "segment a stack with a trained model");
  p->add_option("--checkpoint", predict.checkpoint, "model checkpoint")->required();
  p->add_option("--stack", predict.stack_root, "input stack root")->required();
  p->add_option("--out", predict.out_dir, "output directory")->required();
  p->add_option("--threshold", predict.threshold, "foreground decision threshold")->capture_default_str();
  p->add_option("--zfilter", zdepth, "median filter window along z (odd); 0 disables")->capture_default_str();
  p->add_option("--zfilter-mode", zmode, "filter the binary masks or the probabilities")
      ->check(CLI::IsMember({"binary", "probability"}))
      ->capture_default_str();
  p->add_flag("--exact", predict.exact, "write float32 probabilities instead of 8-bit");
  p->add_option("--workers", predict.workers, "slices predicted in parallel")->capture_default_str();

  mito::EvalCommand eval;
  std::string eval_json;
  auto* e = app.add_subcommand("eval", "score predictions against ground truth");
  e->add_option("--pred", eval.pred_dir, "output directory of predict")->required();
  e->add_option("--truth", eval.truth_root, "ground-truth stack root")->required();
  e->add_option("--threshold", eval.threshold, "foreground decision threshold")->capture_default_str();
  e->add_flag("--from-masks", eval.from_masks, "score the written masks instead of re-thresholding");
  e->add_option("--pr-thresholds", eval.pr_thresholds, "thresholds on the PR curve")->capture_default_str();
  e->add_option("--json", eval_json, "structured report file");

  mito::BenchCommand bench;
  std::string bench_ckpt, bench_stack, bench_synth, bench_json;
  int bench_z = 0;
  auto* b = app.add_subcommand("bench", "measure inference throughput");
  b->add_option("--checkpoint", bench_ckpt, "model checkpoint (default: untrained default model)");
  b->add_option("--stack", bench_stack, "stack root to run on");
  b->add_option("--synthetic", bench_synth, "synthetic stack size DxHxW, e.g. 165x768x1024");
  b->add_option("--runs", bench.options.runs, "timed runs (at least 3)")->capture_default_str();
  b->add_option("--warmup", bench.options.warmup, "untimed warmup runs (at least 1)")->capture_default_str();
  b->add_option("--workers", bench.options.workers, "slices predicted in parallel")->capture_default_str();
  b->add_option("--zfilter", bench_z, "include a z median filter of this window; 0 disables")->capture_default_str();
  b->add_option("--seed", bench.seed, "seed for the default model and synthetic stack")->capture_default_str();
  b->add_option("--json", bench_json, "structured report file");

  mito::InspectCommand inspect;
  std::string inspect_ckpt, inspect_probe, inspect_json;
  auto* i = app.add_subcommand("inspect", "parameter audit and dead-filter probe");
  i->add_option("--checkpoint", inspect_ckpt, "model checkpoint (default: untrained default model)");
  i->add_option("--probe", inspect_probe, "stack whose slices probe for dead filters");
  i->add_option("--probe-slices", inspect.max_probe_slices, "slices drawn from the probe stack")->capture_default_str();
  i->add_flag("--layers", inspect.list_layers, "list every layer");
  i->add_option("--json", inspect_json, "structured report file");

  mito::SynthCommand synth;
  auto* s = app.add_subcommand("synth", "write a labelled synthetic stack");
  s->add_option("--out", synth.out_root, "output stack root")->required();
  s->add_option("--slices", synth.slices)->capture_default_str();
  s->add_option("--height", synth.height)->capture_default_str();
  s->add_option("--width", synth.width)->capture_default_str();
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--blobs", synth.blobs.count, "organelles per stack")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    return report_error("config", ex.what(), exit_code(mito::ErrorCategory::config));
  }

  try {
    if (*t) {
      if (!config_file.empty()) train.config_file = config_file;
      if (!resume.empty()) train.resume = resume;
      if (!validation.empty()) train.validation_root = validation;
      mito::run_train(train, std::cout);
    } else if (*p) {
      if (zdepth != 0) predict.zfilter = mito::ZFilterSpec{zdepth};
      predict.zfilter_mode = zmode == "binary" ? mito::ZFilterMode::binary : mito::ZFilterMode::probability;
      mito::run_predict(predict, std::cout);
    } else if (*e) {
      if (!eval_json.empty()) eval.json_file = eval_json;
      mito::run_eval(eval, std::cout);
    } else if (*b) {
      if (!bench_ckpt.empty()) bench.checkpoint = bench_ckpt;
      if (!bench_stack.empty()) bench.stack_root = bench_stack;
      if (!bench_synth.empty()) bench.synthetic = parse_extents(bench_synth);
      if (bench_z != 0) bench.options.zfilter = mito::ZFilterSpec{bench_z};
      if (!bench_json.empty()) bench.json_file = bench_json;
      mito::run_bench_command(bench, std::cout);
    } else if (*i) {
      if (!inspect_ckpt.empty()) inspect.checkpoint = inspect_ckpt;
      if (!inspect_probe.empty()) inspect.probe_root = inspect_probe;
      if (!inspect_json.empty()) inspect.json_file = inspect_json;
      mito::run_inspect(inspect, std::cout);
    } else if (*s) {
      mito::run_synth(synth, std::cout);
    }
  } catch (const mito::Error& ex) {
    return report_error(mito::category_name(ex.category()), ex.what(), exit_code(ex.category()));
  } catch (const std::filesystem::filesystem_error& ex) {
    return report_error("io", ex.what(), exit_code(mito::ErrorCategory::io));
  } catch (const std::exception& ex) {
    return report_error("internal", ex.what(), 1);
  }
  return 0;
}
