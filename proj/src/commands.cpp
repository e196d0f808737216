#include "mitonet/commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mitonet/augment.hpp"
#include "mitonet/checkpoint.hpp"
#include "mitonet/config.hpp"
#include "mitonet/predict.hpp"
#include "mitonet/stack_io.hpp"
#include "mitonet/zfilter.hpp"

namespace mito {
namespace fs = std::filesystem;
namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCategory::io, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorCategory::io, "write failed for " + path.string());
}

std::string checkpoint_name(std::int64_t step) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "step-%08" PRId64 ".ckpt", step);
  return buf;
}

/// Keeps the loss log lines up to and including `step`.
void truncate_loss_log(const fs::path& file, std::int64_t step) {
  std::string kept;
  std::ifstream in(file);
  for (std::string line; std::getline(in, line);) {
    std::istringstream ls(line);
    std::int64_t s = 0;
    if (!(ls >> s)) fail(ErrorCategory::format, file.string() + ": malformed line '" + line + "'");
    if (s <= step) kept += line + '\n';
  }
  in.close();
  write_text(file, kept);
}

UNet load_or_default(const std::optional<fs::path>& checkpoint, std::uint64_t seed) {
  if (checkpoint) return load_checkpoint(*checkpoint).model;
  return UNet(UNetConfig{}, seed);
}

}  // namespace

std::string format_loss_line(std::int64_t step, double loss) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%" PRId64 " %.9e\n", step, loss);
  return buf;
}

std::string format_percent(double fraction) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << fraction * 100.0 << '%';
  return os.str();
}

void run_train(const TrainCommand& cmd, std::ostream& out) {
  ConfigMap map;
  if (cmd.config_file) map = read_config(*cmd.config_file);
  apply_overrides(map, cmd.overrides);
  const RunConfig rc = make_run_config(map);

  StackLayout layout;
  layout.require_masks = true;
  const VolumeStack stack = load_stack(cmd.data_root, layout);
  if (!stack.labels) fail(ErrorCategory::io, "training stack " + cmd.data_root.string() + " has no masks");

  std::optional<UNet> model;
  TrainState state;
  if (cmd.resume) {
    auto ck = load_checkpoint(*cmd.resume);
    if (!ck.state) fail(ErrorCategory::format, cmd.resume->string() + ": checkpoint carries no trainer state");
    if (!(ck.model.config() == rc.model))
      fail(ErrorCategory::config, cmd.resume->string() + ": model configuration differs from the run configuration");
    model.emplace(std::move(ck.model));
    state = std::move(*ck.state);
  } else {
    Rng rng(rc.train.seed);
    model.emplace(rc.model, rng);
    state = TrainState{0, rng};
  }

  fs::create_directories(cmd.out_dir);
  write_text(cmd.out_dir / "config.txt", format_config(to_config_map(rc)));
  const fs::path log_file = cmd.out_dir / kLossLog;
  if (cmd.resume)
    truncate_loss_log(log_file, state.step);
  else
    write_text(log_file, "");
  std::ofstream log(log_file, std::ios::binary | std::ios::app);
  if (!log) fail(ErrorCategory::io, "cannot append to " + log_file.string());

  PatchSampler sampler(stack, rc.augment);
  TrainHooks hooks;
  const std::int64_t start = state.step;
  hooks.on_step = [&](std::int64_t step, double loss) {
    log << format_loss_line(step, loss);
    log.flush();
    const std::int64_t done = step - start;
    if (done == 1 || step == rc.train.steps || done % 100 == 0)
      out << "step " << step << " loss " << std::setprecision(6) << loss << '\n' << std::flush;
  };
  hooks.on_checkpoint = [&](const UNet& m, const TrainState& s) {
    save_checkpoint(cmd.out_dir / checkpoint_name(s.step), m, &s);
  };
  train(*model, state, rc.train, sampler, hooks);
  log.close();
  save_checkpoint(cmd.out_dir / kFinalCheckpoint, *model, &state);
  out << "wrote " << (cmd.out_dir / kFinalCheckpoint).string() << " at step " << state.step << '\n';

  if (cmd.validation_root) {
    const VolumeStack val = load_stack(*cmd.validation_root, layout);
    const auto probs = predict_volume(*model, val.images);
    const auto report = evaluate(probs, *val.labels, 0.5);
    write_text(cmd.out_dir / "validation.txt", report.to_text());
    write_text(cmd.out_dir / "validation.json", report.to_json().dump(2) + "\n");
    out << "validation fg_iou " << std::fixed << std::setprecision(6) << report.fg_iou << '\n';
  }
}

LabelVolume postprocess(const PredictionVolume& probs, double t, const std::optional<ZFilterSpec>& zf,
                        ZFilterMode mode) {
  if (!zf) return threshold(probs, t);
  if (mode == ZFilterMode::binary) return zfilter(threshold(probs, t), *zf);
  return threshold(zfilter(probs, *zf), t);
}

void run_predict(const PredictCommand& cmd, std::ostream& out) {
  if (!(cmd.threshold >= 0.0 && cmd.threshold <= 1.0)) fail(ErrorCategory::config, "threshold must lie in [0, 1]");
  if (cmd.zfilter) cmd.zfilter->validate();
  const UNet model = load_checkpoint(cmd.checkpoint).model;
  StackLayout layout;
  layout.read_masks = false;
  const VolumeStack stack = load_stack(cmd.stack_root, layout);
  PredictOptions po;
  po.workers = cmd.workers;
  const auto probs = predict_volume(model, stack.images, po);
  const auto masks = postprocess(probs, cmd.threshold, cmd.zfilter, cmd.zfilter_mode);
  write_probability_slices(cmd.out_dir / "probs", probs, cmd.exact, stack.slice_ids);
  write_mask_slices(cmd.out_dir / "masks", masks, stack.slice_ids);
  write_stack_meta(cmd.out_dir / kStackMetaFile, {stack.height(), stack.width(), stack.depth(), stack.voxel_nm});
  std::int64_t fg = 0;
  for (auto v : masks.data) fg += v;
  out << "slices " << stack.depth() << '\n';
  out << "threshold " << cmd.threshold << '\n';
  out << "zfilter " << (cmd.zfilter ? std::to_string(cmd.zfilter->depth) : std::string("off")) << '\n';
  out << "foreground_voxels " << fg << '\n';
}

EvalReport run_eval(const EvalCommand& cmd, std::ostream& out) {
  if (!(cmd.threshold >= 0.0 && cmd.threshold <= 1.0)) fail(ErrorCategory::config, "threshold must lie in [0, 1]");
  const auto probs = read_probability_slices(cmd.pred_dir / "probs");
  const auto truth = read_mask_slices(cmd.truth_root / "masks");
  if (!probs.same_shape(truth))
    fail(ErrorCategory::shape, "prediction shape " + probs.shape_string() + " does not match ground truth shape " +
                                   truth.shape_string());
  std::optional<LabelVolume> binary;
  if (cmd.from_masks) {
    binary = read_mask_slices(cmd.pred_dir / "masks");
    if (!binary->same_shape(truth))
      fail(ErrorCategory::shape, "prediction mask shape " + binary->shape_string() +
                                     " does not match ground truth shape " + truth.shape_string());
  }
  const auto report = evaluate(probs, truth, cmd.threshold, cmd.pr_thresholds, binary ? &*binary : nullptr);
  out << report.to_text();
  if (cmd.json_file) write_text(*cmd.json_file, report.to_json().dump(2) + "\n");
  return report;
}

BenchReport run_bench_command(const BenchCommand& cmd, std::ostream& out) {
  cmd.options.validate();
  if (cmd.stack_root.has_value() == cmd.synthetic.has_value())
    fail(ErrorCategory::config, "bench needs exactly one of a stack root or a synthetic size");
  const UNet model = load_or_default(cmd.checkpoint, cmd.seed);
  ImageVolume images;
  if (cmd.stack_root) {
    StackLayout layout;
    layout.read_masks = false;
    images = load_stack(*cmd.stack_root, layout).images;
  } else {
    const auto& s = *cmd.synthetic;
    if (s.size() != 3 || s[0] < 1 || s[1] < 1 || s[2] < 1)
      fail(ErrorCategory::config, "synthetic size must be three positive extents DxHxW");
    images = make_synthetic_fixture(s[0], s[1], s[2], BlobSpec{}, cmd.seed).images;
  }
  const auto report = run_bench(model, images, cmd.options);
  out << report.to_text();
  if (cmd.json_file) write_text(*cmd.json_file, report.to_json().dump(2) + "\n");
  return report;
}

std::string InspectReport::to_text() const {
  std::ostringstream os;
  os << "encoder " << encoder << '\n';
  os << "decoder " << decoder << '\n';
  os << "total " << total << '\n';
  os << "upsampling " << upsampling << '\n';
  os << "transpose_convolutions " << transpose_convolutions << '\n';
  if (utilization)
    os << "utilization " << format_percent(utilization->fraction()) << " (" << utilization->active << "/"
       << utilization->total << " filters active)\n";
  return os.str();
}

nlohmann::json InspectReport::to_json() const {
  nlohmann::json j{{"encoder", encoder},
                   {"decoder", decoder},
                   {"total", total},
                   {"upsampling", upsampling},
                   {"transpose_convolutions", transpose_convolutions}};
  if (utilization)
    j["utilization"] = {{"fraction", utilization->fraction()},
                        {"active", utilization->active},
                        {"total", utilization->total},
                        {"dead_per_layer", utilization->dead_per_layer}};
  else
    j["utilization"] = nullptr;
  return j;
}

InspectReport run_inspect(const InspectCommand& cmd, std::ostream& out) {
  if (cmd.max_probe_slices < 1) fail(ErrorCategory::config, "probe slice count must be at least 1");
  const UNet model = load_or_default(cmd.checkpoint, 1);
  InspectReport r;
  r.encoder = model.param_count(ParamScope::encoder);
  r.decoder = model.param_count(ParamScope::decoder);
  r.total = model.param_count(ParamScope::total);
  if (model.config() == UNetConfig{} && r.encoder != kEncoderParameterBudget)
    fail(ErrorCategory::value, "default encoder has " + std::to_string(r.encoder) + " parameters, expected " +
                                   std::to_string(kEncoderParameterBudget));
  for (const auto& l : model.layers()) {
    if (l.kind == LayerKind::upsample_bilinear2x) r.upsampling += l.parameters;
    // A learned layer that enlarges its input is a transpose convolution.
    if (l.parameters > 0 && l.out_size > l.in_size) ++r.transpose_convolutions;
    if (cmd.list_layers)
      out << layer_kind_name(l.kind) << ' ' << l.name << ' ' << l.in_channels << "->" << l.out_channels << ' '
          << l.in_size << "->" << l.out_size << ' ' << l.parameters << '\n';
  }
  if (cmd.probe_root) {
    StackLayout layout;
    layout.read_masks = false;
    const VolumeStack stack = load_stack(*cmd.probe_root, layout);
    const int n = std::min(cmd.max_probe_slices, stack.depth());
    const int tile = model.config().input_size;
    std::vector<Tensor> probes;
    for (int i = 0; i < n; ++i) {
      const int z = n == 1 ? 0 : static_cast<int>(static_cast<std::int64_t>(i) * (stack.depth() - 1) / (n - 1));
      for (const auto& o : plan_tiles(stack.height(), stack.width(), tile))
        probes.push_back(extract_tile(stack.images.slice(z), stack.height(), stack.width(), o, tile));
    }
    r.utilization = utilization(model, probes);
  }
  out << r.to_text();
  if (cmd.json_file) write_text(*cmd.json_file, r.to_json().dump(2) + "\n");
  return r;
}

void run_synth(const SynthCommand& cmd, std::ostream& out) {
  const auto stack = make_synthetic_fixture(cmd.slices, cmd.height, cmd.width, cmd.blobs, cmd.seed);
  write_stack(cmd.out_root, stack);
  std::int64_t fg = 0;
  for (auto v : stack.labels->data) fg += v;
  out << "wrote " << stack.images.shape_string() << " stack to " << cmd.out_root.string() << '\n';
  out << "foreground_fraction " << std::fixed << std::setprecision(4)
      << static_cast<double>(fg) / static_cast<double>(stack.labels->data.size()) << '\n';
}

}  // namespace mito
