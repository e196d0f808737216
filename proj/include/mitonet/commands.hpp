#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mitonet/bench.hpp"
#include "mitonet/metrics.hpp"
#include "mitonet/synthetic.hpp"

namespace mito {

/// Entry points behind the `mitonet` subcommands. Each writes a human
/// report to `out` and its artifacts to disk, and throws mito::Error on
/// failure.

struct TrainCommand {
  std::optional<std::filesystem::path> config_file;
  std::vector<std::string> overrides;  // key=value
  std::filesystem::path data_root;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> validation_root;  // labelled stack scored after training
};

/// Files under out_dir: config.txt, loss.log ("<step> <loss>" per line),
/// step-NNNNNNNN.ckpt at the configured cadence, final.ckpt, and
/// validation.{txt,json} when a validation stack is given.
void run_train(const TrainCommand& cmd, std::ostream& out);

inline constexpr const char* kLossLog = "loss.log";
inline constexpr const char* kFinalCheckpoint = "final.ckpt";

std::string format_loss_line(std::int64_t step, double loss);

enum class ZFilterMode { binary, probability };

struct PredictCommand {
  std::filesystem::path checkpoint;
  std::filesystem::path stack_root;
  std::filesystem::path out_dir;
  double threshold = 0.5;
  std::optional<ZFilterSpec> zfilter;
  ZFilterMode zfilter_mode = ZFilterMode::binary;
  bool exact = false;  // float32 probabilities instead of 8-bit
  int workers = 1;
};

/// Writes out_dir/probs/NNNN.{pgm,pfm}, out_dir/masks/NNNN.pgm (names
/// mirror the input slices) and out_dir/stack.meta.
void run_predict(const PredictCommand& cmd, std::ostream& out);

/// Post-processing shared by predict and the in-process validation: binary
/// mode filters the thresholded masks, probability mode filters the
/// probabilities and then thresholds.
LabelVolume postprocess(const PredictionVolume& probs, double threshold, const std::optional<ZFilterSpec>& zfilter,
                        ZFilterMode mode);

struct EvalCommand {
  std::filesystem::path pred_dir;    // output directory of predict
  std::filesystem::path truth_root;  // stack root with masks/
  double threshold = 0.5;
  bool from_masks = false;  // score pred_dir/masks instead of re-thresholding
  int pr_thresholds = 256;
  std::optional<std::filesystem::path> json_file;
};

EvalReport run_eval(const EvalCommand& cmd, std::ostream& out);

struct BenchCommand {
  std::optional<std::filesystem::path> checkpoint;  // default model when absent
  std::optional<std::filesystem::path> stack_root;
  std::optional<std::vector<int>> synthetic;  // depth, height, width
  std::uint64_t seed = 1;
  BenchOptions options;
  std::optional<std::filesystem::path> json_file;
};

BenchReport run_bench_command(const BenchCommand& cmd, std::ostream& out);

struct InspectCommand {
  std::optional<std::filesystem::path> checkpoint;  // default model when absent
  std::optional<std::filesystem::path> probe_root;
  int max_probe_slices = 8;
  bool list_layers = false;
  std::optional<std::filesystem::path> json_file;
};

struct InspectReport {
  std::int64_t encoder = 0, decoder = 0, total = 0;
  std::int64_t upsampling = 0;
  int transpose_convolutions = 0;
  std::optional<Utilization> utilization;

  std::string to_text() const;
  nlohmann::json to_json() const;
};

InspectReport run_inspect(const InspectCommand& cmd, std::ostream& out);

struct SynthCommand {
  std::filesystem::path out_root;
  int slices = 16, height = 512, width = 512;
  std::uint64_t seed = 1;
  BlobSpec blobs;
};

void run_synth(const SynthCommand& cmd, std::ostream& out);

/// Utilization formatted as a percentage with one decimal, e.g. "99.7%".
std::string format_percent(double fraction);

}  // namespace mito
