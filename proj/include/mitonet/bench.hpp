#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mitonet/unet.hpp"
#include "mitonet/volume.hpp"
#include "mitonet/zfilter.hpp"

namespace mito {

/// Single-beam SEM acquisition rate used as the real-time reference.
inline constexpr double kAcquisitionRateMps = 11.0;

struct BenchOptions {
  int runs = 3;
  int warmup = 1;
  int workers = 1;
  std::optional<ZFilterSpec> zfilter;  // timed when set
  double threshold = 0.5;

  void validate() const {
    if (runs < 3) fail(ErrorCategory::config, "benchmark needs at least 3 timed runs, got " + std::to_string(runs));
    if (warmup < 1) fail(ErrorCategory::config, "benchmark needs at least 1 warmup run");
    if (workers < 1) fail(ErrorCategory::config, "worker count must be at least 1");
  }
};

struct TimingStat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  std::size_t count = 0;
};

TimingStat summarize(const std::vector<double>& samples);

struct BenchReport {
  TimingStat slice_seconds;    // one model-sized tile (e.g. 512x512)
  TimingStat stack_seconds;    // whole stack, tiling + stitching (+ z-filter)
  TimingStat zfilter_seconds;  // zero when z-filtering is off
  double throughput_mps = 0.0;
  std::int64_t pixels_per_stack = 0;
  int tiles_per_stack = 0;
  int tile_size = 0;
  int runs = 0;
  int warmup = 0;
  int workers = 1;
  bool zfilter = false;
  std::string hardware;
  std::string timer_boundary;

  /// (tiles * mean tile time + mean z-filter time) / mean stack time.
  double consistency() const;
  bool realtime() const { return throughput_mps >= kAcquisitionRateMps; }

  std::string to_text() const;
  nlohmann::json to_json() const;
};

std::string hardware_descriptor();

/// Times inference on an in-memory stack; disk I/O is outside the timer.
BenchReport run_bench(const UNet& model, const ImageVolume& images, const BenchOptions& options);

}  // namespace mito
