#include "mitonet/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "mitonet/predict.hpp"

namespace mito {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json timing_json(const TimingStat& t) {
  return {{"mean", t.mean}, {"stddev", t.stddev}, {"count", t.count}};
}

}  // namespace

TimingStat summarize(const std::vector<double>& samples) {
  TimingStat t;
  t.count = samples.size();
  if (samples.empty()) return t;
  double sum = 0.0;
  for (double s : samples) sum += s;
  t.mean = sum / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double s : samples) ss += (s - t.mean) * (s - t.mean);
    t.stddev = std::sqrt(ss / static_cast<double>(samples.size() - 1));
  }
  return t;
}

double BenchReport::consistency() const {
  if (stack_seconds.mean <= 0.0) return 0.0;
  return (tiles_per_stack * slice_seconds.mean / workers + zfilter_seconds.mean) / stack_seconds.mean;
}

std::string hardware_descriptor() {
  std::string model = "unknown cpu";
  std::ifstream cpuinfo("/proc/cpuinfo");
  for (std::string line; std::getline(cpuinfo, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads";
}

BenchReport run_bench(const UNet& model, const ImageVolume& images, const BenchOptions& options) {
  options.validate();
  if (images.depth < 1) fail(ErrorCategory::shape, "cannot benchmark an empty stack");
  BenchReport r;
  r.tile_size = model.config().input_size;
  r.tiles_per_stack = static_cast<int>(plan_tiles(images.height, images.width, r.tile_size).size()) * images.depth;
  r.pixels_per_stack = static_cast<std::int64_t>(images.voxel_count());
  r.runs = options.runs;
  r.warmup = options.warmup;
  r.workers = options.workers;
  r.zfilter = options.zfilter.has_value();
  r.hardware = hardware_descriptor();
  r.timer_boundary = r.zfilter ? "tiling + forward + sigmoid + stitching + threshold + z-filter"
                               : "tiling + forward + sigmoid + stitching";

  std::vector<double> tiles, stacks, zfilters;
  for (int i = 0; i < options.warmup + options.runs; ++i) {
    const bool timed = i >= options.warmup;
    std::vector<double> run_tiles;
    PredictOptions po;
    po.workers = options.workers;
    po.on_tile = [&](double s) { run_tiles.push_back(s); };
    const auto t0 = std::chrono::steady_clock::now();
    auto probs = predict_volume(model, images, po);
    double zf = 0.0;
    if (options.zfilter) {
      const auto tz = std::chrono::steady_clock::now();
      auto masks = zfilter(threshold(probs, options.threshold), *options.zfilter);
      zf = seconds_since(tz);
    }
    const double total = seconds_since(t0);
    if (!timed) continue;
    stacks.push_back(total);
    zfilters.push_back(zf);
    tiles.insert(tiles.end(), run_tiles.begin(), run_tiles.end());
  }
  r.slice_seconds = summarize(tiles);
  r.stack_seconds = summarize(stacks);
  r.zfilter_seconds = summarize(zfilters);
  r.throughput_mps = static_cast<double>(r.pixels_per_stack) / r.stack_seconds.mean / 1e6;
  return r;
}

std::string BenchReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "hardware " << hardware << '\n';
  os << "workers " << workers << '\n';
  os << "runs " << runs << " (warmup " << warmup << ")\n";
  os << "timer " << timer_boundary << '\n';
  os << "slice_" << tile_size << "x" << tile_size << "_seconds " << slice_seconds.mean << " +- "
     << slice_seconds.stddev << '\n';
  os << "stack_seconds " << stack_seconds.mean << " +- " << stack_seconds.stddev << '\n';
  if (zfilter) os << "zfilter_seconds " << zfilter_seconds.mean << " +- " << zfilter_seconds.stddev << '\n';
  os << "pixels_per_stack " << pixels_per_stack << '\n';
  os << "tiles_per_stack " << tiles_per_stack << '\n';
  os << std::setprecision(3);
  os << "throughput_mps " << throughput_mps << '\n';
  os << "consistency " << consistency() << '\n';
  os << "reference_mps " << kAcquisitionRateMps << " (single-beam SEM acquisition)\n";
  os << "verdict " << (realtime() ? "PASS real-time" : "FAIL below acquisition rate") << '\n';
  return os.str();
}

nlohmann::json BenchReport::to_json() const {
  return {{"slice_seconds", timing_json(slice_seconds)},
          {"stack_seconds", timing_json(stack_seconds)},
          {"zfilter_seconds", timing_json(zfilter_seconds)},
          {"throughput_mps", throughput_mps},
          {"pixels_per_stack", pixels_per_stack},
          {"tiles_per_stack", tiles_per_stack},
          {"tile_size", tile_size},
          {"runs", runs},
          {"warmup", warmup},
          {"workers", workers},
          {"zfilter", zfilter},
          {"consistency", consistency()},
          {"reference_mps", kAcquisitionRateMps},
          {"realtime", realtime()},
          {"hardware", hardware},
          {"timer_boundary", timer_boundary}};
}

}  // namespace mito
