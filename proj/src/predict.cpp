#include "mitonet/predict.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

namespace mito {
namespace {

std::vector<int> axis_origins(int extent, int tile) {
  if (extent <= tile) return {0};
  std::vector<int> out;
  for (int p = 0; p + tile < extent; p += tile) out.push_back(p);
  out.push_back(extent - tile);
  return out;
}

}  // namespace

std::vector<TileOrigin> plan_tiles(int height, int width, int tile) {
  if (height < 1 || width < 1 || tile < 1) fail(ErrorCategory::shape, "tiling needs positive extents");
  std::vector<TileOrigin> out;
  for (int y : axis_origins(height, tile))
    for (int x : axis_origins(width, tile)) out.push_back({y, x});
  return out;
}

Tensor extract_tile(std::span<const float> slice, int height, int width, TileOrigin origin, int tile) {
  Tensor input({1, 1, tile, tile});
  for (int y = 0; y < tile; ++y) {
    const int sy = std::min(origin.y + y, height - 1);
    for (int x = 0; x < tile; ++x) {
      const int sx = std::min(origin.x + x, width - 1);
      input.at(0, 0, y, x) = slice[static_cast<std::size_t>(sy) * width + sx];
    }
  }
  return input;
}

Raster<float> predict_slice(const UNet& model, std::span<const float> slice, int height, int width,
                            const std::function<void(double)>& on_tile) {
  if (slice.size() != static_cast<std::size_t>(height) * width)
    fail(ErrorCategory::shape, "slice buffer does not match its extents");
  const int tile = model.config().input_size;
  Raster<float> out(height, width);
  for (const auto& o : plan_tiles(height, width, tile)) {
    const Tensor input = extract_tile(slice, height, width, o, tile);
    const auto start = std::chrono::steady_clock::now();
    const auto logits = model.forward(input);
    if (on_tile) on_tile(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    const int ny = std::min(tile, height - o.y), nx = std::min(tile, width - o.x);
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) out.at(o.y + y, o.x + x) = sigmoid(logits.at(0, 0, y, x));
  }
  return out;
}

PredictionVolume predict_volume(const UNet& model, const ImageVolume& images, const PredictOptions& options) {
  if (images.depth < 1) fail(ErrorCategory::shape, "cannot predict an empty stack");
  if (options.workers < 1) fail(ErrorCategory::config, "worker count must be at least 1");
  PredictionVolume out(images.depth, images.height, images.width);
  std::mutex lock;
  std::function<void(double)> on_tile;
  if (options.on_tile)
    on_tile = [&](double s) {
      std::lock_guard g(lock);
      options.on_tile(s);
    };
  auto run_slice = [&](int z) {
    const auto r = predict_slice(model, images.slice(z), images.height, images.width, on_tile);
    std::copy(r.data.begin(), r.data.end(), out.slice(z).begin());
  };
  const int workers = std::min(options.workers, images.depth);
  if (workers == 1) {
    for (int z = 0; z < images.depth; ++z) run_slice(z);
    return out;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        try {
          for (int z = next++; z < images.depth; z = next++) run_slice(z);
        } catch (...) {
          std::lock_guard g(lock);
          if (!error) error = std::current_exception();
        }
      });
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace mito
