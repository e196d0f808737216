#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mitonet/unet.hpp"
#include "mitonet/volume.hpp"

namespace mito {

/// Top-left corner of a square tile.
struct TileOrigin {
  int y = 0;
  int x = 0;
  friend bool operator==(const TileOrigin&, const TileOrigin&) = default;
};

/// Tiles at stride `tile` along each axis, the last one anchored to the
/// bottom/right edge. Axes shorter than the tile get a single tile at 0
/// (the input is edge-replicated to fill it). Row-major order; where tiles
/// overlap, the later tile owns the pixel.
std::vector<TileOrigin> plan_tiles(int height, int width, int tile);

/// 1 x 1 x tile x tile model input at `origin`, edge-replicated past the
/// slice border.
Tensor extract_tile(std::span<const float> slice, int height, int width, TileOrigin origin, int tile);

struct PredictOptions {
  int workers = 1;
  /// Receives the wall time of every tile forward pass. Invoked under a
  /// lock, possibly from worker threads.
  std::function<void(double seconds)> on_tile;
};

/// Foreground probabilities for one slice of any size.
Raster<float> predict_slice(const UNet& model, std::span<const float> slice, int height, int width,
                            const std::function<void(double)>& on_tile = {});

/// Per-slice inference over a stack. Slices are independent, so the result
/// does not depend on the worker count.
PredictionVolume predict_volume(const UNet& model, const ImageVolume& images, const PredictOptions& options = {});

}  // namespace mito
