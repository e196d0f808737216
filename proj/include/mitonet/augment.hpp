#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mitonet/random.hpp"
#include "mitonet/train.hpp"
#include "mitonet/volume.hpp"

namespace mito {

struct AugmentSpec {
  /// Patch side is drawn uniformly from [min_coverage * m, m], m being the
  /// lesser slice dimension.
  double min_coverage = 0.6;
  double flip_probability = 0.5;
  bool rotate = true;
  int output_size = 512;

  void validate() const {
    if (!(min_coverage > 0.0) || min_coverage > 1.0)
      fail(ErrorCategory::config, "coverage fraction must lie in (0, 1]");
    if (!(flip_probability >= 0.0) || flip_probability > 1.0)
      fail(ErrorCategory::config, "flip probability must lie in [0, 1]");
    if (output_size < 1) fail(ErrorCategory::config, "patch output size must be positive");
  }
};

/// Placement of one rotated square window. Coordinates are in source
/// pixels with pixel (y, x) centred at (y, x); the slice footprint is
/// [-0.5, W-0.5] x [-0.5, H-0.5].
struct PatchGeometry {
  int slice = 0;
  double drawn_side = 0.0;  // side length before any fallback shrink
  double side = 0.0;        // side length actually used
  double angle = 0.0;       // radians
  double center_x = 0.0;
  double center_y = 0.0;
  bool flip_x = false;
  bool flip_y = false;
  bool shrunk = false;
};

struct Patch {
  Raster<float> image;
  Raster<std::uint8_t> mask;
  PatchGeometry geometry;
};

/// Draws slice, side, angle, centre and flips. The centre is drawn
/// uniformly over every position at which the rotated square lies inside
/// the slice footprint; when no such position exists the side shrinks to
/// the largest admissible value.
PatchGeometry draw_patch_geometry(int depth, int height, int width, const AugmentSpec& spec, Rng& rng);

namespace detail {

/// Maps every output pixel of a patch to its source position and calls
/// `emit(out_y, out_x, src_y, src_x)`.
template <class Emit>
void for_each_patch_sample(const PatchGeometry& g, int out, Emit&& emit) {
  const double c = std::cos(g.angle), s = std::sin(g.angle);
  for (int i = 0; i < out; ++i) {
    const int gi = g.flip_y ? out - 1 - i : i;
    const double v = ((gi + 0.5) / out - 0.5) * g.side;
    for (int j = 0; j < out; ++j) {
      const int gj = g.flip_x ? out - 1 - j : j;
      const double u = ((gj + 0.5) / out - 0.5) * g.side;
      emit(i, j, g.center_y + u * s + v * c, g.center_x + u * c - v * s);
    }
  }
}

/// Bilinear sample with coordinates clamped to pixel centres. Only reads
/// indices inside [0, height) x [0, width).
template <class Fetch>
double sample_bilinear(Fetch&& fetch, int height, int width, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, height - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const double fy = y - y0, fx = x - x0;
  const double a = fetch(y0, x0), b = fetch(y0, x1), cc = fetch(y1, x0), d = fetch(y1, x1);
  const double top = a + fx * (b - a);
  const double bottom = cc + fx * (d - cc);
  return top + fy * (bottom - top);
}

template <class Fetch>
auto sample_nearest(Fetch&& fetch, int height, int width, double y, double x) {
  const int yi = std::clamp(static_cast<int>(std::floor(y + 0.5)), 0, height - 1);
  const int xi = std::clamp(static_cast<int>(std::floor(x + 0.5)), 0, width - 1);
  return fetch(yi, xi);
}

}  // namespace detail

/// Resamples the window to out x out: bilinear for the image,
/// nearest-neighbour for the mask (so it stays binary).
template <class ImageFetch, class MaskFetch>
Patch render_patch(const PatchGeometry& g, int height, int width, int out, ImageFetch&& image, MaskFetch&& mask) {
  Patch p{Raster<float>(out, out), Raster<std::uint8_t>(out, out), g};
  detail::for_each_patch_sample(g, out, [&](int i, int j, double y, double x) {
    p.image.at(i, j) = static_cast<float>(detail::sample_bilinear(image, height, width, y, x));
    p.mask.at(i, j) = detail::sample_nearest(mask, height, width, y, x);
  });
  return p;
}

Patch render_patch(const VolumeStack& stack, const PatchGeometry& g, int out);

/// One augmented training pair drawn from a labelled stack.
Patch sample_patch(const VolumeStack& stack, const AugmentSpec& spec, Rng& rng);

/// BatchSource backed by sample_patch.
class PatchSampler : public BatchSource {
 public:
  PatchSampler(const VolumeStack& stack, AugmentSpec spec);
  Batch next(int batch_size, Rng& rng) override;

 private:
  const VolumeStack& stack_;
  AugmentSpec spec_;
};

}  // namespace mito
