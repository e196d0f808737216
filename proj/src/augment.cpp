#include "mitonet/augment.hpp"

#include <numbers>

namespace mito {

PatchGeometry draw_patch_geometry(int depth, int height, int width, const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  if (depth < 1 || height < 1 || width < 1) fail(ErrorCategory::shape, "cannot sample a patch from an empty stack");
  PatchGeometry g;
  g.slice = static_cast<int>(rng.below(static_cast<std::uint64_t>(depth)));
  const double m = std::min(height, width);
  g.drawn_side = rng.uniform(spec.min_coverage * m, m);
  g.angle = spec.rotate ? rng.uniform(0.0, 2.0 * std::numbers::pi) : 0.0;
  const double spread = std::abs(std::cos(g.angle)) + std::abs(std::sin(g.angle));

  // The rotated square is inside the (axis-aligned) footprint iff its
  // bounding box is, which fixes the admissible centre range per axis.
  g.side = g.drawn_side;
  double half = 0.5 * g.side * spread;
  if (2.0 * half > m) {
    g.side = m / spread;
    half = 0.5 * m;
    g.shrunk = true;
  }
  const double lo_x = -0.5 + half, hi_x = width - 0.5 - half;
  const double lo_y = -0.5 + half, hi_y = height - 0.5 - half;
  g.center_x = rng.uniform(lo_x, std::max(lo_x, hi_x));
  g.center_y = rng.uniform(lo_y, std::max(lo_y, hi_y));
  g.flip_x = rng.bernoulli(spec.flip_probability);
  g.flip_y = rng.bernoulli(spec.flip_probability);
  return g;
}

Patch render_patch(const VolumeStack& stack, const PatchGeometry& g, int out) {
  if (!stack.labels) fail(ErrorCategory::value, "patch sampling needs a labelled stack");
  const auto img = stack.images.slice(g.slice);
  const auto lab = stack.labels->slice(g.slice);
  const int w = stack.width();
  return render_patch(
      g, stack.height(), w, out,
      [&](int y, int x) { return static_cast<double>(img[static_cast<std::size_t>(y) * w + x]); },
      [&](int y, int x) { return lab[static_cast<std::size_t>(y) * w + x]; });
}

Patch sample_patch(const VolumeStack& stack, const AugmentSpec& spec, Rng& rng) {
  if (!stack.labels) fail(ErrorCategory::value, "patch sampling needs a labelled stack");
  const auto g = draw_patch_geometry(stack.depth(), stack.height(), stack.width(), spec, rng);
  return render_patch(stack, g, spec.output_size);
}

PatchSampler::PatchSampler(const VolumeStack& stack, AugmentSpec spec) : stack_(stack), spec_(spec) {
  spec_.validate();
  if (!stack_.labels) fail(ErrorCategory::value, "training requires a stack with masks");
}

Batch PatchSampler::next(int batch_size, Rng& rng) {
  const int s = spec_.output_size;
  Batch b{Tensor({batch_size, 1, s, s}), Tensor({batch_size, 1, s, s})};
  const std::size_t plane = static_cast<std::size_t>(s) * s;
  for (int i = 0; i < batch_size; ++i) {
    const auto p = sample_patch(stack_, spec_, rng);
    std::copy(p.image.data.begin(), p.image.data.end(), b.images.data() + i * plane);
    std::transform(p.mask.data.begin(), p.mask.data.end(), b.masks.data() + i * plane,
                   [](std::uint8_t v) { return static_cast<float>(v); });
  }
  return b;
}

}  // namespace mito
