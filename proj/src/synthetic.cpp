#include "mitonet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mitonet/raster_io.hpp"

namespace mito {

double Ellipse::radius2(double x, double y) const {
  const double dx = x - center_x, dy = y - center_y;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = (dx * c + dy * s) / semi_x;
  const double v = (-dx * s + dy * c) / semi_y;
  return u * u + v * v;
}

bool Ellipse::contains(double x, double y) const { return radius2(x, y) <= 1.0; }

std::vector<Ellipse> random_ellipses(int slices, int height, int width, const BlobSpec& spec, Rng& rng) {
  if (spec.count < 0 || spec.min_semi_axis <= 0.0 || spec.max_semi_axis < spec.min_semi_axis ||
      spec.max_aspect < 1.0 || spec.min_persistence < 1 || spec.max_persistence < spec.min_persistence)
    fail(ErrorCategory::config, "invalid blob specification");
  std::vector<Ellipse> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    Ellipse e;
    e.semi_x = rng.uniform(spec.min_semi_axis, spec.max_semi_axis);
    e.semi_y = e.semi_x / rng.uniform(1.0, spec.max_aspect);
    e.angle = rng.uniform(0.0, std::numbers::pi);
    const double margin = e.semi_x + 2.0;
    e.center_x = width > 2 * margin ? rng.uniform(margin, width - margin) : 0.5 * (width - 1);
    e.center_y = height > 2 * margin ? rng.uniform(margin, height - margin) : 0.5 * (height - 1);
    const int span = spec.max_persistence - spec.min_persistence + 1;
    const int len = std::min(slices, spec.min_persistence + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))));
    e.z_begin = static_cast<int>(rng.below(static_cast<std::uint64_t>(slices - len + 1)));
    e.z_end = e.z_begin + len;
    out.push_back(e);
  }
  return out;
}

VolumeStack render_fixture(int slices, int height, int width, const std::vector<Ellipse>& ellipses,
                           std::uint64_t seed) {
  if (slices < 1 || height < 1 || width < 1) fail(ErrorCategory::shape, "fixture extents must be positive");
  Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
  VolumeStack stack;
  stack.images = ImageVolume(slices, height, width);
  stack.labels = LabelVolume(slices, height, width);
  stack.voxel_nm = {5.0, 5.0, 5.0};

  // Smooth background texture: a few random plane waves shared by all
  // slices with a slow drift along z.
  struct Wave {
    double kx, ky, phase, drift;
  };
  std::vector<Wave> waves(6);
  for (auto& w : waves) {
    const double freq = rng.uniform(0.02, 0.09);
    const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
    w = {freq * std::cos(dir), freq * std::sin(dir), rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(-0.3, 0.3)};
  }

  for (int z = 0; z < slices; ++z) {
    std::vector<const Ellipse*> live;
    for (const auto& e : ellipses)
      if (z >= e.z_begin && z < e.z_end) live.push_back(&e);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double tex = 0.0;
        for (const auto& w : waves) tex += std::sin(w.kx * x + w.ky * y + w.phase + w.drift * z);
        double v = 0.64 + 0.05 * tex / static_cast<double>(waves.size());
        double r2 = 2.0;
        for (const auto* e : live) r2 = std::min(r2, e->radius2(x, y));
        const bool inside = r2 <= 1.0;
        if (inside) v = r2 > 0.72 ? 0.16 : 0.30 + 0.03 * std::sin(0.4 * x + 0.3 * y);
        v += 0.03 * rng.normal();
        stack.images.at(z, y, x) = static_cast<float>(quantize_unit(static_cast<float>(v))) / 255.0f;
        stack.labels->at(z, y, x) = inside ? 1 : 0;
      }
    }
  }
  return stack;
}

VolumeStack make_synthetic_fixture(int slices, int height, int width, const BlobSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const auto ellipses = random_ellipses(slices, height, width, spec, rng);
  return render_fixture(slices, height, width, ellipses, seed);
}

}  // namespace mito
