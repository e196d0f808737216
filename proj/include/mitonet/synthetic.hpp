#pragma once

#include <cstdint>
#include <vector>

#include "mitonet/random.hpp"
#include "mitonet/volume.hpp"

namespace mito {

/// Elliptical cross-section of one synthetic organelle, present on slices
/// [z_begin, z_end).
struct Ellipse {
  double center_x = 0.0, center_y = 0.0;
  double semi_x = 1.0, semi_y = 1.0;  // semi-axes before rotation
  double angle = 0.0;                 // radians
  int z_begin = 0, z_end = 1;

  /// Membership of the point (x, y) in pixel-centre coordinates.
  bool contains(double x, double y) const;
  /// Squared normalized radius; <= 1 inside.
  double radius2(double x, double y) const;
};

struct BlobSpec {
  int count = 10;
  double min_semi_axis = 10.0;
  double max_semi_axis = 26.0;
  double max_aspect = 1.8;
  int min_persistence = 3;  // slices
  int max_persistence = 8;
};

/// Draws blob placements for an n x height x width fixture.
std::vector<Ellipse> random_ellipses(int slices, int height, int width, const BlobSpec& spec, Rng& rng);

/// Renders dark membrane-bounded ellipses on a textured bright background.
/// Labels are exactly the union of ellipse supports. Intensities are
/// quantized to multiples of 1/255 so an 8-bit round trip is lossless.
VolumeStack render_fixture(int slices, int height, int width, const std::vector<Ellipse>& ellipses,
                           std::uint64_t seed);

/// Deterministic labelled stand-in for an EM stack. Every blob persists for
/// at least min(min_persistence, slices) consecutive slices.
VolumeStack make_synthetic_fixture(int slices, int height, int width, const BlobSpec& spec, std::uint64_t seed);

}  // namespace mito
