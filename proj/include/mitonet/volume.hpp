#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mitonet/error.hpp"

namespace mito {

/// Single 2D plane, row-major.
template <class T>
struct Raster {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Raster() = default;
  Raster(int h, int w, T fill = T{}) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  T& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// z-ordered stack of equally sized planes stored contiguously.
template <class T>
struct Volume {
  int depth = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Volume() = default;
  Volume(int d, int h, int w, T fill = T{})
      : depth(d), height(h), width(w), data(static_cast<std::size_t>(d) * h * w, fill) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t voxel_count() const { return data.size(); }

  std::span<T> slice(int z) { return {data.data() + z * plane_size(), plane_size()}; }
  std::span<const T> slice(int z) const { return {data.data() + z * plane_size(), plane_size()}; }

  T& at(int z, int y, int x) { return data[(static_cast<std::size_t>(z) * height + y) * width + x]; }
  const T& at(int z, int y, int x) const { return data[(static_cast<std::size_t>(z) * height + y) * width + x]; }

  bool same_shape(const Volume<T>& o) const { return depth == o.depth && height == o.height && width == o.width; }
  template <class U>
  bool same_shape(const Volume<U>& o) const {
    return depth == o.depth && height == o.height && width == o.width;
  }

  std::string shape_string() const {
    return std::to_string(depth) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }

  friend bool operator==(const Volume&, const Volume&) = default;
};

/// Grayscale intensities in [0, 1].
using ImageVolume = Volume<float>;
/// Binary masks, values in {0, 1}.
using LabelVolume = Volume<std::uint8_t>;
/// Per-voxel foreground probability in [0, 1].
using PredictionVolume = Volume<float>;

struct VoxelSize {
  double x = 1.0, y = 1.0, z = 1.0;  // nm
  friend bool operator==(const VoxelSize&, const VoxelSize&) = default;
};

struct VolumeStack {
  ImageVolume images;
  std::optional<LabelVolume> labels;
  VoxelSize voxel_nm;
  /// File index of each slice; empty means 0..depth-1.
  std::vector<int> slice_ids;

  int slice_id(int z) const { return slice_ids.empty() ? z : slice_ids[static_cast<std::size_t>(z)]; }
  int depth() const { return images.depth; }
  int height() const { return images.height; }
  int width() const { return images.width; }

  void validate() const {
    if (images.data.size() != images.plane_size() * static_cast<std::size_t>(images.depth))
      fail(ErrorCategory::shape, "image volume storage does not match its extents");
    if (!slice_ids.empty() && slice_ids.size() != static_cast<std::size_t>(images.depth))
      fail(ErrorCategory::shape, "slice index list does not match stack depth");
    if (!labels) return;
    if (!labels->same_shape(images))
      fail(ErrorCategory::shape, "label volume " + labels->shape_string() + " does not match images " +
                                     images.shape_string());
    for (auto v : labels->data)
      if (v > 1) fail(ErrorCategory::value, "label volume contains values outside {0,1}");
  }
};

inline LabelVolume threshold(const PredictionVolume& probs, double t) {
  LabelVolume out(probs.depth, probs.height, probs.width);
  for (std::size_t i = 0; i < probs.data.size(); ++i) out.data[i] = probs.data[i] >= t ? 1 : 0;
  return out;
}

}  // namespace mito
