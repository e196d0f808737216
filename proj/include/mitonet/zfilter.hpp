#pragma once

#include <algorithm>
#include <deque>
#include <span>
#include <vector>

#include "mitonet/error.hpp"
#include "mitonet/volume.hpp"

namespace mito {

struct ZFilterSpec {
  int depth = 15;  // odd window length along z

  void validate() const {
    if (depth < 1 || depth % 2 == 0)
      fail(ErrorCategory::value, "z-filter depth must be an odd positive integer, got " + std::to_string(depth));
  }
};

/// Median along z over a window of `spec.depth` slices centred on each
/// voxel, replicating the first/last slice past the volume ends. Columns
/// are independent; no lateral mixing.
template <class T>
Volume<T> zfilter(const Volume<T>& volume, const ZFilterSpec& spec) {
  spec.validate();
  if (volume.depth < 1) fail(ErrorCategory::shape, "z-filter needs at least one slice");
  const int r = spec.depth / 2;
  if (r == 0) return volume;
  Volume<T> out(volume.depth, volume.height, volume.width);
  const std::size_t plane = volume.plane_size();
  std::vector<T> window(static_cast<std::size_t>(spec.depth));
  for (std::size_t p = 0; p < plane; ++p) {
    for (int z = 0; z < volume.depth; ++z) {
      for (int k = -r; k <= r; ++k) {
        const int zz = std::clamp(z + k, 0, volume.depth - 1);
        window[static_cast<std::size_t>(k + r)] = volume.data[static_cast<std::size_t>(zz) * plane + p];
      }
      std::nth_element(window.begin(), window.begin() + r, window.end());
      out.data[static_cast<std::size_t>(z) * plane + p] = window[static_cast<std::size_t>(r)];
    }
  }
  return out;
}

/// Incremental z-filter that holds at most depth + 1 slices: slices are
/// pushed in z order and each output slice is released as soon as its
/// window is complete. Produces exactly the whole-volume result.
template <class T>
class ZFilterStream {
 public:
  ZFilterStream(int height, int width, const ZFilterSpec& spec)
      : height_(height), width_(width), radius_(spec.depth / 2), window_(static_cast<std::size_t>(spec.depth)) {
    spec.validate();
  }

  std::vector<Raster<T>> push(std::span<const T> slice) {
    if (slice.size() != static_cast<std::size_t>(height_) * width_)
      fail(ErrorCategory::shape, "z-filter stream: slice size mismatch");
    if (finished_) fail(ErrorCategory::value, "z-filter stream: push after finish");
    buffer_.emplace_back(slice.begin(), slice.end());
    ++received_;
    std::vector<Raster<T>> ready;
    while (emitted_ + radius_ < received_) ready.push_back(emit(-1));
    return ready;
  }

  std::vector<Raster<T>> finish() {
    finished_ = true;
    std::vector<Raster<T>> ready;
    while (emitted_ < received_) ready.push_back(emit(received_ - 1));
    return ready;
  }

  /// Slices currently held.
  std::size_t buffered() const { return buffer_.size(); }

 private:
  // Emits slice `emitted_`; `last` clamps the upper end (-1 while open).
  Raster<T> emit(int last) {
    Raster<T> out(height_, width_);
    const std::size_t plane = out.data.size();
    const int z = emitted_;
    for (std::size_t p = 0; p < plane; ++p) {
      for (int k = -radius_; k <= radius_; ++k) {
        int zz = std::max(z + k, 0);
        if (last >= 0) zz = std::min(zz, last);
        window_[static_cast<std::size_t>(k + radius_)] = buffer_[static_cast<std::size_t>(zz - base_)][p];
      }
      std::nth_element(window_.begin(), window_.begin() + radius_, window_.end());
      out.data[p] = window_[static_cast<std::size_t>(radius_)];
    }
    ++emitted_;
    // Drop slices no later window can reach.
    while (base_ < emitted_ - radius_ && buffer_.size() > 1) {
      buffer_.pop_front();
      ++base_;
    }
    return out;
  }

  int height_, width_, radius_;
  std::vector<T> window_;
  std::deque<std::vector<T>> buffer_;
  int base_ = 0;  // z index of buffer_.front()
  int received_ = 0;
  int emitted_ = 0;
  bool finished_ = false;
};

}  // namespace mito
