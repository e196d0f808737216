#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mitonet/volume.hpp"

namespace mito {

/// Where the slices of a stack live under its root directory:
/// `<root>/<images_dir>/NNNN<extension>`, optional parallel masks, and a
/// plain-text `stack.meta`.
struct StackLayout {
  std::string images_dir = "images";
  std::string masks_dir = "masks";
  std::string extension = ".pgm";
  bool require_masks = false;
  bool read_masks = true;  // false skips the mask directory entirely
};

struct StackMeta {
  int height = 0;
  int width = 0;
  int depth = 0;
  VoxelSize voxel_nm;
};

inline constexpr const char* kStackMetaFile = "stack.meta";

StackMeta read_stack_meta(const std::filesystem::path& file);
void write_stack_meta(const std::filesystem::path& file, const StackMeta& meta);

/// Files in `dir` with `extension` whose stem is a non-negative integer,
/// sorted numerically. Any other file with that extension is rejected.
std::vector<std::filesystem::path> numbered_files(const std::filesystem::path& dir, const std::string& extension);

std::string slice_filename(int z, const std::string& extension);

/// Loads 8-bit slices (p -> p/255) and, when present, masks (0 -> 0,
/// 255 -> 1). Rejects inconsistent sizes, missing mask slices and
/// non-binary masks, naming the offending file.
VolumeStack load_stack(const std::filesystem::path& root, const StackLayout& layout = {});

/// Writes images (quantized to 8 bits), masks when present, and stack.meta.
void write_stack(const std::filesystem::path& root, const VolumeStack& stack, const StackLayout& layout = {});

/// Slice z is written as NNNN with NNNN = ids[z], or z when `ids` is empty.
void write_mask_slices(const std::filesystem::path& dir, const LabelVolume& masks, std::span<const int> ids = {});
void write_probability_slices(const std::filesystem::path& dir, const PredictionVolume& probs, bool exact,
                              std::span<const int> ids = {});

/// Reads a probability stack written by write_probability_slices; prefers
/// exact `.pfm` slices when present, otherwise 8-bit `.pgm` (value/255).
PredictionVolume read_probability_slices(const std::filesystem::path& dir);

/// Reads a directory of 0/255 mask slices as a binary volume.
LabelVolume read_mask_slices(const std::filesystem::path& dir);

}  // namespace mito
