#include "mitonet/stack_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mitonet/raster_io.hpp"

namespace fs = std::filesystem;

namespace mito {
namespace {

bool parse_index(const std::string& stem, long long& out) {
  if (stem.empty()) return false;
  const auto* end = stem.data() + stem.size();
  auto [ptr, ec] = std::from_chars(stem.data(), end, out);
  return ec == std::errc{} && ptr == end && out >= 0;
}

void check_extent(const Raster<std::uint8_t>& r, int height, int width, const fs::path& file) {
  if (r.height != height || r.width != width)
    fail(ErrorCategory::shape, file.string() + ": slice is " + std::to_string(r.width) + "x" +
                                   std::to_string(r.height) + ", expected " + std::to_string(width) + "x" +
                                   std::to_string(height));
}

int file_id(std::span<const int> ids, int z) {
  if (ids.empty()) return z;
  return ids[static_cast<std::size_t>(z)];
}

void check_ids(std::span<const int> ids, int depth) {
  if (!ids.empty() && ids.size() != static_cast<std::size_t>(depth))
    fail(ErrorCategory::shape, "slice index list does not match stack depth");
}

}  // namespace

std::string slice_filename(int z, const std::string& extension) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", z);
  return buf + extension;
}

StackMeta read_stack_meta(const fs::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCategory::io, "cannot open " + file.string());
  StackMeta m;
  bool have_h = false, have_w = false, have_d = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    bool ok = true;
    if (key == "height") {
      ok = static_cast<bool>(ls >> m.height);
      have_h = true;
    } else if (key == "width") {
      ok = static_cast<bool>(ls >> m.width);
      have_w = true;
    } else if (key == "depth") {
      ok = static_cast<bool>(ls >> m.depth);
      have_d = true;
    } else if (key == "voxel_nm") {
      ok = static_cast<bool>(ls >> m.voxel_nm.x >> m.voxel_nm.y >> m.voxel_nm.z);
    } else {
      fail(ErrorCategory::format, file.string() + ": unknown key '" + key + "'");
    }
    if (!ok) fail(ErrorCategory::format, file.string() + ": bad value for '" + key + "'");
  }
  if (!have_h || !have_w || !have_d)
    fail(ErrorCategory::format, file.string() + ": height, width and depth are required");
  return m;
}

void write_stack_meta(const fs::path& file, const StackMeta& m) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write " + file.string());
  out << "height " << m.height << "\nwidth " << m.width << "\ndepth " << m.depth << "\nvoxel_nm " << m.voxel_nm.x
      << ' ' << m.voxel_nm.y << ' ' << m.voxel_nm.z << '\n';
}

std::vector<fs::path> numbered_files(const fs::path& dir, const std::string& extension) {
  if (!fs::is_directory(dir)) fail(ErrorCategory::io, "not a directory: " + dir.string());
  std::vector<std::pair<long long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != extension) continue;
    long long idx = 0;
    if (!parse_index(entry.path().stem().string(), idx))
      fail(ErrorCategory::format, entry.path().string() + ": slice file name is not a number");
    found.emplace_back(idx, entry.path());
  }
  std::sort(found.begin(), found.end());
  for (std::size_t i = 1; i < found.size(); ++i)
    if (found[i].first == found[i - 1].first)
      fail(ErrorCategory::format, found[i].second.string() + ": duplicate slice index");
  std::vector<fs::path> out;
  out.reserve(found.size());
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

VolumeStack load_stack(const fs::path& root, const StackLayout& layout) {
  const auto image_files = numbered_files(root / layout.images_dir, layout.extension);
  if (image_files.empty()) fail(ErrorCategory::io, "no slices found under " + (root / layout.images_dir).string());

  const fs::path mask_dir = root / layout.masks_dir;
  const bool have_masks = layout.read_masks && fs::is_directory(mask_dir);
  if (layout.require_masks && !have_masks) fail(ErrorCategory::io, "missing mask directory " + mask_dir.string());

  VolumeStack stack;
  const auto first = read_pgm(image_files.front());
  const int depth = static_cast<int>(image_files.size());
  stack.images = ImageVolume(depth, first.height, first.width);
  if (have_masks) stack.labels = LabelVolume(depth, first.height, first.width);

  for (int z = 0; z < depth; ++z) {
    const auto& file = image_files[static_cast<std::size_t>(z)];
    stack.slice_ids.push_back(std::stoi(file.stem().string()));
    const auto img = z == 0 ? first : read_pgm(file);
    check_extent(img, first.height, first.width, file);
    auto dst = stack.images.slice(z);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(img.data[i]) / 255.0f;

    if (!have_masks) continue;
    const fs::path mask_file = mask_dir / file.filename();
    if (!fs::exists(mask_file))
      fail(ErrorCategory::io, "missing mask slice " + mask_file.string() + " for " + file.string());
    const auto mask = read_pgm(mask_file);
    check_extent(mask, first.height, first.width, mask_file);
    auto lab = stack.labels->slice(z);
    for (std::size_t i = 0; i < lab.size(); ++i) {
      const auto v = mask.data[i];
      if (v != 0 && v != 255)
        fail(ErrorCategory::value, mask_file.string() + ": mask value " + std::to_string(v) +
                                       " is not 0 or 255");
      lab[i] = v == 255 ? 1 : 0;
    }
  }
  if (have_masks) {
    const auto mask_files = numbered_files(mask_dir, layout.extension);
    if (mask_files.size() != image_files.size())
      fail(ErrorCategory::io, mask_dir.string() + ": " + std::to_string(mask_files.size()) +
                                  " mask slices for " + std::to_string(image_files.size()) + " images");
  }

  const fs::path meta_file = root / kStackMetaFile;
  if (fs::exists(meta_file)) {
    const auto meta = read_stack_meta(meta_file);
    if (meta.depth != depth || meta.height != first.height || meta.width != first.width)
      fail(ErrorCategory::shape, meta_file.string() + ": declares " + std::to_string(meta.depth) + "x" +
                                     std::to_string(meta.height) + "x" + std::to_string(meta.width) +
                                     " but slices are " + stack.images.shape_string());
    stack.voxel_nm = meta.voxel_nm;
  }
  return stack;
}

void write_mask_slices(const fs::path& dir, const LabelVolume& masks, std::span<const int> ids) {
  check_ids(ids, masks.depth);
  fs::create_directories(dir);
  for (int z = 0; z < masks.depth; ++z) {
    Raster<std::uint8_t> r(masks.height, masks.width);
    const auto src = masks.slice(z);
    for (std::size_t i = 0; i < src.size(); ++i) r.data[i] = src[i] ? 255 : 0;
    write_pgm(dir / slice_filename(file_id(ids, z), ".pgm"), r);
  }
}

void write_stack(const fs::path& root, const VolumeStack& stack, const StackLayout& layout) {
  stack.validate();
  const fs::path image_dir = root / layout.images_dir;
  fs::create_directories(image_dir);
  for (int z = 0; z < stack.depth(); ++z) {
    Raster<std::uint8_t> r(stack.height(), stack.width());
    const auto src = stack.images.slice(z);
    for (std::size_t i = 0; i < src.size(); ++i) r.data[i] = quantize_unit(src[i]);
    write_pgm(image_dir / slice_filename(stack.slice_id(z), layout.extension), r);
  }
  if (stack.labels) write_mask_slices(root / layout.masks_dir, *stack.labels, stack.slice_ids);
  write_stack_meta(root / kStackMetaFile, {stack.height(), stack.width(), stack.depth(), stack.voxel_nm});
}

void write_probability_slices(const fs::path& dir, const PredictionVolume& probs, bool exact,
                              std::span<const int> ids) {
  check_ids(ids, probs.depth);
  fs::create_directories(dir);
  for (int z = 0; z < probs.depth; ++z) {
    const auto src = probs.slice(z);
    if (exact) {
      Raster<float> r(probs.height, probs.width);
      std::copy(src.begin(), src.end(), r.data.begin());
      write_pfm(dir / slice_filename(file_id(ids, z), ".pfm"), r);
    } else {
      Raster<std::uint8_t> r(probs.height, probs.width);
      for (std::size_t i = 0; i < src.size(); ++i) r.data[i] = quantize_unit(src[i]);
      write_pgm(dir / slice_filename(file_id(ids, z), ".pgm"), r);
    }
  }
}

PredictionVolume read_probability_slices(const fs::path& dir) {
  auto files = numbered_files(dir, ".pfm");
  const bool exact = !files.empty();
  if (!exact) files = numbered_files(dir, ".pgm");
  if (files.empty()) fail(ErrorCategory::io, "no probability slices under " + dir.string());
  PredictionVolume out;
  for (std::size_t z = 0; z < files.size(); ++z) {
    Raster<float> r;
    if (exact) {
      r = read_pfm(files[z]);
    } else {
      const auto q = read_pgm(files[z]);
      r = Raster<float>(q.height, q.width);
      for (std::size_t i = 0; i < q.data.size(); ++i) r.data[i] = static_cast<float>(q.data[i]) / 255.0f;
    }
    if (z == 0) out = PredictionVolume(static_cast<int>(files.size()), r.height, r.width);
    if (r.height != out.height || r.width != out.width)
      fail(ErrorCategory::shape, files[z].string() + ": slice size differs from the first slice");
    std::copy(r.data.begin(), r.data.end(), out.slice(static_cast<int>(z)).begin());
  }
  return out;
}

LabelVolume read_mask_slices(const fs::path& dir) {
  const auto files = numbered_files(dir, ".pgm");
  if (files.empty()) fail(ErrorCategory::io, "no mask slices under " + dir.string());
  LabelVolume out;
  for (std::size_t z = 0; z < files.size(); ++z) {
    const auto r = read_pgm(files[z]);
    if (z == 0) out = LabelVolume(static_cast<int>(files.size()), r.height, r.width);
    check_extent(r, out.height, out.width, files[z]);
    auto dst = out.slice(static_cast<int>(z));
    for (std::size_t i = 0; i < r.data.size(); ++i) {
      if (r.data[i] != 0 && r.data[i] != 255)
        fail(ErrorCategory::value, files[z].string() + ": mask value " + std::to_string(r.data[i]) +
                                       " is not 0 or 255");
      dst[i] = r.data[i] ? 1 : 0;
    }
  }
  return out;
}

}  // namespace mito
