#pragma once

#include <cstdint>
#include <filesystem>

#include "mitonet/volume.hpp"

namespace mito {

// Binary PGM (P5, maxval 255) for 8-bit slices and grayscale PFM ("Pf",
// little-endian) for exact 32-bit probabilities.

Raster<std::uint8_t> read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Raster<std::uint8_t>& image);

Raster<float> read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Raster<float>& image);

/// Round-half-up quantization of [0, 1] values to 8 bits.
std::uint8_t quantize_unit(float v);

}  // namespace mito
