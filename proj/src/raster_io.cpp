#include "mitonet/raster_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace mito {
namespace {

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Netpbm-style header tokenizer: whitespace separated, '#' comments.
class HeaderReader {
 public:
  HeaderReader(const std::vector<char>& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  std::string token() {
    skip_space();
    std::string t;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) t += bytes_[pos_++];
    if (t.empty()) fail(ErrorCategory::format, path_.string() + ": truncated header");
    return t;
  }

  int integer() {
    const auto t = token();
    try {
      std::size_t used = 0;
      const int v = std::stoi(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      fail(ErrorCategory::format, path_.string() + ": bad header field '" + t + "'");
    }
  }

  // Exactly one whitespace byte separates the header from the payload.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      fail(ErrorCategory::format, path_.string() + ": missing header terminator");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<char>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

void write_bytes(const std::filesystem::path& path, const std::string& header, const char* payload,
                 std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload, static_cast<std::streamsize>(n));
  if (!out) fail(ErrorCategory::io, "write failed for " + path.string());
}

}  // namespace

Raster<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  HeaderReader h(bytes, path);
  if (h.token() != "P5") fail(ErrorCategory::format, path.string() + ": not a binary PGM (P5)");
  const int width = h.integer();
  const int height = h.integer();
  const int maxval = h.integer();
  if (width <= 0 || height <= 0) fail(ErrorCategory::format, path.string() + ": non-positive dimensions");
  if (maxval != 255) fail(ErrorCategory::format, path.string() + ": only 8-bit PGM (maxval 255) is supported");
  const std::size_t off = h.payload_offset();
  Raster<std::uint8_t> r(height, width);
  if (bytes.size() - off < r.data.size()) fail(ErrorCategory::format, path.string() + ": truncated pixel data");
  std::memcpy(r.data.data(), bytes.data() + off, r.data.size());
  return r;
}

void write_pgm(const std::filesystem::path& path, const Raster<std::uint8_t>& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  write_bytes(path, header, reinterpret_cast<const char*>(image.data.data()), image.data.size());
}

Raster<float> read_pfm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  HeaderReader h(bytes, path);
  if (h.token() != "Pf") fail(ErrorCategory::format, path.string() + ": not a grayscale PFM (Pf)");
  const int width = h.integer();
  const int height = h.integer();
  const std::string scale_token = h.token();
  double scale = 0.0;
  try {
    scale = std::stod(scale_token);
  } catch (const std::exception&) {
    fail(ErrorCategory::format, path.string() + ": bad scale field");
  }
  if (width <= 0 || height <= 0) fail(ErrorCategory::format, path.string() + ": non-positive dimensions");
  const bool little = scale < 0.0;
  const std::size_t off = h.payload_offset();
  Raster<float> r(height, width);
  if (bytes.size() - off < r.data.size() * 4) fail(ErrorCategory::format, path.string() + ": truncated pixel data");
  const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + off);
  // Rows are stored bottom to top.
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const unsigned char* p = src + (static_cast<std::size_t>(height - 1 - y) * width + x) * 4;
      std::uint32_t u = little ? (p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t{p[3]} << 24))
                               : (p[3] | (p[2] << 8) | (p[1] << 16) | (std::uint32_t{p[0]} << 24));
      r.at(y, x) = std::bit_cast<float>(u);
    }
  }
  return r;
}

void write_pfm(const std::filesystem::path& path, const Raster<float>& image) {
  const std::string header = "Pf\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n-1.0\n";
  std::vector<char> payload(image.data.size() * 4);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto u = std::bit_cast<std::uint32_t>(image.at(y, x));
      char* p = payload.data() + (static_cast<std::size_t>(image.height - 1 - y) * image.width + x) * 4;
      for (int b = 0; b < 4; ++b) p[b] = static_cast<char>((u >> (8 * b)) & 0xFF);
    }
  }
  write_bytes(path, header, payload.data(), payload.size());
}

std::uint8_t quantize_unit(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

}  // namespace mito
