#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace evonas {

// Single-channel plane, row-major.
template <typename T>
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<T> pixels;

  bool same_shape(int w, int h) const { return width == w && height == h; }
};

// Probability maps are either 8-bit PGM (P5, value/maxval) or a float plane:
//   "EVOF32\n<width> <height>\n" followed by width*height little-endian float32.
// The format is picked from the leading magic bytes.
Plane<double> read_probability_map(const std::filesystem::path& path);

// Binary labels and masks: 8-bit PGM P5, pixel > 127 => 1.
Plane<std::uint8_t> read_binary_pgm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const Plane<std::uint8_t>& image);
void write_float_map(const std::filesystem::path& path, const Plane<float>& image);

}  // namespace evonas
