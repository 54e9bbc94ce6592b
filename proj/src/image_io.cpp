#include "evonas/image_io.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "evonas/error.hpp"

namespace evonas {

namespace {

constexpr char kFloatMagic[] = "EVOF32";

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Cursor over a header made of whitespace-separated ASCII integers.
struct HeaderReader {
  const std::vector<unsigned char>& bytes;
  std::size_t pos = 0;
  const std::filesystem::path& path;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }

  long integer() {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000'000L) throw ValidationError("header value too large in " + path.string());
      ++pos;
      ++digits;
    }
    if (digits == 0) throw ValidationError("malformed image header in " + path.string());
    return value;
  }

  // Exactly one whitespace byte separates the header from the payload.
  void end_of_header() {
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
      throw ValidationError("malformed image header in " + path.string());
    }
    ++pos;
  }
};

struct PgmData {
  int width;
  int height;
  int maxval;
  const unsigned char* pixels;
};

PgmData parse_pgm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw ValidationError(path.string() + " is not a binary PGM (P5)");
  }
  HeaderReader r{bytes, 2, path};
  const long w = r.integer();
  const long h = r.integer();
  const long maxval = r.integer();
  r.end_of_header();
  if (w <= 0 || h <= 0) throw ValidationError("empty image in " + path.string());
  if (maxval <= 0 || maxval > 255) throw ValidationError("only 8-bit PGM is supported: " + path.string());
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - r.pos < n) throw ValidationError("truncated pixel data in " + path.string());
  return {static_cast<int>(w), static_cast<int>(h), static_cast<int>(maxval), bytes.data() + r.pos};
}

}  // namespace

Plane<double> read_probability_map(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  Plane<double> out;
  const std::size_t magic_len = std::strlen(kFloatMagic);
  if (bytes.size() >= magic_len && std::memcmp(bytes.data(), kFloatMagic, magic_len) == 0) {
    HeaderReader r{bytes, magic_len, path};
    const long w = r.integer();
    const long h = r.integer();
    r.end_of_header();
    if (w <= 0 || h <= 0) throw ValidationError("empty image in " + path.string());
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() - r.pos < n * 4) throw ValidationError("truncated float data in " + path.string());
    out.width = static_cast<int>(w);
    out.height = static_cast<int>(h);
    out.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t word = 0;
      for (int b = 3; b >= 0; --b) word = (word << 8) | bytes[r.pos + 4 * i + static_cast<std::size_t>(b)];
      out.pixels[i] = static_cast<double>(std::bit_cast<float>(word));
    }
    return out;
  }
  const PgmData pgm = parse_pgm(bytes, path);
  out.width = pgm.width;
  out.height = pgm.height;
  out.pixels.resize(static_cast<std::size_t>(pgm.width) * static_cast<std::size_t>(pgm.height));
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = static_cast<double>(pgm.pixels[i]) / pgm.maxval;
  }
  return out;
}

Plane<std::uint8_t> read_binary_pgm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const PgmData pgm = parse_pgm(bytes, path);
  Plane<std::uint8_t> out;
  out.width = pgm.width;
  out.height = pgm.height;
  out.pixels.resize(static_cast<std::size_t>(pgm.width) * static_cast<std::size_t>(pgm.height));
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = pgm.pixels[i] > 127 ? 1 : 0;
  return out;
}

void write_pgm(const std::filesystem::path& path, const Plane<std::uint8_t>& image) {
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw Error("failed writing " + path.string());
}

void write_float_map(const std::filesystem::path& path, const Plane<float>& image) {
  std::ofstream out(path, std::ios::binary);
  out << kFloatMagic << "\n" << image.width << " " << image.height << "\n";
  for (float v : image.pixels) {
    const auto word = std::bit_cast<std::uint32_t>(v);
    const char le[4] = {static_cast<char>(word & 0xff), static_cast<char>((word >> 8) & 0xff),
                        static_cast<char>((word >> 16) & 0xff), static_cast<char>((word >> 24) & 0xff)};
    out.write(le, 4);
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace evonas
