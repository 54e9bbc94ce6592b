#include "doctest.h"
#include "test_util.hpp"

#include "evonas/error.hpp"
#include "evonas/image_io.hpp"

using namespace evonas;
using testutil::TempDir;

TEST_CASE("pgm round trip and binarization") {
  TempDir dir;
  Plane<std::uint8_t> img{3, 2, {0, 127, 128, 255, 10, 200}};
  write_pgm(dir / "a.pgm", img);
  const auto bin = read_binary_pgm(dir / "a.pgm");
  CHECK(bin.width == 3);
  CHECK(bin.height == 2);
  CHECK(bin.pixels == std::vector<std::uint8_t>{0, 0, 1, 1, 0, 1});
  const auto prob = read_probability_map(dir / "a.pgm");
  CHECK(prob.pixels[3] == 1.0);
  CHECK(prob.pixels[1] == 127.0 / 255.0);
}

TEST_CASE("pgm header with comments and a small maxval") {
  TempDir dir;
  testutil::write_file(dir / "c.pgm", std::string("P5\n# made by hand\n2 1\n# max\n4\n") + char(0) + char(4));
  const auto prob = read_probability_map(dir / "c.pgm");
  CHECK(prob.pixels == std::vector<double>{0.0, 1.0});
}

TEST_CASE("float map round trip") {
  TempDir dir;
  Plane<float> img{2, 2, {0.0f, 0.25f, 0.5f, 1.0f}};
  write_float_map(dir / "p.f32", img);
  const std::string raw = testutil::read_file(dir / "p.f32");
  CHECK(raw.rfind("EVOF32\n2 2\n", 0) == 0);
  CHECK(raw.size() == 11 + 16);
  const auto back = read_probability_map(dir / "p.f32");
  CHECK(back.pixels == std::vector<double>{0.0, 0.25, 0.5, 1.0});
}

TEST_CASE("malformed images are rejected") {
  TempDir dir;
  testutil::write_file(dir / "p2.pgm", "P2\n1 1\n255\n0\n");
  CHECK_THROWS_AS(read_binary_pgm(dir / "p2.pgm"), ValidationError);
  testutil::write_file(dir / "short.pgm", "P5\n4 4\n255\nab");
  CHECK_THROWS_AS(read_binary_pgm(dir / "short.pgm"), ValidationError);
  testutil::write_file(dir / "wide.pgm", "P5\n1 1\n65535\nab");
  CHECK_THROWS_AS(read_binary_pgm(dir / "wide.pgm"), ValidationError);
  testutil::write_file(dir / "short.f32", "EVOF32\n2 2\nabcd");
  CHECK_THROWS_AS(read_probability_map(dir / "short.f32"), ValidationError);
  CHECK_THROWS_AS(read_binary_pgm(dir / "missing.pgm"), ValidationError);
}
