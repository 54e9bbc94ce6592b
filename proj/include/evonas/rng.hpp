#pragma once

#include <concepts>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

namespace evonas {

// Any engine producing full-range 64-bit words. The draw helpers below are
// written against raw engine output so that sequences are identical across
// standard library implementations (std::*_distribution is not).
template <typename G>
concept Rng64 = std::uniform_random_bit_generator<G> &&
                (G::min() == 0) &&
                (G::max() == std::numeric_limits<std::uint64_t>::max());

// Uniform double in [0, 1) from the top 53 bits.
template <Rng64 G>
double uniform01(G& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <Rng64 G>
bool bernoulli(G& rng, double p) {
  return uniform01(rng) < p;
}

template <Rng64 G>
bool coin(G& rng) {
  return (rng() >> 63) != 0;
}

// Uniform integer in [0, n). Rejection sampling, no modulo bias.
template <Rng64 G>
std::uint64_t uniform_index(G& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// Seeded, serializable random stream. Each search owns exactly one.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Text form of the full engine state; restore() accepts exactly this.
  std::string state() const;
  void restore(const std::string& state);

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

static_assert(Rng64<RngStream>);

}  // namespace evonas
