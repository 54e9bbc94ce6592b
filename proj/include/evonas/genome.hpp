#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evonas/error.hpp"
#include "evonas/rng.hpp"

namespace evonas {

enum class CellKind { initial, encoder, decoder };

std::string_view to_string(CellKind kind);

// Ordered cell kinds of a U-like network: one initial cell, then encoders,
// then decoders.
struct FrameworkShape {
  std::vector<CellKind> cells;

  static FrameworkShape u_like(int encoders, int decoders);
  // 1 initial + 3 encoder + 3 decoder cells.
  static FrameworkShape standard() { return u_like(3, 3); }

  int encoder_count() const;
  int decoder_count() const;

  friend bool operator==(const FrameworkShape&, const FrameworkShape&) = default;
};

// Field order inside a cell fragment. The initial cell only carries N1, N2, A.
enum class Field { sampling, norm_enabled, norm_type, activation, shortcut, skip };

struct CellField {
  int cell_index = 0;
  CellKind kind = CellKind::initial;
  std::size_t offset = 0;
  bool has_sampling = false;
  bool has_shortcut = false;
  int skip_count = 0;

  std::size_t width() const;
  // Absolute bit positions. Calling these for a field the cell lacks throws.
  std::size_t sampling_bit() const;
  std::size_t norm_enabled_bit() const;
  std::size_t norm_type_bit() const;
  std::size_t activation_bit() const;
  std::size_t shortcut_bit() const;
  // SK_i for i in 1..skip_count; SK_1 refers to the immediately preceding cell.
  std::size_t skip_bit(int i) const;

  friend bool operator==(const CellField&, const CellField&) = default;
};

struct GenomeLayout {
  std::vector<CellField> cells;
  std::size_t total_bits = 0;

  // (cell index, field, skip ordinal or 0) owning a bit position.
  struct Owner {
    int cell_index;
    Field field;
    int skip_ordinal;
  };
  Owner owner_of(std::size_t bit) const;

  friend bool operator==(const GenomeLayout&, const GenomeLayout&) = default;
};

GenomeLayout build_layout(const FrameworkShape& framework);

// Fixed-length bit string, initial cell first.
class Genotype {
 public:
  Genotype() = default;
  explicit Genotype(std::size_t length) : bits_(length, 0) {}
  explicit Genotype(std::vector<std::uint8_t> bits);

  static Genotype zeros(std::size_t length) { return Genotype(length); }
  static Genotype ones(std::size_t length) {
    return Genotype(std::vector<std::uint8_t>(length, 1));
  }
  // Parses a '0'/'1' string; throws ValidationError on any other character.
  static Genotype parse(std::string_view text);

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }
  void flip(std::size_t i) { bits_[i] ^= 1; }
  std::size_t count_ones() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::string str() const;

  friend bool operator==(const Genotype&, const Genotype&) = default;
  friend auto operator<=>(const Genotype&, const Genotype&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// Forces N2 = 0 wherever N1 = 0; idempotent.
Genotype canonicalize(const Genotype& g, const GenomeLayout& layout);
bool is_canonical(const Genotype& g, const GenomeLayout& layout);

void check_length(const Genotype& g, const GenomeLayout& layout);

namespace detail {
void check_probability(double p, const char* what);
}

// Independent per-bit flips at rate p_b, without canonicalization.
template <Rng64 G>
Genotype flip_bits(const Genotype& g, double p_b, G& rng) {
  detail::check_probability(p_b, "p_b");
  Genotype out = g;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (bernoulli(rng, p_b)) out.flip(i);
  }
  return out;
}

template <Rng64 G>
Genotype mutate(const Genotype& g, const GenomeLayout& layout, double p_b, G& rng) {
  check_length(g, layout);
  return canonicalize(flip_bits(g, p_b, rng), layout);
}

// Splices a[0..cut) ++ b[cut..) and b[0..cut) ++ a[cut..), canonicalized.
std::pair<Genotype, Genotype> crossover_at(const Genotype& a, const Genotype& b,
                                           std::size_t cut, const GenomeLayout& layout);

// Single-point crossover with the cut uniform over 1..total_bits-1.
template <Rng64 G>
std::pair<Genotype, Genotype> crossover(const Genotype& a, const Genotype& b,
                                        const GenomeLayout& layout, G& rng) {
  check_length(a, layout);
  check_length(b, layout);
  if (layout.total_bits < 2) return {canonicalize(a, layout), canonicalize(b, layout)};
  const std::size_t cut = 1 + uniform_index(rng, layout.total_bits - 1);
  return crossover_at(a, b, cut, layout);
}

template <Rng64 G>
Genotype random_genome(const GenomeLayout& layout, G& rng) {
  Genotype g(layout.total_bits);
  for (std::size_t i = 0; i < g.size(); ++i) g.set(i, coin(rng));
  return canonicalize(g, layout);
}

// All shortcut and skip bits set; S, N1, N2, A uniform.
template <Rng64 G>
Genotype rich_init_genome(const GenomeLayout& layout, G& rng) {
  Genotype g(layout.total_bits);
  for (const CellField& cell : layout.cells) {
    if (cell.has_sampling) g.set(cell.sampling_bit(), coin(rng));
    g.set(cell.norm_enabled_bit(), coin(rng));
    g.set(cell.norm_type_bit(), coin(rng));
    g.set(cell.activation_bit(), coin(rng));
    if (cell.has_shortcut) g.set(cell.shortcut_bit(), true);
    for (int i = 1; i <= cell.skip_count; ++i) g.set(cell.skip_bit(i), true);
  }
  return canonicalize(g, layout);
}

}  // namespace evonas
