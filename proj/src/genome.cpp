#include "evonas/genome.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace evonas {

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::initial: return "initial";
    case CellKind::encoder: return "encoder";
    case CellKind::decoder: return "decoder";
  }
  return "unknown";
}

FrameworkShape FrameworkShape::u_like(int encoders, int decoders) {
  FrameworkShape shape;
  shape.cells.push_back(CellKind::initial);
  shape.cells.insert(shape.cells.end(), std::max(encoders, 0), CellKind::encoder);
  shape.cells.insert(shape.cells.end(), std::max(decoders, 0), CellKind::decoder);
  return shape;
}

int FrameworkShape::encoder_count() const {
  return static_cast<int>(std::count(cells.begin(), cells.end(), CellKind::encoder));
}

int FrameworkShape::decoder_count() const {
  return static_cast<int>(std::count(cells.begin(), cells.end(), CellKind::decoder));
}

// Fragment: [S] N1 N2 A [SC] [SK_1 .. SK_k]
std::size_t CellField::width() const {
  return (has_sampling ? 1 : 0) + 3 + (has_shortcut ? 1 : 0) +
         static_cast<std::size_t>(skip_count);
}

std::size_t CellField::sampling_bit() const {
  if (!has_sampling) throw ValidationError("cell " + std::to_string(cell_index) + " has no sampling bit");
  return offset;
}

std::size_t CellField::norm_enabled_bit() const { return offset + (has_sampling ? 1 : 0); }
std::size_t CellField::norm_type_bit() const { return norm_enabled_bit() + 1; }
std::size_t CellField::activation_bit() const { return norm_enabled_bit() + 2; }

std::size_t CellField::shortcut_bit() const {
  if (!has_shortcut) throw ValidationError("cell " + std::to_string(cell_index) + " has no shortcut bit");
  return activation_bit() + 1;
}

std::size_t CellField::skip_bit(int i) const {
  if (i < 1 || i > skip_count) {
    throw ValidationError("cell " + std::to_string(cell_index) + " has no SK_" + std::to_string(i));
  }
  return activation_bit() + (has_shortcut ? 1 : 0) + static_cast<std::size_t>(i);
}

GenomeLayout::Owner GenomeLayout::owner_of(std::size_t bit) const {
  for (const CellField& cell : cells) {
    if (bit < cell.offset || bit >= cell.offset + cell.width()) continue;
    if (cell.has_sampling && bit == cell.sampling_bit()) return {cell.cell_index, Field::sampling, 0};
    if (bit == cell.norm_enabled_bit()) return {cell.cell_index, Field::norm_enabled, 0};
    if (bit == cell.norm_type_bit()) return {cell.cell_index, Field::norm_type, 0};
    if (bit == cell.activation_bit()) return {cell.cell_index, Field::activation, 0};
    if (cell.has_shortcut && bit == cell.shortcut_bit()) return {cell.cell_index, Field::shortcut, 0};
    const auto first_skip = cell.activation_bit() + (cell.has_shortcut ? 1 : 0) + 1;
    return {cell.cell_index, Field::skip, static_cast<int>(bit - first_skip) + 1};
  }
  throw ValidationError("bit " + std::to_string(bit) + " outside layout");
}

GenomeLayout build_layout(const FrameworkShape& framework) {
  const auto& kinds = framework.cells;
  if (kinds.size() < 2) throw ValidationError("framework needs at least 2 cells");
  if (kinds.front() != CellKind::initial) throw ValidationError("first cell must be the initial cell");

  std::size_t i = 1;
  while (i < kinds.size() && kinds[i] == CellKind::encoder) ++i;
  const std::size_t encoders = i - 1;
  while (i < kinds.size() && kinds[i] == CellKind::decoder) ++i;
  const std::size_t decoders = i - 1 - encoders;
  if (i != kinds.size()) {
    throw ValidationError("cell " + std::to_string(i) + " out of order: expected initial, encoders, decoders");
  }
  if (encoders == 0) throw ValidationError("framework has no encoder cells");
  if (decoders == 0) throw ValidationError("framework has no decoder cells");

  GenomeLayout layout;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    CellField cell;
    cell.cell_index = static_cast<int>(k);
    cell.kind = kinds[k];
    cell.offset = offset;
    cell.has_sampling = k > 0;
    cell.has_shortcut = k > 0;
    cell.skip_count = static_cast<int>(k);
    offset += cell.width();
    layout.cells.push_back(cell);
  }
  layout.total_bits = offset;
  return layout;
}

Genotype::Genotype(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) {
    if (b > 1) throw ValidationError("genome bits must be 0 or 1");
  }
}

Genotype Genotype::parse(std::string_view text) {
  std::vector<std::uint8_t> bits;
  bits.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '0' && c != '1') {
      throw ValidationError("invalid genome character at position " + std::to_string(i));
    }
    bits.push_back(c == '1' ? 1 : 0);
  }
  return Genotype(std::move(bits));
}

std::size_t Genotype::count_ones() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string Genotype::str() const {
  std::string s(bits_.size(), '0');
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) s[i] = '1';
  }
  return s;
}

void check_length(const Genotype& g, const GenomeLayout& layout) {
  if (g.size() != layout.total_bits) {
    throw ValidationError("genome length " + std::to_string(g.size()) + " does not match layout length " +
                          std::to_string(layout.total_bits));
  }
}

Genotype canonicalize(const Genotype& g, const GenomeLayout& layout) {
  check_length(g, layout);
  Genotype out = g;
  for (const CellField& cell : layout.cells) {
    if (!out[cell.norm_enabled_bit()]) out.set(cell.norm_type_bit(), false);
  }
  return out;
}

bool is_canonical(const Genotype& g, const GenomeLayout& layout) {
  return g.size() == layout.total_bits && canonicalize(g, layout) == g;
}

namespace detail {
void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    std::ostringstream os;
    os << what << " must lie in [0, 1], got " << p;
    throw ValidationError(os.str());
  }
}
}  // namespace detail

std::pair<Genotype, Genotype> crossover_at(const Genotype& a, const Genotype& b,
                                           std::size_t cut, const GenomeLayout& layout) {
  check_length(a, layout);
  check_length(b, layout);
  if (cut > a.size()) throw ValidationError("crossover cut beyond genome length");
  Genotype first = a;
  Genotype second = b;
  for (std::size_t i = cut; i < a.size(); ++i) {
    first.set(i, b[i]);
    second.set(i, a[i]);
  }
  return {canonicalize(first, layout), canonicalize(second, layout)};
}

}  // namespace evonas
