#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "evonas/genome.hpp"

namespace evonas {

enum class Sampling { none, max_pool, avg_pool, bilinear, transpose_conv };
enum class Normalization { none, batch, instance };
enum class Activation { relu, selu };

std::string_view to_string(Sampling s);
std::string_view to_string(Normalization n);
std::string_view to_string(Activation a);
Sampling parse_sampling(std::string_view s);
Normalization parse_normalization(std::string_view s);
Activation parse_activation(std::string_view s);

struct CellSpec {
  int index = 0;
  CellKind kind = CellKind::initial;
  Sampling sampling = Sampling::none;
  Normalization normalization = Normalization::none;
  Activation activation = Activation::relu;
  bool shortcut = false;
  // Ascending cell indices, each strictly below `index`.
  std::vector<int> skip_sources;

  friend bool operator==(const CellSpec&, const CellSpec&) = default;
};

inline constexpr int kDefaultChannels = 128;
inline constexpr int kDefaultInputChannels = 3;

// Decoded phenotype. The main path is the chain cell0 -> cell1 -> ... ; skip
// edges are summed into a cell's input after its resampling step.
struct ArchitectureGraph {
  std::vector<CellSpec> cells;
  // Output channels per cell.
  std::vector<int> channels;
  int input_channels = kDefaultInputChannels;
  // Resolution divisor per cell relative to the input image.
  std::vector<int> scale;

  std::size_t skip_edge_count() const;

  friend bool operator==(const ArchitectureGraph&, const ArchitectureGraph&) = default;
};

struct DecodeOptions {
  int input_channels = kDefaultInputChannels;
  int base_channels = kDefaultChannels;
};

// Expected per-cell scale for the given cell kinds (1, 2, 4, .. down then up).
std::vector<int> scale_table(const std::vector<CellKind>& kinds);

ArchitectureGraph decode(const Genotype& g, const GenomeLayout& layout,
                         const DecodeOptions& options = {});
Genotype encode(const ArchitectureGraph& graph, const GenomeLayout& layout);

struct Violation {
  int cell = -1;  // -1 for graph-level problems
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate(const ArchitectureGraph& graph);

struct ParameterCount {
  std::vector<std::int64_t> per_cell;
  std::int64_t projections = 0;
  std::int64_t head = 0;
  std::int64_t total = 0;
};

// Cell = [resample] -> conv3x3 -> norm -> act -> conv3x3 -> norm -> act, biases
// always counted. Skip and shortcut edges add a 1x1 projection only when the
// channel counts differ. The head is a 1x1 convolution to one channel.
ParameterCount parameter_count(const ArchitectureGraph& graph);

// Worker interchange document. Key order is fixed, so dump() is byte-stable.
nlohmann::ordered_json to_description(const ArchitectureGraph& graph);
// Inverse of to_description; rejects documents whose genome and cells disagree.
ArchitectureGraph parse_description(const nlohmann::json& doc);

}  // namespace evonas
