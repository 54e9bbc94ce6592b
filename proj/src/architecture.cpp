#include "evonas/architecture.hpp"

#include <algorithm>
#include <sstream>

namespace evonas {

std::string_view to_string(Sampling s) {
  switch (s) {
    case Sampling::none: return "none";
    case Sampling::max_pool: return "max_pool";
    case Sampling::avg_pool: return "avg_pool";
    case Sampling::bilinear: return "bilinear";
    case Sampling::transpose_conv: return "transpose_conv";
  }
  return "unknown";
}

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::batch: return "batch";
    case Normalization::instance: return "instance";
  }
  return "unknown";
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::selu: return "selu";
  }
  return "unknown";
}

Sampling parse_sampling(std::string_view s) {
  for (auto v : {Sampling::none, Sampling::max_pool, Sampling::avg_pool, Sampling::bilinear,
                 Sampling::transpose_conv}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown sampling '" + std::string(s) + "'");
}

Normalization parse_normalization(std::string_view s) {
  for (auto v : {Normalization::none, Normalization::batch, Normalization::instance}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown normalization '" + std::string(s) + "'");
}

Activation parse_activation(std::string_view s) {
  for (auto v : {Activation::relu, Activation::selu}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

namespace {

CellKind parse_kind(std::string_view s) {
  for (auto v : {CellKind::initial, CellKind::encoder, CellKind::decoder}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown cell kind '" + std::string(s) + "'");
}

std::vector<CellKind> kinds_of(const GenomeLayout& layout) {
  std::vector<CellKind> kinds;
  for (const auto& c : layout.cells) kinds.push_back(c.kind);
  return kinds;
}

std::vector<CellKind> kinds_of(const ArchitectureGraph& graph) {
  std::vector<CellKind> kinds;
  for (const auto& c : graph.cells) kinds.push_back(c.kind);
  return kinds;
}

}  // namespace

std::size_t ArchitectureGraph::skip_edge_count() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.skip_sources.size();
  return n;
}

std::vector<int> scale_table(const std::vector<CellKind>& kinds) {
  FrameworkShape shape{kinds};
  build_layout(shape);  // order checks
  const int encoders = shape.encoder_count();
  const int decoders = shape.decoder_count();
  if (encoders != decoders) {
    throw ValidationError("unbalanced framework: " + std::to_string(encoders) + " encoders vs " +
                          std::to_string(decoders) + " decoders");
  }
  std::vector<int> scale;
  int level = 0;
  for (CellKind k : kinds) {
    if (k == CellKind::encoder) ++level;
    if (k == CellKind::decoder) --level;
    scale.push_back(1 << level);
  }
  return scale;
}

ArchitectureGraph decode(const Genotype& g, const GenomeLayout& layout, const DecodeOptions& options) {
  check_length(g, layout);
  if (!is_canonical(g, layout)) throw ValidationError("genome is not canonical (N2 set where N1 is 0)");
  if (options.input_channels <= 0 || options.base_channels <= 0) {
    throw ValidationError("channel counts must be positive");
  }

  ArchitectureGraph graph;
  graph.input_channels = options.input_channels;
  graph.scale = scale_table(kinds_of(layout));
  for (const CellField& field : layout.cells) {
    CellSpec cell;
    cell.index = field.cell_index;
    cell.kind = field.kind;
    if (field.kind == CellKind::encoder) {
      cell.sampling = g[field.sampling_bit()] ? Sampling::avg_pool : Sampling::max_pool;
    } else if (field.kind == CellKind::decoder) {
      cell.sampling = g[field.sampling_bit()] ? Sampling::transpose_conv : Sampling::bilinear;
    }
    if (g[field.norm_enabled_bit()]) {
      cell.normalization = g[field.norm_type_bit()] ? Normalization::instance : Normalization::batch;
    }
    cell.activation = g[field.activation_bit()] ? Activation::selu : Activation::relu;
    cell.shortcut = field.has_shortcut && g[field.shortcut_bit()];
    // SK_i points i cells back; collect ascending by source index.
    for (int i = field.skip_count; i >= 1; --i) {
      if (g[field.skip_bit(i)]) cell.skip_sources.push_back(field.cell_index - i);
    }
    graph.cells.push_back(std::move(cell));
    graph.channels.push_back(options.base_channels);
  }
  return graph;
}

Genotype encode(const ArchitectureGraph& graph, const GenomeLayout& layout) {
  if (auto report = validate(graph); !report.ok()) {
    throw ValidationError("invalid architecture: " + report.summary());
  }
  if (graph.cells.size() != layout.cells.size() || kinds_of(graph) != kinds_of(layout)) {
    throw ValidationError("architecture does not match genome layout");
  }
  Genotype g(layout.total_bits);
  for (std::size_t k = 0; k < graph.cells.size(); ++k) {
    const CellSpec& cell = graph.cells[k];
    const CellField& field = layout.cells[k];
    if (field.has_sampling) {
      g.set(field.sampling_bit(),
            cell.sampling == Sampling::avg_pool || cell.sampling == Sampling::transpose_conv);
    }
    g.set(field.norm_enabled_bit(), cell.normalization != Normalization::none);
    g.set(field.norm_type_bit(), cell.normalization == Normalization::instance);
    g.set(field.activation_bit(), cell.activation == Activation::selu);
    if (field.has_shortcut) g.set(field.shortcut_bit(), cell.shortcut);
    for (int src : cell.skip_sources) g.set(field.skip_bit(cell.index - src), true);
  }
  return g;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    const auto& v = violations[i];
    if (i) os << "; ";
    if (v.cell >= 0) os << "cell " << v.cell << " ";
    os << v.field << ": " << v.message;
  }
  return os.str();
}

ValidationReport validate(const ArchitectureGraph& graph) {
  ValidationReport report;
  auto add = [&](int cell, std::string field, std::string message) {
    report.violations.push_back({cell, std::move(field), std::move(message)});
  };

  const int n = static_cast<int>(graph.cells.size());
  if (n < 2) add(-1, "cells", "need at least 2 cells");
  if (graph.input_channels <= 0) add(-1, "input_channels", "must be positive");
  if (static_cast<int>(graph.channels.size()) != n) {
    add(-1, "channels", "expected one channel count per cell");
  } else {
    for (int k = 0; k < n; ++k) {
      if (graph.channels[k] <= 0) add(k, "channels", "must be positive");
    }
  }

  for (int k = 0; k < n; ++k) {
    const CellSpec& cell = graph.cells[k];
    if (cell.index != k) add(k, "index", "cell index " + std::to_string(cell.index) + " out of order");
    switch (cell.kind) {
      case CellKind::initial:
        if (k != 0) add(k, "kind", "initial cell must come first");
        if (cell.sampling != Sampling::none) add(k, "sampling", "initial cell has no sampling");
        if (cell.shortcut) add(k, "shortcut", "initial cell has no shortcut");
        if (!cell.skip_sources.empty()) add(k, "skip_sources", "initial cell has no skip inputs");
        break;
      case CellKind::encoder:
        if (cell.sampling != Sampling::max_pool && cell.sampling != Sampling::avg_pool) {
          add(k, "sampling", "encoder cell cannot use " + std::string(to_string(cell.sampling)));
        }
        break;
      case CellKind::decoder:
        if (cell.sampling != Sampling::bilinear && cell.sampling != Sampling::transpose_conv) {
          add(k, "sampling", "decoder cell cannot use " + std::string(to_string(cell.sampling)));
        }
        break;
    }
    int previous = -1;
    for (int src : cell.skip_sources) {
      if (src >= k) {
        add(k, "skip_sources", "forward skip from cell " + std::to_string(src));
      } else if (src < 0) {
        add(k, "skip_sources", "negative source " + std::to_string(src));
      } else if (src <= previous) {
        add(k, "skip_sources", "sources must be strictly ascending");
      }
      previous = src;
    }
  }

  if (n >= 1 && graph.cells[0].kind != CellKind::initial) {
    add(0, "kind", "first cell must be the initial cell");
  } else if (n >= 2) {
    try {
      const auto expected = scale_table(kinds_of(graph));
      if (graph.scale != expected) add(-1, "scale", "resolution table does not match the cell sequence");
    } catch (const ValidationError& e) {
      add(-1, "kind", e.what());
    }
  }
  return report;
}

ParameterCount parameter_count(const ArchitectureGraph& graph) {
  if (auto report = validate(graph); !report.ok()) {
    throw ValidationError("invalid architecture: " + report.summary());
  }
  auto conv = [](std::int64_t kernel_area, std::int64_t in, std::int64_t out) {
    return kernel_area * in * out + out;
  };

  ParameterCount count;
  for (std::size_t k = 0; k < graph.cells.size(); ++k) {
    const CellSpec& cell = graph.cells[k];
    const std::int64_t in = k == 0 ? graph.input_channels : graph.channels[k - 1];
    const std::int64_t out = graph.channels[k];

    std::int64_t params = 0;
    if (cell.sampling == Sampling::transpose_conv) params += conv(4, in, in);
    params += conv(9, in, out) + conv(9, out, out);
    if (cell.normalization != Normalization::none) params += 2 * (2 * out);
    count.per_cell.push_back(params);

    for (int src : cell.skip_sources) {
      const std::int64_t c_src = graph.channels[src];
      if (c_src != in) count.projections += conv(1, c_src, in);
    }
    if (cell.shortcut && in != out) count.projections += conv(1, in, out);
  }
  count.head = conv(1, graph.channels.back(), 1);
  count.total = count.projections + count.head;
  for (auto p : count.per_cell) count.total += p;
  return count;
}

nlohmann::ordered_json to_description(const ArchitectureGraph& graph) {
  if (auto report = validate(graph); !report.ok()) {
    throw ValidationError("invalid architecture: " + report.summary());
  }
  FrameworkShape shape{kinds_of(graph)};
  const GenomeLayout layout = build_layout(shape);

  using ojson = nlohmann::ordered_json;
  ojson doc;
  doc["genome"] = encode(graph, layout).str();
  doc["input_channels"] = graph.input_channels;
  doc["base_channels"] = graph.channels.front();
  ojson cells = ojson::array();
  ojson skips = ojson::array();
  for (std::size_t k = 0; k < graph.cells.size(); ++k) {
    const CellSpec& c = graph.cells[k];
    ojson cell;
    cell["index"] = c.index;
    cell["kind"] = to_string(c.kind);
    cell["sampling"] = to_string(c.sampling);
    cell["normalization"] = to_string(c.normalization);
    cell["activation"] = to_string(c.activation);
    cell["shortcut"] = c.shortcut;
    cell["skip_sources"] = c.skip_sources;
    cell["channels"] = graph.channels[k];
    cell["scale"] = graph.scale[k];
    cells.push_back(std::move(cell));
    for (int src : c.skip_sources) {
      ojson edge;
      edge["source"] = src;
      edge["target"] = c.index;
      edge["scale_ratio"] = static_cast<double>(graph.scale[k]) / graph.scale[src];
      skips.push_back(std::move(edge));
    }
  }
  doc["cells"] = std::move(cells);
  doc["fusion"] = "sum";
  doc["head"] = ojson{{"kind", "conv1x1"}, {"out_channels", 1}, {"activation", "sigmoid"}};
  doc["skip_edges"] = std::move(skips);
  doc["mismatch"] = ojson{{"resize", "nearest"}, {"channels", "conv1x1"}};
  doc["parameter_count"] = parameter_count(graph).total;
  return doc;
}

ArchitectureGraph parse_description(const nlohmann::json& doc) {
  try {
    ArchitectureGraph graph;
    graph.input_channels = doc.at("input_channels").get<int>();
    const int base = doc.at("base_channels").get<int>();
    for (const auto& c : doc.at("cells")) {
      CellSpec cell;
      cell.index = c.at("index").get<int>();
      cell.kind = parse_kind(c.at("kind").get<std::string>());
      cell.sampling = parse_sampling(c.at("sampling").get<std::string>());
      cell.normalization = parse_normalization(c.at("normalization").get<std::string>());
      cell.activation = parse_activation(c.at("activation").get<std::string>());
      cell.shortcut = c.at("shortcut").get<bool>();
      cell.skip_sources = c.at("skip_sources").get<std::vector<int>>();
      graph.channels.push_back(c.contains("channels") ? c.at("channels").get<int>() : base);
      graph.cells.push_back(std::move(cell));
    }
    std::vector<CellKind> kinds = kinds_of(graph);
    graph.scale = scale_table(kinds);
    if (auto report = validate(graph); !report.ok()) {
      throw ValidationError("invalid architecture: " + report.summary());
    }
    const GenomeLayout layout = build_layout(FrameworkShape{kinds});
    if (doc.contains("genome") &&
        Genotype::parse(doc.at("genome").get<std::string>()) != encode(graph, layout)) {
      throw ValidationError("description genome disagrees with its cells");
    }
    return graph;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed architecture description: ") + e.what());
  }
}

}  // namespace evonas
