#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evonas/architecture.hpp"
#include "evonas/error.hpp"
#include "evonas/evaluation.hpp"
#include "evonas/evolution.hpp"
#include "evonas/genome.hpp"
#include "evonas/metrics.hpp"

namespace py = pybind11;
using namespace evonas;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

GenomeLayout layout_for(int encoders, int decoders) {
  return build_layout(FrameworkShape::u_like(encoders, decoders));
}

Genotype checked(const std::string& genome, const GenomeLayout& layout) {
  Genotype g = Genotype::parse(genome);
  check_length(g, layout);
  return g;
}

std::span<const double> view(const DoubleArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }
std::span<const std::uint8_t> view(const ByteArray& a) {
  return {a.data(), static_cast<std::size_t>(a.size())};
}

std::span<const std::uint8_t> view(const std::optional<ByteArray>& a) {
  return a ? view(*a) : std::span<const std::uint8_t>{};
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["tp"] = r.counts.tp;
  d["fp"] = r.counts.fp;
  d["tn"] = r.counts.tn;
  d["fn"] = r.counts.fn;
  d["acc"] = r.acc;
  d["se"] = r.se;
  d["sp"] = r.sp;
  d["f1"] = r.f1;
  d["auroc"] = r.auroc ? py::cast(*r.auroc) : py::none();
  d["threshold"] = r.threshold;
  d["degenerate"] = r.degenerate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_evonas, m) {
  m.doc() = "Evolutionary architecture search core";

  // Later registrations are tried first, so derived types follow the base.
  auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());
  py::register_exception<PoolFailure>(m, "PoolFailure", base.ptr());

  m.def("genome_length", [](int encoders, int decoders) { return layout_for(encoders, decoders).total_bits; },
        py::arg("encoders") = 3, py::arg("decoders") = 3);

  m.def(
      "canonicalize",
      [](const std::string& genome, int encoders, int decoders) {
        const auto layout = layout_for(encoders, decoders);
        return canonicalize(checked(genome, layout), layout).str();
      },
      py::arg("genome"), py::arg("encoders") = 3, py::arg("decoders") = 3);

  m.def(
      "describe",
      [](const std::string& genome, int encoders, int decoders, int input_channels, int base_channels) {
        const auto layout = layout_for(encoders, decoders);
        const Genotype g = canonicalize(checked(genome, layout), layout);
        return to_description(decode(g, layout, {input_channels, base_channels})).dump();
      },
      py::arg("genome"), py::arg("encoders") = 3, py::arg("decoders") = 3,
      py::arg("input_channels") = kDefaultInputChannels, py::arg("base_channels") = kDefaultChannels);

  m.def(
      "parameter_count",
      [](const std::string& genome, int encoders, int decoders, int input_channels, int base_channels) {
        const auto layout = layout_for(encoders, decoders);
        const Genotype g = canonicalize(checked(genome, layout), layout);
        const auto c = parameter_count(decode(g, layout, {input_channels, base_channels}));
        py::dict d;
        d["per_cell"] = c.per_cell;
        d["projections"] = c.projections;
        d["head"] = c.head;
        d["total"] = c.total;
        return d;
      },
      py::arg("genome"), py::arg("encoders") = 3, py::arg("decoders") = 3,
      py::arg("input_channels") = kDefaultInputChannels, py::arg("base_channels") = kDefaultChannels);

  m.def("onemax", [](const std::string& genome) { return surrogate_onemax(Genotype::parse(genome)); });

  m.def(
      "connectivity",
      [](const std::string& genome, int encoders, int decoders) {
        const auto layout = layout_for(encoders, decoders);
        return surrogate_connectivity(canonicalize(checked(genome, layout), layout), layout);
      },
      py::arg("genome"), py::arg("encoders") = 3, py::arg("decoders") = 3);

  m.def(
      "metrics",
      [](const DoubleArray& probs, const ByteArray& gt, const std::optional<ByteArray>& mask, double threshold) {
        const auto counts = confusion(view(probs), view(gt), view(mask), threshold);
        std::optional<double> area;
        try {
          area = auroc(view(probs), view(gt), view(mask));
        } catch (const ValidationError&) {
        }
        return report_dict(report(counts, area, threshold));
      },
      py::arg("probs"), py::arg("gt"), py::arg("mask") = py::none(), py::arg("threshold") = kDefaultThreshold);

  m.def(
      "auroc",
      [](const DoubleArray& probs, const ByteArray& gt, const std::optional<ByteArray>& mask) {
        return auroc(view(probs), view(gt), view(mask));
      },
      py::arg("probs"), py::arg("gt"), py::arg("mask") = py::none());

  m.def(
      "focal_loss",
      [](const DoubleArray& probs, const ByteArray& gt, double alpha, double omega) {
        const auto l = focal_loss(view(probs), view(gt), alpha, omega);
        return py::make_tuple(l.sum, l.mean);
      },
      py::arg("probs"), py::arg("gt"), py::arg("alpha") = kFocalAlpha, py::arg("omega") = kFocalGamma);

  m.def(
      "search",
      [](const std::string& config_json, const std::string& evaluator) {
        const EvolutionConfig config = evolution_config_from_json(nlohmann::json::parse(config_json));
        config.validate();
        SurrogateKind kind;
        if (evaluator == "onemax") {
          kind = SurrogateKind::onemax;
        } else if (evaluator == "connectivity") {
          kind = SurrogateKind::connectivity;
        } else {
          throw ValidationError("evaluator must be onemax or connectivity, got " + evaluator);
        }
        RunResult result;
        EvaluationStats stats;
        {
          py::gil_scoped_release release;
          SurrogateBackend backend(kind, build_layout(config.framework));
          EvaluationService service(backend);
          result = run(config, service);
          stats = service.stats();
        }
        py::list history;
        for (const auto& r : result.history) history.append(history_line(r).dump());
        py::dict d;
        d["best_genome"] = result.best.genotype.str();
        d["best_fitness"] = *result.best.fitness;
        d["history"] = history;
        d["requests"] = stats.requests;
        d["cache_hits"] = stats.cache_hits;
        return d;
      },
      py::arg("config_json") = "{}", py::arg("evaluator") = "onemax");
}
