#include "evonas/cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>

#include "evonas/architecture.hpp"
#include "evonas/evaluation.hpp"
#include "evonas/evolution.hpp"
#include "evonas/image_io.hpp"
#include "evonas/metrics.hpp"
#include "evonas/run_config.hpp"
#include "evonas/worker_pool.hpp"

namespace evonas::cli {

namespace fs = std::filesystem;

namespace {

struct Outputs {
  fs::path dir;
  fs::path checkpoint() const { return dir / "checkpoint.json"; }
  fs::path history() const { return dir / "history.jsonl"; }
  fs::path failures() const { return dir / "failures.jsonl"; }
  fs::path best_genome() const { return dir / "best.genome"; }
  fs::path best_architecture() const { return dir / "best.architecture"; }
};

void apply_overrides(RunConfigFile& config, const GlobalOptions& options) {
  if (options.seed) config.evolution.seed = *options.seed;
  if (options.output_dir) config.output_dir = *options.output_dir;
  if (options.workers) {
    if (*options.workers < 1) throw ValidationError("--workers must be >= 1");
    config.evaluator.pool_size = *options.workers;
  }
}

void write_failures(const fs::path& path, const std::vector<EvaluationFailure>& failures) {
  std::string text;
  for (const auto& f : failures) text += to_json(f).dump() + "\n";
  write_file_atomic(path, text);
}

// Owns whatever backs fitness evaluation for one search process.
struct Evaluator {
  std::unique_ptr<WorkerPool> pool;
  std::unique_ptr<FitnessBackend> backend;
  std::unique_ptr<EvaluationService> service;
};

Evaluator make_evaluator(const RunConfigFile& config, const GlobalOptions& options, std::ostream& err) {
  Evaluator e;
  EvaluationService::Logger log;
  if (!options.quiet) log = [&err](const std::string& m) { err << "evonas: " << m << "\n"; };
  const GenomeLayout layout = build_layout(config.evolution.framework);
  switch (config.evaluator.kind) {
    case EvaluatorKind::onemax:
      e.backend = std::make_unique<SurrogateBackend>(SurrogateKind::onemax, layout, config.architecture);
      break;
    case EvaluatorKind::connectivity:
      e.backend = std::make_unique<SurrogateBackend>(SurrogateKind::connectivity, layout, config.architecture);
      break;
    case EvaluatorKind::worker: {
      WorkerPoolOptions pool;
      pool.command = resolve_worker_command(config.evaluator.worker_cmd);
      if (pool.command.empty()) {
        throw ValidationError("worker evaluator needs evaluator.worker_cmd or EVONAS_WORKER_CMD");
      }
      pool.size = config.evaluator.pool_size;
      pool.timeout_s = config.evaluator.timeout_s;
      pool.handshake_timeout_s = config.evaluator.handshake_timeout_s;
      pool.max_restarts = config.evaluator.max_restarts;
      pool.log = log ? log : [](const std::string&) {};
      e.pool = std::make_unique<WorkerPool>(std::move(pool));
      e.backend = std::make_unique<WorkerBackend>(*e.pool, layout, config.train, config.architecture);
      break;
    }
  }
  e.service = std::make_unique<EvaluationService>(*e.backend, log);
  return e;
}

int drive(const RunConfigFile& config, const GlobalOptions& options, EvolutionState* resumed,
          const Checkpoint* checkpoint, std::ostream& out, std::ostream& err) {
  const Outputs outputs{config.output_dir};
  Evaluator evaluator = make_evaluator(config, options, err);
  if (checkpoint) evaluator.service->restore(checkpoint->cache, checkpoint->stats, checkpoint->failures);

  RunOptions run_options;
  run_options.checkpoint_path = outputs.checkpoint();
  run_options.history_path = outputs.history();
  run_options.stop_after = options.stop_after;
  run_options.run_config = to_json(config);
  const EvaluationService& service = *evaluator.service;
  run_options.on_generation = [&](const EvolutionState& state) {
    write_failures(outputs.failures(), service.failures());
    if (!options.quiet) {
      const auto& r = state.history.back();
      err << "generation " << r.generation << " stage " << r.stage << " mu " << r.mu << " best "
          << r.best_fitness << " mean " << r.mean_fitness << "\n";
    }
  };

  fs::create_directories(outputs.dir);
  RunResult result;
  if (resumed) {
    // Rewrites history and failure files from the checkpoint before continuing.
    write_history(outputs.history(), resumed->history);
    write_failures(outputs.failures(), service.failures());
    result = continue_run(*resumed, config.evolution, *evaluator.service, run_options);
  } else {
    result = run(config.evolution, *evaluator.service, run_options);
  }

  if (result.finished) {
    const GenomeLayout layout = build_layout(config.evolution.framework);
    write_file_atomic(outputs.best_genome(), result.best.genotype.str() + "\n");
    const auto graph = decode(result.best.genotype, layout, config.architecture);
    write_file_atomic(outputs.best_architecture(), to_description(graph).dump(2) + "\n");
  }
  nlohmann::ordered_json summary;
  summary["status"] = result.finished ? "finished" : "stopped";
  summary["generation"] = result.history.back().generation;
  summary["best_fitness"] = *result.best.fitness;
  summary["best_genome"] = result.best.genotype.str();
  summary["evaluations"] = to_json(service.stats());
  summary["output_dir"] = outputs.dir.string();
  out << summary.dump() << "\n";
  return kExitOk;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const PoolFailure& e) {
    err << "evonas: evaluator pool failed: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const CheckpointError& e) {
    err << "evonas: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const ValidationError& e) {
    err << "evonas: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "evonas: " << e.what() << "\n";
    return kExitRuntime;
  }
}

nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["tn"] = r.counts.tn;
  j["fn"] = r.counts.fn;
  j["acc"] = r.acc;
  j["se"] = r.se;
  j["sp"] = r.sp;
  j["f1"] = r.f1;
  j["auroc"] = r.auroc ? nlohmann::ordered_json(*r.auroc) : nlohmann::ordered_json(nullptr);
  j["threshold"] = r.threshold;
  j["degenerate"] = r.degenerate;
  return j;
}

nlohmann::ordered_json score(std::span<const double> probs, std::span<const std::uint8_t> gt,
                             std::span<const std::uint8_t> mask, double threshold, const std::string& label,
                             std::ostream& err) {
  const ConfusionCounts counts = confusion(probs, gt, mask, threshold);
  std::optional<double> area;
  try {
    area = auroc(probs, gt, mask);
  } catch (const ValidationError&) {
    err << "evonas: warning: AUROC undefined for " << label << " (single class)\n";
  }
  if (counts.total() == 0) {
    err << "evonas: warning: no pixels selected for " << label << "\n";
    nlohmann::ordered_json empty;
    empty["tp"] = empty["fp"] = empty["tn"] = empty["fn"] = 0;
    empty["auroc"] = nullptr;
    return empty;
  }
  return to_json(report(counts, area, threshold));
}

void write_curve(const std::string& path, const char* header, const std::vector<std::pair<double, double>>& pts) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out.precision(17);
  out << header << "\n";
  for (const auto& [x, y] : pts) out << x << "," << y << "\n";
}

}  // namespace

int cmd_search(const GlobalOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfigFile config = options.config ? load_run_config(*options.config) : RunConfigFile{};
    apply_overrides(config, options);
    config.evolution.validate();
    return drive(config, options, nullptr, nullptr, out, err);
  });
}

int cmd_resume(const std::string& checkpoint_path, const GlobalOptions& options, std::ostream& out,
               std::ostream& err) {
  Checkpoint checkpoint;
  try {
    checkpoint = load_checkpoint(checkpoint_path);
  } catch (const CheckpointError& e) {
    err << "evonas: " << e.what() << "\n";
    return kExitUsage;
  }
  return guarded(err, [&] {
    RunConfigFile config;
    if (!checkpoint.run_config.is_null()) config = parse_run_config(checkpoint.run_config);
    config.evolution = checkpoint.config;
    // Continue next to the checkpoint unless told otherwise.
    config.output_dir = fs::path(checkpoint_path).parent_path().string();
    if (config.output_dir.empty()) config.output_dir = ".";
    GlobalOptions adjusted = options;
    adjusted.seed.reset();  // the rng state comes from the checkpoint
    apply_overrides(config, adjusted);
    return drive(config, options, &checkpoint.state, &checkpoint, out, err);
  });
}

int cmd_decode(const std::string& genome, const GlobalOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfigFile config = options.config ? load_run_config(*options.config) : RunConfigFile{};
    const GenomeLayout layout = build_layout(config.evolution.framework);
    Genotype g = Genotype::parse(genome);
    check_length(g, layout);
    if (!is_canonical(g, layout)) {
      err << "evonas: warning: genome is not canonical (N2 set without N1); canonicalizing\n";
      g = canonicalize(g, layout);
    }
    const ArchitectureGraph graph = decode(g, layout, config.architecture);
    const ParameterCount params = parameter_count(graph);
    out << to_description(graph).dump(2) << "\n";
    nlohmann::ordered_json p;
    p["per_cell"] = params.per_cell;
    p["projections"] = params.projections;
    p["head"] = params.head;
    p["total"] = params.total;
    out << nlohmann::ordered_json{{"parameters", p}}.dump() << "\n";
    return kExitOk;
  });
}

int cmd_metrics(const MetricsArgs& args, const GlobalOptions&, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(args.threshold > 0.0 && args.threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
    const auto pred = read_probability_map(args.prediction);
    const auto gt = read_binary_pgm(args.ground_truth);
    if (!pred.same_shape(gt.width, gt.height)) {
      throw ValidationError("shape mismatch: prediction " + std::to_string(pred.width) + "x" +
                            std::to_string(pred.height) + " vs ground truth " + std::to_string(gt.width) + "x" +
                            std::to_string(gt.height));
    }
    std::optional<Plane<std::uint8_t>> mask;
    if (args.mask) {
      mask = read_binary_pgm(*args.mask);
      if (!mask->same_shape(gt.width, gt.height)) throw ValidationError("shape mismatch: mask");
    }

    nlohmann::ordered_json doc;
    doc["width"] = gt.width;
    doc["height"] = gt.height;
    doc["threshold"] = args.threshold;
    doc["all_pixels"] = score(pred.pixels, gt.pixels, {}, args.threshold, "all pixels", err);
    std::span<const std::uint8_t> mask_span;
    if (mask) {
      mask_span = mask->pixels;
      doc["masked"] = score(pred.pixels, gt.pixels, mask_span, args.threshold, "masked pixels", err);
    }
    out << doc.dump(2) << "\n";

    if (args.roc_out || args.pr_out) {
      try {
        const CurvePoints curves = curve_points(pred.pixels, gt.pixels, mask_span);
        if (args.roc_out) write_curve(*args.roc_out, "fpr,tpr", curves.roc);
        if (args.pr_out) write_curve(*args.pr_out, "recall,precision", curves.pr);
      } catch (const ValidationError& e) {
        err << "evonas: warning: curves not written: " << e.what() << "\n";
      }
    }
    return kExitOk;
  });
}

}  // namespace evonas::cli
