#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "evonas/architecture.hpp"
#include "evonas/genome.hpp"

namespace evonas {

class WorkerPool;

enum class FitnessSource { surrogate, worker };
std::string_view to_string(FitnessSource s);
FitnessSource parse_fitness_source(std::string_view s);

struct FitnessRecord {
  std::string genome_key;  // canonical genome string
  double fitness = 0.0;
  nlohmann::json metrics;  // null when the evaluator reported none
  FitnessSource source = FitnessSource::surrogate;
  double duration = 0.0;  // seconds
  int epochs_run = 0;
  // Non-empty for failed evaluations, which carry fitness 0 and are never cached.
  std::string failure;

  bool failed() const { return !failure.empty(); }
};

nlohmann::ordered_json to_json(const FitnessRecord& r);
FitnessRecord fitness_record_from_json(const nlohmann::json& j);

// Worker-side training parameters, forwarded verbatim in every request.
struct TrainConfig {
  int epochs = 100;
  int batch_size = 2;
  double learning_rate = 0.001;
  // Lookahead wrapping Adam.
  double lookahead_alpha = 0.5;
  int lookahead_k = 6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double grad_clip_l1 = 0.1;
  double focal_w = 0.55;
  double focal_gamma = 2.0;
  int early_stop_patience = 20;
  // F1 counts as unchanged when |delta| against the best seen is below this.
  double early_stop_tolerance = 1e-4;
  double input_min = -1.0;
  double input_max = 1.0;
  std::string dataset_path;  // empty => worker's synthetic set
  std::string eval_split = "test";
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& c);
// Accepts any subset of the keys produced by to_json; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

// Fraction of set bits.
double surrogate_onemax(const Genotype& g);

// 0.7 * (skip edges / max skip edges) + 0.3 * (1 - params / max params), where
// max params is the all-transpose-conv, all-normalized network.
double surrogate_connectivity(const Genotype& g, const GenomeLayout& layout,
                              const DecodeOptions& options = {});

// Canonical-genome keyed fitness store; safe for concurrent use.
class FitnessCache {
 public:
  std::optional<FitnessRecord> lookup(const std::string& key) const;
  // Idempotent for an identical fitness; a different fitness for a stored key
  // throws CacheConflict.
  void store(const FitnessRecord& record);
  std::size_t size() const;
  // Snapshot ordered by key.
  std::vector<FitnessRecord> records() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::map<std::string, FitnessRecord> records_;
};

struct EvaluationFailure {
  std::string genome_key;
  std::string reason;
  int generation = 0;
};

nlohmann::ordered_json to_json(const EvaluationFailure& f);
EvaluationFailure evaluation_failure_from_json(const nlohmann::json& j);

// Computes fitness for a batch of distinct canonical genomes. Results are
// returned in input order; failures are returned as failed records.
class FitnessBackend {
 public:
  virtual ~FitnessBackend() = default;
  virtual std::vector<FitnessRecord> evaluate(std::span<const Genotype> genomes) = 0;
};

enum class SurrogateKind { onemax, connectivity };

class SurrogateBackend final : public FitnessBackend {
 public:
  SurrogateBackend(SurrogateKind kind, GenomeLayout layout, DecodeOptions options = {});
  std::vector<FitnessRecord> evaluate(std::span<const Genotype> genomes) override;

 private:
  SurrogateKind kind_;
  GenomeLayout layout_;
  DecodeOptions options_;
};

// Sends each genome's architecture description and the train config to the
// worker pool and collects F1 fitness.
class WorkerBackend final : public FitnessBackend {
 public:
  WorkerBackend(WorkerPool& pool, GenomeLayout layout, TrainConfig train, DecodeOptions options = {});
  std::vector<FitnessRecord> evaluate(std::span<const Genotype> genomes) override;

 private:
  WorkerPool& pool_;
  GenomeLayout layout_;
  TrainConfig train_;
  DecodeOptions options_;
};

// Evaluates the unseen genomes of a batch on the worker pool. Duplicates and
// cached genomes are not dispatched; successful results are stored in `cache`.
// Returns one record per input genome, in input order.
std::vector<FitnessRecord> dispatch_evaluations(std::span<const Genotype> genomes,
                                                const GenomeLayout& layout, const TrainConfig& train,
                                                WorkerPool& pool, FitnessCache& cache,
                                                const DecodeOptions& options = {});

struct EvaluationStats {
  std::uint64_t requests = 0;             // genomes asked for
  std::uint64_t cache_hits = 0;           // answered from cache or batch duplicates
  std::uint64_t backend_evaluations = 0;  // genomes sent to the backend
  std::uint64_t failures = 0;

  friend bool operator==(const EvaluationStats&, const EvaluationStats&) = default;
};

nlohmann::ordered_json to_json(const EvaluationStats& s);
EvaluationStats evaluation_stats_from_json(const nlohmann::json& j);

// Cache in front of a backend, with failure bookkeeping.
class EvaluationService {
 public:
  using Logger = std::function<void(const std::string&)>;

  explicit EvaluationService(FitnessBackend& backend, Logger log = {});

  // One record per input genome. Genomes must be canonical.
  std::vector<FitnessRecord> evaluate(std::span<const Genotype> genomes, int generation);

  FitnessCache& cache() { return cache_; }
  const FitnessCache& cache() const { return cache_; }
  const EvaluationStats& stats() const { return stats_; }
  const std::vector<EvaluationFailure>& failures() const { return failures_; }

  // Restores cache, counters and failure log from a checkpoint.
  void restore(std::span<const FitnessRecord> cached, const EvaluationStats& stats,
               std::vector<EvaluationFailure> failures);

 private:
  FitnessBackend& backend_;
  Logger log_;
  FitnessCache cache_;
  EvaluationStats stats_;
  std::vector<EvaluationFailure> failures_;
};

// Worker command from the config value, falling back to EVONAS_WORKER_CMD.
std::string resolve_worker_command(const std::string& configured);

}  // namespace evonas
