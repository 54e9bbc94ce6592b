#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "evonas/evaluation.hpp"
#include "evonas/genome.hpp"
#include "evonas/rng.hpp"

namespace evonas {

enum class InitMethod { rich, random };

// Three-stage (mu + lambda) schedule. Stage s runs stage_lengths[s-1]
// generations with mu = lambda = mu_schedule[s-1].
struct EvolutionConfig {
  std::vector<int> mu_schedule{18, 8, 4};
  std::vector<int> stage_lengths{20, 15, 10};
  std::vector<int> crossover_stages{1, 2};
  std::vector<double> p_i{0.4, 0.4, 1.0};
  std::vector<double> p_b{0.1, 0.1, 0.05};
  std::uint64_t seed = 1;
  FrameworkShape framework = FrameworkShape::standard();
  InitMethod init = InitMethod::rich;

  // Throws ValidationError naming the first broken rule.
  void validate() const;
  int total_generations() const;
  bool uses_crossover(int stage) const;
  // Evaluation requests of a full run: initial population plus every offspring.
  std::uint64_t evaluation_budget() const;
};

nlohmann::ordered_json to_json(const EvolutionConfig& c);
// Missing keys take defaults; unknown keys are rejected.
EvolutionConfig evolution_config_from_json(const nlohmann::json& j);

struct EvalMeta {
  FitnessSource source = FitnessSource::surrogate;
  double duration = 0.0;
  int generation_born = 0;
};

struct Individual {
  Genotype genotype;
  std::optional<double> fitness;
  EvalMeta meta;
};

struct HistoryRecord {
  int generation = 0;
  int stage = 1;
  int mu = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  std::string best_genome;
  std::vector<std::string> population;

  friend bool operator==(const HistoryRecord&, const HistoryRecord&) = default;
};

// One line of the history log; population genomes are kept in checkpoints only.
nlohmann::ordered_json history_line(const HistoryRecord& r);

struct EvolutionState {
  int generation = 0;
  int stage = 1;
  std::vector<Individual> population;
  RngStream rng;
  std::vector<HistoryRecord> history;
};

struct StageInfo {
  int stage;
  int mu;
};

// Stage boundaries are cumulative: stage 1 covers g in [1, N1], stage 2
// (N1, N1+N2], stage 3 (N1+N2, N1+N2+N3].
StageInfo stage_of(int generation, const EvolutionConfig& config);

// Top k by fitness; ties go to the earlier generation_born, then the
// lexicographically smaller genome string.
std::vector<Individual> select_best(std::vector<Individual> pool, std::size_t k);

// Generation 0: mu_schedule[0] initial genomes, not yet evaluated.
EvolutionState initialize_population(const EvolutionConfig& config);

// Evaluates the generation-0 population and records its history entry.
void evaluate_initial(EvolutionState& state, const EvolutionConfig& config, EvaluationService& service);

// Advances one generation: truncation at stage entry, variation, evaluation,
// elitist survivor selection.
void step_generation(EvolutionState& state, const EvolutionConfig& config, EvaluationService& service);

struct RunOptions {
  std::filesystem::path checkpoint_path;  // empty => no checkpoints
  std::filesystem::path history_path;     // empty => no history file
  // Return after this generation has completed (simulated interruption).
  std::optional<int> stop_after;
  // Opaque document stored alongside the evolution config in checkpoints.
  nlohmann::json run_config;
  std::function<void(const EvolutionState&)> on_generation;
};

struct RunResult {
  Individual best;
  std::vector<HistoryRecord> history;
  bool finished = false;
};

RunResult run(const EvolutionConfig& config, EvaluationService& service, const RunOptions& options = {});

// Continues from any state produced by initialize_population/evaluate_initial
// or restored from a checkpoint.
RunResult continue_run(EvolutionState& state, const EvolutionConfig& config, EvaluationService& service,
                       const RunOptions& options = {});

// Checkpoint file: config, generation, stage, rng state, population, history,
// fitness cache, evaluation counters and failure log.
struct Checkpoint {
  EvolutionConfig config;
  EvolutionState state;
  std::vector<FitnessRecord> cache;
  EvaluationStats stats;
  std::vector<EvaluationFailure> failures;
  nlohmann::json run_config;
};

nlohmann::ordered_json to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

// Written via temp file + rename so readers never observe a partial file.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_history(const std::filesystem::path& path, const std::vector<HistoryRecord>& history);
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace evonas
