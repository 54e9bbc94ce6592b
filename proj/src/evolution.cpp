#include "evonas/evolution.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include <unistd.h>

#include "evonas/architecture.hpp"

namespace evonas {

namespace {

constexpr const char* kCheckpointFormat = "evonas-checkpoint";
constexpr int kCheckpointVersion = 1;

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

std::string_view to_string(InitMethod m) { return m == InitMethod::rich ? "rich" : "random"; }

InitMethod parse_init(const std::string& s) {
  if (s == "rich") return InitMethod::rich;
  if (s == "random") return InitMethod::random;
  throw ValidationError("evolution.init must be 'rich' or 'random', got '" + s + "'");
}

HistoryRecord record_generation(const EvolutionState& state, int stage, int mu) {
  HistoryRecord r;
  r.generation = state.generation;
  r.stage = stage;
  r.mu = mu;
  double sum = 0.0;
  for (const auto& ind : state.population) {
    sum += *ind.fitness;
    r.population.push_back(ind.genotype.str());
  }
  r.best_fitness = *state.population.front().fitness;
  r.best_genome = state.population.front().genotype.str();
  r.mean_fitness = sum / static_cast<double>(state.population.size());
  return r;
}

std::vector<Individual> evaluate_batch(std::vector<Genotype> genomes, int generation, EvaluationService& service) {
  const auto records = service.evaluate(genomes, generation);
  std::vector<Individual> out;
  out.reserve(genomes.size());
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    Individual ind;
    ind.genotype = std::move(genomes[i]);
    ind.fitness = records[i].fitness;
    ind.meta.source = records[i].source;
    ind.meta.duration = records[i].duration;
    ind.meta.generation_born = generation;
    out.push_back(std::move(ind));
  }
  return out;
}

void persist(const EvolutionState& state, const EvolutionConfig& config, const EvaluationService& service,
             const RunOptions& options) {
  if (!options.checkpoint_path.empty()) {
    save_checkpoint(options.checkpoint_path,
                    Checkpoint{config, state, service.cache().records(), service.stats(), service.failures(),
                               options.run_config});
  }
  if (!options.history_path.empty()) write_history(options.history_path, state.history);
  if (options.on_generation) options.on_generation(state);
}

}  // namespace

void EvolutionConfig::validate() const {
  auto three = [](std::size_t n, const char* name) {
    if (n != 3) throw ValidationError(std::string("evolution.") + name + " must have exactly 3 entries");
  };
  three(mu_schedule.size(), "mu_schedule");
  three(stage_lengths.size(), "stage_lengths");
  three(p_i.size(), "p_i");
  three(p_b.size(), "p_b");
  for (int mu : mu_schedule) {
    if (mu < 1) throw ValidationError("evolution.mu_schedule entries must be >= 1");
  }
  if (!(mu_schedule[0] > mu_schedule[1] && mu_schedule[1] > mu_schedule[2])) {
    throw ValidationError("evolution.mu_schedule must be strictly decreasing");
  }
  for (int n : stage_lengths) {
    if (n < 0) throw ValidationError("evolution.stage_lengths entries must be >= 0");
  }
  for (double p : p_i) detail::check_probability(p, "evolution.p_i");
  for (double p : p_b) detail::check_probability(p, "evolution.p_b");
  for (int s : crossover_stages) {
    if (s < 1 || s > 3) throw ValidationError("evolution.crossover_stages entries must be 1, 2 or 3");
  }
  const GenomeLayout layout = build_layout(framework);
  std::vector<CellKind> kinds;
  for (const auto& c : layout.cells) kinds.push_back(c.kind);
  scale_table(kinds);
}

int EvolutionConfig::total_generations() const {
  return std::accumulate(stage_lengths.begin(), stage_lengths.end(), 0);
}

bool EvolutionConfig::uses_crossover(int stage) const {
  return std::find(crossover_stages.begin(), crossover_stages.end(), stage) != crossover_stages.end();
}

std::uint64_t EvolutionConfig::evaluation_budget() const {
  std::uint64_t budget = static_cast<std::uint64_t>(mu_schedule[0]);
  for (int s = 0; s < 3; ++s) {
    budget += static_cast<std::uint64_t>(stage_lengths[s]) * static_cast<std::uint64_t>(mu_schedule[s]);
  }
  return budget;
}

nlohmann::ordered_json to_json(const EvolutionConfig& c) {
  nlohmann::ordered_json j;
  j["mu_schedule"] = c.mu_schedule;
  j["stage_lengths"] = c.stage_lengths;
  j["crossover_stages"] = c.crossover_stages;
  j["p_i"] = c.p_i;
  j["p_b"] = c.p_b;
  j["seed"] = c.seed;
  j["framework"] = {{"encoders", c.framework.encoder_count()}, {"decoders", c.framework.decoder_count()}};
  j["init"] = to_string(c.init);
  return j;
}

EvolutionConfig evolution_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> allowed{"mu_schedule", "stage_lengths", "crossover_stages", "p_i",
                                             "p_b",         "seed",          "framework",        "init"};
  if (!j.is_object()) throw ValidationError("evolution config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ValidationError("unknown key '" + key + "' in evolution");
  }
  EvolutionConfig c;
  try {
    take(j, "mu_schedule", c.mu_schedule);
    take(j, "stage_lengths", c.stage_lengths);
    take(j, "crossover_stages", c.crossover_stages);
    take(j, "p_i", c.p_i);
    take(j, "p_b", c.p_b);
    take(j, "seed", c.seed);
    if (auto it = j.find("framework"); it != j.end()) {
      for (const auto& [key, value] : it->items()) {
        if (key != "encoders" && key != "decoders") {
          throw ValidationError("unknown key '" + key + "' in evolution.framework");
        }
      }
      c.framework = FrameworkShape::u_like(it->value("encoders", 3), it->value("decoders", 3));
    }
    if (auto it = j.find("init"); it != j.end()) c.init = parse_init(it->get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad evolution config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json history_line(const HistoryRecord& r) {
  nlohmann::ordered_json j;
  j["generation"] = r.generation;
  j["stage"] = r.stage;
  j["mu"] = r.mu;
  j["best_fitness"] = r.best_fitness;
  j["mean_fitness"] = r.mean_fitness;
  j["best_genome"] = r.best_genome;
  return j;
}

StageInfo stage_of(int generation, const EvolutionConfig& config) {
  const int n1 = config.stage_lengths.at(0);
  const int n2 = config.stage_lengths.at(1);
  const int total = config.total_generations();
  if (generation < 1 || generation > total) {
    throw ValidationError("generation " + std::to_string(generation) + " outside 1.." + std::to_string(total));
  }
  const int stage = generation <= n1 ? 1 : generation <= n1 + n2 ? 2 : 3;
  return {stage, config.mu_schedule.at(static_cast<std::size_t>(stage - 1))};
}

std::vector<Individual> select_best(std::vector<Individual> pool, std::size_t k) {
  if (k > pool.size()) {
    throw ValidationError("cannot select " + std::to_string(k) + " of " + std::to_string(pool.size()));
  }
  struct Keyed {
    double fitness;
    int born;
    std::string genome;
    std::size_t index;
  };
  std::vector<Keyed> keys;
  keys.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].fitness) throw ValidationError("unevaluated individual in selection pool");
    keys.push_back({*pool[i].fitness, pool[i].meta.generation_born, pool[i].genotype.str(), i});
  }
  std::stable_sort(keys.begin(), keys.end(), [](const Keyed& a, const Keyed& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    if (a.born != b.born) return a.born < b.born;
    return a.genome < b.genome;
  });
  std::vector<Individual> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(std::move(pool[keys[i].index]));
  return out;
}

EvolutionState initialize_population(const EvolutionConfig& config) {
  config.validate();
  const GenomeLayout layout = build_layout(config.framework);
  EvolutionState state;
  state.rng = RngStream(config.seed);
  for (int i = 0; i < config.mu_schedule[0]; ++i) {
    Individual ind;
    ind.genotype = config.init == InitMethod::rich ? rich_init_genome(layout, state.rng)
                                                   : random_genome(layout, state.rng);
    state.population.push_back(std::move(ind));
  }
  return state;
}

void evaluate_initial(EvolutionState& state, const EvolutionConfig& config, EvaluationService& service) {
  std::vector<Genotype> genomes;
  for (const auto& ind : state.population) genomes.push_back(ind.genotype);
  auto evaluated = evaluate_batch(std::move(genomes), 0, service);
  const std::size_t n = evaluated.size();
  state.population = select_best(std::move(evaluated), n);
  state.generation = 0;
  state.stage = 1;
  state.history.clear();
  state.history.push_back(record_generation(state, 1, config.mu_schedule[0]));
}

void step_generation(EvolutionState& state, const EvolutionConfig& config, EvaluationService& service) {
  const int g = state.generation + 1;
  const auto [stage, mu] = stage_of(g, config);
  const GenomeLayout layout = build_layout(config.framework);

  // Entering a later stage keeps only the best individuals, one stage at a time.
  while (state.stage < stage) {
    ++state.stage;
    const auto keep = std::min<std::size_t>(static_cast<std::size_t>(config.mu_schedule[state.stage - 1]),
                                            state.population.size());
    state.population = select_best(std::move(state.population), keep);
  }

  const auto& parents = state.population;
  std::vector<Genotype> children;
  if (config.uses_crossover(stage)) {
    const std::uint64_t n = parents.size();
    while (children.size() < static_cast<std::size_t>(mu)) {
      const auto& a = parents[uniform_index(state.rng, n)].genotype;
      const auto& b = parents[uniform_index(state.rng, n)].genotype;
      auto [first, second] = crossover(a, b, layout, state.rng);
      children.push_back(std::move(first));
      if (children.size() < static_cast<std::size_t>(mu)) children.push_back(std::move(second));
    }
  } else {
    for (const auto& p : parents) children.push_back(p.genotype);
  }
  const double p_i = config.p_i[static_cast<std::size_t>(stage - 1)];
  const double p_b = config.p_b[static_cast<std::size_t>(stage - 1)];
  for (auto& child : children) {
    if (bernoulli(state.rng, p_i)) child = mutate(child, layout, p_b, state.rng);
  }

  auto offspring = evaluate_batch(std::move(children), g, service);
  std::vector<Individual> pool = std::move(state.population);
  std::move(offspring.begin(), offspring.end(), std::back_inserter(pool));
  state.population = select_best(std::move(pool), static_cast<std::size_t>(mu));
  state.generation = g;
  state.history.push_back(record_generation(state, stage, mu));
}

RunResult continue_run(EvolutionState& state, const EvolutionConfig& config, EvaluationService& service,
                       const RunOptions& options) {
  const int total = config.total_generations();
  while (state.generation < total) {
    if (options.stop_after && state.generation >= *options.stop_after) {
      return {state.population.front(), state.history, false};
    }
    step_generation(state, config, service);
    persist(state, config, service, options);
  }
  return {select_best(state.population, 1).front(), state.history, true};
}

RunResult run(const EvolutionConfig& config, EvaluationService& service, const RunOptions& options) {
  EvolutionState state = initialize_population(config);
  evaluate_initial(state, config, service);
  persist(state, config, service, options);
  return continue_run(state, config, service, options);
}

nlohmann::ordered_json to_json(const Checkpoint& c) {
  using ojson = nlohmann::ordered_json;
  ojson j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = to_json(c.config);
  j["generation"] = c.state.generation;
  j["stage"] = c.state.stage;
  j["rng_state"] = c.state.rng.state();
  ojson population = ojson::array();
  for (const auto& ind : c.state.population) {
    ojson e;
    e["genome"] = ind.genotype.str();
    e["fitness"] = ind.fitness ? ojson(*ind.fitness) : ojson(nullptr);
    e["eval_meta"] = {{"source", to_string(ind.meta.source)},
                      {"duration", ind.meta.duration},
                      {"generation_born", ind.meta.generation_born}};
    population.push_back(std::move(e));
  }
  j["population"] = std::move(population);
  ojson history = ojson::array();
  for (const auto& r : c.state.history) {
    ojson e = history_line(r);
    e["population"] = r.population;
    history.push_back(std::move(e));
  }
  j["history"] = std::move(history);
  ojson cache = ojson::array();
  for (const auto& r : c.cache) cache.push_back(to_json(r));
  j["cache"] = std::move(cache);
  j["stats"] = to_json(c.stats);
  ojson failures = ojson::array();
  for (const auto& f : c.failures) failures.push_back(to_json(f));
  j["failures"] = std::move(failures);
  j["run_config"] = c.run_config;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw CheckpointError("not an evonas checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");
    Checkpoint c;
    c.config = evolution_config_from_json(j.at("config"));
    const GenomeLayout layout = build_layout(c.config.framework);
    c.state.generation = j.at("generation").get<int>();
    c.state.stage = j.at("stage").get<int>();
    c.state.rng.restore(j.at("rng_state").get<std::string>());
    for (const auto& e : j.at("population")) {
      Individual ind;
      ind.genotype = Genotype::parse(e.at("genome").get<std::string>());
      check_length(ind.genotype, layout);
      if (!e.at("fitness").is_null()) ind.fitness = e.at("fitness").get<double>();
      const auto& meta = e.at("eval_meta");
      ind.meta.source = parse_fitness_source(meta.at("source").get<std::string>());
      ind.meta.duration = meta.at("duration").get<double>();
      ind.meta.generation_born = meta.at("generation_born").get<int>();
      c.state.population.push_back(std::move(ind));
    }
    for (const auto& e : j.at("history")) {
      HistoryRecord r;
      r.generation = e.at("generation").get<int>();
      r.stage = e.at("stage").get<int>();
      r.mu = e.at("mu").get<int>();
      r.best_fitness = e.at("best_fitness").get<double>();
      r.mean_fitness = e.at("mean_fitness").get<double>();
      r.best_genome = e.at("best_genome").get<std::string>();
      r.population = e.at("population").get<std::vector<std::string>>();
      c.state.history.push_back(std::move(r));
    }
    for (const auto& e : j.at("cache")) c.cache.push_back(fitness_record_from_json(e));
    c.stats = evaluation_stats_from_json(j.at("stats"));
    for (const auto& e : j.at("failures")) c.failures.push_back(evaluation_failure_from_json(e));
    if (auto it = j.find("run_config"); it != j.end()) c.run_config = *it;

    const int total = c.config.total_generations();
    if (c.state.generation < 0 || c.state.generation > total) throw CheckpointError("generation out of range");
    if (c.state.stage < 1 || c.state.stage > 3) throw CheckpointError("stage out of range");
    if (c.state.history.size() != static_cast<std::size_t>(c.state.generation) + 1) {
      throw CheckpointError("history length does not match generation");
    }
    if (c.state.population.empty()) throw CheckpointError("empty population");
    for (const auto& ind : c.state.population) {
      if (!ind.fitness) throw CheckpointError("checkpoint population has unevaluated individuals");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  } catch (const ValidationError& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw CheckpointError("cannot write " + tmp.string());
  const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size() && std::fflush(f) == 0 &&
                  ::fsync(::fileno(f)) == 0;
  if (std::fclose(f) != 0 || !ok) {
    std::filesystem::remove(tmp);
    throw CheckpointError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move " + tmp.string() + " into place: " + ec.message());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_atomic(path, to_json(c).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

void write_history(const std::filesystem::path& path, const std::vector<HistoryRecord>& history) {
  std::string text;
  for (const auto& r : history) text += history_line(r).dump() + "\n";
  write_file_atomic(path, text);
}

}  // namespace evonas
