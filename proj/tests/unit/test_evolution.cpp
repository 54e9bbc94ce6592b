#include "doctest.h"
#include "test_util.hpp"

#include "evonas/evolution.hpp"

using namespace evonas;
using testutil::TempDir;

namespace {

// OneMax (or a constant) that records every batch size it is given.
class RecordingBackend final : public FitnessBackend {
 public:
  std::vector<FitnessRecord> evaluate(std::span<const Genotype> genomes) override {
    batches.push_back(genomes.size());
    std::vector<FitnessRecord> out;
    for (const auto& g : genomes) {
      FitnessRecord r;
      r.genome_key = g.str();
      r.fitness = constant ? *constant : surrogate_onemax(g);
      out.push_back(r);
    }
    return out;
  }
  std::vector<std::size_t> batches;
  std::optional<double> constant;
};

Individual make(const std::string& genome, double fitness, int born = 0) {
  Individual ind;
  ind.genotype = Genotype::parse(genome);
  ind.fitness = fitness;
  ind.meta.generation_born = born;
  return ind;
}

EvolutionConfig small(std::vector<int> lengths, std::uint64_t seed = 1) {
  EvolutionConfig c;
  c.stage_lengths = std::move(lengths);
  c.seed = seed;
  return c;
}

std::vector<int> mus(const std::vector<HistoryRecord>& history) {
  std::vector<int> out;
  for (const auto& r : history) out.push_back(r.mu);
  return out;
}

}  // namespace

TEST_CASE("stage boundaries are cumulative") {
  const EvolutionConfig c;
  CHECK(stage_of(1, c).stage == 1);
  CHECK(stage_of(20, c).stage == 1);
  CHECK(stage_of(21, c).stage == 2);
  CHECK(stage_of(21, c).mu == 8);
  CHECK(stage_of(35, c).stage == 2);
  CHECK(stage_of(36, c).stage == 3);
  CHECK(stage_of(45, c).mu == 4);
  CHECK_THROWS_AS(stage_of(0, c), ValidationError);
  CHECK_THROWS_AS(stage_of(46, c), ValidationError);

  const auto skip = small({2, 0, 2});
  CHECK(stage_of(2, skip).stage == 1);
  CHECK(stage_of(3, skip).stage == 3);
}

TEST_CASE("config validation") {
  EvolutionConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.evaluation_budget() == 18 + 18 * 20 + 8 * 15 + 4 * 10);
  CHECK(c.evaluation_budget() == 538);
  CHECK(c.total_generations() == 45);

  c.mu_schedule = {8, 18, 4};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("strictly decreasing"), ValidationError);
  c = {};
  c.stage_lengths = {1, -1, 1};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.p_b = {0.1, 0.1};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.p_i = {0.4, 1.2, 1.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.framework = FrameworkShape::u_like(3, 2);
  CHECK_THROWS_AS(c.validate(), ValidationError);

  const auto j = to_json(EvolutionConfig{});
  CHECK(evolution_config_from_json(nlohmann::json::parse(j.dump())).mu_schedule == std::vector<int>{18, 8, 4});
  CHECK_THROWS_AS(evolution_config_from_json(nlohmann::json{{"mu", 3}}), ValidationError);
  CHECK_THROWS_AS(evolution_config_from_json(nlohmann::json{{"init", "lavish"}}), ValidationError);
}

TEST_CASE("select_best ordering") {
  std::vector<Individual> pool{make("00", 0.3), make("01", 0.9), make("10", 0.5)};
  auto best = select_best(pool, 2);
  REQUIRE(best.size() == 2);
  CHECK(*best[0].fitness == 0.9);
  CHECK(*best[1].fitness == 0.5);

  std::vector<Individual> ties{make("11", 0.5, 2), make("10", 0.5, 1), make("01", 0.5, 2), make("00", 0.5, 3)};
  best = select_best(ties, 3);
  CHECK(best[0].genotype.str() == "10");
  CHECK(best[1].genotype.str() == "01");
  CHECK(best[2].genotype.str() == "11");

  best = select_best(pool, 3);
  CHECK(best.size() == 3);
  CHECK(*best[2].fitness == 0.3);

  CHECK_THROWS_AS(select_best(pool, 4), ValidationError);
  pool.push_back(Individual{Genotype::parse("11"), std::nullopt, {}});
  CHECK_THROWS_AS(select_best(pool, 1), ValidationError);
}

TEST_CASE("population sizes follow the schedule") {
  RecordingBackend backend;
  EvaluationService service(backend);
  const auto result = run(small({2, 2, 1}), service);
  CHECK(result.finished);
  CHECK(mus(result.history) == std::vector<int>{18, 18, 18, 8, 8, 4});
  for (const auto& r : result.history) CHECK(int(r.population.size()) == r.mu);
  CHECK(service.stats().requests == small({2, 2, 1}).evaluation_budget());
}

TEST_CASE("empty middle stage still truncates in order") {
  RecordingBackend backend;
  EvaluationService service(backend);
  const auto config = small({2, 0, 2});
  EvolutionState state = initialize_population(config);
  evaluate_initial(state, config, service);
  step_generation(state, config, service);
  step_generation(state, config, service);
  const auto before = state.population;
  step_generation(state, config, service);
  CHECK(state.stage == 3);
  CHECK(state.history.back().mu == 4);
  CHECK(state.population.size() == 4);
  CHECK(service.stats().requests == 18 + 18 + 18 + 4);
  // Survivors of the 4 + 4 pool are at least as good as the best 4 parents.
  const auto parents = select_best(select_best(before, 8), 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(*state.population[i].fitness >= *parents[i].fitness);
  step_generation(state, config, service);
  CHECK(state.generation == 4);
  CHECK_THROWS_AS(step_generation(state, config, service), ValidationError);
}

TEST_CASE("elitism on OneMax") {
  RecordingBackend backend;
  EvaluationService service(backend);
  const EvolutionConfig config;
  const auto result = run(config, service);
  REQUIRE(result.history.size() == 46);
  for (std::size_t i = 1; i < result.history.size(); ++i) {
    CHECK(result.history[i].best_fitness >= result.history[i - 1].best_fitness);
    CHECK(result.history[i].generation == int(i));
  }
  CHECK(service.stats().requests == 538);
  CHECK(service.stats().backend_evaluations + service.stats().cache_hits == 538);
  CHECK(*result.best.fitness == result.history.back().best_fitness);
}

TEST_CASE("a population at the optimum stays there") {
  RecordingBackend backend;
  backend.constant = 1.0;
  EvaluationService service(backend);
  const auto result = run(small({3, 3, 3}), service);
  for (const auto& r : result.history) {
    CHECK(r.best_fitness == 1.0);
    CHECK(r.mean_fitness == 1.0);
  }
}

TEST_CASE("duplicate genomes hit the cache") {
  RecordingBackend backend;
  EvaluationService service(backend);
  EvolutionConfig config = small({3, 3, 3});
  config.p_i = {0.0, 0.0, 0.0};
  run(config, service);
  // Without mutation stage 3 re-evaluates its parents only.
  CHECK(service.stats().cache_hits >= 12);
  CHECK(service.cache().size() == service.stats().backend_evaluations);
}

TEST_CASE("runs are deterministic per seed") {
  auto history_of = [](std::uint64_t seed) {
    RecordingBackend backend;
    EvaluationService service(backend);
    return run(small({5, 4, 3}, seed), service).history;
  };
  CHECK(history_of(3) == history_of(3));
  CHECK_FALSE(history_of(3) == history_of(4));
}

TEST_CASE("checkpoint round trip and corruption") {
  TempDir dir;
  RecordingBackend backend;
  EvaluationService service(backend);
  const auto config = small({2, 2, 2});
  RunOptions options;
  options.checkpoint_path = dir / "checkpoint.json";
  options.history_path = dir / "history.jsonl";
  options.stop_after = 3;
  const auto partial = run(config, service, options);
  CHECK_FALSE(partial.finished);

  const Checkpoint cp = load_checkpoint(dir / "checkpoint.json");
  CHECK(cp.state.generation == 3);
  CHECK(cp.state.stage == 2);
  CHECK(cp.state.population.size() == 8);
  CHECK(cp.state.history == partial.history);
  CHECK(cp.stats == service.stats());
  CHECK(cp.cache.size() == service.cache().size());
  CHECK(to_json(checkpoint_from_json(nlohmann::json::parse(to_json(cp).dump()))).dump() == to_json(cp).dump());

  const std::string history = testutil::read_file(dir / "history.jsonl");
  CHECK(std::count(history.begin(), history.end(), '\n') == 4);
  CHECK(nlohmann::json::parse(history.substr(0, history.find('\n')))["generation"] == 0);

  const std::string text = testutil::read_file(dir / "checkpoint.json");
  testutil::write_file(dir / "truncated.json", text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "truncated.json"), CheckpointError);
  auto doc = nlohmann::json::parse(text);
  doc["version"] = 99;
  testutil::write_file(dir / "future.json", doc.dump());
  CHECK_THROWS_AS(load_checkpoint(dir / "future.json"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.json"), CheckpointError);
}

TEST_CASE("resume equals an uninterrupted run") {
  const auto config = small({3, 3, 3}, 9);
  RecordingBackend straight_backend;
  EvaluationService straight_service(straight_backend);
  const auto straight = run(config, straight_service);

  for (int k : {0, 1, 3, 6, 8}) {
    TempDir dir;
    RecordingBackend b1;
    EvaluationService s1(b1);
    RunOptions options;
    options.checkpoint_path = dir / "checkpoint.json";
    options.stop_after = k;
    run(config, s1, options);

    Checkpoint cp = load_checkpoint(dir / "checkpoint.json");
    RecordingBackend b2;
    EvaluationService s2(b2);
    s2.restore(cp.cache, cp.stats, cp.failures);
    const auto resumed = continue_run(cp.state, cp.config, s2);
    CHECK(resumed.finished);
    CHECK(resumed.history == straight.history);
    CHECK(s2.stats() == straight_service.stats());
  }
}
