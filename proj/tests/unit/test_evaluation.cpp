#include <atomic>
#include <cstdlib>
#include <set>
#include <thread>

#include "doctest.h"
#include "oracles.hpp"

#include "evonas/evaluation.hpp"

using namespace evonas;

namespace {

const GenomeLayout& standard() {
  static const GenomeLayout layout = build_layout(FrameworkShape::standard());
  return layout;
}

// Counts genomes handed to it; fitness is OneMax.
class CountingBackend final : public FitnessBackend {
 public:
  std::vector<FitnessRecord> evaluate(std::span<const Genotype> genomes) override {
    std::vector<FitnessRecord> out;
    for (const auto& g : genomes) {
      ++calls;
      FitnessRecord r;
      r.genome_key = g.str();
      if (fail_on.contains(r.genome_key)) {
        r.failure = "injected";
      } else {
        r.fitness = surrogate_onemax(g);
      }
      out.push_back(r);
    }
    return out;
  }
  int calls = 0;
  std::set<std::string> fail_on;
};

}  // namespace

TEST_CASE("onemax surrogate") {
  CHECK(surrogate_onemax(Genotype::zeros(54)) == 0.0);
  CHECK(surrogate_onemax(Genotype::ones(54)) == 1.0);
  struct Zero {
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return 0; }
  } zero;
  CHECK(surrogate_onemax(rich_init_genome(standard(), zero)) == 27.0 / 54.0);
}

TEST_CASE("connectivity surrogate") {
  const double max_params = double(oracle::parameter_total(std::string(54, '1')));
  CHECK(max_params == 2122881.0);
  const double zeros = surrogate_connectivity(Genotype::zeros(54), standard());
  CHECK(zeros == doctest::Approx(0.3 * (1.0 - 1922305.0 / max_params)).epsilon(1e-15));
  CHECK(surrogate_connectivity(Genotype::ones(54), standard()) == doctest::Approx(0.7).epsilon(1e-15));

  RngStream rng(83);
  for (int i = 0; i < 200; ++i) {
    const Genotype g = random_genome(standard(), rng);
    int skips = 0;
    for (const auto& c : standard().cells) {
      for (int k = 1; k <= c.skip_count; ++k) skips += g[c.skip_bit(k)];
    }
    const double expected =
        0.7 * skips / 21.0 + 0.3 * (1.0 - double(oracle::parameter_total(g.str())) / max_params);
    const double f = surrogate_connectivity(g, standard());
    CHECK(f == doctest::Approx(expected).epsilon(1e-12));
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    CHECK(surrogate_connectivity(g, standard()) == f);
  }
}

TEST_CASE("fitness cache") {
  FitnessCache cache;
  FitnessRecord r{"0101", 0.5};
  cache.store(r);
  cache.store(r);
  CHECK(cache.size() == 1);
  CHECK(cache.lookup("0101")->fitness == 0.5);
  CHECK_FALSE(cache.lookup("1111"));
  FitnessRecord other = r;
  other.fitness = 0.75;
  CHECK_THROWS_AS(cache.store(other), CacheConflict);
  FitnessRecord failed{"0011", 0.0};
  failed.failure = "timeout";
  CHECK_THROWS_AS(cache.store(failed), ValidationError);
  CHECK_THROWS_AS(cache.store(FitnessRecord{"0000", 1.5}), ValidationError);
}

TEST_CASE("fitness cache under concurrent writers") {
  FitnessCache cache;
  std::atomic<int> conflicts{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 500; ++i) {
        cache.store(FitnessRecord{std::to_string(i), i / 1000.0});
        try {
          cache.store(FitnessRecord{std::to_string(i), (i + t + 1) / 1000.0});
        } catch (const CacheConflict&) {
          ++conflicts;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(cache.size() == 500);
  CHECK(conflicts == 8 * 500);
  for (const auto& r : cache.records()) CHECK(r.fitness == std::stoi(r.genome_key) / 1000.0);
}

TEST_CASE("service deduplicates and caches") {
  CountingBackend backend;
  EvaluationService service(backend);
  RngStream rng(89);
  const Genotype a = random_genome(standard(), rng), b = random_genome(standard(), rng);
  const std::vector<Genotype> batch{a, b, a, a};
  const auto first = service.evaluate(batch, 0);
  REQUIRE(first.size() == 4);
  CHECK(first[0].fitness == surrogate_onemax(a));
  CHECK(first[1].fitness == surrogate_onemax(b));
  CHECK(first[3].genome_key == a.str());
  CHECK(backend.calls == 2);
  service.evaluate(batch, 1);
  CHECK(backend.calls == 2);
  CHECK(service.stats() == EvaluationStats{8, 6, 2, 0});
  CHECK(service.evaluate(std::vector<Genotype>{}, 2).empty());
}

TEST_CASE("failed evaluations score zero and are retried later") {
  CountingBackend backend;
  const Genotype g = Genotype::ones(54);
  backend.fail_on.insert(g.str());
  std::vector<std::string> log;
  EvaluationService service(backend, [&](const std::string& m) { log.push_back(m); });
  const auto r = service.evaluate(std::vector<Genotype>{g, g}, 4);
  CHECK(r[0].fitness == 0.0);
  CHECK(r[1].failed());
  REQUIRE(service.failures().size() == 1);
  CHECK(service.failures()[0].generation == 4);
  CHECK(service.stats().failures == 1);
  CHECK(log.size() == 1);
  CHECK(service.cache().size() == 0);
  backend.fail_on.clear();
  CHECK(service.evaluate(std::vector<Genotype>{g}, 5)[0].fitness == 1.0);
  CHECK(backend.calls == 2);
}

TEST_CASE("train config json") {
  const TrainConfig defaults;
  const auto j = to_json(defaults);
  CHECK(j["epochs"] == 100);
  CHECK(j["learning_rate"] == 0.001);
  CHECK(j["optimizer"]["alpha"] == 0.5);
  CHECK(j["optimizer"]["k"] == 6);
  CHECK(j["grad_clip_l1"] == 0.1);
  CHECK(j["loss"]["w"] == 0.55);
  CHECK(j["loss"]["gamma"] == 2.0);
  CHECK(j["early_stop_patience"] == 20);
  CHECK(to_json(train_config_from_json(nlohmann::json::parse(j.dump()))).dump() == j.dump());

  CHECK(train_config_from_json(nlohmann::json{{"epochs", 30}}).epochs == 30);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"epoch", 30}}), ValidationError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"epochs", "many"}}), ValidationError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"learning_rate", -1}}), ValidationError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"loss", {{"kind", "dice"}}}}), ValidationError);
}

TEST_CASE("record and counter json") {
  FitnessRecord r{"0110", 0.5, nlohmann::json{{"f1", 0.5}}, FitnessSource::worker, 1.25, 12, ""};
  const auto back = fitness_record_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(back.genome_key == r.genome_key);
  CHECK(back.fitness == r.fitness);
  CHECK(back.source == FitnessSource::worker);
  CHECK(back.epochs_run == 12);
  CHECK(back.metrics == r.metrics);
  const EvaluationStats s{10, 4, 6, 1};
  CHECK(evaluation_stats_from_json(nlohmann::json::parse(to_json(s).dump())) == s);
}

TEST_CASE("worker command resolution") {
  ::setenv("EVONAS_WORKER_CMD", "from-env", 1);
  CHECK(resolve_worker_command("configured") == "configured");
  CHECK(resolve_worker_command("") == "from-env");
  ::unsetenv("EVONAS_WORKER_CMD");
  CHECK(resolve_worker_command("").empty());
}
