#include "doctest.h"
#include "test_util.hpp"

#include "json.hpp"

#include "evonas/image_io.hpp"

using testutil::quote;
using testutil::TempDir;

namespace {

std::string cli(const std::string& args) { return quote(EVONAS_CLI_PATH) + " " + args; }

std::string write_config(const TempDir& dir, const nlohmann::json& config) {
  const auto path = dir / "run.json";
  testutil::write_file(path, config.dump(2));
  return quote(path.string());
}

nlohmann::json quick_config(const TempDir& dir, const std::string& sub = "out") {
  return {{"evolution", {{"stage_lengths", {3, 2, 2}}, {"seed", 7}}},
          {"output_dir", (dir / sub).string()}};
}

}  // namespace

TEST_CASE("search writes its outputs") {
  TempDir dir;
  const auto r = testutil::run(cli("--quiet --config " + write_config(dir, quick_config(dir)) + " search"));
  REQUIRE(r.code == 0);
  const auto summary = nlohmann::json::parse(r.out);
  CHECK(summary["status"] == "finished");
  CHECK(summary["generation"] == 7);
  for (const char* f : {"checkpoint.json", "history.jsonl", "failures.jsonl", "best.genome", "best.architecture"}) {
    CHECK(std::filesystem::exists(dir / "out" / f));
  }
  const std::string history = testutil::read_file(dir / "out" / "history.jsonl");
  CHECK(std::count(history.begin(), history.end(), '\n') == 8);
  const auto last = nlohmann::json::parse(history.substr(history.rfind('\n', history.size() - 2) + 1));
  for (const char* key : {"generation", "stage", "mu", "best_fitness", "mean_fitness", "best_genome"}) {
    CHECK(last.contains(key));
  }
  const std::string best = testutil::read_file(dir / "out" / "best.genome");
  CHECK(best == last["best_genome"].get<std::string>() + "\n");
  const auto arch = nlohmann::json::parse(testutil::read_file(dir / "out" / "best.architecture"));
  CHECK(arch["genome"] == last["best_genome"]);
}

TEST_CASE("same seed gives a byte-identical history") {
  TempDir dir;
  const auto cfg = write_config(dir, quick_config(dir, "a"));
  REQUIRE(testutil::run(cli("--quiet --config " + cfg + " search")).code == 0);
  REQUIRE(testutil::run(cli("--quiet --config " + cfg + " --output-dir " + quote((dir / "b").string()) +
                               " search")).code == 0);
  CHECK(testutil::read_file(dir / "a" / "history.jsonl") == testutil::read_file(dir / "b" / "history.jsonl"));
  REQUIRE(testutil::run(cli("--quiet --config " + cfg + " --seed 8 --output-dir " +
                               quote((dir / "c").string()) + " search")).code == 0);
  CHECK(testutil::read_file(dir / "a" / "history.jsonl") != testutil::read_file(dir / "c" / "history.jsonl"));
}

TEST_CASE("invalid configurations exit with 2") {
  TempDir dir;
  auto cfg = quick_config(dir);
  cfg["evolution"]["mu_schedule"] = {8, 18, 4};
  auto r = testutil::run(cli("--config " + write_config(dir, cfg) + " search"));
  CHECK(r.code == 2);
  CHECK(r.err.find("strictly decreasing") != std::string::npos);

  cfg = quick_config(dir);
  cfg["evolution"]["mutation"] = 0.1;
  CHECK(testutil::run(cli("--config " + write_config(dir, cfg) + " search")).code == 2);

  testutil::write_file(dir / "broken.json", "{\"evolution\": ");
  CHECK(testutil::run(cli("--config " + quote((dir / "broken.json").string()) + " search")).code == 2);
  CHECK(testutil::run(cli("--config " + quote((dir / "none.json").string()) + " search")).code == 2);
  CHECK(testutil::run(cli("frobnicate")).code == 2);
  CHECK(testutil::run(cli("--workers 0 search")).code == 2);
}

TEST_CASE("worker evaluator that cannot start exits with 3") {
  TempDir dir;
  auto cfg = quick_config(dir);
  cfg["evaluator"] = {{"kind", "worker"}, {"worker_cmd", "exit 1"}, {"max_restarts", 1}};
  const auto r = testutil::run(cli("--quiet --config " + write_config(dir, cfg) + " search"));
  CHECK(r.code == 3);
}

TEST_CASE("worker evaluator without a command is a usage error") {
  TempDir dir;
  auto cfg = quick_config(dir);
  cfg["evaluator"] = {{"kind", "worker"}};
  const auto r = testutil::run("env -u EVONAS_WORKER_CMD " +
                               cli("--quiet --config " + write_config(dir, cfg) + " search"));
  CHECK(r.code == 2);
}

TEST_CASE("resume continues to the same history") {
  TempDir dir;
  const auto cfg = write_config(dir, quick_config(dir, "straight"));
  REQUIRE(testutil::run(cli("--quiet --config " + cfg + " search")).code == 0);
  const std::string straight = testutil::read_file(dir / "straight" / "history.jsonl");

  for (int k : {1, 3, 5}) {
    const auto out = dir / ("part" + std::to_string(k));
    auto r = testutil::run(cli("--quiet --config " + cfg + " --output-dir " + quote(out.string()) +
                                  " --stop-after " + std::to_string(k) + " search"));
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["status"] == "stopped");
    CHECK_FALSE(std::filesystem::exists(out / "best.genome"));
    r = testutil::run(cli("--quiet resume " + quote((out / "checkpoint.json").string())));
    REQUIRE(r.code == 0);
    CHECK(testutil::read_file(out / "history.jsonl") == straight);
  }

  const auto finished = dir / "straight" / "checkpoint.json";
  const std::string before = testutil::read_file(finished);
  const auto r = testutil::run(cli("--quiet resume " + quote(finished.string())));
  CHECK(r.code == 0);
  CHECK(testutil::read_file(dir / "straight" / "history.jsonl") == straight);
  CHECK(testutil::read_file(finished) == before);
}

TEST_CASE("corrupt checkpoints exit with 2") {
  TempDir dir;
  const auto cfg = write_config(dir, quick_config(dir));
  REQUIRE(testutil::run(cli("--quiet --config " + cfg + " search")).code == 0);
  const std::string text = testutil::read_file(dir / "out" / "checkpoint.json");
  testutil::write_file(dir / "cut.json", text.substr(0, text.size() - 40));
  CHECK(testutil::run(cli("resume " + quote((dir / "cut.json").string()))).code == 2);
  CHECK(testutil::run(cli("resume " + quote((dir / "missing.json").string()))).code == 2);
}

TEST_CASE("decode prints the description and parameter count") {
  auto r = testutil::run(cli("decode " + std::string(54, '0')));
  REQUIRE(r.code == 0);
  const auto split = r.out.rfind("{\"parameters\"");
  REQUIRE(split != std::string::npos);
  const auto doc = nlohmann::json::parse(r.out.substr(0, split));
  const auto params = nlohmann::json::parse(r.out.substr(split));
  CHECK(doc["skip_edges"].empty());
  CHECK(params["parameters"]["total"] == 1922305);
  CHECK(params["parameters"]["head"] == 129);

  CHECK(testutil::run(cli("decode " + std::string(53, '0'))).code == 2);
  CHECK(testutil::run(cli("decode " + std::string(53, '0') + "2")).code == 2);

  std::string noncanonical(54, '0');
  noncanonical[1] = '1';
  r = testutil::run(cli("decode " + noncanonical));
  CHECK(r.code == 0);
  CHECK(r.err.find("not canonical") != std::string::npos);
  CHECK(nlohmann::json::parse(r.out.substr(0, r.out.rfind("{\"parameters\"")))["genome"] == std::string(54, '0'));
}

TEST_CASE("metrics on image files") {
  TempDir dir;
  evonas::write_float_map(dir / "pred.f32", {2, 2, {0.9f, 0.4f, 0.6f, 0.1f}});
  evonas::write_pgm(dir / "gt.pgm", {2, 2, {255, 255, 0, 0}});
  evonas::write_pgm(dir / "mask.pgm", {2, 2, {255, 255, 255, 0}});
  const std::string files = "--pred " + quote((dir / "pred.f32").string()) + " --gt " +
                            quote((dir / "gt.pgm").string());
  auto r = testutil::run(cli("metrics " + files + " --roc " + quote((dir / "roc.csv").string())));
  REQUIRE(r.code == 0);
  auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["all_pixels"]["acc"] == 0.5);
  CHECK(doc["all_pixels"]["f1"] == 0.5);
  CHECK(doc["all_pixels"]["auroc"].get<double>() == doctest::Approx(0.75));
  CHECK_FALSE(doc.contains("masked"));
  CHECK(testutil::read_file(dir / "roc.csv").rfind("fpr,tpr\n0,0\n", 0) == 0);

  r = testutil::run(cli("metrics " + files + " --mask " + quote((dir / "mask.pgm").string())));
  REQUIRE(r.code == 0);
  doc = nlohmann::json::parse(r.out);
  CHECK(doc["masked"]["tn"] == 0);
  CHECK(doc["masked"]["fp"] == 1);

  evonas::write_pgm(dir / "blank.pgm", {2, 2, {0, 0, 0, 0}});
  r = testutil::run(cli("metrics --pred " + quote((dir / "pred.f32").string()) + " --gt " +
                           quote((dir / "blank.pgm").string())));
  CHECK(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["all_pixels"]["auroc"].is_null());
  CHECK(r.err.find("single class") != std::string::npos);

  evonas::write_pgm(dir / "small.pgm", {1, 2, {0, 255}});
  r = testutil::run(cli("metrics --pred " + quote((dir / "pred.f32").string()) + " --gt " +
                           quote((dir / "small.pgm").string())));
  CHECK(r.code == 2);
  CHECK(testutil::run(cli("metrics " + files + " --threshold 1.5")).code == 2);
}
