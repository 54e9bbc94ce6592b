// evonas: evolutionary architecture search for U-like segmentation networks.
//
//   evonas search  --config run.json [--seed N] [--output-dir DIR] [--workers N]
//   evonas resume  DIR/checkpoint.json
//   evonas decode  0101...
//   evonas metrics --pred p.pgm --gt gt.pgm [--mask fov.pgm] [--threshold 0.5]

#include <iostream>

#include "CLI11.hpp"

#include "evonas/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = evonas::cli;

  CLI::App app{"Evolutionary architecture search for U-like segmentation networks"};
  app.require_subcommand(1);

  cli::GlobalOptions global;
  std::string config;
  std::uint64_t seed = 0;
  std::string output_dir;
  int workers = 0;
  int stop_after = 0;
  auto* config_opt = app.add_option("--config", config, "Run configuration file (JSON)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
  auto* out_opt = app.add_option("--output-dir", output_dir, "Directory for checkpoints and results");
  auto* workers_opt = app.add_option("--workers", workers, "Worker processes for the worker evaluator")
                          ->check(CLI::PositiveNumber);
  auto* stop_opt = app.add_option("--stop-after", stop_after, "Stop after this generation is checkpointed")
                       ->check(CLI::NonNegativeNumber);
  app.add_flag("--quiet", global.quiet, "Suppress progress output");

  auto* search = app.add_subcommand("search", "Run a search from a configuration file");
  search->fallthrough();

  std::string checkpoint;
  auto* resume = app.add_subcommand("resume", "Continue a search from its checkpoint");
  resume->add_option("checkpoint", checkpoint, "Path to checkpoint.json")->required();
  resume->fallthrough();

  std::string genome;
  auto* decode = app.add_subcommand("decode", "Print the architecture and parameter count of a genome");
  decode->add_option("genome", genome, "Genome bit string")->required();
  decode->fallthrough();

  cli::MetricsArgs metrics;
  std::string mask;
  std::string roc;
  std::string pr;
  auto* metrics_cmd = app.add_subcommand("metrics", "Score a probability map against ground truth");
  metrics_cmd->add_option("--pred", metrics.prediction, "Probability map (PGM or EVOF32)")->required();
  metrics_cmd->add_option("--gt", metrics.ground_truth, "Ground truth (PGM)")->required();
  auto* mask_opt = metrics_cmd->add_option("--mask", mask, "Field-of-view mask (PGM)");
  metrics_cmd->add_option("--threshold", metrics.threshold, "Decision threshold")->capture_default_str();
  auto* roc_opt = metrics_cmd->add_option("--roc", roc, "Write ROC points as CSV");
  auto* pr_opt = metrics_cmd->add_option("--pr", pr, "Write precision-recall points as CSV");
  metrics_cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  if (*config_opt) global.config = config;
  if (*seed_opt) global.seed = seed;
  if (*out_opt) global.output_dir = output_dir;
  if (*workers_opt) global.workers = workers;
  if (*stop_opt) global.stop_after = stop_after;
  if (*mask_opt) metrics.mask = mask;
  if (*roc_opt) metrics.roc_out = roc;
  if (*pr_opt) metrics.pr_out = pr;

  if (*search) return cli::cmd_search(global, std::cout, std::cerr);
  if (*resume) return cli::cmd_resume(checkpoint, global, std::cout, std::cerr);
  if (*decode) return cli::cmd_decode(genome, global, std::cout, std::cerr);
  return cli::cmd_metrics(metrics, global, std::cout, std::cerr);
}
