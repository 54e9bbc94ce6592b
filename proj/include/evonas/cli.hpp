#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace evonas::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct GlobalOptions {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> workers;
  bool quiet = false;
  // Stop after this generation has been checkpointed.
  std::optional<int> stop_after;
};

// Output directory layout:
//   checkpoint.json  history.jsonl  failures.jsonl  best.genome  best.architecture
int cmd_search(const GlobalOptions& options, std::ostream& out, std::ostream& err);
int cmd_resume(const std::string& checkpoint_path, const GlobalOptions& options, std::ostream& out,
               std::ostream& err);
int cmd_decode(const std::string& genome, const GlobalOptions& options, std::ostream& out, std::ostream& err);

struct MetricsArgs {
  std::string prediction;
  std::string ground_truth;
  std::optional<std::string> mask;
  double threshold = 0.5;
  std::optional<std::string> roc_out;  // CSV: fpr,tpr
  std::optional<std::string> pr_out;   // CSV: recall,precision
};

int cmd_metrics(const MetricsArgs& args, const GlobalOptions& options, std::ostream& out, std::ostream& err);

}  // namespace evonas::cli
