#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "evonas/architecture.hpp"
#include "evonas/evaluation.hpp"
#include "evonas/evolution.hpp"

namespace evonas {

enum class EvaluatorKind { onemax, connectivity, worker };

struct EvaluatorConfig {
  EvaluatorKind kind = EvaluatorKind::onemax;
  std::string worker_cmd;  // empty => EVONAS_WORKER_CMD
  int pool_size = 1;
  double timeout_s = 3600.0;
  double handshake_timeout_s = 30.0;
  int max_restarts = -1;  // < 0 => 4 * pool_size
};

// Search configuration file (JSON):
//   {"evolution": {...}, "evaluator": {...}, "architecture": {...},
//    "train": {...}, "output_dir": "..."}
// Every section and key is optional; unknown keys are rejected.
struct RunConfigFile {
  EvolutionConfig evolution;
  EvaluatorConfig evaluator;
  DecodeOptions architecture;
  TrainConfig train;
  std::string output_dir = "evonas-run";
};

RunConfigFile parse_run_config(const nlohmann::json& j);
RunConfigFile load_run_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const RunConfigFile& c);

}  // namespace evonas
