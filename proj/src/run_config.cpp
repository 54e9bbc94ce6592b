#include "evonas/run_config.hpp"

#include <fstream>
#include <set>

namespace evonas {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

std::string_view to_string(EvaluatorKind k) {
  switch (k) {
    case EvaluatorKind::onemax: return "onemax";
    case EvaluatorKind::connectivity: return "connectivity";
    case EvaluatorKind::worker: return "worker";
  }
  return "unknown";
}

EvaluatorKind parse_evaluator_kind(const std::string& s) {
  for (auto k : {EvaluatorKind::onemax, EvaluatorKind::connectivity, EvaluatorKind::worker}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("evaluator.kind must be onemax, connectivity or worker, got '" + s + "'");
}

}  // namespace

RunConfigFile parse_run_config(const nlohmann::json& j) {
  reject_unknown(j, {"evolution", "evaluator", "architecture", "train", "output_dir"}, "config");
  RunConfigFile c;
  try {
    if (auto it = j.find("evolution"); it != j.end()) c.evolution = evolution_config_from_json(*it);
    if (auto it = j.find("evaluator"); it != j.end()) {
      reject_unknown(*it, {"kind", "worker_cmd", "pool_size", "timeout_s", "handshake_timeout_s", "max_restarts"},
                     "evaluator");
      if (auto k = it->find("kind"); k != it->end()) c.evaluator.kind = parse_evaluator_kind(k->get<std::string>());
      take(*it, "worker_cmd", c.evaluator.worker_cmd);
      take(*it, "pool_size", c.evaluator.pool_size);
      take(*it, "timeout_s", c.evaluator.timeout_s);
      take(*it, "handshake_timeout_s", c.evaluator.handshake_timeout_s);
      take(*it, "max_restarts", c.evaluator.max_restarts);
    }
    if (auto it = j.find("architecture"); it != j.end()) {
      reject_unknown(*it, {"input_channels", "base_channels"}, "architecture");
      take(*it, "input_channels", c.architecture.input_channels);
      take(*it, "base_channels", c.architecture.base_channels);
    }
    if (auto it = j.find("train"); it != j.end()) c.train = train_config_from_json(*it);
    take(j, "output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config: ") + e.what());
  }
  if (c.evaluator.pool_size < 1) throw ValidationError("evaluator.pool_size must be >= 1");
  if (!(c.evaluator.timeout_s > 0.0)) throw ValidationError("evaluator.timeout_s must be positive");
  if (!(c.evaluator.handshake_timeout_s > 0.0)) throw ValidationError("evaluator.handshake_timeout_s must be positive");
  if (c.architecture.input_channels < 1 || c.architecture.base_channels < 1) {
    throw ValidationError("architecture channel counts must be >= 1");
  }
  return c;
}

RunConfigFile load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::ordered_json to_json(const RunConfigFile& c) {
  nlohmann::ordered_json j;
  j["evolution"] = to_json(c.evolution);
  j["evaluator"] = {{"kind", to_string(c.evaluator.kind)},
                    {"worker_cmd", c.evaluator.worker_cmd},
                    {"pool_size", c.evaluator.pool_size},
                    {"timeout_s", c.evaluator.timeout_s},
                    {"handshake_timeout_s", c.evaluator.handshake_timeout_s},
                    {"max_restarts", c.evaluator.max_restarts}};
  j["architecture"] = {{"input_channels", c.architecture.input_channels},
                       {"base_channels", c.architecture.base_channels}};
  j["train"] = to_json(c.train);
  j["output_dir"] = c.output_dir;
  return j;
}

}  // namespace evonas
