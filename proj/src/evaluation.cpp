#include "evonas/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>
#include <unordered_map>

#include "evonas/worker_pool.hpp"

namespace evonas {

namespace {

using Clock = std::chrono::steady_clock;

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

WorkerTask make_task(const Genotype& g, const GenomeLayout& layout, const nlohmann::json& train,
                     const DecodeOptions& options) {
  WorkerTask task;
  task.key = g.str();
  task.architecture = to_description(decode(g, layout, options));
  task.train = train;
  return task;
}

FitnessRecord record_from_outcome(const WorkerOutcome& o) {
  FitnessRecord r;
  r.genome_key = o.key;
  r.source = FitnessSource::worker;
  r.duration = o.duration;
  if (o.ok) {
    r.fitness = o.fitness;
    r.metrics = o.metrics;
    r.epochs_run = o.epochs_run;
  } else {
    r.fitness = 0.0;
    r.failure = o.failure.empty() ? "evaluation failed" : o.failure;
  }
  return r;
}

}  // namespace

std::string_view to_string(FitnessSource s) {
  return s == FitnessSource::worker ? "worker" : "surrogate";
}

FitnessSource parse_fitness_source(std::string_view s) {
  if (s == "worker") return FitnessSource::worker;
  if (s == "surrogate") return FitnessSource::surrogate;
  throw ValidationError("unknown fitness source '" + std::string(s) + "'");
}

nlohmann::ordered_json to_json(const FitnessRecord& r) {
  nlohmann::ordered_json j;
  j["genome"] = r.genome_key;
  j["fitness"] = r.fitness;
  j["source"] = to_string(r.source);
  j["duration"] = r.duration;
  j["epochs_run"] = r.epochs_run;
  if (!r.metrics.is_null()) j["metrics"] = r.metrics;
  if (r.failed()) j["failure"] = r.failure;
  return j;
}

FitnessRecord fitness_record_from_json(const nlohmann::json& j) {
  FitnessRecord r;
  r.genome_key = j.at("genome").get<std::string>();
  r.fitness = j.at("fitness").get<double>();
  r.source = parse_fitness_source(j.at("source").get<std::string>());
  take(j, "duration", r.duration);
  take(j, "epochs_run", r.epochs_run);
  if (auto it = j.find("metrics"); it != j.end()) r.metrics = *it;
  take(j, "failure", r.failure);
  return r;
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ValidationError(std::string("train.") + name + " must be positive");
  };
  positive(epochs, "epochs");
  positive(batch_size, "batch_size");
  positive(learning_rate, "learning_rate");
  positive(lookahead_alpha, "lookahead_alpha");
  positive(lookahead_k, "lookahead_k");
  positive(adam_beta1, "adam_beta1");
  positive(adam_beta2, "adam_beta2");
  positive(grad_clip_l1, "grad_clip_l1");
  positive(focal_w, "focal_w");
  positive(focal_gamma, "focal_gamma");
  positive(early_stop_patience, "early_stop_patience");
  positive(early_stop_tolerance, "early_stop_tolerance");
  if (lookahead_alpha > 1.0) throw ValidationError("train.lookahead_alpha must be <= 1");
  if (adam_beta1 >= 1.0 || adam_beta2 >= 1.0) throw ValidationError("train Adam betas must be < 1");
  if (focal_w >= 1.0) throw ValidationError("train.focal_w must be < 1");
  if (early_stop_patience > epochs) throw ValidationError("train.early_stop_patience exceeds epochs");
  if (!(input_min < input_max)) throw ValidationError("train input range is empty");
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["optimizer"] = {{"kind", "lookahead"}, {"base", "adam"},        {"alpha", c.lookahead_alpha},
                    {"k", c.lookahead_k},  {"beta1", c.adam_beta1}, {"beta2", c.adam_beta2}};
  j["grad_clip_l1"] = c.grad_clip_l1;
  j["loss"] = {{"kind", "focal"}, {"w", c.focal_w}, {"gamma", c.focal_gamma}};
  j["early_stop_patience"] = c.early_stop_patience;
  j["early_stop_tolerance"] = c.early_stop_tolerance;
  j["input_range"] = {c.input_min, c.input_max};
  j["dataset"] = {{"path", c.dataset_path}, {"split", c.eval_split}};
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    reject_unknown(j,
                   {"epochs", "batch_size", "learning_rate", "optimizer", "grad_clip_l1", "loss",
                    "early_stop_patience", "early_stop_tolerance", "input_range", "dataset", "seed"},
                   "train");
    take(j, "epochs", c.epochs);
    take(j, "batch_size", c.batch_size);
    take(j, "learning_rate", c.learning_rate);
    if (auto it = j.find("optimizer"); it != j.end()) {
      reject_unknown(*it, {"kind", "base", "alpha", "k", "beta1", "beta2"}, "train.optimizer");
      if (it->value("kind", std::string("lookahead")) != "lookahead" || it->value("base", std::string("adam")) != "adam") {
        throw ValidationError("only the lookahead-over-adam optimizer is supported");
      }
      take(*it, "alpha", c.lookahead_alpha);
      take(*it, "k", c.lookahead_k);
      take(*it, "beta1", c.adam_beta1);
      take(*it, "beta2", c.adam_beta2);
    }
    take(j, "grad_clip_l1", c.grad_clip_l1);
    if (auto it = j.find("loss"); it != j.end()) {
      reject_unknown(*it, {"kind", "w", "gamma"}, "train.loss");
      if (it->value("kind", std::string("focal")) != "focal") throw ValidationError("only focal loss is supported");
      take(*it, "w", c.focal_w);
      take(*it, "gamma", c.focal_gamma);
    }
    take(j, "early_stop_patience", c.early_stop_patience);
    take(j, "early_stop_tolerance", c.early_stop_tolerance);
    if (auto it = j.find("input_range"); it != j.end()) {
      const auto range = it->get<std::vector<double>>();
      if (range.size() != 2) throw ValidationError("train.input_range needs two values");
      c.input_min = range[0];
      c.input_max = range[1];
    }
    if (auto it = j.find("dataset"); it != j.end()) {
      reject_unknown(*it, {"path", "split"}, "train.dataset");
      take(*it, "path", c.dataset_path);
      take(*it, "split", c.eval_split);
    }
    take(j, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad train config: ") + e.what());
  }
  c.validate();
  return c;
}

double surrogate_onemax(const Genotype& g) {
  if (g.size() == 0) return 0.0;
  return static_cast<double>(g.count_ones()) / static_cast<double>(g.size());
}

double surrogate_connectivity(const Genotype& g, const GenomeLayout& layout, const DecodeOptions& options) {
  const ArchitectureGraph graph = decode(g, layout, options);
  const ArchitectureGraph largest = decode(Genotype::ones(layout.total_bits), layout, options);
  std::size_t max_skips = 0;
  for (const auto& cell : layout.cells) max_skips += static_cast<std::size_t>(cell.skip_count);
  const double skip_term = static_cast<double>(graph.skip_edge_count()) / static_cast<double>(max_skips);
  const double params = static_cast<double>(parameter_count(graph).total);
  const double max_params = static_cast<double>(parameter_count(largest).total);
  return 0.7 * skip_term + 0.3 * (1.0 - params / max_params);
}

std::optional<FitnessRecord> FitnessCache::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  if (auto it = records_.find(key); it != records_.end()) return it->second;
  return std::nullopt;
}

void FitnessCache::store(const FitnessRecord& record) {
  if (record.failed()) throw ValidationError("failed evaluations are not cached");
  if (!(record.fitness >= 0.0 && record.fitness <= 1.0)) throw ValidationError("fitness outside [0, 1]");
  std::lock_guard lock(mutex_);
  auto [it, inserted] = records_.try_emplace(record.genome_key, record);
  if (!inserted && it->second.fitness != record.fitness) {
    std::ostringstream os;
    os.precision(17);
    os << "genome " << record.genome_key << " already cached with fitness " << it->second.fitness
       << ", refusing " << record.fitness;
    throw CacheConflict(os.str());
  }
}

std::size_t FitnessCache::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::vector<FitnessRecord> FitnessCache::records() const {
  std::lock_guard lock(mutex_);
  std::vector<FitnessRecord> out;
  out.reserve(records_.size());
  for (const auto& [key, r] : records_) out.push_back(r);
  return out;
}

void FitnessCache::clear() {
  std::lock_guard lock(mutex_);
  records_.clear();
}

nlohmann::ordered_json to_json(const EvaluationFailure& f) {
  nlohmann::ordered_json j;
  j["genome"] = f.genome_key;
  j["generation"] = f.generation;
  j["reason"] = f.reason;
  return j;
}

EvaluationFailure evaluation_failure_from_json(const nlohmann::json& j) {
  return {j.at("genome").get<std::string>(), j.at("reason").get<std::string>(), j.at("generation").get<int>()};
}

SurrogateBackend::SurrogateBackend(SurrogateKind kind, GenomeLayout layout, DecodeOptions options)
    : kind_(kind), layout_(std::move(layout)), options_(options) {}

std::vector<FitnessRecord> SurrogateBackend::evaluate(std::span<const Genotype> genomes) {
  std::vector<FitnessRecord> out;
  out.reserve(genomes.size());
  for (const Genotype& g : genomes) {
    FitnessRecord r;
    r.genome_key = g.str();
    r.source = FitnessSource::surrogate;
    const auto start = Clock::now();
    try {
      r.fitness = kind_ == SurrogateKind::onemax ? surrogate_onemax(g)
                                                 : surrogate_connectivity(g, layout_, options_);
    } catch (const std::exception& e) {
      r.fitness = 0.0;
      r.failure = e.what();
    }
    r.duration = std::chrono::duration<double>(Clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

WorkerBackend::WorkerBackend(WorkerPool& pool, GenomeLayout layout, TrainConfig train, DecodeOptions options)
    : pool_(pool), layout_(std::move(layout)), train_(std::move(train)), options_(options) {}

std::vector<FitnessRecord> WorkerBackend::evaluate(std::span<const Genotype> genomes) {
  const nlohmann::json train = to_json(train_);
  std::vector<WorkerTask> tasks;
  tasks.reserve(genomes.size());
  for (const Genotype& g : genomes) tasks.push_back(make_task(g, layout_, train, options_));
  std::vector<FitnessRecord> out;
  for (const auto& o : pool_.run(tasks)) out.push_back(record_from_outcome(o));
  return out;
}

std::vector<FitnessRecord> dispatch_evaluations(std::span<const Genotype> genomes, const GenomeLayout& layout,
                                                const TrainConfig& train, WorkerPool& pool, FitnessCache& cache,
                                                const DecodeOptions& options) {
  std::vector<std::optional<FitnessRecord>> results(genomes.size());
  std::vector<Genotype> unseen;
  std::unordered_map<std::string, std::vector<std::size_t>> waiting;
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    if (!is_canonical(genomes[i], layout)) throw ValidationError("dispatch requires canonical genomes");
    std::string key = genomes[i].str();
    if (auto hit = cache.lookup(key)) {
      results[i] = std::move(*hit);
      continue;
    }
    auto& slots = waiting[key];
    if (slots.empty()) unseen.push_back(genomes[i]);
    slots.push_back(i);
  }

  WorkerBackend backend(pool, layout, train, options);
  for (auto& record : backend.evaluate(unseen)) {
    if (!record.failed()) cache.store(record);
    for (std::size_t i : waiting[record.genome_key]) results[i] = record;
  }

  std::vector<FitnessRecord> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

nlohmann::ordered_json to_json(const EvaluationStats& s) {
  nlohmann::ordered_json j;
  j["requests"] = s.requests;
  j["cache_hits"] = s.cache_hits;
  j["backend_evaluations"] = s.backend_evaluations;
  j["failures"] = s.failures;
  return j;
}

EvaluationStats evaluation_stats_from_json(const nlohmann::json& j) {
  EvaluationStats s;
  s.requests = j.at("requests").get<std::uint64_t>();
  s.cache_hits = j.at("cache_hits").get<std::uint64_t>();
  s.backend_evaluations = j.at("backend_evaluations").get<std::uint64_t>();
  s.failures = j.at("failures").get<std::uint64_t>();
  return s;
}

EvaluationService::EvaluationService(FitnessBackend& backend, Logger log)
    : backend_(backend), log_(std::move(log)) {}

std::vector<FitnessRecord> EvaluationService::evaluate(std::span<const Genotype> genomes, int generation) {
  stats_.requests += genomes.size();
  std::vector<std::optional<FitnessRecord>> results(genomes.size());
  std::vector<Genotype> todo;
  std::unordered_map<std::string, std::vector<std::size_t>> waiting;
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    std::string key = genomes[i].str();
    if (auto hit = cache_.lookup(key)) {
      ++stats_.cache_hits;
      results[i] = std::move(*hit);
      continue;
    }
    auto& slots = waiting[key];
    if (slots.empty()) {
      todo.push_back(genomes[i]);
    } else {
      ++stats_.cache_hits;
    }
    slots.push_back(i);
  }

  stats_.backend_evaluations += todo.size();
  auto records = backend_.evaluate(todo);
  if (records.size() != todo.size()) throw Error("fitness backend returned the wrong number of records");
  for (auto& record : records) {
    if (record.failed()) {
      ++stats_.failures;
      failures_.push_back({record.genome_key, record.failure, generation});
      if (log_) log_("generation " + std::to_string(generation) + ": genome " + record.genome_key +
                     " scored 0 (" + record.failure + ")");
    } else {
      cache_.store(record);
    }
    for (std::size_t i : waiting[record.genome_key]) results[i] = record;
  }

  std::vector<FitnessRecord> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

void EvaluationService::restore(std::span<const FitnessRecord> cached, const EvaluationStats& stats,
                                std::vector<EvaluationFailure> failures) {
  cache_.clear();
  for (const auto& r : cached) cache_.store(r);
  stats_ = stats;
  failures_ = std::move(failures);
}

std::string resolve_worker_command(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv("EVONAS_WORKER_CMD")) return env;
  return {};
}

}  // namespace evonas
