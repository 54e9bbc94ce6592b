#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

namespace evonas {

// Line-delimited JSON over the worker's stdin/stdout:
//   worker -> {"type":"ready","protocol":1}                       on start
//   pool   -> {"type":"evaluate","id":N,"architecture":...,"train":...}
//   worker -> {"type":"result","id":N,"fitness":F,"metrics":{...},"epochs_run":E}
//          |  {"type":"error","id":N,"message":"..."}
inline constexpr int kProtocolVersion = 1;

struct WorkerPoolOptions {
  std::string command;  // run through /bin/sh -c
  int size = 1;
  double timeout_s = 3600.0;  // per evaluation
  double handshake_timeout_s = 30.0;
  // Replacement processes allowed over the pool's lifetime; < 0 means 4 * size.
  int max_restarts = -1;
  std::function<void(const std::string&)> log;
};

struct WorkerTask {
  std::string key;            // genome key, echoed in the outcome
  nlohmann::json architecture;
  nlohmann::json train;
};

struct WorkerOutcome {
  std::string key;
  bool ok = false;
  double fitness = 0.0;
  nlohmann::json metrics;
  int epochs_run = 0;
  double duration = 0.0;
  int attempts = 0;
  std::string failure;  // empty when ok
};

struct PoolStats {
  int spawned = 0;
  int requests_sent = 0;
  int retries = 0;
  int quarantined = 0;  // protocol violations and deaths
  int timeouts = 0;
  int worker_errors = 0;  // well-formed error responses
};

// Fixed-size pool of worker subprocesses. A worker that breaks protocol or dies
// is killed and replaced; the genome it was evaluating is retried once on a
// different worker and then scored as failed. A timed-out evaluation fails
// without retry. Throws PoolFailure when no worker can be kept alive.
class WorkerPool {
 public:
  explicit WorkerPool(WorkerPoolOptions options);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  // Outcomes in task order.
  std::vector<WorkerOutcome> run(const std::vector<WorkerTask>& tasks);

  const PoolStats& stats() const { return stats_; }
  int live_workers() const;

 private:
  struct Impl;
  PoolStats stats_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace evonas
