#include "evonas/worker_pool.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <deque>
#include <iostream>
#include <optional>

#include "evonas/error.hpp"

namespace evonas {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxLineBytes = 64u << 20;

Clock::time_point after(double seconds) {
  return Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

bool write_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

struct WorkerPool::Impl {
  enum class State { dead, starting, idle, busy };

  struct Worker {
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;
    std::string buffer;
    State state = State::dead;
    Clock::time_point deadline;
    Clock::time_point sent_at;
    int task = -1;
    long request_id = -1;
  };

  WorkerPoolOptions options;
  PoolStats& stats;
  std::vector<Worker> workers;
  long next_id = 1;

  // Per-run bookkeeping.
  const std::vector<WorkerTask>* tasks = nullptr;
  std::vector<std::optional<WorkerOutcome>> outcomes;
  std::vector<int> attempts;
  std::deque<int> pending;
  std::size_t resolved = 0;

  Impl(WorkerPoolOptions opts, PoolStats& s) : options(std::move(opts)), stats(s) {
    if (options.size < 1) throw ValidationError("worker pool size must be >= 1");
    if (options.command.empty()) throw ValidationError("worker command is empty");
    if (!(options.timeout_s > 0.0)) throw ValidationError("worker timeout must be positive");
    if (options.max_restarts < 0) options.max_restarts = 4 * options.size;
    if (!options.log) options.log = [](const std::string& m) { std::cerr << "evonas: " << m << "\n"; };
    workers.resize(static_cast<std::size_t>(options.size));
    std::signal(SIGPIPE, SIG_IGN);
  }

  ~Impl() {
    for (auto& w : workers) {
      if (w.state == State::dead) continue;
      ::close(w.to_child);
      w.to_child = -1;
      // Give the worker a moment to exit on EOF before killing it.
      for (int i = 0; i < 50 && ::waitpid(w.pid, nullptr, WNOHANG) == 0; ++i) ::usleep(10'000);
      reap(w);
    }
  }

  void reap(Worker& w) {
    if (w.pid > 0) {
      ::kill(-w.pid, SIGKILL);
      ::waitpid(w.pid, nullptr, 0);
    }
    if (w.to_child >= 0) ::close(w.to_child);
    if (w.from_child >= 0) ::close(w.from_child);
    w = Worker{};
  }

  bool spawn_allowed() const { return stats.spawned < options.size + options.max_restarts; }

  void spawn(Worker& w) {
    int in[2];
    int out[2];
    if (::pipe2(in, O_CLOEXEC) != 0) throw PoolFailure(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(out, O_CLOEXEC) != 0) {
      ::close(in[0]);
      ::close(in[1]);
      throw PoolFailure(std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw PoolFailure(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
      ::setpgid(0, 0);
      ::dup2(in[0], STDIN_FILENO);
      ::dup2(out[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", options.command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(in[0]);
    ::close(out[1]);
    w.pid = pid;
    w.to_child = in[1];
    w.from_child = out[0];
    w.state = State::starting;
    w.deadline = after(options.handshake_timeout_s);
    ++stats.spawned;
  }

  void resolve(int task, WorkerOutcome outcome) {
    outcome.key = (*tasks)[static_cast<std::size_t>(task)].key;
    outcome.attempts = attempts[static_cast<std::size_t>(task)];
    outcomes[static_cast<std::size_t>(task)] = std::move(outcome);
    ++resolved;
  }

  void fail_task(int task, const std::string& reason) {
    WorkerOutcome o;
    o.ok = false;
    o.failure = reason;
    resolve(task, std::move(o));
  }

  // Worker died or broke protocol: kill it and retry its task once elsewhere.
  void quarantine(Worker& w, const std::string& reason) {
    ++stats.quarantined;
    const int task = w.state == State::busy ? w.task : -1;
    options.log("worker " + std::to_string(w.pid) + " quarantined: " + reason);
    reap(w);
    if (task < 0) return;
    const auto& key = (*tasks)[static_cast<std::size_t>(task)].key;
    if (attempts[static_cast<std::size_t>(task)] < 2) {
      ++stats.retries;
      options.log("retrying genome " + key + " on another worker");
      pending.push_front(task);
    } else {
      options.log("genome " + key + " failed after retry: " + reason);
      fail_task(task, reason + " (after retry)");
    }
  }

  void dispatch(Worker& w, int task) {
    const auto& t = (*tasks)[static_cast<std::size_t>(task)];
    nlohmann::json request;
    request["type"] = "evaluate";
    request["id"] = next_id;
    request["architecture"] = t.architecture;
    request["train"] = t.train;
    ++attempts[static_cast<std::size_t>(task)];
    w.state = State::busy;
    w.task = task;
    w.request_id = next_id++;
    w.sent_at = Clock::now();
    w.deadline = after(options.timeout_s);
    ++stats.requests_sent;
    if (!write_all(w.to_child, request.dump() + "\n")) quarantine(w, "write to worker failed");
  }

  void handle_line(Worker& w, const std::string& raw) {
    const auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos) return;
    nlohmann::json msg;
    try {
      msg = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      quarantine(w, "malformed line");
      return;
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      quarantine(w, "message without a type");
      return;
    }
    const std::string type = msg["type"].get<std::string>();

    if (w.state == State::starting) {
      if (type == "ready" && msg.value("protocol", 0) == kProtocolVersion) {
        w.state = State::idle;
      } else {
        quarantine(w, "bad handshake");
      }
      return;
    }
    if (w.state != State::busy) {
      quarantine(w, "unsolicited '" + type + "' message");
      return;
    }
    const auto id = msg.find("id");
    if (id == msg.end() || !id->is_number_integer() || id->get<long>() != w.request_id) {
      quarantine(w, "response id does not match request " + std::to_string(w.request_id));
      return;
    }
    if (type == "result") {
      const auto fit = msg.find("fitness");
      if (fit == msg.end() || !fit->is_number()) {
        quarantine(w, "result without numeric fitness");
        return;
      }
      const double fitness = fit->get<double>();
      if (!std::isfinite(fitness) || fitness < 0.0 || fitness > 1.0) {
        quarantine(w, "fitness outside [0, 1]");
        return;
      }
      WorkerOutcome o;
      o.ok = true;
      o.fitness = fitness;
      o.duration = seconds_since(w.sent_at);
      if (auto m = msg.find("metrics"); m != msg.end()) o.metrics = *m;
      if (auto e = msg.find("epochs_run"); e != msg.end() && e->is_number_integer()) o.epochs_run = e->get<int>();
      const int task = w.task;
      w.state = State::idle;
      w.task = -1;
      resolve(task, std::move(o));
    } else if (type == "error") {
      ++stats.worker_errors;
      const std::string message = msg.value("message", std::string("unspecified"));
      const int task = w.task;
      options.log("worker error for genome " + (*tasks)[static_cast<std::size_t>(task)].key + ": " + message);
      w.state = State::idle;
      w.task = -1;
      fail_task(task, "worker error: " + message);
    } else {
      quarantine(w, "unexpected '" + type + "' message");
    }
  }

  void on_readable(Worker& w) {
    char chunk[65536];
    const ssize_t n = ::read(w.from_child, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) return;
    if (n <= 0) {
      quarantine(w, "worker exited");
      return;
    }
    w.buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t nl; (nl = w.buffer.find('\n', start)) != std::string::npos;) {
      const std::string line = w.buffer.substr(start, nl - start);
      start = nl + 1;
      handle_line(w, line);
      if (w.state == State::dead) return;
    }
    w.buffer.erase(0, start);
    if (w.buffer.size() > kMaxLineBytes) quarantine(w, "line exceeds size limit");
  }

  void check_deadlines() {
    const auto now = Clock::now();
    for (auto& w : workers) {
      if (w.deadline > now) continue;
      if (w.state == State::starting) {
        quarantine(w, "handshake timed out");
      } else if (w.state == State::busy) {
        ++stats.timeouts;
        const int task = w.task;
        options.log("genome " + (*tasks)[static_cast<std::size_t>(task)].key + " timed out");
        w.state = State::idle;  // detach the task so quarantine does not retry it
        w.task = -1;
        reap(w);
        fail_task(task, "timeout after " + std::to_string(options.timeout_s) + "s");
      }
    }
  }

  int live() const {
    return static_cast<int>(std::count_if(workers.begin(), workers.end(),
                                          [](const Worker& w) { return w.state != State::dead; }));
  }

  std::vector<WorkerOutcome> run(const std::vector<WorkerTask>& batch) {
    tasks = &batch;
    outcomes.assign(batch.size(), std::nullopt);
    attempts.assign(batch.size(), 0);
    pending.clear();
    resolved = 0;
    for (int i = 0; i < static_cast<int>(batch.size()); ++i) pending.push_back(i);

    while (resolved < batch.size()) {
      for (auto& w : workers) {
        if (w.state == State::dead && spawn_allowed()) spawn(w);
      }
      if (live() == 0) {
        throw PoolFailure("no live workers left; " + std::to_string(batch.size() - resolved) +
                          " evaluations outstanding");
      }
      for (auto& w : workers) {
        if (w.state == State::idle && !pending.empty()) {
          const int task = pending.front();
          pending.pop_front();
          dispatch(w, task);
        }
      }

      std::vector<pollfd> fds;
      std::vector<Worker*> owners;
      auto nearest = Clock::time_point::max();
      for (auto& w : workers) {
        if (w.state == State::starting || w.state == State::busy) {
          fds.push_back({w.from_child, POLLIN, 0});
          owners.push_back(&w);
          nearest = std::min(nearest, w.deadline);
        }
      }
      if (fds.empty()) continue;
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(nearest - Clock::now()).count();
      const int timeout_ms = static_cast<int>(std::clamp<long long>(wait + 1, 0, 60'000));
      const int ready = ::poll(fds.data(), fds.size(), timeout_ms);
      if (ready < 0 && errno != EINTR) throw PoolFailure(std::string("poll: ") + std::strerror(errno));
      for (std::size_t i = 0; ready > 0 && i < fds.size(); ++i) {
        if (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) {
          if (owners[i]->state != State::dead) on_readable(*owners[i]);
        }
      }
      check_deadlines();
    }

    std::vector<WorkerOutcome> out;
    out.reserve(batch.size());
    for (auto& o : outcomes) out.push_back(std::move(*o));
    tasks = nullptr;
    return out;
  }
};

WorkerPool::WorkerPool(WorkerPoolOptions options)
    : impl_(std::make_unique<Impl>(std::move(options), stats_)) {}

WorkerPool::~WorkerPool() = default;

std::vector<WorkerOutcome> WorkerPool::run(const std::vector<WorkerTask>& tasks) {
  if (tasks.empty()) return {};
  return impl_->run(tasks);
}

int WorkerPool::live_workers() const { return impl_->live(); }

}  // namespace evonas
