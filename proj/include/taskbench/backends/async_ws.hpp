#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <latch>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "taskbench/backends/dataflow.hpp"
#include "taskbench/backends/ready_queue.hpp"
#include "taskbench/backends/worker_thread.hpp"

namespace taskbench {

namespace detail {

inline volatile std::uint64_t quiescence_sink = 0;

class AsyncWsRun {
 public:
  AsyncWsRun(const TaskGraph& g, const BackendConfig& cfg, const RunOptions& opts)
      : g_(g),
        cfg_(cfg),
        opts_(opts),
        workers_(cfg.cores),
        owner_(block_partition(g.width(), cfg.cores)),
        store_(g),
        outputs_(g.total_tasks()),
        tally_(workers_),
        remaining_(g.total_tasks()) {
    queues_.reserve(workers_);
    for (std::uint32_t w = 0; w < workers_; ++w)
      queues_.push_back(std::make_unique<ReadyQueue>(cfg.scheduler.priority_mode));
    dataflow::prepare_trace(opts.trace, g);
  }

  RunResult execute() {
    std::latch release(1);
    std::vector<WorkerThread> pool;
    pool.reserve(workers_);
    for (std::uint32_t w = 0; w < workers_; ++w)
      pool.emplace_back(cfg_.scheduler.worker_stack, [this, w, &release] {
        release.wait();
        worker_loop(w);
      });

    const auto timeout = dataflow::watchdog_timeout(g_, cfg_, opts_);
    const auto t0 = std::chrono::steady_clock::now();
    counters_.emplace(g_);
    for (Timestep t = 0; t < g_.timesteps(); ++t)
      for (Index i = 0; i < g_.width(); ++i)
        if (counters_->load(g_.task_id(t, i)) == 0) queues_[owner_[i]]->push(g_.task_id(t, i), t);
    release.count_down();

    bool timed_out = false;
    {
      std::unique_lock lk(done_mu_);
      if (!done_cv_.wait_for(lk, timeout, [&] { return done_; })) timed_out = true;
    }
    const auto t1 = std::chrono::steady_clock::now();
    if (timed_out) abort_run();
    for (auto& th : pool) th.join();

    if (error_) std::rethrow_exception(error_);
    if (timed_out)
      throw DeadlockError(fmt::format("async_ws run exceeded its watchdog deadline with {} of {} tasks "
                                      "unfinished",
                                      remaining_.load(), g_.total_tasks()));

    RunResult r;
    r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    for (const auto& l : tally_) {
      r.tasks_executed += l.tasks;
      r.edges_satisfied += l.edges;
      r.flops_executed += l.flops;
    }
    r.dataflow_checksum = dataflow::fold_all(outputs_);
    return r;
  }

 private:
  struct alignas(64) Tally {
    std::uint64_t tasks = 0, edges = 0, flops = 0;
  };

  bool finished() const noexcept {
    return remaining_.load(std::memory_order_acquire) == 0 || aborted_.load(std::memory_order_relaxed);
  }

  void signal_done() {
    {
      std::lock_guard lk(done_mu_);
      done_ = true;
    }
    done_cv_.notify_all();
    epoch_.fetch_add(1);
    epoch_.notify_all();
  }

  void abort_run() {
    aborted_.store(true);
    signal_done();
  }

  void wake() {
    epoch_.fetch_add(1);
    if (sleepers_.load() > 0) epoch_.notify_all();
  }

  // Scans every queue and the outstanding-task count, as a runtime that
  // detects idleness would on each scheduler pass.
  void poll_quiescence() {
    std::uint64_t visible = remaining_.load(std::memory_order_relaxed);
    for (const auto& q : queues_) visible += q->approx_size();
    quiescence_sink = visible;
  }

  std::optional<TaskId> find_task(std::uint32_t w) {
    if (auto t = queues_[w]->pop_owner()) return t;
    if (!cfg_.scheduler.work_stealing) return std::nullopt;
    for (std::uint32_t k = 1; k < workers_; ++k)
      if (auto t = queues_[(w + k) % workers_]->pop_thief()) return t;
    return std::nullopt;
  }

  void run_one(TaskId id, std::vector<std::byte>& scratch, Tally& local) {
    const auto [t, i] = g_.point(id);
    dataflow::require_ready(*counters_, g_, id);
    if (opts_.trace) opts_.trace->start_ns[id] = dataflow::now_ns();
    const auto deps = g_.dependencies(t, i);
    outputs_[id] = dataflow::run_task(g_, t, i, deps, [&](Index d) {
      return store_.deliver(g_.task_id(t - 1, d), scratch);
    });
    store_.write(id, outputs_[id]);
    local.edges += deps.size();
    local.flops += g_.kernel().flops();
    ++local.tasks;
    if (opts_.trace) opts_.trace->finish_ns[id] = dataflow::now_ns();

    bool pushed = false;
    for (Index j : g_.reverse_dependencies(t, i)) {
      const auto succ = g_.task_id(t + 1, j);
      if (counters_->satisfy(succ)) {
        queues_[owner_[j]]->push(succ, t + 1);
        pushed = true;
      }
    }
    if (pushed) wake();
    if (remaining_.fetch_sub(1, std::memory_order_acq_rel) == 1) signal_done();
  }

  void worker_loop(std::uint32_t w) {
    std::vector<std::byte> scratch(store_.stride());
    Tally local;
    try {
      while (!finished()) {
        if (cfg_.scheduler.idle_detection) poll_quiescence();
        const auto seen = epoch_.load();
        if (auto id = find_task(w)) {
          run_one(*id, scratch, local);
          continue;
        }
        bool found = false;
        for (int spin = 0; spin < 64 && !finished(); ++spin) {
          std::this_thread::yield();
          if (epoch_.load() != seen) {
            found = true;
            break;
          }
        }
        if (found || finished()) continue;
        sleepers_.fetch_add(1);
        epoch_.wait(seen);
        sleepers_.fetch_sub(1);
      }
    } catch (...) {
      {
        std::lock_guard lk(done_mu_);
        if (!error_) error_ = std::current_exception();
      }
      abort_run();
    }
    tally_[w] = local;
  }

  const TaskGraph& g_;
  const BackendConfig& cfg_;
  const RunOptions& opts_;
  const std::uint32_t workers_;
  const std::vector<std::uint32_t> owner_;
  dataflow::PayloadStore store_;
  std::vector<std::uint64_t> outputs_;
  std::vector<Tally> tally_;
  std::vector<std::unique_ptr<ReadyQueue>> queues_;
  std::optional<dataflow::DependenceCounters> counters_;

  std::atomic<std::uint64_t> remaining_;
  std::atomic<std::uint64_t> epoch_{0};
  std::atomic<std::uint32_t> sleepers_{0};
  std::atomic<bool> aborted_{false};

  std::mutex done_mu_;
  std::condition_variable done_cv_;
  bool done_ = false;
  std::exception_ptr error_;
};

}  // namespace detail

/// Dataflow executor: a task becomes runnable when its dependence counter
/// reaches zero and is queued on the worker that owns its column. Idle
/// workers steal from others when work_stealing is set.
inline RunResult run_async_ws(const TaskGraph& g, const BackendConfig& cfg, const RunOptions& opts = {}) {
  detail::AsyncWsRun run(g, cfg, opts);
  return run.execute();
}

}  // namespace taskbench
