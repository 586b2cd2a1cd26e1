#pragma once

#include <atomic>
#include <barrier>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <optional>
#include <vector>

#include "taskbench/backends/dataflow.hpp"
#include "taskbench/backends/worker_thread.hpp"

namespace taskbench {

/// Barrier executor: a persistent pool splits each timestep's width into
/// contiguous blocks, then every worker waits at a barrier before the next
/// timestep starts.
inline RunResult run_fork_join(const TaskGraph& g, const BackendConfig& cfg, const RunOptions& opts = {}) {
  const std::uint32_t workers = cfg.cores;
  const auto owner = block_partition(g.width(), workers);
  std::vector<Index> first(workers + 1, g.width());
  for (Index i = g.width(); i-- > 0;) first[owner[i]] = i;
  for (std::uint32_t w = workers; w-- > 0;) first[w] = std::min(first[w], first[w + 1]);

  dataflow::PayloadStore store(g);
  std::vector<std::uint64_t> outputs(g.total_tasks());
  dataflow::prepare_trace(opts.trace, g);

  struct alignas(64) Tally {
    std::uint64_t tasks = 0, edges = 0, flops = 0;
  };
  std::vector<Tally> tally(workers);

  std::optional<dataflow::DependenceCounters> counters;
  std::atomic<bool> abort{false};
  std::mutex err_mu;
  std::exception_ptr error;
  std::mutex done_mu;
  std::condition_variable done_cv;
  std::uint32_t finished = 0;

  std::barrier start(workers + 1);
  std::barrier step(workers);

  auto body = [&](std::uint32_t w) {
    start.arrive_and_wait();
    std::vector<std::byte> scratch(store.stride());
    Tally local;
    for (Timestep t = 0; t < g.timesteps(); ++t) {
      for (Index i = first[w]; i < first[w + 1] && !abort.load(std::memory_order_relaxed); ++i) {
        try {
          const auto id = g.task_id(t, i);
          dataflow::require_ready(*counters, g, id);
          if (opts.trace) opts.trace->start_ns[id] = dataflow::now_ns();
          const auto deps = g.dependencies(t, i);
          outputs[id] = dataflow::run_task(g, t, i, deps, [&](Index d) {
            return store.deliver(g.task_id(t - 1, d), scratch);
          });
          store.write(id, outputs[id]);
          local.edges += deps.size();
          local.flops += g.kernel().flops();
          ++local.tasks;
          if (opts.trace) opts.trace->finish_ns[id] = dataflow::now_ns();
          for (Index j : g.reverse_dependencies(t, i)) counters->satisfy(g.task_id(t + 1, j));
        } catch (...) {
          std::lock_guard lk(err_mu);
          if (!error) error = std::current_exception();
          abort.store(true);
        }
      }
      step.arrive_and_wait();
    }
    tally[w] = local;
    {
      std::lock_guard lk(done_mu);
      ++finished;
    }
    done_cv.notify_one();
  };

  std::vector<WorkerThread> pool;
  pool.reserve(workers);
  for (std::uint32_t w = 0; w < workers; ++w)
    pool.emplace_back(cfg.scheduler.worker_stack, [&body, w] { body(w); });

  const auto timeout = dataflow::watchdog_timeout(g, cfg, opts);
  const auto t0 = std::chrono::steady_clock::now();
  counters.emplace(g);
  start.arrive_and_wait();
  bool timed_out = false;
  {
    std::unique_lock lk(done_mu);
    if (!done_cv.wait_for(lk, timeout, [&] { return finished == workers; })) {
      timed_out = true;
      abort.store(true);
      done_cv.wait(lk, [&] { return finished == workers; });
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  for (auto& th : pool) th.join();

  if (error) std::rethrow_exception(error);
  if (timed_out) throw DeadlockError("fork_join run exceeded its watchdog deadline");

  RunResult r;
  r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  for (const auto& l : tally) {
    r.tasks_executed += l.tasks;
    r.edges_satisfied += l.edges;
    r.flops_executed += l.flops;
  }
  r.dataflow_checksum = dataflow::fold_all(outputs);
  return r;
}

}  // namespace taskbench
