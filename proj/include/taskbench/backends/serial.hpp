#pragma once

#include <chrono>
#include <vector>

#include "taskbench/backends/dataflow.hpp"

namespace taskbench {

/// Reference executor: runs tasks in (t, then i) order on the calling thread
/// and defines the canonical dataflow checksum.
inline RunResult run_serial(const TaskGraph& g, const RunOptions& opts = {}) {
  dataflow::PayloadStore store(g);
  std::vector<std::uint64_t> outputs(g.total_tasks());
  std::vector<std::byte> scratch(store.stride());
  dataflow::prepare_trace(opts.trace, g);

  RunResult r;
  const auto t0 = std::chrono::steady_clock::now();
  dataflow::DependenceCounters counters(g);
  for (Timestep t = 0; t < g.timesteps(); ++t) {
    for (Index i = 0; i < g.width(); ++i) {
      const auto id = g.task_id(t, i);
      dataflow::require_ready(counters, g, id);
      if (opts.trace) opts.trace->start_ns[id] = dataflow::now_ns();
      const auto deps = g.dependencies(t, i);
      outputs[id] = dataflow::run_task(g, t, i, deps, [&](Index d) {
        return store.deliver(g.task_id(t - 1, d), scratch);
      });
      store.write(id, outputs[id]);
      r.edges_satisfied += deps.size();
      r.flops_executed += g.kernel().flops();
      ++r.tasks_executed;
      if (opts.trace) opts.trace->finish_ns[id] = dataflow::now_ns();
      for (Index j : g.reverse_dependencies(t, i)) counters.satisfy(g.task_id(t + 1, j));
    }
  }
  const auto t1 = std::chrono::steady_clock::now();

  r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.dataflow_checksum = dataflow::fold_all(outputs);
  return r;
}

}  // namespace taskbench
