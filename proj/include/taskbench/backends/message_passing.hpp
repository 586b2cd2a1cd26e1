#pragma once

#include <chrono>
#include <condition_variable>
#include <exception>
#include <latch>
#include <mutex>
#include <vector>

#include "taskbench/backends/dataflow.hpp"
#include "taskbench/backends/transport.hpp"
#include "taskbench/backends/worker_thread.hpp"

namespace taskbench {

namespace detail {

// What one rank hands back after the run. Ranks share nothing else.
struct RankOutcome {
  std::vector<std::uint64_t> outputs;  // [t * cols + local column]
  std::uint64_t tasks = 0, edges = 0, flops = 0;
};

inline std::uint32_t edge_id(const TaskGraph& g, Index src, Index dst) {
  return static_cast<std::uint32_t>(static_cast<std::uint64_t>(src) * g.width() + dst);
}

/// Body of one rank: execute own columns of step t, send their payloads along
/// cross-rank edges, then collect the payloads step t+1 needs.
inline void rank_main(const TaskGraph& g, std::uint32_t rank, std::uint32_t cols, Transport& net,
                      const RunOptions& opts, RankOutcome& out) {
  const Index lo = rank * cols, hi = lo + cols;
  const auto owner_of = [cols](Index i) { return i / cols; };
  const std::size_t stride = dataflow::payload_size(g.spec());
  const std::uint32_t ranks = net.ranks();

  // Rank-private state.
  std::vector<std::uint32_t> waiting(cols);
  std::vector<std::byte> prev(cols * stride), cur(cols * stride), scratch(stride);
  std::vector<std::uint64_t> remote(g.width());
  std::vector<std::uint32_t> expected(ranks);
  out.outputs.assign(static_cast<std::size_t>(g.timesteps()) * cols, 0);

  auto init_waiting = [&](Timestep t) {
    for (Index j = lo; j < hi; ++j) waiting[j - lo] = g.dependencies(t, j).size();
  };
  init_waiting(0);

  for (Timestep t = 0; t < g.timesteps(); ++t) {
    for (Index i = lo; i < hi; ++i) {
      if (waiting[i - lo] != 0)
        throw DependencyViolation(fmt::format("rank {} task ({}, {}) started with {} unsatisfied dependencies",
                                              rank, t, i, waiting[i - lo]));
      const auto id = g.task_id(t, i);
      if (opts.trace) opts.trace->start_ns[id] = dataflow::now_ns();
      const auto deps = g.dependencies(t, i);
      const auto value = dataflow::run_task(g, t, i, deps, [&](Index d) -> std::uint64_t {
        if (owner_of(d) == rank) {
          std::memcpy(scratch.data(), prev.data() + (d - lo) * stride, stride);
          return dataflow::load_u64_le(scratch.data());
        }
        return remote[d];
      });
      dataflow::fill_payload({cur.data() + (i - lo) * stride, stride}, value);
      out.outputs[static_cast<std::size_t>(t) * cols + (i - lo)] = value;
      out.edges += deps.size();
      out.flops += g.kernel().flops();
      ++out.tasks;
      if (opts.trace) opts.trace->finish_ns[id] = dataflow::now_ns();
    }
    if (t + 1 == g.timesteps()) break;

    init_waiting(t + 1);
    for (Index i = lo; i < hi; ++i) {
      const std::span<const std::byte> payload{cur.data() + (i - lo) * stride, stride};
      for (Index j : g.reverse_dependencies(t, i)) {
        if (owner_of(j) == rank) {
          --waiting[j - lo];  // intra-rank edge, no transport
        } else {
          net.send(rank, owner_of(j), edge_id(g, i, j), payload);
        }
      }
    }

    std::fill(expected.begin(), expected.end(), 0);
    for (Index j = lo; j < hi; ++j)
      for (Index d : g.dependencies(t + 1, j))
        if (owner_of(d) != rank) ++expected[owner_of(d)];
    for (std::uint32_t s = 0; s < ranks; ++s) {
      for (std::uint32_t k = 0; k < expected[s]; ++k) {
        Frame f = net.receive(rank, s);
        const Index src = f.edge_id / g.width(), dst = f.edge_id % g.width();
        if (owner_of(src) != s || owner_of(dst) != rank || f.payload.size() != stride ||
            !g.dependencies(t + 1, dst).contains(src))
          throw BackendError(fmt::format("rank {} received unexpected frame (edge {}, {} bytes) from rank {}",
                                         rank, f.edge_id, f.payload.size(), s));
        std::memcpy(scratch.data(), f.payload.data(), stride);
        remote[src] = dataflow::load_u64_le(scratch.data());
        --waiting[dst - lo];
      }
    }
    std::swap(prev, cur);
  }
  net.finish_sender(rank);
}

}  // namespace detail

/// Rank executor: `cores` ranks each own `width / cores` contiguous columns
/// and exchange payloads only through the configured transport.
inline RunResult run_message_passing(const TaskGraph& g, const BackendConfig& cfg, const RunOptions& opts = {}) {
  const std::uint32_t ranks = cfg.cores;
  shard_assignment(g.width(), ranks);  // validates divisibility
  if (static_cast<std::uint64_t>(g.width()) * g.width() > 0xffffffffULL)
    throw ConfigMismatch("message_passing edge ids need width <= 65535");
  const std::uint32_t cols = g.width() / ranks;
  dataflow::prepare_trace(opts.trace, g);

  auto net = make_transport(cfg.transport.medium, ranks);
  std::vector<detail::RankOutcome> outcome(ranks);
  std::mutex mu;
  std::condition_variable cv;
  std::uint32_t finished = 0;
  std::exception_ptr error;
  std::latch release(1);

  std::vector<WorkerThread> pool;
  pool.reserve(ranks);
  for (std::uint32_t r = 0; r < ranks; ++r) {
    pool.emplace_back(cfg.scheduler.worker_stack, [&, r] {
      release.wait();
      try {
        detail::rank_main(g, r, cols, *net, opts, outcome[r]);
      } catch (...) {
        {
          std::lock_guard lk(mu);
          if (!error) error = std::current_exception();
        }
        net->abort();
      }
      {
        std::lock_guard lk(mu);
        ++finished;
      }
      cv.notify_all();
    });
  }

  const auto timeout = dataflow::watchdog_timeout(g, cfg, opts);
  const auto t0 = std::chrono::steady_clock::now();
  release.count_down();
  bool timed_out = false;
  {
    std::unique_lock lk(mu);
    if (!cv.wait_for(lk, timeout, [&] { return finished == ranks; })) timed_out = true;
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (timed_out) net->abort();
  for (auto& th : pool) th.join();
  net.reset();

  if (timed_out) throw DeadlockError("message_passing run exceeded its watchdog deadline");
  if (error) std::rethrow_exception(error);

  RunResult r;
  r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  std::vector<std::uint64_t> outputs(g.total_tasks());
  for (std::uint32_t rk = 0; rk < ranks; ++rk) {
    const auto& o = outcome[rk];
    r.tasks_executed += o.tasks;
    r.edges_satisfied += o.edges;
    r.flops_executed += o.flops;
    for (Timestep t = 0; t < g.timesteps(); ++t)
      for (Index c = 0; c < cols; ++c) outputs[g.task_id(t, rk * cols + c)] = o.outputs[t * cols + c];
  }
  r.dataflow_checksum = dataflow::fold_all(outputs);
  return r;
}

}  // namespace taskbench
