#pragma once

// Pieces every executor shares: the canonical task/graph checksum fold, the
// payload layout, dependence counters and the watchdog deadline.
//
// A task's seed folds its point coordinates and, in ascending index order,
// the output checksums of its dependencies. Its output is mix(seed ^
// kernel(seed)). The graph checksum folds outputs in (t, then i) order.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "taskbench/backends/config.hpp"
#include "taskbench/graph.hpp"

namespace taskbench::dataflow {

inline constexpr std::uint64_t kGraphSeed = 0x7461736b62656e63ULL;

inline std::uint64_t point_seed(Timestep t, Index i) noexcept {
  return mix64(kGraphSeed ^ mix64((static_cast<std::uint64_t>(t) << 32) | i));
}

inline std::uint64_t fold_input(std::uint64_t seed, std::uint64_t dep_output) noexcept {
  return mix64(seed ^ dep_output);
}

inline std::uint64_t task_output(const KernelConfig& k, std::uint64_t seed) noexcept {
  return mix64(seed ^ execute_kernel(k, seed));
}

inline std::uint64_t fold_graph(std::uint64_t acc, std::uint64_t output) noexcept {
  return mix64(acc ^ output);
}

inline std::uint64_t fold_all(std::span<const std::uint64_t> outputs_in_task_order) noexcept {
  std::uint64_t acc = kGraphSeed;
  for (auto o : outputs_in_task_order) acc = fold_graph(acc, o);
  return acc;
}

inline void store_u32_le(std::byte* p, std::uint32_t v) noexcept {
  for (int k = 0; k < 4; ++k) p[k] = static_cast<std::byte>(v >> (8 * k));
}
inline std::uint32_t load_u32_le(const std::byte* p) noexcept {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(p[k]) << (8 * k);
  return v;
}
inline void store_u64_le(std::byte* p, std::uint64_t v) noexcept {
  for (int k = 0; k < 8; ++k) p[k] = static_cast<std::byte>(v >> (8 * k));
}
inline std::uint64_t load_u64_le(const std::byte* p) noexcept {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(p[k]) << (8 * k);
  return v;
}

// A payload is the producer's 8-byte checksum followed by output_bytes of filler.
inline constexpr std::size_t kChecksumBytes = 8;

inline std::size_t payload_size(const GraphSpec& s) { return kChecksumBytes + s.output_bytes; }

inline void fill_payload(std::span<std::byte> out, std::uint64_t checksum) noexcept {
  store_u64_le(out.data(), checksum);
  auto b = static_cast<std::byte>(checksum & 0xff);
  for (std::size_t k = kChecksumBytes; k < out.size(); ++k) out[k] = b;
}

inline constexpr std::size_t kMaxPayloadStore = std::size_t{1} << 31;

/// One payload slot per task, written once by its producer and read by its
/// consumers after the dependence counter hand-off.
class PayloadStore {
 public:
  explicit PayloadStore(const TaskGraph& g) : stride_(payload_size(g.spec())) {
    const auto total = g.total_tasks() * stride_;
    if (total > kMaxPayloadStore)
      throw ConfigMismatch(fmt::format("payload storage of {} bytes exceeds the {} byte limit", total,
                                       kMaxPayloadStore));
    data_ = std::make_unique_for_overwrite<std::byte[]>(total);
  }

  std::size_t stride() const noexcept { return stride_; }

  void write(std::uint64_t task, std::uint64_t checksum) noexcept {
    fill_payload({data_.get() + task * stride_, stride_}, checksum);
  }

  // Copies the producer's payload into `scratch` and returns its checksum.
  std::uint64_t deliver(std::uint64_t task, std::span<std::byte> scratch) const noexcept {
    std::memcpy(scratch.data(), data_.get() + task * stride_, stride_);
    return load_u64_le(scratch.data());
  }

 private:
  std::size_t stride_;
  std::unique_ptr<std::byte[]> data_;
};

/// Remaining-dependence counter per task.
class DependenceCounters {
 public:
  explicit DependenceCounters(const TaskGraph& g) : counters_(g.total_tasks()) {
    const auto w = g.width();
    for (Timestep t = 0; t < g.timesteps(); ++t)
      for (Index i = 0; i < w; ++i)
        counters_[g.task_id(t, i)].store(g.dependencies(t, i).size(), std::memory_order_relaxed);
  }

  std::uint32_t load(std::uint64_t task) const noexcept {
    return counters_[task].load(std::memory_order_acquire);
  }

  // Returns true when this call satisfied the last outstanding dependence.
  bool satisfy(std::uint64_t task) noexcept {
    return counters_[task].fetch_sub(1, std::memory_order_acq_rel) == 1;
  }

 private:
  std::vector<std::atomic<std::uint32_t>> counters_;
};

inline void require_ready(const DependenceCounters& c, const TaskGraph& g, std::uint64_t task) {
  if (const auto left = c.load(task); left != 0) {
    const auto p = g.point(task);
    throw DependencyViolation(fmt::format("task ({}, {}) started with {} unsatisfied dependencies",
                                          p.timestep, p.index, left));
  }
}

inline std::int64_t now_ns() noexcept {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

inline void prepare_trace(TaskTrace* trace, const TaskGraph& g) {
  if (!trace) return;
  trace->start_ns.assign(g.total_tasks(), 0);
  trace->finish_ns.assign(g.total_tasks(), 0);
}

/// Max of the floor and 100x the analytic lower bound tasks * grain * ns / cores.
inline std::chrono::nanoseconds watchdog_timeout(const TaskGraph& g, const BackendConfig& c,
                                                 const RunOptions& o) {
  const double bound_ns = static_cast<double>(g.total_tasks()) *
                          static_cast<double>(g.kernel().iterations) * o.ns_per_iteration_hint /
                          static_cast<double>(c.cores);
  const auto floor = std::chrono::duration_cast<std::chrono::nanoseconds>(o.watchdog_floor);
  const double scaled = 100.0 * bound_ns;
  if (scaled > static_cast<double>(floor.count())) {
    return std::chrono::nanoseconds(static_cast<std::int64_t>(scaled));
  }
  return floor;
}

/// Executes one task given a callback that yields each dependency's checksum
/// in ascending index order. Returns the task's output checksum.
template <class DeliverDep>
std::uint64_t run_task(const TaskGraph& g, Timestep t, Index i, const DependenceSet& deps,
                       DeliverDep&& deliver) {
  std::uint64_t seed = point_seed(t, i);
  for (Index d : deps) seed = fold_input(seed, deliver(d));
  return task_output(g.kernel(), seed);
}

}  // namespace taskbench::dataflow
