#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

namespace taskbench {

enum class BackendKind { serial, fork_join, async_ws, message_passing };
enum class PriorityMode { none, fixed64, bitvector };
enum class WorkerStack { small, normal };
enum class TransportMedium { shared_queue, local_socket };

struct SchedulerConfig {
  bool work_stealing = true;
  PriorityMode priority_mode = PriorityMode::none;
  bool idle_detection = false;
  WorkerStack worker_stack = WorkerStack::normal;

  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

struct TransportConfig {
  TransportMedium medium = TransportMedium::shared_queue;
  friend bool operator==(const TransportConfig&, const TransportConfig&) = default;
};

struct BackendConfig {
  BackendKind kind = BackendKind::serial;
  std::uint32_t cores = 1;
  std::uint32_t shards_per_core = 1;  // overdecomposition factor
  SchedulerConfig scheduler{};
  TransportConfig transport{};

  std::uint32_t default_width() const noexcept { return cores * shards_per_core; }
  friend bool operator==(const BackendConfig&, const BackendConfig&) = default;
};

struct RunResult {
  double wall_seconds = 0.0;
  std::uint64_t tasks_executed = 0;
  std::uint64_t edges_satisfied = 0;
  std::uint64_t dataflow_checksum = 0;
  std::uint64_t flops_executed = 0;
};

/// Optional per-task start/finish timestamps (steady clock, ns). Each slot is
/// written only by the worker that runs that task.
struct TaskTrace {
  std::vector<std::int64_t> start_ns;
  std::vector<std::int64_t> finish_ns;
};

struct RunOptions {
  TaskTrace* trace = nullptr;
  // Used for the watchdog's analytic lower bound; 0 disables the bound.
  double ns_per_iteration_hint = 0.0;
  std::chrono::milliseconds watchdog_floor{60'000};
};

class ConfigMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DeadlockError : public BackendError {
 public:
  using BackendError::BackendError;
};

class DependencyViolation : public BackendError {
 public:
  using BackendError::BackendError;
};

inline std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::serial: return "serial";
    case BackendKind::fork_join: return "fork_join";
    case BackendKind::async_ws: return "async_ws";
    case BackendKind::message_passing: return "message_passing";
  }
  return "?";
}

inline std::string_view to_string(PriorityMode m) {
  switch (m) {
    case PriorityMode::none: return "none";
    case PriorityMode::fixed64: return "fixed64";
    case PriorityMode::bitvector: return "bitvector";
  }
  return "?";
}

inline std::string_view to_string(WorkerStack s) { return s == WorkerStack::small ? "small" : "default"; }

inline std::string_view to_string(TransportMedium m) {
  return m == TransportMedium::shared_queue ? "shared_queue" : "local_socket";
}

inline BackendKind parse_backend(std::string_view s) {
  for (auto k : {BackendKind::serial, BackendKind::fork_join, BackendKind::async_ws,
                 BackendKind::message_passing})
    if (s == to_string(k)) return k;
  throw std::invalid_argument(fmt::format("unknown backend '{}'", s));
}

inline PriorityMode parse_priority_mode(std::string_view s) {
  for (auto m : {PriorityMode::none, PriorityMode::fixed64, PriorityMode::bitvector})
    if (s == to_string(m)) return m;
  throw std::invalid_argument(fmt::format("unknown priority mode '{}'", s));
}

inline WorkerStack parse_worker_stack(std::string_view s) {
  if (s == "small") return WorkerStack::small;
  if (s == "default") return WorkerStack::normal;
  throw std::invalid_argument(fmt::format("unknown worker stack '{}'", s));
}

inline TransportMedium parse_transport(std::string_view s) {
  if (s == "shared_queue") return TransportMedium::shared_queue;
  if (s == "local_socket") return TransportMedium::local_socket;
  throw std::invalid_argument(fmt::format("unknown transport '{}'", s));
}

/// Scheduler and transport knobs as one CSV-safe token.
inline std::string knob_string(const BackendConfig& c) {
  return fmt::format("steal={};priority={};idle={};stack={};transport={}",
                     c.scheduler.work_stealing ? 1 : 0, to_string(c.scheduler.priority_mode),
                     c.scheduler.idle_detection ? 1 : 0, to_string(c.scheduler.worker_stack),
                     to_string(c.transport.medium));
}

/// Contiguous blocks of `width / cores` indices per worker. When
/// `shards_per_core` is given the width must equal cores * shards_per_core.
inline std::vector<std::uint32_t> shard_assignment(std::uint32_t width, std::uint32_t cores,
                                                   std::optional<std::uint32_t> shards_per_core = {}) {
  if (cores == 0) throw ConfigMismatch("cores must be positive");
  if (width == 0 || width % cores != 0)
    throw ConfigMismatch(fmt::format("width {} is not divisible by {} workers", width, cores));
  if (shards_per_core && static_cast<std::uint64_t>(*shards_per_core) * cores != width)
    throw ConfigMismatch(fmt::format("width {} != {} cores x {} shards per core", width, cores,
                                     *shards_per_core));
  const std::uint32_t block = width / cores;
  std::vector<std::uint32_t> owner(width);
  for (std::uint32_t i = 0; i < width; ++i) owner[i] = i / block;
  return owner;
}

/// Contiguous near-equal blocks for any width; equals shard_assignment when
/// the width divides evenly. Workers beyond the width own nothing.
inline std::vector<std::uint32_t> block_partition(std::uint32_t width, std::uint32_t workers) {
  if (workers == 0) throw ConfigMismatch("cores must be positive");
  std::vector<std::uint32_t> owner(width);
  const std::uint32_t base = width / workers, extra = width % workers;
  std::uint32_t i = 0;
  for (std::uint32_t w = 0; w < workers; ++w) {
    const std::uint32_t n = base + (w < extra ? 1 : 0);
    for (std::uint32_t k = 0; k < n; ++k) owner[i++] = w;
  }
  return owner;
}

}  // namespace taskbench
