#pragma once

#include "taskbench/backends/async_ws.hpp"
#include "taskbench/backends/config.hpp"
#include "taskbench/backends/fork_join.hpp"
#include "taskbench/backends/message_passing.hpp"
#include "taskbench/backends/serial.hpp"
#include "taskbench/graph.hpp"

namespace taskbench {

inline void validate(const BackendConfig& cfg) {
  if (cfg.cores == 0) throw ConfigMismatch("cores must be at least 1");
  if (cfg.shards_per_core == 0) throw ConfigMismatch("shards_per_core must be at least 1");
}

/// Executes every task of `graph` once under the configured backend. Only the
/// graph execution itself is timed; pool and transport setup are not.
inline RunResult run(const TaskGraph& graph, const BackendConfig& cfg, const RunOptions& opts = {}) {
  validate(cfg);
  switch (cfg.kind) {
    case BackendKind::serial: return run_serial(graph, opts);
    case BackendKind::fork_join: return run_fork_join(graph, cfg, opts);
    case BackendKind::async_ws: return run_async_ws(graph, cfg, opts);
    case BackendKind::message_passing: return run_message_passing(graph, cfg, opts);
  }
  throw ConfigMismatch("unknown backend");
}

}  // namespace taskbench
