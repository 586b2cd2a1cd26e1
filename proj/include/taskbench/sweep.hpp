#pragma once

// Grain-size sweeps: run a graph template at each grain, aggregate the timed
// repetitions, and turn them into an efficiency-vs-granularity curve.

#include <algorithm>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "taskbench/analysis.hpp"
#include "taskbench/backends.hpp"
#include "taskbench/graph.hpp"

namespace taskbench {

using Runner = std::function<RunResult(const TaskGraph&, const BackendConfig&)>;

inline Runner default_runner(RunOptions opts = {}) {
  return [opts](const TaskGraph& g, const BackendConfig& c) { return run(g, c, opts); };
}

struct SweepRequest {
  GraphSpec base;  // kernel.iterations is replaced per grain
  BackendConfig backend;
  std::vector<std::uint64_t> grains;
  std::uint32_t repetitions = 5;
  std::uint32_t warmup_runs = 1;
};

/// Timed repetitions at one grain, warm-up excluded.
struct GrainMeasurement {
  std::uint64_t grain_iterations = 0;
  std::vector<double> wall_seconds;
  std::uint64_t tasks_executed = 0;
  std::uint64_t flops_executed = 0;  // per run
  std::uint64_t dataflow_checksum = 0;

  double mean_wall_seconds() const {
    double s = 0.0;
    for (double w : wall_seconds) s += w;
    return s / static_cast<double>(wall_seconds.size());
  }

  double flops_per_second() const {
    const double w = mean_wall_seconds();
    return w > 0.0 ? static_cast<double>(flops_executed) / w : 0.0;
  }
};

struct SweepError : BackendError {
  SweepError(const std::string& what, std::vector<GrainMeasurement> done)
      : BackendError(what), partial(std::move(done)) {}
  std::vector<GrainMeasurement> partial;
};

using MeasurementSink = std::function<void(const GrainMeasurement&)>;

/// Runs grains from largest to smallest; returns measurements in ascending
/// grain order. `sink` sees each measurement as soon as it completes.
inline std::vector<GrainMeasurement> measure_sweep(const SweepRequest& req, const Runner& runner,
                                                   const MeasurementSink& sink = {}) {
  if (req.grains.empty()) throw std::invalid_argument("sweep needs a non-empty grain list");
  if (req.repetitions < 1) throw std::invalid_argument("sweep needs at least one repetition");
  auto grains = req.grains;
  std::sort(grains.begin(), grains.end());
  grains.erase(std::unique(grains.begin(), grains.end()), grains.end());

  std::vector<GrainMeasurement> done;
  for (auto it = grains.rbegin(); it != grains.rend(); ++it) {
    GraphSpec spec = req.base;
    spec.kernel.iterations = *it;
    try {
      const TaskGraph g = build_graph(spec);
      for (std::uint32_t w = 0; w < req.warmup_runs; ++w) runner(g, req.backend);
      GrainMeasurement m;
      m.grain_iterations = *it;
      for (std::uint32_t rep = 0; rep < req.repetitions; ++rep) {
        const RunResult r = runner(g, req.backend);
        if (rep > 0 && r.dataflow_checksum != m.dataflow_checksum)
          throw BackendError("dataflow checksum changed between repetitions");
        m.wall_seconds.push_back(r.wall_seconds);
        m.tasks_executed = r.tasks_executed;
        m.flops_executed = r.flops_executed;
        m.dataflow_checksum = r.dataflow_checksum;
      }
      if (sink) sink(m);
      done.push_back(std::move(m));
    } catch (const InvalidSpec&) {
      throw;
    } catch (const std::exception& e) {
      std::reverse(done.begin(), done.end());
      throw SweepError(fmt::format("sweep aborted at grain {}: {}", *it, e.what()), std::move(done));
    }
  }
  std::reverse(done.begin(), done.end());
  return done;
}

inline double best_measured_flops(const std::vector<GrainMeasurement>& ms) {
  double best = 0.0;
  for (const auto& m : ms) best = std::max(best, m.flops_per_second());
  return best;
}

/// Peak source priority: explicit override, then the best measured rate,
/// then the calibration-derived peak.
inline double resolve_peak(std::optional<double> override_peak, double best_measured,
                           std::optional<double> calibration_peak) {
  if (override_peak && *override_peak > 0.0) return *override_peak;
  if (best_measured > 0.0) return best_measured;
  if (calibration_peak && *calibration_peak > 0.0) return *calibration_peak;
  throw AnalysisError("no usable peak FLOP/s: nothing measured and no calibration");
}

inline CurvePoint make_point(const GrainMeasurement& m, std::uint32_t cores, double peak) {
  CurvePoint p;
  p.grain_iterations = m.grain_iterations;
  p.repetitions = static_cast<std::uint32_t>(m.wall_seconds.size());
  if (m.wall_seconds.size() >= 2) {
    const auto ci = confidence_interval(m.wall_seconds, 0.99);
    p.wall_seconds_mean = ci.mean;
    p.wall_seconds_ci99 = ci.half_width;
  } else {
    p.wall_seconds_mean = m.wall_seconds.front();
  }
  RunResult mean_run;
  mean_run.wall_seconds = p.wall_seconds_mean;
  mean_run.tasks_executed = m.tasks_executed;
  mean_run.flops_executed = m.flops_executed;
  p.granularity_us = task_granularity_us(mean_run, cores);
  p.flops = static_cast<double>(m.flops_executed);
  p.flops_per_second = p.wall_seconds_mean > 0.0 ? p.flops / p.wall_seconds_mean : 0.0;
  p.efficiency = efficiency(mean_run, peak).value;
  return p;
}

inline MetgCurve make_curve(const SweepRequest& req, const std::vector<GrainMeasurement>& ms, double peak) {
  MetgCurve c;
  c.backend = std::string(to_string(req.backend.kind));
  c.pattern = to_string(req.base.pattern);
  c.cores = req.backend.cores;
  c.shards_per_core = req.backend.shards_per_core;
  for (const auto& m : ms) c.points.push_back(make_point(m, req.backend.cores, peak));
  return c;
}

/// One-shot sweep: measures every grain and normalizes against the peak
/// resolved from this sweep alone.
inline MetgCurve sweep(const SweepRequest& req, const Runner& runner = default_runner(),
                       std::optional<double> override_peak = {}, std::optional<double> calibration_peak = {}) {
  const auto ms = measure_sweep(req, runner);
  return make_curve(req, ms, resolve_peak(override_peak, best_measured_flops(ms), calibration_peak));
}

}  // namespace taskbench
