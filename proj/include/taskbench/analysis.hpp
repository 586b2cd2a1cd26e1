#pragma once

// Efficiency, task granularity, METG and confidence intervals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "taskbench/backends/config.hpp"

namespace taskbench {

class AnalysisError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// wall_seconds * cores / tasks_executed, in microseconds.
inline double task_granularity_us(const RunResult& run, std::uint32_t cores) {
  if (run.tasks_executed == 0) throw AnalysisError("task granularity of a run with zero tasks");
  return run.wall_seconds * static_cast<double>(cores) / static_cast<double>(run.tasks_executed) * 1e6;
}

struct Efficiency {
  double value = 0.0;  // clamped to [0, 1]
  double raw = 0.0;
  bool anomaly = false;  // raw > 1: peak was underestimated
};

inline Efficiency efficiency(double flops_executed, double wall_seconds, double peak_flops) {
  if (!(peak_flops > 0.0)) throw AnalysisError("peak FLOP/s must be positive");
  if (!(wall_seconds > 0.0)) throw AnalysisError("efficiency of a run with zero wall time");
  Efficiency e;
  e.raw = flops_executed / wall_seconds / peak_flops;
  e.anomaly = e.raw > 1.0;
  e.value = std::clamp(e.raw, 0.0, 1.0);
  return e;
}

inline Efficiency efficiency(const RunResult& run, double peak_flops) {
  return efficiency(static_cast<double>(run.flops_executed), run.wall_seconds, peak_flops);
}

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Two-sided Student-t interval: mean +- t(level, n-1) * s / sqrt(n).
inline ConfidenceInterval confidence_interval(std::span<const double> samples, double level = 0.99) {
  if (samples.size() < 2) throw AnalysisError("confidence interval needs at least 2 samples");
  if (!(level > 0.0 && level < 1.0)) throw AnalysisError("confidence level must lie in (0, 1)");
  const double n = static_cast<double>(samples.size());
  // Shifted by the first sample so identical inputs give exactly zero spread.
  const double x0 = samples.front();
  double shift = 0.0;
  for (double x : samples) shift += x - x0;
  shift /= n;
  const double mean = x0 + shift;
  double ss = 0.0;
  for (double x : samples) ss += (x - x0 - shift) * (x - x0 - shift);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 1.0 - (1.0 - level) / 2.0);
  return {mean, t * sd / std::sqrt(n)};
}

struct CurvePoint {
  std::uint64_t grain_iterations = 0;
  double granularity_us = 0.0;
  double efficiency = 0.0;
  double wall_seconds_mean = 0.0;
  double wall_seconds_ci99 = 0.0;
  std::uint32_t repetitions = 0;
  // Carried for output; METG only reads granularity and efficiency.
  double flops = 0.0;             // per run
  double flops_per_second = 0.0;  // flops / wall_seconds_mean

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct MetgCurve {
  std::string backend;  // label, e.g. "async_ws"
  std::string pattern;
  std::uint32_t cores = 1;
  std::uint32_t shards_per_core = 1;
  std::vector<CurvePoint> points;  // ascending grain
};

enum class MetgState { value, saturated, unreachable };

inline std::string_view to_string(MetgState s) {
  switch (s) {
    case MetgState::value: return "value";
    case MetgState::saturated: return "saturated";
    case MetgState::unreachable: return "unreachable";
  }
  return "?";
}

struct MetgResult {
  MetgState state = MetgState::unreachable;
  double metg_us = 0.0;  // meaningless when unreachable
  double threshold = 0.5;
  std::optional<CurvePoint> below;  // bracketing points of the crossing
  std::optional<CurvePoint> above;
  bool non_monotone = false;  // more than one upward crossing

  bool finite() const noexcept { return state != MetgState::unreachable; }
};

/// Smallest granularity with efficiency >= threshold, interpolating between
/// the bracketing pair linearly in (log granularity, efficiency).
inline MetgResult compute_metg(const MetgCurve& curve, double threshold = 0.5) {
  const auto& pts = curve.points;
  if (pts.size() < 2) throw AnalysisError("METG needs at least 2 curve points");
  for (std::size_t k = 1; k < pts.size(); ++k)
    if (pts[k].grain_iterations < pts[k - 1].grain_iterations)
      throw AnalysisError("curve points must be sorted by grain");
  for (const auto& p : pts)
    if (!(p.granularity_us > 0.0)) throw AnalysisError("curve point with non-positive granularity");

  MetgResult r;
  r.threshold = threshold;

  const bool all_above = std::all_of(pts.begin(), pts.end(), [&](auto& p) { return p.efficiency >= threshold; });
  if (all_above) {
    r.state = MetgState::saturated;
    const auto it = std::min_element(pts.begin(), pts.end(),
                                     [](auto& a, auto& b) { return a.granularity_us < b.granularity_us; });
    r.metg_us = it->granularity_us;
    r.above = *it;
    return r;
  }

  if (pts.front().efficiency >= threshold) {
    // The smallest sampled grain already qualifies but a larger one dips below.
    r.state = MetgState::value;
    r.metg_us = pts.front().granularity_us;
    r.above = pts.front();
    r.non_monotone = true;
    return r;
  }

  std::optional<std::size_t> first;
  std::size_t crossings = 0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (pts[k - 1].efficiency < threshold && pts[k].efficiency >= threshold) {
      ++crossings;
      if (!first || pts[k].granularity_us < pts[*first].granularity_us) first = k;
    }
  }
  if (!first) {
    r.state = MetgState::unreachable;
    return r;
  }
  r.state = MetgState::value;
  r.non_monotone = crossings > 1;
  const auto& lo = pts[*first - 1];
  const auto& hi = pts[*first];
  r.below = lo;
  r.above = hi;
  if (hi.efficiency == threshold) {
    r.metg_us = hi.granularity_us;
    return r;
  }
  const double f = (threshold - lo.efficiency) / (hi.efficiency - lo.efficiency);
  const double lg = std::log(lo.granularity_us) + f * (std::log(hi.granularity_us) - std::log(lo.granularity_us));
  r.metg_us = std::exp(lg);
  return r;
}

}  // namespace taskbench
