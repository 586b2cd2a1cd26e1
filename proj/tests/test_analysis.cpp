#include <gtest/gtest.h>

#include <cmath>

#include "taskbench/analysis.hpp"
#include "taskbench/sweep.hpp"

using namespace taskbench;

namespace {

// Task with c us of compute and a fixed o us of overhead: granularity c + o,
// efficiency c / (c + o). Efficiency crosses 1/2 exactly at granularity 2o.
MetgCurve overhead_model(double o_us, std::vector<double> compute_us) {
  MetgCurve c;
  std::uint64_t grain = 1;
  for (double cu : compute_us) {
    CurvePoint p;
    p.grain_iterations = grain++;
    p.granularity_us = cu + o_us;
    p.efficiency = cu / (cu + o_us);
    c.points.push_back(p);
  }
  return c;
}

std::vector<double> geometric(double first, double ratio, int n) {
  std::vector<double> v;
  for (int k = 0; k < n; ++k) v.push_back(first * std::pow(ratio, k));
  return v;
}

MetgCurve from_pairs(std::vector<std::pair<double, double>> gran_eff) {
  MetgCurve c;
  std::uint64_t grain = 1;
  for (auto [g, e] : gran_eff) {
    CurvePoint p;
    p.grain_iterations = grain++;
    p.granularity_us = g;
    p.efficiency = e;
    c.points.push_back(p);
  }
  return c;
}

}  // namespace

TEST(Granularity, Examples) {
  RunResult r;
  r.wall_seconds = 1.0;
  r.tasks_executed = 48000;
  EXPECT_NEAR(task_granularity_us(r, 48), 1000.0, 1e-9);
  r.wall_seconds = 0.00390625;
  r.tasks_executed = 48000;
  EXPECT_NEAR(task_granularity_us(r, 48), 3.90625, 1e-9);
  r.wall_seconds = 2.0;
  r.tasks_executed = 2;
  EXPECT_NEAR(task_granularity_us(r, 1), 1e6, 1e-6);
  r.tasks_executed = 0;
  EXPECT_THROW(task_granularity_us(r, 1), AnalysisError);
}

TEST(Efficiency, Examples) {
  EXPECT_DOUBLE_EQ(efficiency(2.44e12, 1.0, 2.44e12).value, 1.0);
  EXPECT_DOUBLE_EQ(efficiency(1.22e12, 1.0, 2.44e12).value, 0.5);
  EXPECT_DOUBLE_EQ(efficiency(0.0, 1.0, 2.44e12).value, 0.0);
  EXPECT_THROW(efficiency(1.0, 0.0, 1.0), AnalysisError);
  EXPECT_THROW(efficiency(1.0, 1.0, 0.0), AnalysisError);
}

TEST(Efficiency, AboveOneIsClampedAndFlagged) {
  const auto e = efficiency(3.0, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(e.value, 1.0);
  EXPECT_DOUBLE_EQ(e.raw, 1.5);
  EXPECT_TRUE(e.anomaly);
  EXPECT_FALSE(efficiency(1.0, 1.0, 2.0).anomaly);
}

TEST(ConfidenceInterval, FiveSamples) {
  const std::vector<double> s{1, 2, 3, 4, 5};
  const auto ci = confidence_interval(s, 0.99);
  EXPECT_DOUBLE_EQ(ci.mean, 3.0);
  // t(0.995, 4) = 4.604, s = sqrt(2.5)
  EXPECT_NEAR(ci.half_width, 3.256, 0.001);
  EXPECT_NEAR(ci.half_width, 4.604094 * std::sqrt(2.5) / std::sqrt(5.0), 1e-5);
}

TEST(ConfidenceInterval, TwoSamples) {
  const std::vector<double> s{0, 2};
  const auto ci = confidence_interval(s, 0.99);
  EXPECT_DOUBLE_EQ(ci.mean, 1.0);
  EXPECT_NEAR(ci.half_width, 63.657, 0.001);  // t(0.995, 1) * sqrt(2) / sqrt(2)
}

TEST(ConfidenceInterval, IdenticalSamplesHaveZeroWidth) {
  const std::vector<double> s(7, 0.125);
  const auto ci = confidence_interval(s);
  EXPECT_DOUBLE_EQ(ci.mean, 0.125);
  EXPECT_EQ(ci.half_width, 0.0);
}

TEST(ConfidenceInterval, ShrinksWithMoreSamples) {
  double last = 1e300;
  for (int reps : {1, 2, 4, 8, 16}) {
    std::vector<double> s;
    for (int r = 0; r < reps; ++r)
      for (double x : {1.0, 2.0, 3.0, 4.0, 5.0}) s.push_back(x);
    const auto hw = confidence_interval(s).half_width;
    EXPECT_LT(hw, last);
    last = hw;
  }
}

TEST(ConfidenceInterval, RejectsTooFewSamplesOrBadLevel) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(confidence_interval(one), AnalysisError);
  const std::vector<double> two{1.0, 2.0};
  EXPECT_THROW(confidence_interval(two, 1.0), AnalysisError);
}

TEST(Metg, AnalyticOverheadModel) {
  const double o = 10.0;
  const auto curve = overhead_model(o, geometric(1.0, 2.0, 8));
  const auto r = compute_metg(curve, 0.5);
  ASSERT_EQ(r.state, MetgState::value);
  EXPECT_NEAR(r.metg_us, 2 * o, 0.05 * 2 * o);
  ASSERT_TRUE(r.below && r.above);
  EXPECT_LT(r.below->efficiency, 0.5);
  EXPECT_GE(r.above->efficiency, 0.5);
  EXPECT_FALSE(r.non_monotone);
}

TEST(Metg, PointExactlyAtThresholdReturnsItsGranularity) {
  const auto r = compute_metg(from_pairs({{1, 0.1}, {5, 0.3}, {17.5, 0.5}, {40, 0.9}}), 0.5);
  EXPECT_EQ(r.state, MetgState::value);
  EXPECT_EQ(r.metg_us, 17.5);
}

TEST(Metg, SaturatedAndUnreachable) {
  const auto sat = compute_metg(from_pairs({{3, 0.6}, {9, 0.8}, {27, 0.95}}), 0.5);
  EXPECT_EQ(sat.state, MetgState::saturated);
  EXPECT_EQ(sat.metg_us, 3.0);
  EXPECT_TRUE(sat.finite());

  const auto unr = compute_metg(from_pairs({{3, 0.1}, {9, 0.2}, {27, 0.49}}), 0.5);
  EXPECT_EQ(unr.state, MetgState::unreachable);
  EXPECT_FALSE(unr.finite());
}

TEST(Metg, NonMonotoneCurveUsesSmallestQualifyingGranularity) {
  const auto r = compute_metg(from_pairs({{1, 0.2}, {2, 0.6}, {4, 0.4}, {8, 0.7}}), 0.5);
  EXPECT_EQ(r.state, MetgState::value);
  EXPECT_TRUE(r.non_monotone);
  EXPECT_GT(r.metg_us, 1.0);
  EXPECT_LT(r.metg_us, 2.0);

  const auto front = compute_metg(from_pairs({{1, 0.6}, {2, 0.4}, {4, 0.9}}), 0.5);
  EXPECT_EQ(front.state, MetgState::value);
  EXPECT_TRUE(front.non_monotone);
  EXPECT_EQ(front.metg_us, 1.0);
}

TEST(Metg, RejectsMalformedCurves) {
  EXPECT_THROW(compute_metg(from_pairs({{1, 0.6}})), AnalysisError);
  EXPECT_THROW(compute_metg(from_pairs({{0, 0.1}, {1, 0.6}})), AnalysisError);
  auto unsorted = from_pairs({{1, 0.1}, {2, 0.6}});
  std::swap(unsorted.points[0].grain_iterations, unsorted.points[1].grain_iterations);
  EXPECT_THROW(compute_metg(unsorted), AnalysisError);
}

// Property: scaling every granularity by k scales the METG by k.
TEST(Metg, ScaleEquivariance) {
  const auto base = overhead_model(7.0, geometric(0.5, 1.7, 12));
  const double m = compute_metg(base).metg_us;
  for (double k : {1e-3, 0.37, 2.0, 1e4}) {
    auto scaled = base;
    for (auto& p : scaled.points) p.granularity_us *= k;
    EXPECT_NEAR(compute_metg(scaled).metg_us, k * m, 1e-12 * k * m) << k;
  }
}

// Property: on a monotone curve a higher threshold never lowers the METG.
TEST(Metg, MonotoneInThreshold) {
  const auto curve = overhead_model(10.0, geometric(0.25, 1.5, 20));
  double last = 0.0;
  for (double th = 0.05; th < 0.95; th += 0.05) {
    const auto r = compute_metg(curve, th);
    ASSERT_TRUE(r.finite());
    EXPECT_GE(r.metg_us, last) << th;
    last = r.metg_us;
  }
}

namespace {

// Fixed wall time proportional to the total work: c * grain + o per task.
Runner stub_runner(double ns_per_iter, double overhead_ns) {
  return [=](const TaskGraph& g, const BackendConfig& c) {
    RunResult r;
    r.tasks_executed = g.total_tasks();
    r.edges_satisfied = g.total_edges();
    r.flops_executed = g.total_tasks() * g.kernel().flops();
    r.dataflow_checksum = 1;
    r.wall_seconds = static_cast<double>(g.total_tasks()) *
                     (ns_per_iter * static_cast<double>(g.kernel().iterations) + overhead_ns) * 1e-9 /
                     c.cores;
    return r;
  };
}

SweepRequest stub_request() {
  SweepRequest req;
  req.base = GraphSpec{4, 10, PatternKind::stencil_1d(), 0, {}};
  req.backend.kind = BackendKind::fork_join;
  req.backend.cores = 4;
  for (int e = 0; e <= 12; ++e) req.grains.push_back(std::uint64_t{1} << e);
  req.repetitions = 3;
  return req;
}

}  // namespace

TEST(Sweep, DeterministicRunsGiveZeroWidthAndModelMetg) {
  auto req = stub_request();
  const double ns = 1.0;
  const auto curve = sweep(req, stub_runner(ns, 1000.0), kFlopsPerIteration / (ns * 1e-9) * 4);
  ASSERT_EQ(curve.points.size(), 13u);
  for (const auto& p : curve.points) {
    EXPECT_EQ(p.wall_seconds_ci99, 0.0);
    EXPECT_EQ(p.repetitions, 3u);
  }
  EXPECT_TRUE(std::is_sorted(curve.points.begin(), curve.points.end(),
                             [](auto& a, auto& b) { return a.grain_iterations < b.grain_iterations; }));
  // Overhead 1 us per task: METG is 2 us.
  EXPECT_NEAR(compute_metg(curve).metg_us, 2.0, 0.1);
}

TEST(Sweep, BestMeasuredPeakIsDefault) {
  auto req = stub_request();
  const auto curve = sweep(req, stub_runner(1.0, 1000.0));
  EXPECT_DOUBLE_EQ(curve.points.back().efficiency, 1.0);
}

TEST(Sweep, RejectsEmptyGrainList) {
  auto req = stub_request();
  req.grains.clear();
  EXPECT_THROW(measure_sweep(req, stub_runner(1, 0)), std::invalid_argument);
}

TEST(Sweep, DeduplicatesAndRunsLargestFirst) {
  auto req = stub_request();
  req.grains = {8, 2, 8, 4};
  req.warmup_runs = 0;
  std::vector<std::uint64_t> order;
  const auto ms = measure_sweep(req, stub_runner(1, 0), [&](const GrainMeasurement& m) {
    order.push_back(m.grain_iterations);
  });
  EXPECT_EQ(order, (std::vector<std::uint64_t>{8, 4, 2}));
  ASSERT_EQ(ms.size(), 3u);
  EXPECT_EQ(ms.front().grain_iterations, 2u);
}

TEST(Sweep, ChangingChecksumAbortsWithPartialResults) {
  auto req = stub_request();
  req.grains = {1, 2, 4};
  int calls = 0;
  Runner flaky = [&](const TaskGraph& g, const BackendConfig& c) {
    auto r = stub_runner(1, 0)(g, c);
    if (g.kernel().iterations == 1) r.dataflow_checksum = static_cast<std::uint64_t>(++calls);
    return r;
  };
  try {
    measure_sweep(req, flaky);
    FAIL() << "expected SweepError";
  } catch (const SweepError& e) {
    EXPECT_EQ(e.partial.size(), 2u);
  }
}

TEST(Sweep, ResolvePeakPriority) {
  EXPECT_EQ(resolve_peak(5.0, 3.0, 4.0), 5.0);
  EXPECT_EQ(resolve_peak({}, 3.0, 4.0), 3.0);
  EXPECT_EQ(resolve_peak({}, 0.0, 4.0), 4.0);
  EXPECT_THROW(resolve_peak({}, 0.0, {}), AnalysisError);
}
