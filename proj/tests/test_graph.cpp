#include <gtest/gtest.h>

#include <bit>
#include <set>

#include "oracles.hpp"
#include "taskbench/graph.hpp"

using namespace taskbench;

namespace {

TaskGraph make(PatternKind p, std::uint32_t width, std::uint32_t steps) {
  return build_graph(GraphSpec{width, steps, p, 0, {}});
}

std::vector<Index> deps(const TaskGraph& g, Timestep t, Index i) { return g.dependencies(t, i).to_vector(); }
std::vector<Index> rdeps(const TaskGraph& g, Timestep t, Index i) {
  return g.reverse_dependencies(t, i).to_vector();
}

}  // namespace

TEST(BuildGraph, Stencil48x1000Has48000Tasks) {
  const auto g = make(PatternKind::stencil_1d(), 48, 1000);
  EXPECT_EQ(g.total_tasks(), 48000u);
}

TEST(BuildGraph, MinimalTrivialGraph) {
  const auto g = make(PatternKind::trivial(), 1, 1);
  EXPECT_EQ(g.total_tasks(), 1u);
  EXPECT_EQ(g.total_edges(), 0u);
  EXPECT_TRUE(g.dependencies(0, 0).empty());
}

TEST(BuildGraph, RejectsInvalidSpecs) {
  EXPECT_THROW(make(PatternKind::fft(), 6, 2), InvalidSpec);
  EXPECT_THROW(make(PatternKind::stencil_1d(), 0, 2), InvalidSpec);
  EXPECT_THROW(make(PatternKind::stencil_1d(), 4, 0), InvalidSpec);
  EXPECT_THROW(make(PatternKind::nearest(0), 4, 2), InvalidSpec);
  EXPECT_NO_THROW(make(PatternKind::fft(), 1, 2));
}

TEST(Dependencies, StencilInteriorPoint) {
  const auto g = make(PatternKind::stencil_1d(), 8, 2);
  EXPECT_EQ(deps(g, 1, 5), (std::vector<Index>{4, 5, 6}));
  EXPECT_EQ(deps(g, 1, 5), oracle::brute_dependencies(g.pattern(), 8, 1, 5));
}

TEST(Dependencies, FirstTimestepIsEmptyForEveryPattern) {
  for (const auto& p : all_pattern_examples()) {
    const auto g = make(p, 8, 3);
    for (Index i = 0; i < 8; ++i) EXPECT_TRUE(g.dependencies(0, i).empty()) << to_string(p);
  }
}

TEST(Dependencies, FftButterflyAtWidth8) {
  const auto g = make(PatternKind::fft(), 8, 8);
  EXPECT_EQ(deps(g, 1, 0), (std::vector<Index>{0, 1}));
  EXPECT_EQ(deps(g, 2, 0), (std::vector<Index>{0, 2}));
  EXPECT_EQ(deps(g, 3, 5), (std::vector<Index>{1, 5}));
  EXPECT_EQ(deps(g, 4, 3), (std::vector<Index>{2, 3}));  // wraps to stride 1
  for (Timestep t = 0; t < 8; ++t)
    for (Index i = 0; i < 8; ++i) EXPECT_EQ(deps(g, t, i), oracle::brute_dependencies(g.pattern(), 8, t, i));
}

TEST(Dependencies, OutOfRangeThrows) {
  const auto g = make(PatternKind::stencil_1d(), 4, 3);
  EXPECT_THROW(g.dependencies(3, 0), std::out_of_range);
  EXPECT_THROW(g.dependencies(0, 4), std::out_of_range);
  EXPECT_THROW(g.reverse_dependencies(0, 9), std::out_of_range);
}

TEST(ReverseDependencies, Examples) {
  EXPECT_EQ(rdeps(make(PatternKind::stencil_1d(), 8, 3), 0, 0), (std::vector<Index>{0, 1}));
  EXPECT_TRUE(make(PatternKind::trivial(), 8, 3).reverse_dependencies(1, 3).empty());
  EXPECT_EQ(rdeps(make(PatternKind::all_to_all(), 4, 3), 0, 2), (std::vector<Index>{0, 1, 2, 3}));
  EXPECT_TRUE(make(PatternKind::stencil_1d(), 8, 3).reverse_dependencies(2, 4).empty());
}

TEST(TotalEdges, PeriodicStencilBruteForceCount) {
  const auto g = make(PatternKind::stencil_1d_periodic(), 4, 3);
  std::uint64_t brute = 0;
  for (Timestep t = 0; t < 3; ++t)
    for (Index i = 0; i < 4; ++i) brute += oracle::brute_dependencies(g.pattern(), 4, t, i).size();
  EXPECT_EQ(brute, 24u);
  EXPECT_EQ(g.total_edges(), 24u);
}

TEST(Patterns, CardinalityRules) {
  const std::uint32_t w = 9;
  const auto st = make(PatternKind::stencil_1d(), w, 3);
  const auto per = make(PatternKind::stencil_1d_periodic(), w, 3);
  const auto nc = make(PatternKind::no_comm(), w, 3);
  const auto tr = make(PatternKind::trivial(), w, 3);
  for (Index i = 0; i < w; ++i) {
    EXPECT_EQ(st.dependencies(1, i).size(), (i == 0 || i == w - 1) ? 2u : 3u);
    EXPECT_EQ(per.dependencies(1, i).size(), 3u);
    EXPECT_EQ(deps(nc, 2, i), std::vector<Index>{i});
    EXPECT_EQ(tr.dependencies(2, i).size(), 0u);
  }
}

TEST(Patterns, TreeFallsBackToSelfPastItsDepth) {
  const auto g = make(PatternKind::tree(), 5, 6);  // ceil(log2 5) = 3 levels
  EXPECT_EQ(deps(g, 1, 0), (std::vector<Index>{0, 1}));
  EXPECT_EQ(deps(g, 3, 1), std::vector<Index>{1});  // 1^4 = 5 is out of range
  EXPECT_EQ(deps(g, 3, 0), (std::vector<Index>{0, 4}));
  EXPECT_EQ(deps(g, 4, 2), std::vector<Index>{2});
}

TEST(Patterns, ParseRoundTrip) {
  for (const auto& p : all_pattern_examples()) EXPECT_EQ(parse_pattern(to_string(p)), p);
  EXPECT_EQ(parse_pattern("nearest"), PatternKind::nearest(1));
  EXPECT_THROW(parse_pattern("spread"), InvalidSpec);
  EXPECT_THROW(parse_pattern("nearest:x"), InvalidSpec);
}

// Exhaustive: every pattern, width <= 16 (powers of two for fft), timesteps <= 8.
TEST(Properties, ForwardMatchesOracleAndReverseIsTranspose) {
  for (const auto& p : all_pattern_examples()) {
    for (std::uint32_t w = 1; w <= 16; ++w) {
      if (p.tag == PatternKind::Tag::fft && !std::has_single_bit(w)) continue;
      for (std::uint32_t steps = 1; steps <= 8; ++steps) {
        const auto g = make(p, w, steps);
        std::uint64_t edges = 0;
        for (Timestep t = 0; t < steps; ++t) {
          for (Index i = 0; i < w; ++i) {
            const auto fwd = deps(g, t, i);
            ASSERT_EQ(fwd, oracle::brute_dependencies(p, w, t, i)) << to_string(p) << " w=" << w;
            ASSERT_TRUE(std::is_sorted(fwd.begin(), fwd.end()));
            ASSERT_EQ(std::set<Index>(fwd.begin(), fwd.end()).size(), fwd.size());
            for (Index d : fwd) ASSERT_LT(d, w);
            edges += fwd.size();
            const auto rev = rdeps(g, t, i);
            ASSERT_EQ(rev, oracle::brute_reverse(p, w, steps, t, i)) << to_string(p) << " w=" << w;
            for (Index j : rev) ASSERT_TRUE(g.dependencies(t + 1, j).contains(i));
          }
        }
        ASSERT_EQ(g.total_edges(), edges);
        ASSERT_EQ(g.total_tasks(), std::uint64_t{w} * steps);
      }
    }
  }
}

TEST(Properties, EqualSpecsGiveIdenticalGraphs) {
  for (const auto& p : all_pattern_examples()) {
    const auto a = make(p, 16, 6), b = make(p, 16, 6);
    for (Timestep t = 0; t < 6; ++t)
      for (Index i = 0; i < 16; ++i) ASSERT_EQ(deps(a, t, i), deps(b, t, i));
  }
}
