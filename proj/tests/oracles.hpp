#pragma once

// Test-only reference models, written independently of the library's
// closed-form rules.

#include <cstdint>
#include <cstdlib>
#include <vector>

#include "taskbench/graph.hpp"

namespace taskbench::oracle {

inline std::uint32_t log2_exact(std::uint32_t w) {
  std::uint32_t k = 0;
  while ((1u << k) < w) ++k;
  return k;
}

// Predicate form of each pattern: does (t, i) depend on (t - 1, j)?
inline bool depends(const PatternKind& p, std::uint32_t width, std::uint32_t t, std::uint32_t i,
                    std::uint32_t j) {
  using T = PatternKind::Tag;
  const long d = static_cast<long>(i) - static_cast<long>(j);
  switch (p.tag) {
    case T::trivial: return false;
    case T::no_comm: return i == j;
    case T::stencil_1d: return std::labs(d) <= 1;
    case T::stencil_1d_periodic: {
      const long m = ((d % width) + width) % width;
      return m == 0 || m == 1 || m == static_cast<long>(width) - 1;
    }
    case T::fft: {
      const auto levels = log2_exact(width);
      if (i == j) return true;
      return levels > 0 && j == (i ^ (1u << ((t - 1) % levels)));
    }
    case T::tree: {
      if (i == j) return true;
      const auto levels = log2_exact(width);  // ceil(log2 width)
      return t - 1 < levels && j == (i ^ (1u << (t - 1)));
    }
    case T::nearest: return std::labs(d) <= static_cast<long>(p.radius);
    case T::all_to_all: return true;
  }
  return false;
}

inline std::vector<std::uint32_t> brute_dependencies(const PatternKind& p, std::uint32_t width,
                                                     std::uint32_t t, std::uint32_t i) {
  std::vector<std::uint32_t> out;
  if (t == 0) return out;
  for (std::uint32_t j = 0; j < width; ++j)
    if (depends(p, width, t, i, j)) out.push_back(j);
  return out;
}

inline std::vector<std::uint32_t> brute_reverse(const PatternKind& p, std::uint32_t width,
                                                std::uint32_t timesteps, std::uint32_t t,
                                                std::uint32_t i) {
  std::vector<std::uint32_t> out;
  if (t + 1 >= timesteps) return out;
  for (std::uint32_t j = 0; j < width; ++j)
    if (depends(p, width, t + 1, j, i)) out.push_back(j);
  return out;
}

}  // namespace taskbench::oracle
