#pragma once

// Task graphs: a (timestep, point) lattice whose edges run only from
// timestep t-1 to t, with the dependence set of each point given by a
// closed-form pattern rule. Nothing is materialized per task.

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "taskbench/kernel.hpp"

namespace taskbench {

using Index = std::uint32_t;
using Timestep = std::uint32_t;

class InvalidSpec : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PatternKind {
  enum class Tag { trivial, no_comm, stencil_1d, stencil_1d_periodic, fft, tree, nearest, all_to_all };

  Tag tag = Tag::trivial;
  std::uint32_t radius = 0;  // nearest only

  static constexpr PatternKind trivial() { return {Tag::trivial, 0}; }
  static constexpr PatternKind no_comm() { return {Tag::no_comm, 0}; }
  static constexpr PatternKind stencil_1d() { return {Tag::stencil_1d, 0}; }
  static constexpr PatternKind stencil_1d_periodic() { return {Tag::stencil_1d_periodic, 0}; }
  static constexpr PatternKind fft() { return {Tag::fft, 0}; }
  static constexpr PatternKind tree() { return {Tag::tree, 0}; }
  static constexpr PatternKind nearest(std::uint32_t r) { return {Tag::nearest, r}; }
  static constexpr PatternKind all_to_all() { return {Tag::all_to_all, 0}; }

  friend constexpr bool operator==(const PatternKind&, const PatternKind&) = default;
};

inline std::string to_string(const PatternKind& p) {
  using T = PatternKind::Tag;
  switch (p.tag) {
    case T::trivial: return "trivial";
    case T::no_comm: return "no_comm";
    case T::stencil_1d: return "stencil_1d";
    case T::stencil_1d_periodic: return "stencil_1d_periodic";
    case T::fft: return "fft";
    case T::tree: return "tree";
    case T::nearest: return fmt::format("nearest:{}", p.radius);
    case T::all_to_all: return "all_to_all";
  }
  return "?";
}

/// Accepts the names produced by to_string; `nearest` alone means radius 1.
inline PatternKind parse_pattern(std::string_view s) {
  if (s == "trivial") return PatternKind::trivial();
  if (s == "no_comm") return PatternKind::no_comm();
  if (s == "stencil_1d") return PatternKind::stencil_1d();
  if (s == "stencil_1d_periodic") return PatternKind::stencil_1d_periodic();
  if (s == "fft") return PatternKind::fft();
  if (s == "tree") return PatternKind::tree();
  if (s == "all_to_all") return PatternKind::all_to_all();
  if (s == "nearest") return PatternKind::nearest(1);
  if (s.starts_with("nearest:")) {
    const auto digits = s.substr(8);
    std::uint32_t r = 0;
    if (digits.empty() || digits.size() > 9) throw InvalidSpec(fmt::format("bad pattern '{}'", s));
    for (char c : digits) {
      if (c < '0' || c > '9') throw InvalidSpec(fmt::format("bad pattern '{}'", s));
      r = r * 10 + static_cast<std::uint32_t>(c - '0');
    }
    if (r == 0) throw InvalidSpec("nearest radius must be positive");
    return PatternKind::nearest(r);
  }
  throw InvalidSpec(fmt::format("unknown pattern '{}'", s));
}

inline const std::vector<PatternKind>& all_pattern_examples() {
  static const std::vector<PatternKind> v{
      PatternKind::trivial(),    PatternKind::no_comm(),    PatternKind::stencil_1d(),
      PatternKind::stencil_1d_periodic(), PatternKind::fft(), PatternKind::tree(),
      PatternKind::nearest(2),   PatternKind::all_to_all()};
  return v;
}

struct GraphSpec {
  std::uint32_t width = 1;
  std::uint32_t timesteps = 1;
  PatternKind pattern = PatternKind::trivial();
  std::uint64_t output_bytes = 0;
  KernelConfig kernel{};

  friend bool operator==(const GraphSpec&, const GraphSpec&) = default;
};

struct TaskPoint {
  Timestep timestep = 0;
  Index index = 0;
  friend bool operator==(const TaskPoint&, const TaskPoint&) = default;
};

/// Sorted, duplicate-free set of point indices. Either a contiguous interval
/// or at most three listed values, so it never allocates.
class DependenceSet {
 public:
  class iterator {
   public:
    using iterator_category = std::random_access_iterator_tag;
    using value_type = Index;
    using difference_type = std::ptrdiff_t;
    using pointer = const Index*;
    using reference = Index;

    iterator() = default;
    iterator(const DependenceSet* set, std::uint32_t pos) : set_(set), pos_(pos) {}
    Index operator*() const { return (*set_)[pos_]; }
    Index operator[](difference_type n) const { return (*set_)[static_cast<std::uint32_t>(pos_ + n)]; }
    iterator& operator++() { ++pos_; return *this; }
    iterator operator++(int) { auto c = *this; ++pos_; return c; }
    iterator& operator--() { --pos_; return *this; }
    iterator operator--(int) { auto c = *this; --pos_; return c; }
    iterator& operator+=(difference_type n) { pos_ = static_cast<std::uint32_t>(pos_ + n); return *this; }
    iterator& operator-=(difference_type n) { pos_ = static_cast<std::uint32_t>(pos_ - n); return *this; }
    friend iterator operator+(iterator it, difference_type n) { return it += n; }
    friend iterator operator+(difference_type n, iterator it) { return it += n; }
    friend iterator operator-(iterator it, difference_type n) { return it -= n; }
    friend difference_type operator-(const iterator& a, const iterator& b) {
      return static_cast<difference_type>(a.pos_) - static_cast<difference_type>(b.pos_);
    }
    friend bool operator==(const iterator& a, const iterator& b) { return a.pos_ == b.pos_; }
    friend auto operator<=>(const iterator& a, const iterator& b) { return a.pos_ <=> b.pos_; }

   private:
    const DependenceSet* set_ = nullptr;
    std::uint32_t pos_ = 0;
  };

  DependenceSet() = default;

  static DependenceSet interval(Index first, Index last_exclusive) {
    DependenceSet s;
    s.interval_ = true;
    s.first_ = first;
    s.size_ = last_exclusive > first ? last_exclusive - first : 0;
    return s;
  }

  // Values may be unsorted and repeated; at most three.
  static DependenceSet listed(std::initializer_list<Index> values) {
    DependenceSet s;
    for (Index v : values) s.listed_[s.size_++] = v;
    std::sort(s.listed_.begin(), s.listed_.begin() + s.size_);
    s.size_ = static_cast<std::uint32_t>(
        std::unique(s.listed_.begin(), s.listed_.begin() + s.size_) - s.listed_.begin());
    return s;
  }

  std::uint32_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  Index operator[](std::uint32_t k) const noexcept { return interval_ ? first_ + k : listed_[k]; }
  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, size_}; }

  bool contains(Index v) const {
    if (interval_) return v >= first_ && v - first_ < size_;
    return std::find(listed_.begin(), listed_.begin() + size_, v) != listed_.begin() + size_;
  }

  std::vector<Index> to_vector() const { return {begin(), end()}; }

 private:
  bool interval_ = false;
  Index first_ = 0;
  std::uint32_t size_ = 0;
  std::array<Index, 3> listed_{};
};

class TaskGraph {
 public:
  explicit TaskGraph(GraphSpec spec) : spec_(spec) {
    if (spec_.width == 0) throw InvalidSpec("width must be at least 1");
    if (spec_.timesteps == 0) throw InvalidSpec("timesteps must be at least 1");
    using T = PatternKind::Tag;
    if (spec_.pattern.tag == T::fft && !std::has_single_bit(spec_.width))
      throw InvalidSpec(fmt::format("fft pattern needs a power-of-two width, got {}", spec_.width));
    if (spec_.pattern.tag == T::nearest && spec_.pattern.radius == 0)
      throw InvalidSpec("nearest radius must be positive");
    log2_floor_ = static_cast<std::uint32_t>(std::bit_width(spec_.width) - 1);
    log2_ceil_ = static_cast<std::uint32_t>(std::bit_width(spec_.width - 1));
  }

  const GraphSpec& spec() const noexcept { return spec_; }
  std::uint32_t width() const noexcept { return spec_.width; }
  std::uint32_t timesteps() const noexcept { return spec_.timesteps; }
  const PatternKind& pattern() const noexcept { return spec_.pattern; }
  const KernelConfig& kernel() const noexcept { return spec_.kernel; }

  bool contains(Timestep t, Index i) const noexcept { return t < spec_.timesteps && i < spec_.width; }

  std::uint64_t task_id(Timestep t, Index i) const noexcept {
    return static_cast<std::uint64_t>(t) * spec_.width + i;
  }
  TaskPoint point(std::uint64_t id) const noexcept {
    return {static_cast<Timestep>(id / spec_.width), static_cast<Index>(id % spec_.width)};
  }

  /// Indices at timestep t-1 that (t, i) depends on.
  DependenceSet dependencies(Timestep t, Index i) const {
    check(t, i);
    if (t == 0) return {};
    return rule(t, i);
  }

  /// Indices at timestep t+1 that depend on (t, i).
  DependenceSet reverse_dependencies(Timestep t, Index i) const {
    check(t, i);
    if (t + 1 >= spec_.timesteps) return {};
    // Every pattern rule here is symmetric between consecutive timesteps.
    return rule(t + 1, i);
  }

  std::uint64_t total_tasks() const noexcept {
    return static_cast<std::uint64_t>(spec_.width) * spec_.timesteps;
  }

  std::uint64_t total_edges() const {
    std::uint64_t n = 0;
    for (Timestep t = 1; t < spec_.timesteps; ++t)
      for (Index i = 0; i < spec_.width; ++i) n += rule(t, i).size();
    return n;
  }

 private:
  void check(Timestep t, Index i) const {
    if (!contains(t, i))
      throw std::out_of_range(fmt::format("point ({}, {}) outside {}x{} graph", t, i,
                                          spec_.timesteps, spec_.width));
  }

  // Dependence set of (t, i) for t >= 1.
  DependenceSet rule(Timestep t, Index i) const {
    using T = PatternKind::Tag;
    const Index w = spec_.width;
    switch (spec_.pattern.tag) {
      case T::trivial:
        return {};
      case T::no_comm:
        return DependenceSet::listed({i});
      case T::stencil_1d:
        return DependenceSet::interval(i == 0 ? 0 : i - 1, std::min<Index>(w, i + 2));
      case T::stencil_1d_periodic:
        return DependenceSet::listed({(i + w - 1) % w, i, (i + 1) % w});
      case T::fft: {
        if (log2_floor_ == 0) return DependenceSet::listed({i});
        const Index partner = i ^ (Index{1} << ((t - 1) % log2_floor_));
        return DependenceSet::listed({i, partner});
      }
      case T::tree: {
        if (t - 1 >= log2_ceil_) return DependenceSet::listed({i});
        const Index partner = i ^ (Index{1} << (t - 1));
        if (partner >= w) return DependenceSet::listed({i});
        return DependenceSet::listed({i, partner});
      }
      case T::nearest: {
        const std::uint64_t r = spec_.pattern.radius;
        const Index lo = i >= r ? static_cast<Index>(i - r) : 0;
        const Index hi = static_cast<Index>(std::min<std::uint64_t>(w, i + r + 1));
        return DependenceSet::interval(lo, hi);
      }
      case T::all_to_all:
        return DependenceSet::interval(0, w);
    }
    return {};
  }

  GraphSpec spec_;
  std::uint32_t log2_floor_ = 0;
  std::uint32_t log2_ceil_ = 0;
};

inline TaskGraph build_graph(const GraphSpec& spec) { return TaskGraph(spec); }

}  // namespace taskbench
