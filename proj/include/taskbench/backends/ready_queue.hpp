#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "taskbench/backends/config.hpp"

namespace taskbench {

using TaskId = std::uint64_t;

/// Arbitrary-length priority bit string, compared lexicographically word by
/// word (most significant first); shorter strings sort before their extensions.
using BitvectorPriority = std::vector<std::uint64_t>;

inline BitvectorPriority bitvector_priority(std::uint64_t key) { return {0, key}; }

/// Per-worker ready queue. The owner pops LIFO and thieves pop FIFO among the
/// entries of the most urgent priority (smallest key); with PriorityMode::none
/// every entry has the same priority.
class ReadyQueue {
 public:
  explicit ReadyQueue(PriorityMode mode) {
    switch (mode) {
      case PriorityMode::none: store_.emplace<Plain>(); break;
      case PriorityMode::fixed64: store_.emplace<Ordered<std::uint64_t>>(); break;
      case PriorityMode::bitvector: store_.emplace<Ordered<BitvectorPriority>>(); break;
    }
  }

  void push(TaskId task, std::uint64_t priority_key) {
    std::lock_guard lk(mu_);
    std::visit(
        [&](auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Plain>) {
            s.push_back(task);
          } else if constexpr (std::is_same_v<S, Ordered<std::uint64_t>>) {
            s.emplace(std::pair{priority_key, seq_++}, task);
          } else {
            s.emplace(std::pair{bitvector_priority(priority_key), seq_++}, task);
          }
        },
        store_);
    size_.fetch_add(1, std::memory_order_relaxed);
  }

  std::optional<TaskId> pop_owner() { return pop(true); }
  std::optional<TaskId> pop_thief() { return pop(false); }

  std::size_t approx_size() const noexcept { return size_.load(std::memory_order_relaxed); }

 private:
  using Plain = std::deque<TaskId>;
  template <class Key>
  using Ordered = std::map<std::pair<Key, std::uint64_t>, TaskId>;

  std::optional<TaskId> pop(bool owner) {
    if (approx_size() == 0) return std::nullopt;
    std::lock_guard lk(mu_);
    std::optional<TaskId> out;
    std::visit(
        [&](auto& s) {
          if (s.empty()) return;
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Plain>) {
            if (owner) {
              out = s.back();
              s.pop_back();
            } else {
              out = s.front();
              s.pop_front();
            }
          } else {
            auto it = s.begin();
            if (owner) {
              // Last-pushed entry among those sharing the most urgent key.
              it = s.lower_bound({s.begin()->first.first, std::numeric_limits<std::uint64_t>::max()});
              --it;
            }
            out = it->second;
            s.erase(it);
          }
        },
        store_);
    if (out) size_.fetch_sub(1, std::memory_order_relaxed);
    return out;
  }

  std::mutex mu_;
  std::variant<Plain, Ordered<std::uint64_t>, Ordered<BitvectorPriority>> store_;
  std::uint64_t seq_ = 0;
  std::atomic<std::size_t> size_{0};
};

}  // namespace taskbench
