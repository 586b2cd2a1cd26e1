#pragma once

#include <pthread.h>

#include <cstddef>
#include <functional>
#include <memory>
#include <system_error>

#include "taskbench/backends/config.hpp"

namespace taskbench {

inline constexpr std::size_t kSmallWorkerStack = 256 * 1024;

// Joining thread whose stack size follows WorkerStack.
class WorkerThread {
 public:
  WorkerThread(WorkerStack stack, std::function<void()> body) {
    auto heap = std::make_unique<std::function<void()>>(std::move(body));
    pthread_attr_t attr;
    pthread_attr_init(&attr);
    if (stack == WorkerStack::small) pthread_attr_setstacksize(&attr, kSmallWorkerStack);
    const int rc = pthread_create(&handle_, &attr, &WorkerThread::trampoline, heap.get());
    pthread_attr_destroy(&attr);
    if (rc != 0) throw BackendError(std::system_category().message(rc).insert(0, "worker startup failed: "));
    heap.release();
    joinable_ = true;
  }

  WorkerThread(WorkerThread&& o) noexcept : handle_(o.handle_), joinable_(o.joinable_) { o.joinable_ = false; }
  WorkerThread& operator=(WorkerThread&&) = delete;
  WorkerThread(const WorkerThread&) = delete;
  WorkerThread& operator=(const WorkerThread&) = delete;

  ~WorkerThread() { join(); }

  void join() {
    if (joinable_) {
      pthread_join(handle_, nullptr);
      joinable_ = false;
    }
  }

 private:
  static void* trampoline(void* arg) {
    std::unique_ptr<std::function<void()>> body(static_cast<std::function<void()>*>(arg));
    (*body)();
    return nullptr;
  }

  pthread_t handle_{};
  bool joinable_ = false;
};

}  // namespace taskbench
