// Copyright 2026 The mast-cpp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mast/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mast {

namespace {

int resolve_worker_count() {
  if (const char* env = std::getenv("MAST_THREADS")) {
    int v = std::atoi(env);
    return v >= 1 ? v : 1;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Minimal persistent pool. The caller thread helps drain the task counter,
// so a pool of W workers keeps W-1 helper threads. task_ stays valid until
// every claimed index has completed, at which point late helpers can only
// claim indices >= n_ and never dereference it.
class Pool {
 public:
  static Pool& instance() {
    static Pool p;
    return p;
  }

  int workers() const { return workers_; }

  void run(int n, const std::function<void(int)>& task) {
    if (n <= 0) return;
    // Nested calls from inside a task run inline; the pool is not reentrant.
    if (in_task_ || workers_ == 1 || n == 1) {
      for (int i = 0; i < n; ++i) task(i);
      return;
    }
    {
      std::unique_lock<std::mutex> lk(m_);
      // Helpers that woke late for the previous generation may still be
      // inside drain(); they exit promptly since its counter is exhausted.
      done_cv_.wait(lk, [&] { return helpers_draining_ == 0; });
      task_ = &task;
      n_ = n;
      next_.store(0, std::memory_order_relaxed);
      completed_.store(0, std::memory_order_relaxed);
      error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();

    drain();

    // A new run may only start once every helper has left drain(), otherwise
    // a lingering helper could observe the next run's counters with a stale
    // task pointer.
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [&] {
      return completed_.load(std::memory_order_acquire) == n_ &&
             helpers_draining_ == 0;
    });
    task_ = nullptr;
    std::exception_ptr err = error_;
    lk.unlock();
    if (err) std::rethrow_exception(err);
  }

 private:
  Pool() : workers_(resolve_worker_count()) {
    for (int i = 0; i < workers_ - 1; ++i) {
      threads_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void drain() {
    for (;;) {
      int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= n_) break;
      in_task_ = true;
      try {
        (*task_)(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(m_);
        if (!error_) error_ = std::current_exception();
      }
      in_task_ = false;
      if (completed_.fetch_add(1, std::memory_order_acq_rel) + 1 == n_) {
        std::lock_guard<std::mutex> lk(m_);
        done_cv_.notify_all();
      }
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        ++helpers_draining_;
      }
      drain();
      {
        std::lock_guard<std::mutex> lk(m_);
        --helpers_draining_;
      }
      done_cv_.notify_all();
    }
  }

  const int workers_;
  std::vector<std::thread> threads_;
  std::mutex m_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  int n_ = 0;
  std::atomic<int> next_{0};
  std::atomic<int> completed_{0};
  int helpers_draining_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
  static thread_local bool in_task_;
};

thread_local bool Pool::in_task_ = false;

}  // namespace

int worker_count() { return Pool::instance().workers(); }

void parallel_for(int n, const std::function<void(int)>& task) {
  Pool::instance().run(n, task);
}

}  // namespace mast
