#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace apt {

/// Fork-join pool: parallel_for(n, f) runs f(0..n-1) across the workers and
/// the calling thread and returns when all calls have finished. Which thread
/// runs which index is unspecified, so f must not depend on it.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers) : workers_(workers == 0 ? 1 : workers) {
    for (std::size_t i = 1; i < workers_; ++i) threads_.emplace_back([this] { loop(); });
  }

  ~WorkerPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const { return workers_; }

  static std::size_t default_workers() {
    const auto hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }

  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (workers_ == 1 || n == 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::lock_guard call_lock(call_mutex_);
    {
      // No worker is inside drain() here: active_ == 0 and open_ == false.
      std::lock_guard lock(mutex_);
      job_ = &fn;
      count_ = n;
      next_.store(0);
      done_ = 0;
      error_ = nullptr;
      open_ = true;
      ++generation_;
    }
    wake_.notify_all();
    const std::size_t mine = drain();
    std::unique_lock lock(mutex_);
    done_ += mine;
    finished_.wait(lock, [&] { return done_ == count_; });
    open_ = false;
    finished_.wait(lock, [&] { return active_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::size_t drain() {
    std::size_t completed = 0;
    for (;;) {
      const std::size_t i = next_.fetch_add(1);
      if (i >= count_) break;
      try {
        (*job_)(i);
      } catch (...) {
        std::lock_guard lock(mutex_);
        if (!error_) error_ = std::current_exception();
      }
      ++completed;
    }
    return completed;
  }

  void loop() {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return stop_ || (open_ && generation_ != seen); });
        if (stop_) return;
        seen = generation_;
        ++active_;
      }
      const std::size_t completed = drain();
      {
        std::lock_guard lock(mutex_);
        done_ += completed;
        --active_;
      }
      finished_.notify_all();
    }
  }

  std::size_t workers_;
  std::vector<std::thread> threads_;
  std::mutex call_mutex_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable finished_;
  // job_ and count_ are written only while no worker is draining.
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t count_ = 0;
  std::atomic<std::size_t> next_{0};
  std::size_t done_ = 0;
  std::size_t active_ = 0;
  std::size_t generation_ = 0;
  bool open_ = false;
  std::exception_ptr error_;
  bool stop_ = false;
};

}  // namespace apt
