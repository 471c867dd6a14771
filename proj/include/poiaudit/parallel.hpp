#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace poiaudit {

// Fixed-size worker pool for coarse-grained jobs (one job = one model
// training run). Jobs must not submit further jobs and wait on them.
class ThreadPool {
 public:
  explicit ThreadPool(unsigned n_threads = 0) {
    if (n_threads == 0) {
      n_threads = std::thread::hardware_concurrency();
      if (n_threads == 0) n_threads = 1;
    }
    for (unsigned i = 0; i < n_threads; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  unsigned size() const { return static_cast<unsigned>(workers_.size()); }

  void submit(std::function<void()> job) {
    {
      std::unique_lock<std::mutex> lock(mu_);
      pending_.push_back(std::move(job));
      ++outstanding_;
    }
    cv_.notify_one();
  }

  // Blocks until every submitted job has finished.
  void wait() {
    std::unique_lock<std::mutex> lock(mu_);
    done_cv_.wait(lock, [this] { return outstanding_ == 0; });
  }

 private:
  void worker_loop() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return stop_ || !pending_.empty(); });
        if (pending_.empty()) return;
        job = std::move(pending_.front());
        pending_.pop_front();
      }
      job();
      {
        std::unique_lock<std::mutex> lock(mu_);
        if (--outstanding_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::deque<std::function<void()>> pending_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  long outstanding_ = 0;
  bool stop_ = false;
};

// Runs fn(i) for i in [0, n) on the pool and waits for completion.
// Exceptions thrown by fn terminate the process; jobs are expected to
// report failure through their own result slots instead.
template <typename Fn>
void parallel_for(ThreadPool& pool, long n, Fn fn) {
  for (long i = 0; i < n; ++i) {
    pool.submit([fn, i] { fn(i); });
  }
  pool.wait();
}

}  // namespace poiaudit
