#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace kbsa {

// Compensated (Neumaier) accumulator. Sums are always taken in index order,
// so results never depend on how work was split across threads.
class NeumaierSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double ordered_sum(std::span<const double> v) {
  NeumaierSum s;
  for (double x : v) s.add(x);
  return s.value();
}

inline double ordered_mean(std::span<const double> v) { return v.empty() ? 0.0 : ordered_sum(v) / v.size(); }

// Sample variance (n-1 denominator), two-pass.
inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = ordered_mean(v);
  NeumaierSum s;
  for (double x : v) s.add((x - mu) * (x - mu));
  return s.value() / (v.size() - 1);
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is handed out
// in contiguous blocks; fn must write only to slots it owns. If any call
// throws, the exception from the lowest index is rethrown once all workers
// have stopped, so failures read the same for every thread count.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  std::exception_ptr error;
  std::size_t error_index = n;
  std::mutex error_mutex;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      for (std::size_t i = begin; i < end; ++i) {
        if (failed.load(std::memory_order_relaxed)) {
          std::lock_guard lock(error_mutex);
          if (error_index < i) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (i < error_index) {
            error_index = i;
            error = std::current_exception();
          }
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace kbsa
