#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <vector>

namespace caliblab {

// Worker count used by every OpenMP kernel. Defaults to 1 so results are
// reproducible unless a caller opts in.
void set_threads(int n);
int threads();

// Streaming mean/variance with an order-fixed merge (Chan et al.).
struct RunningStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double min = 0.0;
  double max = 0.0;

  void add(double x);
  void merge(const RunningStats& other);
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double sd() const { return std::sqrt(variance()); }
  double std_error() const { return n > 0 ? sd() / std::sqrt(static_cast<double>(n)) : 0.0; }
};

RunningStats stats_of(std::span<const double> values);

// Items per reduction block. Reductions sum each block sequentially and then
// sum block totals sequentially, so the result does not depend on the
// thread count.
inline constexpr std::size_t kReduceBlock = 4096;

// Collects the first exception thrown inside a parallel region so it can be
// rethrown on the calling thread.
class ExceptionSlot {
 public:
  template <class Fn>
  void run(Fn&& fn) noexcept {
    try {
      fn();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!first_) first_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (first_) std::rethrow_exception(first_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr first_;
};

// Sum of fn(i) over i in [0, n) with the fixed blocked order above.
template <class Fn>
double blocked_sum(std::size_t n, Fn&& fn) {
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
  const auto nb = static_cast<long long>(blocks);
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads())
  for (long long b = 0; b < nb; ++b) {
    slot.run([&] {
      const std::size_t lo = static_cast<std::size_t>(b) * kReduceBlock;
      const std::size_t hi = std::min(n, lo + kReduceBlock);
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += fn(i);
      partial[static_cast<std::size_t>(b)] = s;
    });
  }
  slot.rethrow();
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

// Calls fn(i) for i in [0, n) in parallel; fn must only write to slot i of
// its outputs.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const auto nn = static_cast<long long>(n);
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads())
  for (long long i = 0; i < nn; ++i) {
    slot.run([&] { fn(static_cast<std::size_t>(i)); });
  }
  slot.rethrow();
}

// out[i] = fn(i) for i in [0, n), evaluated in parallel.
template <class Fn>
std::vector<double> parallel_map(std::size_t n, Fn&& fn) {
  std::vector<double> out(n);
  const auto nn = static_cast<long long>(n);
  ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads())
  for (long long i = 0; i < nn; ++i) {
    slot.run([&] { out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i)); });
  }
  slot.rethrow();
  return out;
}

}  // namespace caliblab
