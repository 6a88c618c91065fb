#include "caliblab/parallel.hpp"

#include <algorithm>
#include <atomic>

namespace caliblab {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) { g_threads.store(std::max(1, n)); }
int threads() { return g_threads.load(); }

void RunningStats::add(double x) {
  if (n == 0) {
    min = max = x;
  } else {
    min = std::min(min, x);
    max = std::max(max, x);
  }
  ++n;
  const double delta = x - mean;
  mean += delta / static_cast<double>(n);
  m2 += delta * (x - mean);
}

void RunningStats::merge(const RunningStats& other) {
  if (other.n == 0) return;
  if (n == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(n);
  const double nb = static_cast<double>(other.n);
  const double delta = other.mean - mean;
  const double total = na + nb;
  mean += delta * nb / total;
  m2 += other.m2 + delta * delta * na * nb / total;
  n += other.n;
  min = std::min(min, other.min);
  max = std::max(max, other.max);
}

RunningStats stats_of(std::span<const double> values) {
  RunningStats s;
  for (double v : values) s.add(v);
  return s;
}

}  // namespace caliblab
