#include "caliblab/lipschitz_lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "caliblab/errors.hpp"

namespace caliblab {

void validate(const ChainLP& lp) {
  if (lp.values.size() != lp.weights.size()) {
    throw ParameterError("chain LP: values and weights differ in length");
  }
  for (std::size_t i = 0; i < lp.values.size(); ++i) {
    const double v = lp.values[i];
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("chain LP: value " + std::to_string(i) + " outside [0, 1]");
    if (!std::isfinite(lp.weights[i])) throw ParameterError("chain LP: weight " + std::to_string(i) + " not finite");
    if (i > 0 && !(lp.values[i - 1] < v)) {
      throw ParameterError("chain LP: values must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
}

// V_i(g) = best objective over f_1..f_i with f_i = g. Each V_i is concave and
// piecewise linear on [-1, 1], stored as its breakpoints. Moving to stage i+1
// takes the max of V_i over the window |f - g| <= d: the increasing part
// shifts left by d, the decreasing part right by d, and the top becomes a
// plateau of width 2d. The result is clipped to [-1, 1] and the next linear
// term is added.
double ChainLPWorkspace::run(std::span<const double> values, std::span<const double> weights,
                             std::vector<double>* argmax) {
  const std::size_t m = values.size();
  if (argmax) argmax->assign(m, 0.0);
  if (m == 0) return 0.0;

  cur_.clear();
  cur_.push_back({-1.0, -weights[0]});
  cur_.push_back({1.0, weights[0]});

  auto top = [this]() {
    std::size_t a = 0;
    for (std::size_t k = 1; k < cur_.size(); ++k) {
      if (cur_[k].y > cur_[a].y) a = k;
    }
    return a;
  };

  for (std::size_t i = 1; i < m; ++i) {
    const std::size_t a = top();
    if (argmax) (*argmax)[i - 1] = cur_[a].x;
    const double d = values[i] - values[i - 1];

    next_.clear();
    auto emit = [this](double x, double y) {
      if (!next_.empty() && next_.back().x >= x) {
        next_.back().y = std::max(next_.back().y, y);
        return;
      }
      next_.push_back({x, y});
    };
    auto clipped = [&](Point p, Point q) {
      // Emits the part of segment p->q inside [-1, 1]; q is always emitted if inside.
      if (q.x < -1.0) return;
      if (p.x < -1.0 && q.x > -1.0) emit(-1.0, p.y + (q.y - p.y) * (-1.0 - p.x) / (q.x - p.x));
      if (p.x < 1.0 && q.x > 1.0) {
        emit(1.0, p.y + (q.y - p.y) * (1.0 - p.x) / (q.x - p.x));
        return;
      }
      if (q.x <= 1.0) emit(q.x, q.y);
    };

    Point prev{0.0, 0.0};
    bool have_prev = false;
    auto push = [&](Point q) {
      if (!have_prev) {
        if (q.x >= -1.0 && q.x <= 1.0) emit(q.x, q.y);
        prev = q;
        have_prev = true;
        return;
      }
      clipped(prev, q);
      prev = q;
    };
    for (std::size_t k = 0; k < a; ++k) push({cur_[k].x - d, cur_[k].y});
    push({cur_[a].x - d, cur_[a].y});
    push({cur_[a].x + d, cur_[a].y});
    for (std::size_t k = a + 1; k < cur_.size(); ++k) push({cur_[k].x + d, cur_[k].y});

    const double w = weights[i];
    for (auto& p : next_) p.y += w * p.x;
    std::swap(cur_, next_);
  }
  const std::size_t a = top();
  if (argmax) (*argmax)[m - 1] = cur_[a].x;
  return cur_[a].y;
}

double ChainLPWorkspace::optimum(std::span<const double> values, std::span<const double> weights) {
  return run(values, weights, nullptr);
}

namespace {

bool pair_ok(double fi, double fj, double vi, double vj) { return std::fabs(fj - fi) <= vj - vi; }

// Moves f[i] toward the interval allowed by the already-fixed f[i+1..m) until
// every pairwise check passes in floating point.
void repair(std::vector<double>& f, std::span<const double> v, std::size_t i) {
  const std::size_t m = f.size();
  double lo = -1.0;
  double hi = 1.0;
  for (std::size_t j = i + 1; j < m; ++j) {
    const double gap = v[j] - v[i];
    lo = std::max(lo, f[j] - gap);
    hi = std::min(hi, f[j] + gap);
  }
  if (lo <= hi) f[i] = std::clamp(f[i], lo, hi);
  for (int iter = 0; iter < 64; ++iter) {
    bool ok = true;
    for (std::size_t j = i + 1; j < m && ok; ++j) {
      if (!pair_ok(f[i], f[j], v[i], v[j])) {
        ok = false;
        f[i] = std::nextafter(f[i], f[j]);
      }
    }
    if (ok) return;
  }
}

}  // namespace

ChainLPSolution solve_chain_lp(const ChainLP& lp) {
  validate(lp);
  const std::size_t m = lp.values.size();
  ChainLPSolution sol;
  if (m == 0) return sol;

  ChainLPWorkspace ws;
  std::vector<double> argmax;
  sol.optimum = ws.run(lp.values, lp.weights, &argmax);

  // The argmax of a concave V_i over a window is its global argmax clamped
  // into the window.
  auto& f = sol.witness.f_values;
  f.assign(m, 0.0);
  f[m - 1] = std::clamp(argmax[m - 1], -1.0, 1.0);
  for (std::size_t i = m - 1; i-- > 0;) {
    const double d = lp.values[i + 1] - lp.values[i];
    f[i] = std::clamp(std::clamp(argmax[i], f[i + 1] - d, f[i + 1] + d), -1.0, 1.0);
    repair(f, lp.values, i);
  }
  return sol;
}

double grid_supremum(const ChainLP& lp, double delta) {
  validate(lp);
  if (!(delta > 0.0 && delta <= 1.0)) throw ParameterError("grid_supremum: delta must lie in (0, 1]");
  const double inv = 1.0 / delta;
  const double k_real = std::round(inv);
  if (std::fabs(inv - k_real) > 1e-9 * k_real) {
    throw ParameterError("grid_supremum: 1/delta must be a positive integer");
  }
  const auto K = static_cast<std::size_t>(k_real);

  // Cell k covers [k/K, (k+1)/K); the point 1 is its own cell K.
  std::vector<double> cell_weight(K + 1, 0.0);
  for (std::size_t i = 0; i < lp.values.size(); ++i) {
    const double v = lp.values[i];
    auto c = static_cast<std::size_t>(std::floor(v * static_cast<double>(K)));
    c = std::min(c, K);
    if (static_cast<double>(c) / static_cast<double>(K) > v) --c;
    if (c < K && static_cast<double>(c + 1) / static_cast<double>(K) <= v) ++c;
    cell_weight[c] += lp.weights[i];
  }

  // Level j is the value -1 + j/K, j in [0, 2K].
  const std::size_t L = 2 * K + 1;
  auto level = [&](std::size_t j) {
    return (static_cast<double>(j) - static_cast<double>(K)) / static_cast<double>(K);
  };
  std::vector<double> dp(L), nd(L);
  for (std::size_t j = 0; j < L; ++j) dp[j] = cell_weight[0] * level(j);
  for (std::size_t c = 1; c <= K; ++c) {
    for (std::size_t j = 0; j < L; ++j) {
      double best = dp[j];
      if (j > 0) best = std::max(best, dp[j - 1]);
      if (j + 1 < L) best = std::max(best, dp[j + 1]);
      nd[j] = best + cell_weight[c] * level(j);
    }
    std::swap(dp, nd);
  }
  return *std::max_element(dp.begin(), dp.end());
}

}  // namespace caliblab
