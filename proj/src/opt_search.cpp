#include "caliblab/opt_search.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "caliblab/errors.hpp"
#include "caliblab/forecasters.hpp"
#include "caliblab/parallel.hpp"

namespace caliblab {

void validate(const GridSpec& g) {
  if (g.values.empty()) throw ParameterError("grid: must be nonempty");
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const double v = g.values[i];
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("grid: value " + std::to_string(i) + " outside [0, 1]");
    if (i > 0 && !(g.values[i - 1] < v)) throw ParameterError("grid: values must be strictly increasing");
  }
}

namespace {

using Choices = std::vector<std::uint16_t>;  // grid indices in heap order

void check_depth(const OutcomeDistribution& d) {
  if (d.depth() > caps().enumeration) {
    throw CapacityError("opt search: depth " + std::to_string(d.depth()) + " exceeds enumeration cap " +
                        std::to_string(caps().enumeration));
  }
  if (d.depth() > 30) throw CapacityError("opt search: depth too large to materialize a table");
}

void check_grid_size(const GridSpec& g) {
  if (g.values.size() > 65535) throw CapacityError("opt search: grid too large");
}

Forecaster to_forecaster(std::size_t depth, const Choices& c, const GridSpec& g) {
  std::vector<double> p(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) p[i] = g.values[c[i]];
  return Forecaster::table(depth, std::move(p));
}

// Heap-ordered table of depth k + 1 from a root and two depth-k subtables.
void merge(std::uint16_t root, const Choices& left, const Choices& right, std::size_t k, Choices& out) {
  out.clear();
  out.push_back(root);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t lo = (std::size_t{1} << j) - 1;
    const std::size_t hi = (std::size_t{1} << (j + 1)) - 1;
    out.insert(out.end(), left.begin() + static_cast<std::ptrdiff_t>(lo), left.begin() + static_cast<std::ptrdiff_t>(hi));
    out.insert(out.end(), right.begin() + static_cast<std::ptrdiff_t>(lo), right.begin() + static_cast<std::ptrdiff_t>(hi));
  }
}

struct Solved {
  double value = 0.0;
  Choices table;
};

class Expectimin {
 public:
  Expectimin(const OutcomeDistribution& d, const MeasureFn& m, const GridSpec& g)
      : d_(d), m_(m), g_(g), T_(d.depth()), x_(T_, 0), p_(T_, 0.0) {}

  // Prefix (x, p) for steps [0, t) must already be set.
  double solve(std::size_t t, Choices& out) {
    if (lookup_ && t == lookup_depth_) {
      const Solved& s = (*lookup_)[task_index(t)];
      out = s.table;
      return s.value;
    }
    if (t == T_) {
      out.clear();
      ++leaves_;
      return m_(Transcript(x_, p_));
    }
    const std::size_t k = T_ - t - 1;
    const std::size_t child_size = (std::size_t{1} << k) - 1;
    const double q = d_.conditional(std::span<const Bit>(x_.data(), t));
    const double prob[2] = {1.0 - q, q};

    double best = std::numeric_limits<double>::infinity();
    std::uint16_t best_g = 0;
    Choices child[2], best_child[2];
    for (std::uint16_t gi = 0; gi < g_.values.size(); ++gi) {
      p_[t] = g_.values[gi];
      double v = 0.0;
      for (Bit b = 0; b < 2; ++b) {
        if (prob[b] == 0.0) {
          child[b].assign(child_size, 0);
          continue;
        }
        x_[t] = b;
        v += prob[b] * solve(t + 1, child[b]);
      }
      if (v < best) {
        best = v;
        best_g = gi;
        best_child[0].swap(child[0]);
        best_child[1].swap(child[1]);
      }
    }
    x_[t] = 0;
    merge(best_g, best_child[0], best_child[1], k, out);
    return best;
  }

  // Task index of the current prefix at depth t: history bits then grid
  // digits, both most significant first.
  std::size_t task_index(std::size_t t) const {
    std::size_t h = 0, pp = 0;
    for (std::size_t s = 0; s < t; ++s) {
      h = 2 * h + x_[s];
      pp = pp * g_.values.size() + grid_index(p_[s]);
    }
    return h * ipow(g_.values.size(), t) + pp;
  }

  void set_prefix(std::size_t t, std::size_t task) {
    std::size_t pp = task % ipow(g_.values.size(), t);
    std::size_t h = task / ipow(g_.values.size(), t);
    for (std::size_t s = t; s-- > 0;) {
      x_[s] = static_cast<Bit>(h & 1U);
      h >>= 1;
      p_[s] = g_.values[pp % g_.values.size()];
      pp /= g_.values.size();
    }
  }

  double prefix_probability(std::size_t t) const {
    double pr = 1.0;
    for (std::size_t s = 0; s < t; ++s) {
      const double q = d_.conditional(std::span<const Bit>(x_.data(), s));
      pr *= x_[s] ? q : 1.0 - q;
    }
    return pr;
  }

  void use_lookup(std::size_t depth, const std::vector<Solved>* table) {
    lookup_depth_ = depth;
    lookup_ = table;
  }

  std::size_t leaves() const { return leaves_; }

  static std::size_t ipow(std::size_t b, std::size_t e) {
    std::size_t r = 1;
    while (e-- > 0) r *= b;
    return r;
  }

 private:
  std::size_t grid_index(double v) const {
    for (std::size_t i = 0; i < g_.values.size(); ++i) {
      if (g_.values[i] == v) return i;
    }
    throw InternalError("opt search: prediction not on grid");
  }

  const OutcomeDistribution& d_;
  const MeasureFn& m_;
  const GridSpec& g_;
  std::size_t T_;
  Bits x_;
  std::vector<double> p_;
  std::size_t leaves_ = 0;
  std::size_t lookup_depth_ = 0;
  const std::vector<Solved>* lookup_ = nullptr;
};

}  // namespace

OptResult opt_exact(const OutcomeDistribution& d, const MeasureFn& m, const GridSpec& g) {
  validate(g);
  check_depth(d);
  check_grid_size(g);
  const std::size_t T = d.depth();
  const double leaves = std::pow(2.0 * static_cast<double>(g.values.size()), static_cast<double>(T));
  if (leaves > caps().search) {
    throw CapacityError("opt search: 2^T |g|^T = " + std::to_string(leaves) + " exceeds search cap " +
                        std::to_string(caps().search));
  }

  const std::size_t L = std::min<std::size_t>(T, 2);
  const std::size_t tasks = (std::size_t{1} << L) * Expectimin::ipow(g.values.size(), L);
  std::vector<Solved> solved(tasks);
  std::vector<std::size_t> task_leaves(tasks, 0);
  ExceptionSlot slot;
  const auto nt = static_cast<long long>(tasks);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads())
  for (long long i = 0; i < nt; ++i) {
    slot.run([&] {
      const auto task = static_cast<std::size_t>(i);
      Expectimin e(d, m, g);
      e.set_prefix(L, task);
      if (e.prefix_probability(L) == 0.0) return;
      solved[task].value = e.solve(L, solved[task].table);
      task_leaves[task] = e.leaves();
    });
  }
  slot.rethrow();

  Expectimin top(d, m, g);
  top.use_lookup(L, &solved);
  Choices table;
  OptResult r;
  r.value = top.solve(0, table);
  r.argmin = to_forecaster(T, table, g);
  for (std::size_t n : task_leaves) r.leaves += n;
  return r;
}

OptResult opt_exact_bruteforce(const OutcomeDistribution& d, const MeasureFn& m, const GridSpec& g) {
  validate(g);
  check_depth(d);
  check_grid_size(g);
  const std::size_t T = d.depth();
  const std::size_t n = (std::size_t{1} << T) - 1;
  const double tables = std::pow(static_cast<double>(g.values.size()), static_cast<double>(n));
  if (tables > caps().search) {
    throw CapacityError("opt brute force: " + std::to_string(tables) + " tables exceed search cap");
  }
  Choices c(n, 0), best_c(n, 0);
  double best = std::numeric_limits<double>::infinity();
  OptResult r;
  while (true) {
    const double v = expected_measure_serial(d, to_forecaster(T, c, g), m);
    r.leaves += std::size_t{1} << T;
    if (v < best) {
      best = v;
      best_c = c;
    }
    std::size_t i = n;
    while (i > 0 && ++c[i - 1] == g.values.size()) {
      c[i - 1] = 0;
      --i;
    }
    if (i == 0) break;
  }
  r.value = best;
  r.argmin = to_forecaster(T, best_c, g);
  return r;
}

CompressedSearchResult opt_compressed_upper(const OutcomeDistribution& d, const MeasureFn& m, const GridSpec& g,
                                            std::size_t max_sweeps) {
  validate(g);
  check_depth(d);
  const std::size_t T = d.depth();
  const std::size_t states = T * (T + 1) / 2;
  std::vector<std::size_t> choice(states, 0);

  auto build = [&]() {
    std::vector<double> p((std::size_t{1} << T) - 1);
    // Node i at depth t has ones count = popcount of its history bits.
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t first = (std::size_t{1} << t) - 1;
      for (std::size_t h = 0; h < (std::size_t{1} << t); ++h) {
        const auto ones = static_cast<std::size_t>(std::popcount(h));
        p[first + h] = g.values[choice[t * (t + 1) / 2 + ones]];
      }
    }
    return Forecaster::table(T, std::move(p));
  };

  CompressedSearchResult r;
  double best = expected_measure(d, build(), m);
  for (r.sweeps = 0; r.sweeps < max_sweeps;) {
    ++r.sweeps;
    bool improved = false;
    for (std::size_t s = 0; s < states; ++s) {
      const std::size_t keep = choice[s];
      std::size_t best_gi = keep;
      for (std::size_t gi = 0; gi < g.values.size(); ++gi) {
        if (gi == keep) continue;
        choice[s] = gi;
        const double v = expected_measure(d, build(), m);
        if (v < best) {
          best = v;
          best_gi = gi;
          improved = true;
        }
      }
      choice[s] = best_gi;
    }
    if (!improved) break;
  }
  r.upper_bound = best;
  r.argmin = build();
  return r;
}

TruthfulnessReport truthfulness_report(const OutcomeDistribution& d, const MeasureFn& m, const GridSpec& g) {
  TruthfulnessReport r;
  OptResult opt = opt_exact(d, m, g);
  r.err_truthful = expected_measure(d, truthful(d), m);
  r.opt_hat = opt.value;
  r.argmin = std::move(opt.argmin);
  if (r.opt_hat > 1e-12) {
    r.ratio = r.err_truthful / r.opt_hat;
  } else {
    r.gap_witnessed = r.err_truthful > 1e-12;
  }
  return r;
}

}  // namespace caliblab
