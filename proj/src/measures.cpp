#include "caliblab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "caliblab/errors.hpp"
#include "caliblab/lipschitz_lp.hpp"
#include "caliblab/parallel.hpp"

namespace caliblab {

std::string to_string(Mode m) { return m == Mode::exact ? "exact" : "monte_carlo"; }

namespace {

constexpr double kClampSlack = 1e-9;

// Clamps into [0, ceiling]; anything further out than kClampSlack is a bug.
double checked_clamp(const std::string& name, double v, double ceiling) {
  if (!std::isfinite(v) || v < -kClampSlack || v > ceiling + kClampSlack) {
    throw InternalError(name + " value " + std::to_string(v) + " outside [0, " + std::to_string(ceiling) + "]");
  }
  return std::clamp(v, 0.0, ceiling) + 0.0;  // + 0.0 maps -0.0 to 0.0
}

MeasureReport exact_report(std::string name, double v, const Transcript& t, double ceiling_factor = 1.0) {
  const double ceiling = ceiling_factor * static_cast<double>(t.size());
  MeasureReport r;
  r.value = checked_clamp(name, v, ceiling);
  r.name = std::move(name);
  r.mode = Mode::exact;
  return r;
}

double smce_of_profile(const BiasProfile& prof, ChainLPWorkspace& ws) {
  std::vector<double> values, weights;
  values.reserve(prof.size());
  weights.reserve(prof.size());
  for (const auto& l : prof.levels()) {
    values.push_back(l.value);
    weights.push_back(l.bias);
  }
  return ws.optimum(values, weights);
}

// Prediction order shared by every subset: a stable sort by value, so level
// biases accumulate in time order exactly as in bias_profile.
struct SubsetSmce {
  const Transcript& t;
  std::vector<std::size_t> order;

  explicit SubsetSmce(const Transcript& tr) : t(tr), order(tr.size()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto p = t.p();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  }

  template <class Keep>
  double operator()(Keep&& keep) const {
    thread_local ChainLPWorkspace ws;
    thread_local std::vector<double> values, weights;
    values.clear();
    weights.clear();
    const auto x = t.x();
    const auto p = t.p();
    for (std::size_t i : order) {
      if (!keep(i)) continue;
      if (values.empty() || values.back() != p[i]) {
        values.push_back(p[i]);
        weights.push_back(0.0);
      }
      weights.back() += static_cast<double>(x[i]) - p[i];
    }
    return ws.optimum(values, weights);
  }
};

void check_ssce_cap(std::size_t T) {
  if (T > caps().ssce) {
    throw CapacityError("ssce exact capped at T=" + std::to_string(caps().ssce) + " (got T=" + std::to_string(T) + ")");
  }
  if (T > 62) throw CapacityError("ssce exact cannot enumerate more than 2^62 subsets");
}

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

MeasureReport ece(const Transcript& t) {
  const BiasProfile prof = bias_profile(t);
  double s = 0.0;
  for (const auto& l : prof.levels()) s += std::fabs(l.bias);
  return exact_report("ece", s, t);
}

MeasureReport smce(const Transcript& t) {
  ChainLPWorkspace ws;
  return exact_report("smce", smce_of_profile(bias_profile(t), ws), t);
}

MeasureReport ssce_exact(const Transcript& t) {
  const std::size_t T = t.size();
  check_ssce_cap(T);
  const SubsetSmce eval(t);
  const std::size_t n = std::size_t{1} << T;
  const double total = blocked_sum(n, [&](std::size_t mask) {
    return eval([mask](std::size_t i) { return ((mask >> i) & 1U) != 0; });
  });
  return exact_report("ssce", total / static_cast<double>(n), t);
}

MeasureReport ssce_exact_serial(const Transcript& t) {
  const std::size_t T = t.size();
  check_ssce_cap(T);
  const std::size_t n = std::size_t{1} << T;
  double total = 0.0;
  Bits keep(T);
  for (std::size_t mask = 0; mask < n; ++mask) {
    for (std::size_t i = 0; i < T; ++i) keep[i] = static_cast<Bit>((mask >> i) & 1U);
    total += smce(t.restrict(keep)).value;
  }
  return exact_report("ssce", total / static_cast<double>(n), t);
}

namespace {

// Subset i keeps index j iff bit (j mod 64) of the (j / 64)-th draw of
// RngStream(base, i) is set.
template <class MapFn>
MeasureReport ssce_mc_impl(const Transcript& t, std::size_t n, RngStream& rng, MapFn&& map) {
  if (n == 0) throw ParameterError("ssce_mc: samples must be >= 1");
  const std::uint64_t base = rng.next_u64();
  const SubsetSmce eval(t);
  const std::size_t T = t.size();
  const std::size_t words = (T + 63) / 64;
  auto one = [&](std::size_t i) {
    RngStream s(base, i);
    thread_local std::vector<std::uint64_t> bits;
    bits.resize(words);
    for (auto& w : bits) w = s.next_u64();
    return eval([&](std::size_t j) { return ((bits[j / 64] >> (j % 64)) & 1U) != 0; });
  };
  const std::vector<double> values = map(n, one);
  const RunningStats st = stats_of(values);
  MeasureReport r;
  r.name = "ssce";
  r.mode = Mode::monte_carlo;
  r.value = checked_clamp("ssce", st.mean, static_cast<double>(T));
  r.std_error = st.std_error();
  r.samples = n;
  return r;
}

}  // namespace

MeasureReport ssce_mc(const Transcript& t, std::size_t n, RngStream& rng) {
  return ssce_mc_impl(t, n, rng, [](std::size_t k, auto& fn) { return parallel_map(k, fn); });
}

MeasureReport ssce_mc_serial(const Transcript& t, std::size_t n, RngStream& rng) {
  return ssce_mc_impl(t, n, rng, [](std::size_t k, auto& fn) {
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = fn(i);
    return out;
  });
}

MeasureReport caldist_exact(const Transcript& t) {
  const std::size_t T = t.size();
  if (T > caps().caldist) {
    throw CapacityError("caldist exact capped at T=" + std::to_string(caps().caldist));
  }
  if (T == 0) return exact_report("caldist", 0.0, t);
  const auto x = t.x();
  const auto p = t.p();

  // Restricted-growth string a: a[0] = 0, a[i] <= 1 + max(a[0..i)).
  // Level sets of any calibrated q form such a partition with q equal to the
  // part's mean outcome; parts sharing a mean merge without changing the cost.
  std::vector<std::size_t> a(T, 0), hi(T, 0);
  std::vector<double> ones(T), count(T);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::fill(ones.begin(), ones.end(), 0.0);
    std::fill(count.begin(), count.end(), 0.0);
    for (std::size_t i = 0; i < T; ++i) {
      ones[a[i]] += x[i];
      count[a[i]] += 1.0;
    }
    double cost = 0.0;
    for (std::size_t i = 0; i < T; ++i) cost += std::fabs(p[i] - ones[a[i]] / count[a[i]]);
    best = std::min(best, cost);

    // Next restricted-growth string; hi[i] = max(a[0..i)).
    std::size_t i = T - 1;
    while (i > 0 && a[i] == hi[i] + 1) --i;
    if (i == 0) break;
    ++a[i];
    for (std::size_t j = i + 1; j < T; ++j) {
      a[j] = 0;
      hi[j] = std::max(hi[j - 1], a[j - 1]);
    }
  }
  return exact_report("caldist", best, t);
}

CalDistBounds caldist_bounds(const Transcript& t) {
  const double sm = smce(t).value;
  CalDistBounds b;
  b.lower = 0.5 * sm;
  b.upper = ece(t).value;
  b.diagnostic = sm + static_cast<double>(bias_profile(t).size());
  return b;
}

MeasureReport intce(const Transcript& t) {
  const auto prof = bias_profile(t);
  const auto levels = prof.levels();
  const std::size_t m = levels.size();
  // best[j] = cheapest partition of the first j distinct values.
  std::vector<double> best(m + 1, 0.0);
  for (std::size_t j = 1; j <= m; ++j) {
    double b = std::numeric_limits<double>::infinity();
    double bias = 0.0;
    double count = 0.0;
    for (std::size_t i = j; i-- > 0;) {
      bias += levels[i].bias;
      count += static_cast<double>(levels[i].count);
      const double length = levels[j - 1].value - levels[i].value;
      b = std::min(b, best[i] + std::fabs(bias) + count * length);
    }
    best[j] = b;
  }
  return exact_report("intce", best[m], t);
}

MeasureReport kce_laplace(const Transcript& t) {
  const auto prof = bias_profile(t);
  const auto levels = prof.levels();
  double q = 0.0;
  for (const auto& a : levels) {
    for (const auto& b : levels) q += a.bias * b.bias * 0.5 * std::exp(-std::fabs(a.value - b.value));
  }
  return exact_report("kce", std::sqrt(std::max(0.0, q)), t);
}

double VShapedRule::score(Bit y, double beta) const {
  if (kind == Kind::sign_at_half) return y ? sgn(0.5 - beta) : sgn(beta - 0.5);
  const double k = kink;
  const double raw = y ? (1.0 - k) * (beta <= k ? 1.0 : 0.0) : k * (beta > k ? 1.0 : 0.0);
  const double span = std::max(k, 1.0 - k);
  return (2.0 * raw - span) / span;
}

namespace {

struct OutcomeCounts {
  // Per distinct prediction (sorted): outcome-0 and outcome-1 counts.
  std::vector<double> values;
  std::vector<double> zeros;
  std::vector<double> ones;
  double n0 = 0.0;
  double n1 = 0.0;
};

OutcomeCounts outcome_counts(const Transcript& t) {
  OutcomeCounts c;
  const BiasProfile prof = bias_profile(t);
  for (const auto& l : prof.levels()) {
    c.values.push_back(l.value);
    c.ones.push_back(static_cast<double>(l.ones));
    c.zeros.push_back(static_cast<double>(l.count - l.ones));
    c.n1 += static_cast<double>(l.ones);
    c.n0 += static_cast<double>(l.count - l.ones);
  }
  return c;
}

// The rule's cumulative loss at a fixed beta only depends on which side of the
// kink beta falls, so the hindsight minimum has a closed form.
double regret_from_counts(const OutcomeCounts& c, const VShapedRule& rule) {
  double incurred = 0.0;
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    incurred += c.zeros[i] * rule.score(0, c.values[i]) + c.ones[i] * rule.score(1, c.values[i]);
  }
  double best_fixed = 0.0;
  if (rule.kind == VShapedRule::Kind::sign_at_half) {
    best_fixed = -std::fabs(c.n1 - c.n0);
  } else {
    const double k = rule.kink;
    const double low = c.n0 * rule.score(0, 0.0) + c.n1 * rule.score(1, 0.0);  // beta <= k
    const double high = c.n0 * rule.score(0, 1.0) + c.n1 * rule.score(1, 1.0);  // beta > k
    best_fixed = (k < 1.0) ? std::min(low, high) : low;
  }
  return incurred - best_fixed;
}

}  // namespace

double vshaped_regret(const Transcript& t, const VShapedRule& rule) {
  return regret_from_counts(outcome_counts(t), rule);
}

MeasureReport ucal_vshaped(const Transcript& t, std::optional<std::vector<double>> kinks) {
  const OutcomeCounts c = outcome_counts(t);
  std::vector<double> ks;
  if (kinks) {
    for (double k : *kinks) {
      if (!(k > 0.0 && k < 1.0)) throw ParameterError("ucal kink must lie in (0, 1)");
      ks.push_back(k);
    }
  } else {
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      ks.push_back(c.values[i]);
      if (i + 1 < c.values.size()) ks.push_back(0.5 * (c.values[i] + c.values[i + 1]));
    }
    ks.push_back(0.5);
    std::erase_if(ks, [](double k) { return !(k > 0.0 && k < 1.0); });
  }
  double best = regret_from_counts(c, VShapedRule{VShapedRule::Kind::sign_at_half, 0.5});
  for (double k : ks) best = std::max(best, regret_from_counts(c, VShapedRule{VShapedRule::Kind::weighted_indicator, k}));
  // Rules are bounded in [-1, 1], so regret can reach 2T.
  return exact_report("ucal", std::max(best, 0.0), t, 2.0);
}

std::pair<double, double> msr_bounds(const Transcript& t) {
  if (t.size() == 0) return {0.0, 0.0};
  const double e = ece(t).value;
  return {e * e / static_cast<double>(t.size()), 2.0 * e};
}

// ---------------------------------------------------------------------------

double gamma_fn(double v) { return v < 1.0 ? v : std::sqrt(v); }

DiagnosticsReport diagnostics(const OutcomeDistribution& d, const Transcript& t, Interval interval) {
  if (!(interval.lo <= interval.hi)) throw ParameterError("diagnostics: interval lo > hi");
  const std::size_t T = t.size();
  if (T != d.depth()) {
    throw ParameterError("diagnostics: transcript length " + std::to_string(T) + " != distribution depth " +
                         std::to_string(d.depth()));
  }
  DiagnosticsReport r;
  r.interval = interval;
  r.var_path.assign(T + 1, 0.0);
  r.n_path.assign(T + 1, 0);
  const auto x = t.x();
  const auto p = t.p();
  for (std::size_t s = 0; s < T; ++s) {
    const double q = d.conditional(x.subspan(0, s));
    if ((x[s] == 1 && q == 0.0) || (x[s] == 0 && q == 1.0)) {
      throw InconsistencyError("diagnostics: outcome at step " + std::to_string(s + 1) +
                               " has zero probability under the distribution");
    }
    r.var_path[s + 1] = r.var_path[s] + (interval.contains(q) ? q * (1.0 - q) : 0.0);
    r.n_path[s + 1] = r.n_path[s] + (std::fabs(static_cast<double>(x[s]) - p[s]) >= 0.5 ? 1 : 0);
  }
  r.gamma_var = gamma_fn(r.var_path[T]);

  r.epochs.push_back(0);
  if (T > 0) {
    const std::size_t kmax = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(T)))) + 2;
    for (std::size_t k = 1; k <= kmax; ++k) {
      const std::size_t prev = r.epochs.back();
      const double threshold = std::ldexp(1.0, static_cast<int>(k) - 1);
      std::size_t found = 0;
      for (std::size_t s = prev + 1; s <= T; ++s) {
        if (r.var_path[s] - r.var_path[prev] >= threshold) {
          found = s;
          break;
        }
      }
      if (found == 0) break;
      r.epochs.push_back(found);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& measure_names() {
  static const std::vector<std::string> names = {"ece",   "smce", "ssce", "caldist",   "caldist_lower", "caldist_upper",
                                                 "intce", "kce",  "ucal", "msr_lower", "msr_upper"};
  return names;
}

bool is_measure(std::string_view name) {
  const auto& n = measure_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

MeasureReport evaluate(std::string_view name, const Transcript& t) {
  if (name == "ece") return ece(t);
  if (name == "smce") return smce(t);
  if (name == "ssce") return ssce_exact(t);
  if (name == "caldist") return caldist_exact(t);
  if (name == "caldist_lower") return exact_report("caldist_lower", caldist_bounds(t).lower, t);
  if (name == "caldist_upper") return exact_report("caldist_upper", caldist_bounds(t).upper, t);
  if (name == "intce") return intce(t);
  if (name == "kce") return kce_laplace(t);
  if (name == "ucal") return ucal_vshaped(t);
  if (name == "msr_lower") return exact_report("msr_lower", msr_bounds(t).first, t);
  if (name == "msr_upper") return exact_report("msr_upper", msr_bounds(t).second, t, 2.0);
  throw ParameterError("unknown measure '" + std::string(name) + "'");
}

MeasureFn measure_fn(std::string name) {
  if (!is_measure(name)) throw ParameterError("unknown measure '" + name + "'");
  return [name = std::move(name)](const Transcript& t) { return evaluate(name, t).value; };
}

}  // namespace caliblab
