#include "caliblab/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "caliblab/errors.hpp"
#include "caliblab/parallel.hpp"

namespace caliblab {

Caps& caps() {
  static Caps c;
  return c;
}

Caps parse_caps(const std::string& spec, Caps base) {
  auto to_size = [&](const std::string& v) -> std::size_t {
    std::size_t pos = 0;
    unsigned long long n = 0;
    try {
      n = std::stoull(v, &pos);
    } catch (const std::exception&) {
      throw ParameterError("cap override: '" + v + "' is not an integer");
    }
    if (pos != v.size()) throw ParameterError("cap override: '" + v + "' is not an integer");
    return static_cast<std::size_t>(n);
  };
  if (spec.empty()) return base;
  if (spec.find('=') == std::string::npos) {
    base.enumeration = base.ssce = to_size(spec);
    return base;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParameterError("cap override: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "enumeration") {
      base.enumeration = to_size(val);
    } else if (key == "ssce") {
      base.ssce = to_size(val);
    } else if (key == "caldist") {
      base.caldist = to_size(val);
    } else if (key == "search") {
      try {
        base.search = std::stod(val);
      } catch (const std::exception&) {
        throw ParameterError("cap override: bad search cap '" + val + "'");
      }
    } else {
      throw ParameterError("cap override: unknown key '" + key + "'");
    }
  }
  return base;
}

void validate_outcomes(std::span<const Bit> x) {
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (x[t] > 1) throw ParameterError("outcome x[" + std::to_string(t) + "] is not 0 or 1");
  }
}

void validate_predictions(std::span<const double> p) {
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!(p[t] >= 0.0 && p[t] <= 1.0)) {
      throw ParameterError("prediction p[" + std::to_string(t) + "] is outside [0, 1]");
    }
  }
}

Transcript::Transcript(Bits x, std::vector<double> p) : x_(std::move(x)), p_(std::move(p)) {
  if (x_.size() != p_.size()) {
    throw ParameterError("transcript length mismatch: len(x) = " + std::to_string(x_.size()) +
                         ", len(p) = " + std::to_string(p_.size()));
  }
  validate_outcomes(x_);
  validate_predictions(p_);
}

Transcript Transcript::restrict(std::span<const Bit> keep) const {
  if (keep.size() != size()) throw ParameterError("restrict: mask length mismatch");
  Transcript out;
  for (std::size_t t = 0; t < size(); ++t) {
    if (keep[t]) {
      out.x_.push_back(x_[t]);
      out.p_.push_back(p_[t]);
    }
  }
  return out;
}

double BiasProfile::bias_at(double value) const {
  auto it = std::lower_bound(levels_.begin(), levels_.end(), value,
                             [](const LevelSet& l, double v) { return l.value < v; });
  return (it != levels_.end() && it->value == value) ? it->bias : 0.0;
}

double BiasProfile::total_bias() const {
  double s = 0.0;
  for (const auto& l : levels_) s += l.bias;
  return s;
}

BiasProfile bias_profile(std::span<const Bit> x, std::span<const double> p) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<LevelSet> levels;
  for (std::size_t t : order) {
    if (levels.empty() || levels.back().value != p[t]) levels.push_back(LevelSet{p[t], 0.0, 0, 0});
    auto& l = levels.back();
    l.bias += static_cast<double>(x[t]) - p[t];
    ++l.count;
    l.ones += x[t];
  }
  return BiasProfile(std::move(levels));
}

BiasProfile bias_profile(const Transcript& t) { return bias_profile(t.x(), t.p()); }

// ---------------------------------------------------------------------------

std::uint64_t heap_index(std::span<const Bit> history) {
  std::uint64_t i = 0;
  for (Bit b : history) i = 2 * i + 1 + b;
  return i;
}

namespace {

constexpr std::size_t kMaxMaterializedDepth = 30;
constexpr std::size_t kMaxHashedDepth = 64;

std::size_t tree_size(std::size_t depth) { return (std::size_t{1} << depth) - 1; }

void check_unit_interval(std::span<const double> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      throw ParameterError(std::string(what) + "[" + std::to_string(i) + "] is outside [0, 1]");
    }
  }
}

double hashed_conditional(const HashedTreeDist& h, std::span<const Bit> history) {
  std::uint64_t packed = 0;
  for (std::size_t i = 0; i < history.size(); ++i) packed |= std::uint64_t{history[i]} << i;
  std::uint64_t k = splitmix64(h.seed);
  k = splitmix64(k ^ history.size());
  k = splitmix64(k ^ packed);
  const double u = static_cast<double>(k >> 11) * 0x1.0p-53;
  if (h.grid.empty()) return u;
  const auto i = std::min(h.grid.size() - 1, static_cast<std::size_t>(u * static_cast<double>(h.grid.size())));
  return h.grid[i];
}

}  // namespace

OutcomeDistribution OutcomeDistribution::product(std::vector<double> pstar) {
  check_unit_interval(pstar, "pstar");
  return OutcomeDistribution(ProductDist{std::move(pstar)});
}

OutcomeDistribution OutcomeDistribution::tree(std::size_t depth, std::vector<double> conditionals) {
  if (depth > kMaxMaterializedDepth) {
    throw CapacityError("tree depth " + std::to_string(depth) + " exceeds " +
                        std::to_string(kMaxMaterializedDepth));
  }
  if (conditionals.size() != tree_size(depth)) {
    throw ParameterError("tree of depth " + std::to_string(depth) + " needs " +
                         std::to_string(tree_size(depth)) + " conditionals, got " +
                         std::to_string(conditionals.size()));
  }
  check_unit_interval(conditionals, "conditionals");
  return OutcomeDistribution(TreeDist{depth, std::move(conditionals)});
}

OutcomeDistribution OutcomeDistribution::hashed_tree(std::size_t depth, std::uint64_t seed,
                                                     std::vector<double> grid) {
  if (depth > kMaxHashedDepth) throw ParameterError("hashed tree depth must be <= 64");
  check_unit_interval(grid, "grid");
  return OutcomeDistribution(HashedTreeDist{depth, seed, std::move(grid)});
}

std::size_t OutcomeDistribution::depth() const {
  return std::visit(
      [](const auto& d) -> std::size_t {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, ProductDist>) {
          return d.pstar.size();
        } else {
          return d.depth;
        }
      },
      impl_);
}

double OutcomeDistribution::conditional(std::span<const Bit> history) const {
  if (history.size() >= depth()) {
    throw ParameterError("history of length " + std::to_string(history.size()) +
                         " is out of range for depth " + std::to_string(depth()));
  }
  if (const auto* p = as_product()) return p->pstar[history.size()];
  if (const auto* t = as_tree()) return t->conditionals[heap_index(history)];
  return hashed_conditional(*as_hashed(), history);
}

std::vector<WeightedOutcome> enumerate_outcomes(const OutcomeDistribution& d) {
  const std::size_t T = d.depth();
  if (T > caps().enumeration) {
    throw CapacityError("enumeration depth " + std::to_string(T) + " exceeds cap " +
                        std::to_string(caps().enumeration));
  }
  const std::size_t n = std::size_t{1} << T;
  std::vector<WeightedOutcome> out(n);
  for (std::size_t mask = 0; mask < n; ++mask) {
    Bits x(T);
    double prob = 1.0;
    for (std::size_t t = 0; t < T; ++t) {
      x[t] = static_cast<Bit>((mask >> (T - 1 - t)) & 1U);
      const double q = d.conditional(std::span<const Bit>(x.data(), t));
      prob *= x[t] ? q : 1.0 - q;
    }
    out[mask] = WeightedOutcome{std::move(x), prob};
  }
  return out;
}

Bits sample(const OutcomeDistribution& d, RngStream& rng) {
  const std::size_t T = d.depth();
  Bits x;
  x.reserve(T);
  if (const auto* p = d.as_product()) {
    for (double q : p->pstar) x.push_back(rng.bernoulli(q));
    return x;
  }
  for (std::size_t t = 0; t < T; ++t) x.push_back(rng.bernoulli(d.conditional(x)));
  return x;
}

// ---------------------------------------------------------------------------

Forecaster Forecaster::table(std::size_t depth, std::vector<double> predictions) {
  if (depth > kMaxMaterializedDepth) throw CapacityError("forecaster table depth too large");
  if (predictions.size() != tree_size(depth)) {
    throw ParameterError("table of depth " + std::to_string(depth) + " needs " +
                         std::to_string(tree_size(depth)) + " predictions, got " +
                         std::to_string(predictions.size()));
  }
  check_unit_interval(predictions, "predictions");
  return Forecaster(ForecastTable{depth, std::move(predictions)});
}

Forecaster Forecaster::policy(std::shared_ptr<const Policy> rule) {
  if (!rule) throw ParameterError("null policy");
  return Forecaster(std::move(rule));
}

const Policy* Forecaster::as_policy() const {
  const auto* p = std::get_if<std::shared_ptr<const Policy>>(&impl_);
  return p ? p->get() : nullptr;
}

std::optional<std::size_t> Forecaster::depth() const {
  if (is_table()) return as_table().depth;
  return as_policy()->max_horizon();
}

std::string Forecaster::name() const { return is_table() ? "table" : as_policy()->name(); }

Transcript run_forecaster(const Forecaster& a, std::span<const Bit> x) {
  const std::size_t T = x.size();
  if (auto depth = a.depth(); depth && *depth < T) {
    throw ParameterError("depth mismatch: forecaster depth " + std::to_string(*depth) +
                         " < outcome length " + std::to_string(T));
  }
  std::vector<double> p(T);
  if (a.is_table()) {
    const auto& table = a.as_table().predictions;
    std::uint64_t node = 0;
    for (std::size_t t = 0; t < T; ++t) {
      p[t] = table[node];
      node = 2 * node + 1 + x[t];
    }
  } else {
    auto run = a.as_policy()->start(T);
    for (std::size_t t = 0; t < T; ++t) {
      p[t] = run->predict();
      if (!(p[t] >= 0.0 && p[t] <= 1.0)) {
        throw InternalError(a.name() + " predicted a value outside [0, 1]");
      }
      run->observe(x[t]);
    }
  }
  return Transcript(Bits(x.begin(), x.end()), std::move(p));
}

Forecaster to_table(const Forecaster& a, std::size_t depth) {
  if (a.is_table() && a.as_table().depth == depth) return a;
  if (depth > kMaxMaterializedDepth) throw CapacityError("table depth too large");
  if (auto d = a.depth(); d && *d < depth) {
    throw ParameterError("depth mismatch: forecaster depth " + std::to_string(*d) + " < " +
                         std::to_string(depth));
  }
  std::vector<double> predictions(tree_size(depth));
  for (std::size_t level = 0; level < depth; ++level) {
    const std::size_t first = tree_size(level);
    const std::size_t width = std::size_t{1} << level;
    for (std::size_t offset = 0; offset < width; ++offset) {
      Bits h(level);
      for (std::size_t i = 0; i < level; ++i) h[i] = static_cast<Bit>((offset >> (level - 1 - i)) & 1U);
      double value = 0.0;
      if (a.is_table()) {
        value = a.as_table().predictions[heap_index(h)];
      } else {
        auto run = a.as_policy()->start(depth);
        for (Bit b : h) {
          run->predict();
          run->observe(b);
        }
        value = run->predict();
      }
      predictions[first + offset] = value;
    }
  }
  return Forecaster::table(depth, std::move(predictions));
}

// ---------------------------------------------------------------------------

double expected_measure(const OutcomeDistribution& d, const Forecaster& a, const MeasureFn& m) {
  auto outcomes = enumerate_outcomes(d);
  std::erase_if(outcomes, [](const WeightedOutcome& o) { return o.probability == 0.0; });
  return blocked_sum(outcomes.size(), [&](std::size_t i) {
    return outcomes[i].probability * m(run_forecaster(a, outcomes[i].x));
  });
}

double expected_measure_serial(const OutcomeDistribution& d, const Forecaster& a,
                               const MeasureFn& m) {
  double total = 0.0;
  for (const auto& o : enumerate_outcomes(d)) {
    if (o.probability == 0.0) continue;
    total += o.probability * m(run_forecaster(a, o.x));
  }
  return total;
}

}  // namespace caliblab
