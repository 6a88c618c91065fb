#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "caliblab/rng.hpp"

namespace caliblab {

using Bit = std::uint8_t;
using Bits = std::vector<Bit>;

// ---------------------------------------------------------------------------
// Capacity limits for exhaustive computations.

struct Caps {
  std::size_t enumeration = 16;  // depth for enumerate_outcomes / expected_measure
  std::size_t ssce = 16;         // horizon for exact SSCE subset enumeration
  std::size_t caldist = 10;      // horizon for exact distance from calibration
  double search = 1e8;           // leaf evaluations in opt_exact
};

Caps& caps();

// Parses "enumeration=20,ssce=18,caldist=11,search=1e9"; a bare integer sets
// enumeration and ssce together. Unknown keys throw ParameterError.
Caps parse_caps(const std::string& spec, Caps base = {});

// ---------------------------------------------------------------------------
// Sequences.

void validate_outcomes(std::span<const Bit> x);
void validate_predictions(std::span<const double> p);

// Outcomes x paired with predictions p, len(x) == len(p).
class Transcript {
 public:
  Transcript() = default;
  Transcript(Bits x, std::vector<double> p);

  std::span<const Bit> x() const { return x_; }
  std::span<const double> p() const { return p_; }
  std::size_t size() const { return x_.size(); }

  // Restriction to the indices whose bit is set in `keep` (len(keep) == size()).
  Transcript restrict(std::span<const Bit> keep) const;

  friend bool operator==(const Transcript&, const Transcript&) = default;

 private:
  Bits x_;
  std::vector<double> p_;
};

// Steps that predicted exactly `value`.
struct LevelSet {
  double value = 0.0;
  double bias = 0.0;  // sum of (x_t - p_t) over the level set, in time order
  std::size_t count = 0;
  std::size_t ones = 0;
};

// Level sets sorted by value. Grouping is by exact equality of predictions.
class BiasProfile {
 public:
  BiasProfile() = default;
  explicit BiasProfile(std::vector<LevelSet> levels) : levels_(std::move(levels)) {}

  std::span<const LevelSet> levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  bool empty() const { return levels_.empty(); }

  // Bias at `value`, 0 if never predicted.
  double bias_at(double value) const;
  double total_bias() const;

 private:
  std::vector<LevelSet> levels_;
};

BiasProfile bias_profile(const Transcript& t);
BiasProfile bias_profile(std::span<const Bit> x, std::span<const double> p);

// ---------------------------------------------------------------------------
// Outcome distributions.

// Heap index of a history: root 0, next bit b moves i -> 2i + 1 + b.
std::uint64_t heap_index(std::span<const Bit> history);

struct ProductDist {
  std::vector<double> pstar;
};

struct TreeDist {
  std::size_t depth = 0;
  std::vector<double> conditionals;  // 2^depth - 1 entries in heap order
};

// Tree whose conditionals are a pseudo-random function of (seed, history),
// so depths far beyond what can be materialized are usable. With a grid,
// conditionals are drawn uniformly from it; otherwise uniformly from [0, 1).
struct HashedTreeDist {
  std::size_t depth = 0;
  std::uint64_t seed = 0;
  std::vector<double> grid;
};

class OutcomeDistribution {
 public:
  static OutcomeDistribution product(std::vector<double> pstar);
  static OutcomeDistribution tree(std::size_t depth, std::vector<double> conditionals);
  static OutcomeDistribution hashed_tree(std::size_t depth, std::uint64_t seed,
                                         std::vector<double> grid = {});

  std::size_t depth() const;

  // Pr[x_t = 1 | x_{1:t-1} = history] for t = len(history) + 1.
  double conditional(std::span<const Bit> history) const;

  const ProductDist* as_product() const { return std::get_if<ProductDist>(&impl_); }
  const TreeDist* as_tree() const { return std::get_if<TreeDist>(&impl_); }
  const HashedTreeDist* as_hashed() const { return std::get_if<HashedTreeDist>(&impl_); }

 private:
  explicit OutcomeDistribution(std::variant<ProductDist, TreeDist, HashedTreeDist> impl)
      : impl_(std::move(impl)) {}

  std::variant<ProductDist, TreeDist, HashedTreeDist> impl_;
};

struct WeightedOutcome {
  Bits x;
  double probability = 0.0;
};

// All 2^T sequences in lexicographic order (x_1 most significant).
std::vector<WeightedOutcome> enumerate_outcomes(const OutcomeDistribution& d);

Bits sample(const OutcomeDistribution& d, RngStream& rng);

// ---------------------------------------------------------------------------
// Forecasters.

// One run of a stateful prediction rule. predict() is called once per step,
// followed by observe() with the revealed bit.
class PolicyRun {
 public:
  virtual ~PolicyRun() = default;
  virtual double predict() = 0;
  virtual void observe(Bit x) = 0;
};

// Deterministic rule mapping a history to a prediction.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  // Largest horizon the rule supports, if bounded.
  virtual std::optional<std::size_t> max_horizon() const { return std::nullopt; }
  // Throws ParameterError when the rule cannot run for `horizon` steps.
  virtual std::unique_ptr<PolicyRun> start(std::size_t horizon) const = 0;
};

struct ForecastTable {
  std::size_t depth = 0;
  std::vector<double> predictions;  // 2^depth - 1 entries in heap order
};

class Forecaster {
 public:
  static Forecaster table(std::size_t depth, std::vector<double> predictions);
  static Forecaster policy(std::shared_ptr<const Policy> rule);

  bool is_table() const { return std::holds_alternative<ForecastTable>(impl_); }
  const ForecastTable& as_table() const { return std::get<ForecastTable>(impl_); }
  const Policy* as_policy() const;

  std::optional<std::size_t> depth() const;
  std::string name() const;

 private:
  explicit Forecaster(std::variant<ForecastTable, std::shared_ptr<const Policy>> impl)
      : impl_(std::move(impl)) {}

  std::variant<ForecastTable, std::shared_ptr<const Policy>> impl_;
};

Transcript run_forecaster(const Forecaster& a, std::span<const Bit> x);

// Table form of `a` at the given depth (replays every history).
Forecaster to_table(const Forecaster& a, std::size_t depth);

// ---------------------------------------------------------------------------
// Exact expectation.

using MeasureFn = std::function<double(const Transcript&)>;

// Sum over all outcomes of probability * m(transcript); zero-probability
// outcomes are skipped. Parallel over outcomes with an order-fixed reduction.
double expected_measure(const OutcomeDistribution& d, const Forecaster& a, const MeasureFn& m);

// Single-threaded reference for expected_measure.
double expected_measure_serial(const OutcomeDistribution& d, const Forecaster& a,
                               const MeasureFn& m);

}  // namespace caliblab
