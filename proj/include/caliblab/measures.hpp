#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "caliblab/core.hpp"
#include "caliblab/rng.hpp"

namespace caliblab {

enum class Mode { exact, monte_carlo };

std::string to_string(Mode m);

struct MeasureReport {
  std::string name;
  double value = 0.0;
  Mode mode = Mode::exact;
  double std_error = 0.0;  // 0 iff exact
  std::size_t samples = 0;
};

// Sum over level sets of |bias|.
MeasureReport ece(const Transcript& t);

// sup over 1-Lipschitz f: [0,1] -> [-1,1] of sum_t f(p_t)(x_t - p_t).
MeasureReport smce(const Transcript& t);

// Average of smce over all 2^T subsets of the horizon. T <= caps().ssce.
// Subsets are evaluated in parallel; the sum is order-fixed, so the value is
// identical for every thread count.
MeasureReport ssce_exact(const Transcript& t);

// Definitional reference for ssce_exact: materializes every restricted
// transcript and calls smce on it, single-threaded.
MeasureReport ssce_exact_serial(const Transcript& t);

// Mean of smce over n random subsets (each index kept with probability 1/2).
// Draws one 64-bit base from `rng`; subset i comes from RngStream(base, i).
MeasureReport ssce_mc(const Transcript& t, std::size_t n, RngStream& rng);
MeasureReport ssce_mc_serial(const Transcript& t, std::size_t n, RngStream& rng);

// min over perfectly calibrated q of ||p - q||_1, by search over set
// partitions of the horizon (restricted-growth strings). T <= caps().caldist.
MeasureReport caldist_exact(const Transcript& t);

// Bounds usable at any horizon: lower = smce / 2, upper = ECE (moving every
// level set to its empirical frequency is calibrated and costs exactly ECE).
// `diagnostic` is smce + number of distinct predictions, reported unscaled.
struct CalDistBounds {
  double lower = 0.0;
  double upper = 0.0;
  double diagnostic = 0.0;
};
CalDistBounds caldist_bounds(const Transcript& t);

// Interval calibration error: exact infimum over interval partitions via an
// O(m^2) dynamic program over the sorted distinct predictions.
MeasureReport intce(const Transcript& t);

// RKHS norm of the bias functional for the kernel k(u, v) = exp(-|u - v|) / 2.
MeasureReport kce_laplace(const Transcript& t);

// Proper scoring rule with a single kink; both variants are bounded in [-1, 1].
struct VShapedRule {
  enum class Kind { weighted_indicator, sign_at_half };
  Kind kind = Kind::weighted_indicator;
  double kink = 0.5;

  // Weighted indicator: raw S(0,b) = k 1{b > k}, S(1,b) = (1-k) 1{b <= k},
  // rescaled affinely to span [-1, 1]. Sign at half: S(0,b) = sgn(b - 1/2),
  // S(1,b) = sgn(1/2 - b).
  double score(Bit y, double beta) const;
};

// Regret of `rule` against the best fixed prediction in hindsight.
double vshaped_regret(const Transcript& t, const VShapedRule& rule);

// Lower bound on U-calibration: max regret over the sign-at-half rule and the
// weighted-indicator rules at the given kinks (default: distinct predictions,
// midpoints between consecutive ones, and 1/2; kinks outside (0,1) dropped).
MeasureReport ucal_vshaped(const Transcript& t, std::optional<std::vector<double>> kinks = std::nullopt);

// Sandwich on maximum swap regret: T (ECE/T)^2 <= MSR <= 2 ECE.
std::pair<double, double> msr_bounds(const Transcript& t);

// ---------------------------------------------------------------------------
// Diagnostics.

// gamma(v) = v for v < 1, sqrt(v) otherwise.
double gamma_fn(double v);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct DiagnosticsReport {
  Interval interval;
  std::vector<double> var_path;     // Var_0 .. Var_T
  std::vector<std::size_t> n_path;  // N_0 .. N_T
  double gamma_var = 0.0;           // gamma(Var_T)
  std::vector<std::size_t> epochs;  // finite tau_0 = 0, tau_1, ...; later ones are infinite
};

// Realized variance along t.x under d (restricted to p* in I), the count of
// steps with |x_t - p_t| >= 1/2, and the doubling epochs
//   tau_k = min{t > tau_{k-1} : Var_t - Var_{tau_{k-1}} >= 2^{k-1}},
// for k up to ceil(log2 T) + 2. Throws InconsistencyError when t.x has zero
// probability under d.
DiagnosticsReport diagnostics(const OutcomeDistribution& d, const Transcript& t, Interval interval = {});

// ---------------------------------------------------------------------------
// Registry.

// Known names: ece, smce, ssce, caldist, caldist_lower, caldist_upper, intce,
// kce, ucal, msr_lower, msr_upper.
const std::vector<std::string>& measure_names();
bool is_measure(std::string_view name);
MeasureReport evaluate(std::string_view name, const Transcript& t);
MeasureFn measure_fn(std::string name);

}  // namespace caliblab
