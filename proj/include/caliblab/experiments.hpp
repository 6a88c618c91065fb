#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "caliblab/core.hpp"
#include "caliblab/opt_search.hpp"
#include "caliblab/parallel.hpp"
#include "caliblab/rng.hpp"

namespace caliblab {

// ---------------------------------------------------------------------------
// Distribution families.

// eps_k = k / (8 (T/3 + 1)) for k = 1..T/3.
std::vector<double> default_triple_block_eps(std::size_t T);

// Blocks (1/2 + eps_k, 0, 1). With require_distinct, repeated eps values are
// rejected. Omitting eps uses default_triple_block_eps.
OutcomeDistribution gen_triple_block(std::size_t T, std::optional<std::vector<double>> eps = std::nullopt,
                                     bool require_distinct = false);

// 1/2 for the first T/2 steps, then 1.
OutcomeDistribution gen_halfhalf(std::size_t T);

// Every conditional uniform on [0, 1), or uniform over the grid values.
OutcomeDistribution gen_random_tree(std::size_t T, RngStream& rng, const std::optional<GridSpec>& grid = std::nullopt);

// x uniform; each p_t uniform on {0, 0.1, ..., 1} or on [0, 1] with equal odds,
// so repeated prediction values are common.
Transcript random_transcript(std::size_t T, RngStream& rng);

// ---------------------------------------------------------------------------
// Monte Carlo.

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  RunningStats stats;
  std::vector<double> values;  // per replication, in replication order
};

// Replication i samples x from RngStream(base, i), base = rng.next_u64().
McEstimate mc_expected_measure(const OutcomeDistribution& d, const Forecaster& a, const MeasureFn& m,
                               std::size_t reps, RngStream& rng);

// E[SSCE] with the inner subset average also estimated: each replication
// samples x and then `inner` subsets from the same stream. The reported
// stderr is outer stderr + mean inner stderr / sqrt(reps).
McEstimate mc_expected_ssce(const OutcomeDistribution& d, const Forecaster& a, std::size_t reps,
                            std::size_t inner, RngStream& rng);

// E[gamma(Var_T)] with Var_T the realized sum of q (1 - q) over the
// conditionals along x, by exhaustive enumeration.
double expected_gamma_var(const OutcomeDistribution& d);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Named experiments.

struct ExperimentParams {
  std::size_t T = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::string family;                // gap experiments: triple_block, half_blocks, halfhalf
  std::string measure;               // gap experiments
  std::vector<std::size_t> sweep;    // alg1_scaling horizons
  std::size_t inner = 1000;          // subsets per replication for Monte Carlo SSCE
  std::size_t trees = 50;            // sandwich
  std::vector<double> grid;          // sandwich
  std::size_t pilot = 0;             // ssce_vs_smce pilot transcripts
};

struct ArmReport {
  std::string arm;
  std::size_t T = 0;
  RunningStats stats;
  double std_error = 0.0;
};

struct CsvRow {
  std::size_t rep = 0;
  std::string arm;
  std::size_t T = 0;
  double value = 0.0;
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  std::string name;
  ExperimentParams params;
  std::vector<ArmReport> arms;
  std::map<std::string, double> derived;
  std::vector<CsvRow> rows;
};

// Names: gap_ece, gap_msr, gap_smce, gap_ucal, gap (uses params.family and
// params.measure), sandwich, alg1_scaling, ssce_vs_smce. Missing parameters
// take per-experiment defaults.
ExperimentReport run_named_experiment(const std::string& name, ExperimentParams params);

const std::vector<std::string>& experiment_names();

// Columns rep,arm,T,value,seed; 17 significant digits, '.' decimal.
void write_csv(const ExperimentReport& r, std::ostream& out);
std::string format_double(double v);

}  // namespace caliblab
