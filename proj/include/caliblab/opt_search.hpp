#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "caliblab/core.hpp"

namespace caliblab {

// Candidate prediction values: nonempty, strictly increasing, inside [0, 1].
struct GridSpec {
  std::vector<double> values;
};

void validate(const GridSpec& g);

struct OptResult {
  double value = 0.0;
  Forecaster argmin = Forecaster::table(0, {});  // table of depth d.depth()
  std::size_t leaves = 0;                       // measure evaluations performed
};

// Minimum of the expected measure over every grid-valued forecaster table of
// depth d.depth(). Subtrees below a node are independent once the node's
// prediction is fixed, so the minimum is computed by an expectimin recursion
// over (history, predictions so far); this visits 2^T |g|^T leaves instead of
// |g|^(2^T - 1) tables. Ties resolve to the lexicographically first table in
// heap order. Parallel over the nodes two levels below the root.
//
// Throws CapacityError when T exceeds caps().enumeration or 2^T |g|^T exceeds
// caps().search.
OptResult opt_exact(const OutcomeDistribution& d, const MeasureFn& m, const GridSpec& g);

// Reference: enumerates all |g|^(2^T - 1) tables in lexicographic heap order,
// evaluating each with expected_measure_serial. Capped at caps().search tables.
OptResult opt_exact_bruteforce(const OutcomeDistribution& d, const MeasureFn& m, const GridSpec& g);

// Upper bound on the grid OPT from forecasters whose prediction depends only
// on (t, number of ones so far), found by coordinate descent from the
// all-grid[0] forecaster. Never equal to opt_exact by construction; reported
// separately.
struct CompressedSearchResult {
  double upper_bound = 0.0;
  Forecaster argmin = Forecaster::table(0, {});
  std::size_t sweeps = 0;
};
CompressedSearchResult opt_compressed_upper(const OutcomeDistribution& d, const MeasureFn& m, const GridSpec& g,
                                            std::size_t max_sweeps = 20);

struct TruthfulnessReport {
  double err_truthful = 0.0;
  double opt_hat = 0.0;
  std::optional<double> ratio;  // empty when opt_hat <= 1e-12
  bool gap_witnessed = false;   // opt_hat <= 1e-12 while err_truthful > 1e-12
  Forecaster argmin = Forecaster::table(0, {});
};

// err_truthful uses the exact conditionals of d, which need not lie on g.
TruthfulnessReport truthfulness_report(const OutcomeDistribution& d, const MeasureFn& m, const GridSpec& g);

}  // namespace caliblab
