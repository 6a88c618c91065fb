#pragma once

#include <span>
#include <vector>

namespace caliblab {

// maximize   sum_i weights[i] * f_i
// subject to |f_i| <= 1 and |f_{i+1} - f_i| <= values[i+1] - values[i]
//
// Values are the support points v_1 < ... < v_m in [0, 1] of a function
// f: [0,1] -> [-1,1] that is 1-Lipschitz. Adjacent constraints imply all
// pairwise ones by the triangle inequality, so the chain is lossless.
struct ChainLP {
  std::vector<double> values;
  std::vector<double> weights;
};

// Throws ParameterError unless values are strictly increasing in [0, 1] and
// the two vectors have equal length.
void validate(const ChainLP& lp);

struct LipschitzWitness {
  std::vector<double> f_values;
};

struct ChainLPSolution {
  double optimum = 0.0;
  LipschitzWitness witness;
};

// Exact optimum and an optimal witness. The witness satisfies every box and
// pairwise Lipschitz constraint as evaluated in double precision.
ChainLPSolution solve_chain_lp(const ChainLP& lp);

// Reusable buffers for the hot path (no validation, optimum only).
class ChainLPWorkspace {
 public:
  double optimum(std::span<const double> values, std::span<const double> weights);

 private:
  struct Point {
    double x;
    double y;
  };
  friend ChainLPSolution solve_chain_lp(const ChainLP& lp);

  // Runs the dynamic program; records each stage's argmax when `argmax` is
  // non-null.
  double run(std::span<const double> values, std::span<const double> weights,
             std::vector<double>* argmax);

  std::vector<Point> cur_;
  std::vector<Point> next_;
};

// Maximum of the objective over the piecewise-constant family F_delta: values
// on the delta grid of [-1, 1], adjacent grid steps of at most delta,
// constant on [k delta, (k+1) delta). 1/delta must be a positive integer.
//
// F_delta is a 2 delta cover of the 1-Lipschitz family, and each member is
// within delta of a 1-Lipschitz function, so
//   solve - 2 delta sum|w|  <=  grid_supremum  <=  solve + delta sum|w|.
double grid_supremum(const ChainLP& lp, double delta);

}  // namespace caliblab
