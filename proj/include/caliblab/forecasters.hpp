#pragma once

#include <cstddef>
#include <vector>

#include "caliblab/core.hpp"

namespace caliblab {

// Predicts Pr[x_t = 1 | history] under d. Materialized trees become tables;
// product and hashed distributions become policies of horizon d.depth().
Forecaster truthful(const OutcomeDistribution& d);

// Predicts alpha at every step, any horizon.
Forecaster constant(double alpha);

// Blocks of three: 1/2 first; after a 1 predict 1/2 then 1, after a 0 predict
// 0 then 1/2. The horizon must be a multiple of 3.
Forecaster sidestep_blocks();

// 5/8 through the first half. In the second half, 5/8 until the bias on the
// 5/8 level set is within [-1, 1], then 1. The horizon must be even.
Forecaster ucal_strategic();

// Forecaster for product distributions with known pstar. A run of horizon T
// uses pstar[0..T), so T <= pstar.size().
Forecaster algorithm1(std::vector<double> pstar);

// Bookkeeping for one round of the product-distribution forecaster.
struct Algorithm1Round {
  enum class Type { type1, type2, type3, final_step };

  std::size_t index = 0;    // r, from 1
  std::size_t horizon = 0;  // T^(r), steps remaining at round start
  std::size_t half = 0;     // H^(r)
  double mu_first = 0.0;
  double mu_second = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  double beta = 0.0;  // only set for type2/type3 rounds that reach the second half
  bool has_beta = false;
  Type type = Type::type1;
  std::size_t start = 0;  // steps completed before the round
  std::size_t end = 0;    // steps completed after the round
  double delta_first = 0.0;  // bias after the first half (type2/type3)
  double delta = 0.0;        // bias at round end
};

struct Algorithm1Trace {
  Transcript transcript;
  std::vector<Algorithm1Round> rounds;
};

// Runs the product-distribution forecaster on x with full round bookkeeping.
Algorithm1Trace algorithm1_trace(const std::vector<double>& pstar, std::span<const Bit> x);

}  // namespace caliblab
