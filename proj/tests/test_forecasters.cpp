#include <doctest.h>

#include <cmath>
#include <set>

#include "caliblab/errors.hpp"
#include "caliblab/experiments.hpp"
#include "caliblab/forecasters.hpp"
#include "caliblab/measures.hpp"
#include "test_helpers.hpp"

using namespace caliblab;
using testing_support::preds;

namespace {

std::size_t ceil_log2(std::size_t T) {
  std::size_t k = 0;
  while ((std::size_t{1} << k) < T) ++k;
  return k;
}

}  // namespace

TEST_SUITE("forecasters") {
  TEST_CASE("truthful examples") {
    const std::vector<double> pstar{0.1, 0.6, 0.3};
    const Forecaster prod = to_table(truthful(OutcomeDistribution::product(pstar)), 3);
    const auto& preds3 = prod.as_table().predictions;
    CHECK(preds3[0] == 0.1);
    for (std::size_t i = 1; i < 3; ++i) CHECK(preds3[i] == 0.6);
    for (std::size_t i = 3; i < 7; ++i) CHECK(preds3[i] == 0.3);

    const Forecaster tree = truthful(OutcomeDistribution::tree(2, {0.5, 0.0, 1.0}));
    REQUIRE(tree.is_table());
    CHECK(tree.as_table().predictions == std::vector<double>{0.5, 0.0, 1.0});

    const auto det = OutcomeDistribution::tree(3, {1, 0, 1, 0, 0, 1, 0});
    const Forecaster a = truthful(det);
    for (const auto& o : enumerate_outcomes(det)) {
      if (o.probability == 0.0) continue;
      const Transcript t = run_forecaster(a, o.x);
      CHECK(std::vector<double>(t.x().begin(), t.x().end()) == preds(t));
      for (const auto& name : {"ece", "smce", "ssce", "intce", "kce"}) CHECK(evaluate(name, t).value == 0.0);
    }
  }

  TEST_CASE("truthful reproduces conditionals at every node") {
    RngStream rng(301, 0);
    for (int rep = 0; rep < 20; ++rep) {
      const std::size_t T = 1 + rng.index(8);
      const auto d = testing_support::random_tree(T, rng);
      const Forecaster a = truthful(d);
      for (const auto& o : enumerate_outcomes(d)) {
        const Transcript t = run_forecaster(a, o.x);
        for (std::size_t s = 0; s < T; ++s) {
          CHECK(t.p()[s] == d.conditional(std::span<const Bit>(o.x).first(s)));
        }
      }
    }
  }

  TEST_CASE("truthful policy horizon is bounded by the distribution") {
    const Forecaster a = truthful(OutcomeDistribution::product({0.5, 0.5}));
    CHECK_THROWS_AS(run_forecaster(a, Bits{1, 1, 1}), ParameterError);
  }

  TEST_CASE("constant") {
    const Transcript t = run_forecaster(constant(0.0), Bits{1, 1});
    CHECK(preds(t) == std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(constant(1.5), ParameterError);
  }

  TEST_CASE("constant on Bernoulli outcomes: SSCE linear when mismatched") {
    // Exact expectations at small T; the mismatched case grows about
    // (alpha - beta) / 2 per step, the matched case much slower.
    const auto mf = measure_fn("ssce");
    double prev_gap = 0.0;
    for (std::size_t T : {4, 6, 8}) {
      const auto d = OutcomeDistribution::product(std::vector<double>(T, 0.8));
      const double off = expected_measure(d, constant(0.2), mf);
      const double on = expected_measure(d, constant(0.8), mf);
      CHECK(off >= (0.8 - 0.2) / 2.0 * static_cast<double>(T) - 1e-9);
      CHECK(on < off);
      CHECK(off - on > prev_gap);
      prev_gap = off - on;
    }
  }

  TEST_CASE("sidestep examples") {
    CHECK(preds(run_forecaster(sidestep_blocks(), Bits{1, 0, 1})) == std::vector<double>{0.5, 0.5, 1.0});
    CHECK(preds(run_forecaster(sidestep_blocks(), Bits{0, 0, 1})) == std::vector<double>{0.5, 0.0, 0.5});
    CHECK_THROWS_AS(run_forecaster(sidestep_blocks(), Bits{1, 0}), ParameterError);
  }

  TEST_CASE("sidestep is perfectly calibrated on every triple-block realization") {
    for (std::size_t T : {3, 6, 9, 12}) {
      const auto d = gen_triple_block(T, std::vector<double>(T / 3, 0.0));
      std::size_t support = 0;
      for (const auto& o : enumerate_outcomes(d)) {
        if (o.probability == 0.0) continue;
        ++support;
        const Transcript t = run_forecaster(sidestep_blocks(), o.x);
        for (const auto& name : {"ece", "smce", "intce", "kce"}) CHECK(evaluate(name, t).value == 0.0);
      }
      CHECK(support == (std::size_t{1} << (T / 3)));
    }
  }

  TEST_CASE("ucal strategic") {
    CHECK_THROWS_AS(run_forecaster(ucal_strategic(), Bits{1, 0, 1}), ParameterError);
    const Transcript a = run_forecaster(ucal_strategic(), Bits{0, 1, 1, 0, 1, 1, 1, 1});
    // Bias after the first half: -5/8 + 3/8 + 3/8 - 5/8 = -1/2, so 1 from step 5.
    CHECK(preds(a) == std::vector<double>{0.625, 0.625, 0.625, 0.625, 1, 1, 1, 1});
    const Transcript b = run_forecaster(ucal_strategic(), Bits{0, 0, 0, 0, 1, 1, 1, 1});
    // Bias -2.5 after the first half; each 5/8 step on a 1 adds 3/8.
    CHECK(preds(b) == std::vector<double>{0.625, 0.625, 0.625, 0.625, 0.625, 0.625, 0.625, 0.625});

    RngStream rng(302, 0);
    const auto d = gen_halfhalf(200);
    std::size_t good = 0;
    for (int rep = 0; rep < 200; ++rep) {
      const Transcript t = run_forecaster(ucal_strategic(), sample(d, rng));
      const std::set<double> distinct(t.p().begin(), t.p().end());
      CHECK(distinct.size() <= 2);
      if (std::fabs(bias_profile(t).bias_at(0.625)) <= 1.0) {
        ++good;
        CHECK(ucal_vshaped(t).value <= 4.0 + 1e-9);
      }
    }
    CHECK(good >= 190);
  }

  TEST_CASE("algorithm1 matches its trace and respects round structure") {
    for (std::size_t T : {1, 2, 7, 48, 200, 1000}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RngStream rng(303, seed * 100 + T);
        std::vector<double> pstar(T);
        const bool constant_half = seed % 2 == 0;
        for (double& v : pstar) v = constant_half ? 0.5 : rng.uniform();
        const Bits x = sample(OutcomeDistribution::product(pstar), rng);
        const auto trace = algorithm1_trace(pstar, x);
        CHECK(trace.transcript == run_forecaster(algorithm1(pstar), x));

        const auto& p = trace.transcript.p();
        for (double v : p) CHECK((v >= 0.0 && v <= 1.0));
        const std::set<double> distinct(p.begin(), p.end());
        CHECK(distinct.size() <= 2 * ceil_log2(T) + 2);

        std::size_t at = 0;
        for (const auto& r : trace.rounds) {
          CHECK(r.start == at);
          CHECK(r.end > r.start);
          CHECK(r.end <= T);
          std::set<double> in_round(p.begin() + static_cast<long>(r.start), p.begin() + static_cast<long>(r.end));
          CHECK(in_round.size() <= 2);
          at = r.end;
        }
        CHECK(at == T);
      }
    }
  }

  TEST_CASE("algorithm1 on a prefix of pstar") {
    const std::vector<double> pstar(10, 0.5);
    const Transcript t = run_forecaster(algorithm1(pstar), Bits{1, 0, 1, 1});
    CHECK(t.size() == 4);
    CHECK_THROWS_AS(run_forecaster(algorithm1(pstar), Bits(11, 1)), ParameterError);
  }
}
