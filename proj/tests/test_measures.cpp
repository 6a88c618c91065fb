#include <doctest.h>

#include <cmath>

#include "caliblab/errors.hpp"
#include "caliblab/measures.hpp"
#include "caliblab/parallel.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace caliblab;
using testing_support::ints;
using testing_support::preds;

namespace {

Transcript tr(Bits x, std::vector<double> p) { return Transcript(std::move(x), std::move(p)); }

Bits random_bits(std::size_t T, RngStream& rng) {
  Bits x(T);
  for (auto& b : x) b = rng.bernoulli(0.5);
  return x;
}

std::vector<double> as_doubles(const Bits& x) { return std::vector<double>(x.begin(), x.end()); }

}  // namespace

TEST_SUITE("measures") {
  TEST_CASE("ece examples") {
    CHECK(ece(tr({1, 0}, {0.5, 0.5})).value == 0.0);
    CHECK(ece(tr({1, 1}, {0.5, 0.5})).value == 1.0);
    CHECK(ece(tr({1, 0, 1}, {0.3, 0.3, 0.7})).value == doctest::Approx(0.7).epsilon(1e-12));
    const auto r = ece(tr({1}, {0.2}));
    CHECK(r.mode == Mode::exact);
    CHECK(r.std_error == 0.0);
  }

  TEST_CASE("smce examples") {
    CHECK(smce(tr({1, 0}, {0.5, 0.5})).value == 0.0);
    CHECK(smce(tr({1, 1}, {0.5, 0.5})).value == 1.0);
    CHECK(smce(tr({1, 0}, {0.25, 0.75})).value == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(smce(tr({}, {})).value == 0.0);
  }

  TEST_CASE("ssce examples") {
    CHECK(ssce_exact(tr({1, 0, 1, 1}, {1, 0, 1, 1})).value == 0.0);
    CHECK(ssce_exact(tr({1, 0}, {0.5, 0.5})).value == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(ssce_exact(tr({1, 0}, {0, 1})).value == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(ssce_exact(tr({1, 1}, {0, 0})).value == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("ssce matches subset-definition oracle") {
    RngStream rng(201, 0);
    for (int rep = 0; rep < 60; ++rep) {
      const Transcript t = testing_support::random_transcript(1 + rng.index(9), rng);
      const double want = oracle::ssce(ints(t), preds(t));
      CHECK(ssce_exact(t).value == doctest::Approx(want).epsilon(1e-9).scale(1.0));
      CHECK(ssce_exact_serial(t).value == doctest::Approx(want).epsilon(1e-9).scale(1.0));
    }
  }

  TEST_CASE("ssce exact is thread-count independent") {
    RngStream rng(202, 0);
    const Transcript t = testing_support::random_transcript(15, rng);
    set_threads(1);
    const double one = ssce_exact(t).value;
    for (int n : {2, 3, 8}) {
      set_threads(n);
      CHECK(ssce_exact(t).value == one);
    }
    set_threads(1);
  }

  TEST_CASE("ssce identities") {
    RngStream rng(203, 0);
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t T = 1 + rng.index(12);
      const Bits x = random_bits(T, rng);
      Bits flipped(x);
      for (auto& b : flipped) b = 1 - b;
      CHECK(ssce_exact(Transcript(x, as_doubles(x))).value == 0.0);
      CHECK(ssce_exact(Transcript(x, as_doubles(flipped))).value >= static_cast<double>(T) / 4.0 - 1e-9);
    }
    for (int rep = 0; rep < 100; ++rep) {
      const Transcript t = testing_support::random_transcript(1 + rng.index(12), rng);
      CHECK(ssce_exact(t).value >= oracle::mean_abs_subset_bias(ints(t), preds(t)) - 1e-9);
    }
  }

  TEST_CASE("ssce cap") {
    const Transcript t(Bits(17, 1), std::vector<double>(17, 0.5));
    CHECK_THROWS_AS(ssce_exact(t), CapacityError);
  }

  TEST_CASE("ssce monte carlo") {
    const Transcript t = tr({1, 0}, {0.5, 0.5});
    RngStream a(7, 0), b(7, 0);
    const auto r = ssce_mc(t, 100000, a);
    CHECK(r.mode == Mode::monte_carlo);
    CHECK(r.samples == 100000);
    CHECK(std::fabs(r.value - 0.25) <= 3.0 * r.std_error);
    const auto r2 = ssce_mc(t, 100000, b);
    CHECK(r2.value == r.value);
    CHECK(r2.std_error == r.std_error);

    RngStream c(8, 0);
    const auto z = ssce_mc(tr({1, 0, 1}, {1, 0, 1}), 1000, c);
    CHECK(z.value == 0.0);
    CHECK(z.std_error == 0.0);
    RngStream d(8, 1);
    CHECK_THROWS_AS(ssce_mc(t, 0, d), ParameterError);
  }

  TEST_CASE("ssce monte carlo: parallel matches serial") {
    RngStream rng(204, 0);
    const Transcript t = testing_support::random_transcript(40, rng);
    RngStream a(9, 0), b(9, 0);
    const auto serial = ssce_mc_serial(t, 5000, a);
    set_threads(4);
    const auto par = ssce_mc(t, 5000, b);
    set_threads(1);
    CHECK(par.value == serial.value);
    CHECK(par.std_error == serial.std_error);
  }

  TEST_CASE("caldist examples") {
    CHECK(caldist_exact(tr({1, 0}, {0.5, 0.5})).value == doctest::Approx(0.0).scale(1.0));
    CHECK(caldist_exact(tr({1, 1}, {0.5, 0.5})).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(caldist_exact(tr({1, 0}, {0.9, 0.1})).value == doctest::Approx(0.2).epsilon(1e-12));
    CHECK_THROWS_AS(caldist_exact(Transcript(Bits(11, 1), std::vector<double>(11, 0.5))), CapacityError);
  }

  TEST_CASE("caldist matches labeling oracle") {
    RngStream rng(205, 0);
    for (int rep = 0; rep < 60; ++rep) {
      const Transcript t = testing_support::random_transcript(1 + rng.index(6), rng);
      CHECK(caldist_exact(t).value == doctest::Approx(oracle::caldist(ints(t), preds(t))).epsilon(1e-9).scale(1.0));
    }
  }

  TEST_CASE("caldist is zero exactly when every level set is unbiased") {
    RngStream rng(206, 0);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t T = 1 + rng.index(6);
      Bits x = random_bits(T, rng);
      std::vector<double> p(T);
      for (auto& v : p) v = static_cast<double>(rng.index(3)) / 2.0;
      const Transcript t(x, p);
      bool unbiased = true;
      const auto prof = bias_profile(t);
      for (const auto& l : prof.levels()) unbiased = unbiased && std::fabs(l.bias) <= 1e-12;
      CHECK((caldist_exact(t).value <= 1e-12) == unbiased);
    }
  }

  TEST_CASE("caldist bounds bracket the exact value") {
    RngStream rng(207, 0);
    for (int rep = 0; rep < 100; ++rep) {
      const Transcript t = testing_support::random_transcript(1 + rng.index(7), rng);
      const auto b = caldist_bounds(t);
      const double exact = caldist_exact(t).value;
      CHECK(b.lower <= exact + 1e-9);
      CHECK(exact <= b.upper + 1e-9);
    }
  }

  TEST_CASE("intce examples and oracle") {
    CHECK(intce(tr({1, 0}, {0.5, 0.5})).value == 0.0);
    CHECK(intce(tr({1, 1}, {0.5, 0.5})).value == 1.0);
    CHECK(intce(tr({1, 0}, {0.5, 0.6})).value == doctest::Approx(0.3).epsilon(1e-12));
    RngStream rng(208, 0);
    for (int rep = 0; rep < 200; ++rep) {
      const Transcript t = testing_support::random_transcript(1 + rng.index(10), rng);
      CHECK(intce(t).value == doctest::Approx(oracle::intce(ints(t), preds(t))).epsilon(1e-9).scale(1.0));
    }
  }

  TEST_CASE("kce examples and oracle") {
    CHECK(kce_laplace(tr({1, 0, 1}, {1, 0, 1})).value == 0.0);
    CHECK(kce_laplace(tr({1}, {0})).value == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(kce_laplace(tr({1, 0}, {0.5, 0.5})).value == doctest::Approx(0.0).scale(1.0));
    RngStream rng(209, 0);
    for (int rep = 0; rep < 200; ++rep) {
      const Transcript t = testing_support::random_transcript(1 + rng.index(20), rng);
      CHECK(kce_laplace(t).value == doctest::Approx(oracle::kce(ints(t), preds(t))).epsilon(1e-9).scale(1.0));
    }
  }

  TEST_CASE("v-shaped rules are proper and bounded") {
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(i / 40.0);
    std::vector<VShapedRule> rules{{VShapedRule::Kind::sign_at_half, 0.5}};
    for (double k : {0.1, 0.25, 0.5, 0.625, 0.9}) rules.push_back({VShapedRule::Kind::weighted_indicator, k});
    for (const auto& rule : rules) {
      for (double q : grid) {
        const double truthful = q * rule.score(1, q) + (1 - q) * rule.score(0, q);
        for (double b : grid) {
          CHECK(std::fabs(rule.score(0, b)) <= 1.0);
          CHECK(std::fabs(rule.score(1, b)) <= 1.0);
          CHECK(truthful <= q * rule.score(1, b) + (1 - q) * rule.score(0, b) + 1e-12);
        }
      }
    }
  }

  TEST_CASE("ucal examples") {
    CHECK(ucal_vshaped(tr({1, 0}, {0.5, 0.5})).value == doctest::Approx(0.0).scale(1.0));
    CHECK(ucal_vshaped(tr({1, 1}, {0, 0})).value == doctest::Approx(4.0).epsilon(1e-12));
    CHECK_THROWS_AS(ucal_vshaped(tr({1}, {0.5}), std::vector<double>{1.5}), ParameterError);
  }

  TEST_CASE("ucal on truthful half-half transcripts") {
    RngStream rng(210, 0);
    const std::size_t T = 40;
    for (int rep = 0; rep < 100; ++rep) {
      Bits x(T, 1);
      std::vector<double> p(T, 1.0);
      double X = 0;
      for (std::size_t t = 0; t < T / 2; ++t) {
        x[t] = rng.bernoulli(0.5);
        p[t] = 0.5;
        X += x[t];
      }
      const double v = ucal_vshaped(Transcript(x, p)).value;
      if (X >= T / 4.0) CHECK(v >= 2.0 * (X - T / 4.0) - 1e-9);
      CHECK(v >= 0.0);
    }
  }

  TEST_CASE("msr bounds") {
    CHECK(msr_bounds(tr({1, 0}, {0.5, 0.5})) == std::pair<double, double>{0.0, 0.0});
    const auto b = msr_bounds(tr({1, 1}, {0.5, 0.5}));
    CHECK(b.first == doctest::Approx(0.5));
    CHECK(b.second == doctest::Approx(2.0));
    RngStream rng(211, 0);
    for (int rep = 0; rep < 500; ++rep) {
      const auto r = msr_bounds(testing_support::random_transcript(1 + rng.index(30), rng));
      CHECK(r.first <= r.second + 1e-12);
    }
  }

  TEST_CASE("measure relations against oracles") {
    RngStream rng(212, 0);
    for (int rep = 0; rep < 150; ++rep) {
      const Transcript t = testing_support::random_transcript(1 + rng.index(7), rng);
      const auto x = ints(t);
      const auto p = preds(t);
      const double sm = oracle::smce(x, p);
      CHECK(smce(t).value == doctest::Approx(sm).epsilon(1e-9).scale(1.0));
      CHECK(0.5 * sm <= oracle::caldist(x, p) + 1e-9);
      CHECK(sm <= oracle::ece(x, p) + 1e-9);
      CHECK(ece(t).value == doctest::Approx(oracle::ece(x, p)).epsilon(1e-12).scale(1.0));
      CHECK(intce(t).value <= ece(t).value + 1e-9);
    }
  }

  TEST_CASE("registry") {
    for (const auto& name : measure_names()) CHECK(is_measure(name));
    CHECK_FALSE(is_measure("brier"));
    CHECK_THROWS_AS(evaluate("brier", tr({1}, {0.5})), ParameterError);
    CHECK_THROWS_AS(measure_fn("brier"), ParameterError);
    CHECK(measure_fn("ece")(tr({1, 1}, {0.5, 0.5})) == 1.0);
  }

  TEST_CASE("gamma examples") {
    CHECK(gamma_fn(0.25) == 0.25);
    CHECK(gamma_fn(4.0) == 2.0);
    CHECK(gamma_fn(1.0) == 1.0);
  }

  TEST_CASE("gamma subadditivity") {
    RngStream rng(213, 0);
    for (int rep = 0; rep < 2000; ++rep) {
      const std::size_t n = 1 + rng.index(20);
      double lhs = 0.0, total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = rng.uniform() * (rng.bernoulli(0.5) ? 0.5 : 10.0);
        lhs += gamma_fn(v);
        total += v;
      }
      CHECK(lhs <= std::sqrt(static_cast<double>(n)) * gamma_fn(total) + 1e-9);
    }
  }

  TEST_CASE("diagnostics examples") {
    const auto d3 = OutcomeDistribution::product({0.5, 0.5, 0.5});
    const auto r3 = diagnostics(d3, tr({1, 0, 1}, {0.5, 0.5, 0.5}));
    CHECK(r3.var_path == std::vector<double>{0.0, 0.25, 0.5, 0.75});
    CHECK(r3.n_path == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(r3.gamma_var == 0.75);

    const auto d16 = OutcomeDistribution::product(std::vector<double>(16, 0.5));
    const auto r16 = diagnostics(d16, Transcript(Bits(16, 0), std::vector<double>(16, 0.9)));
    CHECK(r16.epochs == std::vector<std::size_t>{0, 4, 12});
    CHECK(r16.gamma_var == 2.0);
    CHECK(r16.n_path.back() == 16);

    const auto det = OutcomeDistribution::product({1.0, 0.5});
    CHECK_THROWS_AS(diagnostics(det, tr({0, 1}, {0.5, 0.5})), InconsistencyError);
  }

  TEST_CASE("diagnostics interval restriction") {
    const auto d = OutcomeDistribution::product({0.5, 0.1, 0.5});
    const auto r = diagnostics(d, tr({1, 0, 0}, {0.5, 0.1, 0.5}), Interval{0.4, 0.6});
    CHECK(r.var_path == std::vector<double>{0.0, 0.25, 0.25, 0.5});
    CHECK(r.interval.lo == 0.4);
  }
}
