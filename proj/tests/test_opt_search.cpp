#include <doctest.h>

#include <cmath>

#include "caliblab/errors.hpp"
#include "caliblab/experiments.hpp"
#include "caliblab/forecasters.hpp"
#include "caliblab/measures.hpp"
#include "caliblab/opt_search.hpp"
#include "caliblab/parallel.hpp"
#include "test_helpers.hpp"

using namespace caliblab;

namespace {

const GridSpec kThree{{0.0, 0.5, 1.0}};

OutcomeDistribution grid_tree(std::size_t T, const GridSpec& g, RngStream& rng) {
  std::vector<double> c((std::size_t{1} << T) - 1);
  for (double& v : c) v = g.values[rng.index(g.values.size())];
  return OutcomeDistribution::tree(T, std::move(c));
}

}  // namespace

TEST_SUITE("opt_search") {
  TEST_CASE("grid validation") {
    CHECK_THROWS_AS(validate(GridSpec{}), ParameterError);
    CHECK_THROWS_AS(validate(GridSpec{{0.5, 0.5}}), ParameterError);
    CHECK_THROWS_AS(validate(GridSpec{{0.0, 1.5}}), ParameterError);
    CHECK_NOTHROW(validate(kThree));
  }

  TEST_CASE("triple block: sidestepping is optimal") {
    const auto d = gen_triple_block(3, std::vector<double>{0.0});
    const auto r = opt_exact(d, measure_fn("ece"), kThree);
    CHECK(r.value == 0.0);
    CHECK(r.argmin.as_table().predictions == std::vector<double>{0.5, 0.0, 0.5, 0.5, 0.0, 1.0, 0.0});
    CHECK(r.leaves <= 8 * 27);  // zero-probability subtrees are skipped
    CHECK(expected_measure(d, r.argmin, measure_fn("ece")) == 0.0);

    const auto rep = truthfulness_report(d, measure_fn("ece"), kThree);
    CHECK(rep.err_truthful == doctest::Approx(0.5));
    CHECK(rep.opt_hat == 0.0);
    CHECK(rep.gap_witnessed);
    CHECK_FALSE(rep.ratio.has_value());

    const auto d6 = gen_triple_block(6, std::vector<double>{0.0, 0.0});
    CHECK(opt_exact(d6, measure_fn("ece"), kThree).value == 0.0);
  }

  TEST_CASE("product(1/2, 1/2), ECE: matches all 27 tables") {
    const auto d = OutcomeDistribution::product({0.5, 0.5});
    const auto fast = opt_exact(d, measure_fn("ece"), kThree);
    const auto slow = opt_exact_bruteforce(d, measure_fn("ece"), kThree);
    CHECK(slow.leaves == 27 * 4);
    CHECK(fast.value == doctest::Approx(slow.value).epsilon(1e-12).scale(1.0));
    CHECK(fast.argmin.as_table().predictions == slow.argmin.as_table().predictions);
    CHECK(fast.value <= 0.5 + 1e-12);
  }

  TEST_CASE("deterministic distribution has zero optimum") {
    const auto d = OutcomeDistribution::tree(3, {1, 0, 1, 0, 0, 1, 0});
    for (const char* name : {"ece", "smce", "ssce", "kce"}) CHECK(opt_exact(d, measure_fn(name), kThree).value == 0.0);
  }

  TEST_CASE("expectimin equals brute force on random trees") {
    RngStream rng(401, 0);
    const GridSpec g{{0.0, 0.5, 1.0}};
    for (int rep = 0; rep < 12; ++rep) {
      const std::size_t T = 1 + rng.index(2);
      const auto d = rep % 2 ? grid_tree(T, g, rng) : testing_support::random_tree(T, rng);
      for (const char* name : {"ece", "smce", "ssce"}) {
        const auto fast = opt_exact(d, measure_fn(name), g);
        const auto slow = opt_exact_bruteforce(d, measure_fn(name), g);
        CHECK(fast.value == doctest::Approx(slow.value).epsilon(1e-12).scale(1.0));
        CHECK(expected_measure(d, fast.argmin, measure_fn(name)) ==
              doctest::Approx(fast.value).epsilon(1e-12).scale(1.0));
      }
    }
  }

  TEST_CASE("brute force at T = 3 with a binary grid") {
    RngStream rng(402, 0);
    const GridSpec g{{0.25, 0.75}};
    for (int rep = 0; rep < 3; ++rep) {
      const auto d = testing_support::random_tree(3, rng);
      const auto fast = opt_exact(d, measure_fn("smce"), g);
      const auto slow = opt_exact_bruteforce(d, measure_fn("smce"), g);
      CHECK(fast.value == doctest::Approx(slow.value).epsilon(1e-12).scale(1.0));
      CHECK(fast.argmin.as_table().predictions == slow.argmin.as_table().predictions);
    }
  }

  TEST_CASE("monotone under grid refinement") {
    RngStream rng(403, 0);
    const GridSpec coarse{{0.0, 1.0}}, mid{{0.0, 0.5, 1.0}}, fine{{0.0, 0.25, 0.5, 0.75, 1.0}};
    for (int rep = 0; rep < 5; ++rep) {
      const auto d = testing_support::random_tree(3, rng);
      const auto m = measure_fn("smce");
      const double a = opt_exact(d, m, coarse).value;
      const double b = opt_exact(d, m, mid).value;
      const double c = opt_exact(d, m, fine).value;
      CHECK(b <= a + 1e-12);
      CHECK(c <= b + 1e-12);
    }
  }

  TEST_CASE("truthful is never beaten below the optimum when on the grid") {
    RngStream rng(404, 0);
    const GridSpec g{{0.0, 0.25, 0.5, 0.75, 1.0}};
    for (int rep = 0; rep < 5; ++rep) {
      const auto d = grid_tree(3, g, rng);
      const auto r = truthfulness_report(d, measure_fn("ssce"), g);
      CHECK(r.err_truthful >= r.opt_hat - 1e-9);
      if (r.ratio) CHECK(*r.ratio >= 1.0 - 1e-9);
    }
  }

  TEST_CASE("parallel search is thread-count independent") {
    RngStream rng(405, 0);
    const auto d = testing_support::random_tree(3, rng);
    const GridSpec g{{0.0, 0.25, 0.5, 0.75, 1.0}};
    set_threads(1);
    const auto one = opt_exact(d, measure_fn("ssce"), g);
    set_threads(3);
    const auto three = opt_exact(d, measure_fn("ssce"), g);
    set_threads(1);
    CHECK(one.value == three.value);
    CHECK(one.argmin.as_table().predictions == three.argmin.as_table().predictions);
  }

  TEST_CASE("capacity") {
    const Caps saved = caps();
    caps().search = 100;
    CHECK_THROWS_AS(opt_exact(OutcomeDistribution::product({0.5, 0.5, 0.5}), measure_fn("ece"), kThree),
                    CapacityError);
    caps() = saved;
    CHECK_THROWS_AS(opt_exact(OutcomeDistribution::product(std::vector<double>(17, 0.5)), measure_fn("ece"), kThree),
                    CapacityError);
  }

  TEST_CASE("compressed search is an upper bound") {
    RngStream rng(406, 0);
    for (int rep = 0; rep < 5; ++rep) {
      const auto d = testing_support::random_tree(3, rng);
      const auto m = measure_fn("smce");
      const auto exact = opt_exact(d, m, kThree);
      const auto comp = opt_compressed_upper(d, m, kThree);
      CHECK(comp.upper_bound >= exact.value - 1e-12);
      CHECK(expected_measure(d, comp.argmin, m) == doctest::Approx(comp.upper_bound).epsilon(1e-12).scale(1.0));
    }
  }
}
