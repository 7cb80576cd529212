#include <cmath>
#include <vector>

#include "cardmatch/errors.hpp"
#include "cardmatch/rng.hpp"
#include "cardmatch/stats.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cardmatch;

TEST_CASE("normal cdf hits reference values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-13));
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-13));
  CHECK(normal_cdf(3.0) == doctest::Approx(0.9986501019683699).epsilon(1e-13));
  CHECK(normal_cdf(-8.0) < 1e-14);
  CHECK(normal_cdf(8.0) > 1.0 - 1e-14);
}

TEST_CASE("normal cdf matches quadrature below 1e-12") {
  for (double x = -6.0; x <= 6.0 + 1e-12; x += 0.25) {
    const double want = testutil::normal_cdf_oracle(x);
    CHECK(std::abs(normal_cdf(x) - want) < 1e-12);
  }
}

TEST_CASE("incomplete beta closed forms and symmetry") {
  for (double x : {0.1, 0.33, 0.5, 0.77, 0.9}) {
    CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-13));
    // I_x(2, 2) = x^2 (3 - 2x)
    CHECK(incomplete_beta(2.0, 2.0, x) ==
          doctest::Approx(x * x * (3.0 - 2.0 * x)).epsilon(1e-13));
    CHECK(incomplete_beta(3.5, 1.2, x) ==
          doctest::Approx(1.0 - incomplete_beta(1.2, 3.5, 1.0 - x))
              .epsilon(1e-12));
  }
  CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
}

TEST_CASE("t cdf closed forms for small df") {
  constexpr double pi = 3.14159265358979323846;
  for (double t : {-3.0, -0.7, 0.0, 0.4, 1.0, 2.5, 6.0}) {
    // df = 1 is the Cauchy distribution.
    CHECK(students_t_cdf(t, 1.0) ==
          doctest::Approx(0.5 + std::atan(t) / pi).epsilon(1e-12));
    // df = 2 has the closed form 1/2 + t / (2 sqrt(2 + t^2)).
    CHECK(students_t_cdf(t, 2.0) ==
          doctest::Approx(0.5 + t / (2.0 * std::sqrt(2.0 + t * t)))
              .epsilon(1e-12));
  }
}

TEST_CASE("t cdf matches quadrature below 1e-8") {
  for (double df : {1.0, 2.0, 5.0, 12.0, 29.0}) {
    for (double t = -4.0; t <= 4.0 + 1e-12; t += 0.5) {
      const double want = testutil::t_cdf_oracle(t, df);
      CHECK(std::abs(students_t_cdf(t, df) - want) < 1e-8);
    }
  }
}

TEST_CASE("binomial half cdf equals pascal-triangle summation") {
  for (std::size_t n = 1; n <= 25; ++n) {
    for (std::size_t k = 0; k <= n; ++k) {
      std::vector<double> row{1.0};
      for (std::size_t i = 1; i <= n; ++i) {
        std::vector<double> next(i + 1, 1.0);
        for (std::size_t j = 1; j < i; ++j) next[j] = row[j - 1] + row[j];
        row = std::move(next);
      }
      double tail = 0.0;
      for (std::size_t i = 0; i <= k; ++i) tail += row[i];
      const double want = std::ldexp(tail, -static_cast<int>(n));
      CHECK(binomial_half_cdf(n, k) == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("two-proportion z-test reproduces the study contrasts") {
  // Young children: 12.69% vs 5.08% out of 197 per group.
  const auto young = two_proportion_ztest(25, 10, 197);
  CHECK(young.prop_t == doctest::Approx(0.1269).epsilon(1e-3));
  CHECK(young.prop_c == doctest::Approx(0.0508).epsilon(1e-3));
  CHECK(young.p_value > 0.006);
  CHECK(young.p_value < 0.010);
  CHECK(young.p_value == doctest::Approx(0.008).epsilon(0.25));

  // Older individuals: 7.74% vs 6.81% out of 323 per group.
  const auto older = two_proportion_ztest(25, 22, 323);
  CHECK(older.prop_t == doctest::Approx(0.0774).epsilon(1e-2));
  CHECK(older.prop_c == doctest::Approx(0.0681).epsilon(1e-2));
  CHECK(older.p_value > 0.63);
  CHECK(older.p_value < 0.67);
}

TEST_CASE("z-test symmetry, degeneracy and monotonicity") {
  const auto equal = two_proportion_ztest(14, 14, 100);
  CHECK(equal.statistic == 0.0);
  CHECK(equal.p_value == doctest::Approx(1.0));

  const auto ab = two_proportion_ztest(30, 12, 80);
  const auto ba = two_proportion_ztest(12, 30, 80);
  CHECK(ab.estimate == doctest::Approx(-ba.estimate));
  CHECK(ab.statistic == doctest::Approx(-ba.statistic));
  CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));

  const auto none = two_proportion_ztest(0, 0, 50);
  CHECK(none.degenerate);
  CHECK(none.p_value == 1.0);
  const auto all = two_proportion_ztest(50, 50, 50);
  CHECK(all.degenerate);
  CHECK(all.p_value == 1.0);

  // With events_C fixed, moving events_T away from events_C shrinks P.
  double last = 1.1;
  for (std::size_t et = 20; et <= 60; et += 5) {
    const auto r = two_proportion_ztest(et, 20, 100);
    CHECK(r.p_value <= last + 1e-12);
    last = r.p_value;
  }

  CHECK_THROWS_AS(two_proportion_ztest(5, 2, 0), Error);
  CHECK_THROWS_AS(two_proportion_ztest(11, 2, 10), Error);
}

TEST_CASE("continuity correction only shrinks the z statistic") {
  const auto plain = two_proportion_ztest(30, 18, 90, false);
  const auto corrected = two_proportion_ztest(30, 18, 90, true);
  CHECK(std::abs(corrected.statistic) < std::abs(plain.statistic));
  CHECK(corrected.p_value > plain.p_value);
}

TEST_CASE("mcnemar handles the symmetric and one-sided extremes") {
  const auto even = mcnemar_test(10, 10);
  CHECK(even.statistic == 0.0);
  CHECK(even.p_value == 1.0);
  CHECK(even.test == "mcnemar_exact");

  const auto lopsided = mcnemar_test(15, 0);
  CHECK(lopsided.p_value == doctest::Approx(2.0 * std::ldexp(1.0, -15))
                                .epsilon(1e-14));
  CHECK(lopsided.p_value == doctest::Approx(6.10e-5).epsilon(1e-2));

  const auto quiet = mcnemar_test(0, 0);
  CHECK(quiet.degenerate);
  CHECK(quiet.p_value == 1.0);
}

TEST_CASE("exact mcnemar matches direct summation") {
  Rng rng(77, 3);
  for (std::size_t trial = 0; trial < 200; ++trial) {
    const std::size_t total = 1 + rng.below(trial, 1, 25);
    const std::size_t b = rng.below(trial, 2, total + 1);
    const std::size_t c = total - b;
    const auto r = mcnemar_test(b, c);
    REQUIRE(r.test == "mcnemar_exact");
    CHECK(std::abs(r.p_value - testutil::mcnemar_exact_oracle(b, c)) < 1e-12);
  }
}

TEST_CASE("large-sample mcnemar chi-square tracks the exact tail") {
  // The continuity-corrected chi-square agrees with the exact binomial tail
  // within 0.01 for every split at total >= 50 (worst case observed over an
  // exhaustive scan to total 400 is ~0.0011); the uncorrected statistic can
  // sit ~2x the boundary pmf away, so it only gets a loose envelope.
  for (std::size_t total = 50; total <= 130; total += 4) {
    for (std::size_t b = 0; b <= total; ++b) {
      const std::size_t c = total - b;
      double tail = 0.0;
      for (std::size_t i = 0; i <= std::min(b, c); ++i) {
        tail += std::exp(std::lgamma(double(total) + 1.0) -
                         std::lgamma(double(i) + 1.0) -
                         std::lgamma(double(total - i) + 1.0) -
                         double(total) * std::log(2.0));
      }
      const double exact = std::min(1.0, 2.0 * tail);
      const auto corrected = mcnemar_test(b, c, true);
      REQUIRE(corrected.test == "mcnemar_chi2");
      CHECK(std::abs(corrected.p_value - exact) < 0.01);
      const auto plain = mcnemar_test(b, c, false);
      CHECK(std::abs(plain.p_value - exact) < 0.12);
    }
  }
}

TEST_CASE("paired t-test basics") {
  const auto zero = paired_mean_difference({0.0, 0.0, 0.0, 0.0});
  CHECK(zero.degenerate);
  CHECK(zero.estimate == 0.0);
  CHECK(zero.p_value == 1.0);

  const auto sym = paired_mean_difference({1.0, -1.0});
  CHECK(sym.statistic == doctest::Approx(0.0));
  CHECK(sym.p_value == doctest::Approx(1.0));

  const auto constant = paired_mean_difference({2.0, 2.0, 2.0});
  CHECK(constant.degenerate);
  CHECK(constant.p_value == 0.0);

  CHECK_THROWS_AS(paired_mean_difference({1.0}), Error);
}

TEST_CASE("paired t-test matches the quadrature oracle") {
  Rng rng(5, 8);
  std::vector<double> diffs;
  for (std::size_t i = 0; i < 30; ++i)
    diffs.push_back(0.3 + rng.normal(i, 1));
  const auto r = paired_mean_difference(diffs);

  double mean = 0.0;
  for (double d : diffs) mean += d / 30.0;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double t = mean / std::sqrt(ss / 29.0 / 30.0);
  const double want = 2.0 * (1.0 - testutil::t_cdf_oracle(std::abs(t), 29.0));
  CHECK(r.statistic == doctest::Approx(t).epsilon(1e-12));
  CHECK(std::abs(r.p_value - want) < 1e-6);
}

TEST_CASE("outcome dispatch picks the right test") {
  OutcomeSpec spec;  // Auto
  const std::vector<double> bt{1, 0, 1, 1, 0, 1};
  const std::vector<double> bc{0, 0, 1, 0, 1, 0};
  const auto mc = analyze_outcomes(bt, bc, spec);
  CHECK(mc.test == "mcnemar_exact");
  CHECK(mc.n == 6);
  CHECK(mc.events_t == 4);
  CHECK(mc.events_c == 2);
  CHECK(mc.prop_t == doctest::Approx(4.0 / 6.0));
  CHECK(mc.estimate == doctest::Approx(2.0 / 6.0));

  const std::vector<double> ct{1.2, 0.4, 2.2, 1.9, 0.3, 1.1};
  const std::vector<double> cc{0.8, 0.6, 1.4, 1.2, 0.9, 0.7};
  const auto pt = analyze_outcomes(ct, cc, spec);
  CHECK(pt.test == "paired_t");

  spec.test = OutcomeTest::McNemar;
  CHECK_THROWS_AS(analyze_outcomes(ct, cc, spec), Error);

  spec.test = OutcomeTest::PairedT;
  const auto forced = analyze_outcomes(bt, bc, spec);
  CHECK(forced.test == "paired_t");

  spec.test = OutcomeTest::Auto;
  CHECK_THROWS_AS(analyze_outcomes({1.0}, {}, spec), Error);
}
