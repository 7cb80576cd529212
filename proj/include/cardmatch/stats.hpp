#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cardmatch/study_spec.hpp"

namespace cardmatch {

/// Standard normal CDF, absolute error below 1e-12. Power series for small
/// arguments, Lentz continued fraction for the tail; no libm special
/// functions beyond exp/sqrt.
double normal_cdf(double x);

/// Complementary error function with the same backing implementation.
double erfc_own(double x);

/// Student t CDF P(T <= t) with df degrees of freedom, via the regularized
/// incomplete beta function. Absolute error below 1e-10 for df >= 1.
double students_t_cdf(double t, double df);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);

/// P(X <= k) for X ~ Binomial(n, 1/2). Exact for n <= 25 (all terms are
/// dyadic rationals below 2^53), accurate to ~1e-15 beyond.
double binomial_half_cdf(std::size_t n, std::size_t k);

struct OutcomeReport {
  std::string test;
  std::size_t n = 0;  // pairs; per-group size for the two-sample z-test
  std::size_t events_t = 0;
  std::size_t events_c = 0;
  double prop_t = 0.0;
  double prop_c = 0.0;
  double estimate = 0.0;  // risk difference, or mean difference for paired t
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
  std::string note;
};

/// Pooled two-sample z-test for proportions, two-sided. Degenerate pooled
/// proportions (0 or 1) return P = 1 with the flag set instead of throwing.
OutcomeReport two_proportion_ztest(std::size_t events_t, std::size_t events_c,
                                   std::size_t n,
                                   bool continuity_correction = false);

/// McNemar test on discordant pair counts: exact binomial when
/// b + c <= 25, else chi-square (continuity correction optional).
OutcomeReport mcnemar_test(std::size_t discordant_tc,
                           std::size_t discordant_ct,
                           bool continuity_correction = false);

/// Paired t-test on within-pair differences, df = n - 1. All-zero
/// differences give P = 1 flagged; zero variance around a nonzero mean gives
/// P = 0 flagged (the statistic diverges).
OutcomeReport paired_mean_difference(const std::vector<double>& diffs);

/// Dispatch on pair-aligned outcome vectors: binary outcomes go to McNemar,
/// continuous ones to the paired t-test; an explicit choice in the spec wins.
OutcomeReport analyze_outcomes(const std::vector<double>& treated,
                               const std::vector<double>& controls,
                               const OutcomeSpec& spec);

/// outcome.json artifact; non-finite statistics serialize as null.
std::string outcome_to_json(const OutcomeReport& report);

}  // namespace cardmatch
