#pragma once

#include <string>
#include <vector>

#include "cardmatch/branch_bound.hpp"
#include "cardmatch/dataset.hpp"

namespace cardmatch {

struct PropensityModel {
  std::vector<double> coef;   // intercept first, then one per balance covariate
  std::vector<double> score;  // fitted P(exposed | x), strictly inside (0, 1)
  std::vector<double> logit;  // linear predictor per unit
  std::vector<double> ll_trace;  // log-likelihood after each accepted step
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool separation = false;  // any |coefficient| > 30: fit is diverging
};

/// Maximum-likelihood logistic regression of exposure on the balance
/// covariates (damped Newton / IRLS, ridge 1e-6 on the normal equations for
/// conditioning only, at most 100 iterations, gradient norm target 1e-8).
PropensityModel fit_logistic_propensity(const Dataset& dataset);

struct PsmPair {
  std::string treated_id;
  std::string control_id;
  double logit_t = 0.0;
  double logit_c = 0.0;
  double distance = 0.0;  // |logit_t - logit_c|
};

struct PsmResult {
  std::vector<PsmPair> pairs;
  std::size_t excluded_treated = 0;
  double caliper_width = 0.0;  // absolute logit threshold actually applied
};

/// Greedy nearest-neighbor matching on the logit of the propensity score:
/// treated units in descending score order each take the closest unmatched
/// control, skipping the unit when the gap exceeds caliper_sd times the
/// full-sample SD of the logit. caliper_sd < 0 disables the caliper.
/// respect_strata keeps every pair inside one exact-match stratum.
PsmResult greedy_nn_match(const Dataset& dataset, const PropensityModel& model,
                          double caliper_sd = 0.2,
                          bool respect_strata = false);

/// View the greedy matching as a solver solution so balance_report and the
/// outcome tests can consume it unchanged.
MatchSolution psm_to_solution(const PsmResult& result);

/// psm_pairs.csv: pair_id, treated_id, control_id, logits and their gap.
std::string psm_pairs_to_csv(const PsmResult& result);

}  // namespace cardmatch
