#pragma once

#include <string>
#include <vector>

#include "cardmatch/branch_bound.hpp"
#include "cardmatch/dataset.hpp"
#include "cardmatch/problem.hpp"
#include "cardmatch/study_spec.hpp"

namespace cardmatch {

// Per-covariate balance summary. Means are in raw units; SMDs and target
// deviations divide by the pre-match pooled SD, so before and after are on
// the same scale. After-fields are NaN when the selection is empty.
struct CovariateBalance {
  std::string name;
  double mean_t_before = 0.0;
  double mean_c_before = 0.0;
  double mean_t_after = 0.0;
  double mean_c_after = 0.0;
  double target_mean = 0.0;  // raw units, NaN without a target profile
  double smd_before = 0.0;   // signed
  double smd_after = 0.0;
  double dev_t = 0.0;  // |matched treated mean - target| in SD units
  double dev_c = 0.0;
};

struct BalanceReport {
  std::vector<CovariateBalance> covariates;
  std::size_t n_pairs = 0;
  std::size_t total_treated = 0;
  std::size_t total_controls = 0;
  bool has_target = false;
  bool feasible = true;  // every tolerance honored, re-checked from the data
  std::vector<std::string> breaches;
};

/// Signed standardized mean difference (mean_T - mean_C) / pooled_sd.
double smd(const std::vector<double>& treated,
           const std::vector<double>& controls, double pooled_sd);

/// Balance before and after matching over the standardized dataset, plus a
/// feasibility echo: every |after SMD| must stay within delta_k + 1e-9 and
/// every target deviation within eps_k + 1e-9, else the report records a
/// breach (which verify_solution should have made impossible).
BalanceReport balance_report(const Dataset& dataset,
                             const MatchSolution& solution,
                             const TargetProfile& target,
                             const StudySpec& spec);

/// One row per covariate per phase; after-rows carry NA cells when n = 0.
std::string balance_to_csv(const BalanceReport& report);
std::string balance_to_json(const BalanceReport& report);

/// Dot chart of |SMD| per covariate per phase with reference lines at 0.1
/// and 0.25. Byte output depends only on the report contents.
std::string render_love_plot(const BalanceReport& report);
void export_love_plot(const BalanceReport& report, const std::string& path);

}  // namespace cardmatch
