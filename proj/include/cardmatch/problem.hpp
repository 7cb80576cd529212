#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cardmatch/dataset.hpp"
#include "cardmatch/study_spec.hpp"

namespace cardmatch {

/// Target means for every balance covariate, raw and in SD units.
struct TargetProfile {
  TargetSource source = TargetSource::None;
  std::vector<double> raw;
  std::vector<double> standardized;
};

/// One linear constraint over the selection variables. Rows are either
/// `sum coeff*x <= rhs` or `sum coeff*x = rhs`; every row except min_pairs
/// has rhs 0, so scaling a feasible selection down stays feasible.
struct ConstraintRow {
  std::string name;
  std::vector<std::pair<int, double>> coeffs;
  bool equality = false;
  double rhs = 0.0;
};

/// Binary selection program: variables 0..n_treated-1 are the treated
/// indicators a_t, the rest are control indicators b_c. The objective is to
/// maximize the number of selected treated units.
struct SelectionProblem {
  std::size_t n_treated = 0;
  std::size_t n_controls = 0;
  std::vector<std::size_t> var_unit;  // variable -> index into dataset.units
  std::vector<int> var_stratum;       // variable -> stratum index
  std::vector<char> var_fixed_zero;   // 1 if the variable is pinned to 0
  std::vector<ConstraintRow> rows;

  std::size_t n_vars() const { return n_treated + n_controls; }
  bool is_treated_var(std::size_t j) const { return j < n_treated; }
};

struct FeasibilityReport {
  struct Row {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;  // rhs - lhs for <=, -|lhs - rhs| for equalities
  };
  bool pass = false;
  std::size_t n_pairs = 0;
  std::vector<Row> rows;
  std::vector<std::string> violations;
};

/// Mean of every balance covariate under the requested source. File sources
/// read a two-column CSV (covariate,mean) in raw units.
TargetProfile derive_target_profile(const Dataset& dataset,
                                    const TargetSpec& target);

/// Build the selection program. Requires a standardized dataset. Row layout:
/// one equality per stratum, then two group rows per balance covariate when
/// group balance is on, then four target rows per covariate when a target
/// profile is set, then an optional min_pairs row.
SelectionProblem compile_problem(const Dataset& dataset, const StudySpec& spec);

/// Re-evaluate every row of the program against a 0/1 selection with plain
/// summation. PASS means every slack >= -1e-9.
FeasibilityReport verify_solution(const SelectionProblem& problem,
                                  const std::vector<char>& selected);

}  // namespace cardmatch
