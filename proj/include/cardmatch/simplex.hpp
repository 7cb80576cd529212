#pragma once

#include <cstddef>
#include <vector>

#include "cardmatch/problem.hpp"

namespace cardmatch {

enum class LpStatus { Optimal, IterationLimit, Infeasible };

struct LpSolution {
  LpStatus status = LpStatus::Optimal;
  double objective = 0.0;
  std::vector<double> x;  // structural variable values, within bounds
  std::size_t iterations = 0;
};

/// Bounded-variable primal simplex over a compiled selection program. The
/// constraint matrix is fixed at construction; solve() takes per-variable
/// bounds so branching only changes [lb, ub]. Dantzig pricing with a switch
/// to Bland's rule after 5*(rows+cols) iterations; dense basis inverse with
/// periodic refactorization. solve() is const and reentrant, so one solver
/// can serve parallel tree workers.
class LpSolver {
 public:
  explicit LpSolver(const SelectionProblem& problem);

  LpSolution solve(const std::vector<double>& lower,
                   const std::vector<double>& upper) const;
  /// Bounds [0,1], with fixed-zero variables clamped to 0.
  LpSolution solve_root() const;

  std::size_t n_rows() const { return m_; }
  std::size_t n_cols() const { return n_; }
  std::vector<double> root_lower() const;
  std::vector<double> root_upper() const;

 private:
  std::size_t m_ = 0;  // rows
  std::size_t n_ = 0;  // structural columns
  std::vector<int> col_ptr_;
  std::vector<int> col_row_;
  std::vector<double> col_val_;
  std::vector<double> rhs_;
  std::vector<char> row_equality_;
  std::vector<double> obj_;         // structural objective coefficients
  std::vector<char> fixed_zero_;
};

}  // namespace cardmatch
