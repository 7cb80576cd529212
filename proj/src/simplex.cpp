#include "cardmatch/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cardmatch/errors.hpp"

namespace cardmatch {

namespace {

constexpr double kFeasTol = 1e-7;   // primal feasibility
constexpr double kCostTol = 1e-9;   // reduced cost threshold
constexpr double kPivotTol = 1e-10; // smallest usable pivot element
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kRefactorEvery = 64;

// Per-solve working state. Column index space: [0, n) structural variables,
// [n, n+m) one logical per row, [n+m, n+2m) one artificial per row.
struct Work {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<double> lb, ub, x, cost;
  std::vector<int> basis;          // row -> basic column
  std::vector<int> where;          // column -> basic row, -1 nonbasic
  std::vector<char> at_upper;      // nonbasic position flag
  std::vector<double> binv;        // m*m basis inverse, row-major
  std::vector<double> work_col;    // FTRAN result
  std::vector<double> y;           // BTRAN result

  std::size_t total() const { return n + 2 * m; }
};

}  // namespace

LpSolver::LpSolver(const SelectionProblem& problem) {
  m_ = problem.rows.size();
  n_ = problem.n_vars();
  fixed_zero_ = problem.var_fixed_zero;
  obj_.assign(n_, 0.0);
  for (std::size_t j = 0; j < problem.n_treated; ++j) obj_[j] = 1.0;

  rhs_.resize(m_);
  row_equality_.resize(m_);
  std::vector<std::size_t> count(n_, 0);
  for (std::size_t i = 0; i < m_; ++i) {
    rhs_[i] = problem.rows[i].rhs;
    row_equality_[i] = problem.rows[i].equality ? 1 : 0;
    for (const auto& [j, v] : problem.rows[i].coeffs) {
      (void)v;
      ++count[static_cast<std::size_t>(j)];
    }
  }
  col_ptr_.assign(n_ + 1, 0);
  for (std::size_t j = 0; j < n_; ++j) {
    col_ptr_[j + 1] = col_ptr_[j] + static_cast<int>(count[j]);
  }
  col_row_.resize(col_ptr_[n_]);
  col_val_.resize(col_ptr_[n_]);
  std::vector<int> fill(col_ptr_.begin(), col_ptr_.end() - 1);
  for (std::size_t i = 0; i < m_; ++i) {
    for (const auto& [j, v] : problem.rows[i].coeffs) {
      const int at = fill[static_cast<std::size_t>(j)]++;
      col_row_[at] = static_cast<int>(i);
      col_val_[at] = v;
    }
  }
}

std::vector<double> LpSolver::root_lower() const {
  return std::vector<double>(n_, 0.0);
}

std::vector<double> LpSolver::root_upper() const {
  std::vector<double> ub(n_, 1.0);
  for (std::size_t j = 0; j < n_; ++j) {
    if (fixed_zero_[j]) ub[j] = 0.0;
  }
  return ub;
}

LpSolution LpSolver::solve_root() const {
  return solve(root_lower(), root_upper());
}

LpSolution LpSolver::solve(const std::vector<double>& lower,
                           const std::vector<double>& upper) const {
  Work w;
  w.m = m_;
  w.n = n_;
  const std::size_t total = w.total();
  w.lb.assign(total, 0.0);
  w.ub.assign(total, 0.0);
  w.x.assign(total, 0.0);
  w.cost.assign(total, 0.0);
  w.at_upper.assign(total, 0);
  w.where.assign(total, -1);
  w.basis.resize(m_);
  w.binv.assign(m_ * m_, 0.0);
  w.work_col.resize(m_);
  w.y.resize(m_);

  for (std::size_t j = 0; j < n_; ++j) {
    w.lb[j] = lower[j];
    w.ub[j] = upper[j];
    w.x[j] = lower[j];
  }
  for (std::size_t i = 0; i < m_; ++i) {
    const std::size_t s = n_ + i;
    w.lb[s] = 0.0;
    w.ub[s] = row_equality_[i] ? 0.0 : kInf;
  }

  // Sparse column access covering logicals and artificials. Artificial signs
  // are chosen after the start residual is known.
  std::vector<double> art_sign(m_, 1.0);
  auto for_col = [&](std::size_t j, auto&& fn) {
    if (j < n_) {
      for (int k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) {
        fn(static_cast<std::size_t>(col_row_[k]), col_val_[k]);
      }
    } else if (j < n_ + m_) {
      fn(j - n_, 1.0);
    } else {
      fn(j - n_ - m_, art_sign[j - n_ - m_]);
    }
  };

  // Start with every structural at its lower bound and logicals basic.
  std::vector<double> residual(rhs_);
  for (std::size_t j = 0; j < n_; ++j) {
    if (w.x[j] == 0.0) continue;
    for (int k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) {
      residual[static_cast<std::size_t>(col_row_[k])] -= col_val_[k] * w.x[j];
    }
  }

  bool need_phase1 = false;
  for (std::size_t i = 0; i < m_; ++i) {
    const std::size_t s = n_ + i;
    const bool ok = residual[i] >= w.lb[s] - kFeasTol &&
                    residual[i] <= w.ub[s] + kFeasTol;
    if (ok) {
      w.basis[i] = static_cast<int>(s);
      w.x[s] = residual[i];
    } else {
      // Artificial carries the start infeasibility of this row.
      const std::size_t a = n_ + m_ + i;
      art_sign[i] = residual[i] >= 0.0 ? 1.0 : -1.0;
      w.lb[a] = 0.0;
      w.ub[a] = kInf;
      w.basis[i] = static_cast<int>(a);
      w.x[a] = std::abs(residual[i]);
      w.x[s] = 0.0;  // logical nonbasic at lower bound
      need_phase1 = true;
    }
  }
  for (std::size_t i = 0; i < m_; ++i) {
    w.where[static_cast<std::size_t>(w.basis[i])] = static_cast<int>(i);
    w.binv[i * m_ + i] = 1.0 / (w.basis[i] >= static_cast<int>(n_ + m_)
                                    ? art_sign[i]
                                    : 1.0);
  }

  auto refactorize = [&]() {
    // Rebuild B column by column and invert with Gauss-Jordan.
    std::vector<double> mat(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for_col(static_cast<std::size_t>(w.basis[i]),
              [&](std::size_t r, double v) { mat[r * m_ + i] = v; });
    }
    std::vector<double>& inv = w.binv;
    std::fill(inv.begin(), inv.end(), 0.0);
    for (std::size_t i = 0; i < m_; ++i) inv[i * m_ + i] = 1.0;
    for (std::size_t col = 0; col < m_; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < m_; ++r) {
        if (std::abs(mat[r * m_ + col]) > std::abs(mat[piv * m_ + col])) {
          piv = r;
        }
      }
      if (std::abs(mat[piv * m_ + col]) < kPivotTol) return false;
      if (piv != col) {
        for (std::size_t c = 0; c < m_; ++c) {
          std::swap(mat[piv * m_ + c], mat[col * m_ + c]);
          std::swap(inv[piv * m_ + c], inv[col * m_ + c]);
        }
      }
      const double d = 1.0 / mat[col * m_ + col];
      for (std::size_t c = 0; c < m_; ++c) {
        mat[col * m_ + c] *= d;
        inv[col * m_ + c] *= d;
      }
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == col) continue;
        const double f = mat[r * m_ + col];
        if (f == 0.0) continue;
        for (std::size_t c = 0; c < m_; ++c) {
          mat[r * m_ + c] -= f * mat[col * m_ + c];
          inv[r * m_ + c] -= f * inv[col * m_ + c];
        }
      }
    }
    return true;
  };

  auto recompute_basics = [&]() {
    // x_B = B^-1 (b - sum of nonbasic columns at their value).
    std::vector<double> r(rhs_);
    for (std::size_t j = 0; j < total; ++j) {
      if (w.where[j] >= 0 || w.x[j] == 0.0) continue;
      for_col(j, [&](std::size_t row, double v) { r[row] -= v * w.x[j]; });
    }
    for (std::size_t i = 0; i < m_; ++i) {
      double xi = 0.0;
      for (std::size_t k = 0; k < m_; ++k) xi += w.binv[i * m_ + k] * r[k];
      w.x[static_cast<std::size_t>(w.basis[i])] = xi;
    }
  };

  auto run_phase = [&](bool phase1, std::size_t& iter_count,
                       std::size_t iter_start) -> LpStatus {
    const std::size_t bland_after = 5 * (m_ + total);
    const std::size_t iter_cap = 50 * (m_ + total) + 10000;
    int since_refactor = 0;

    while (true) {
      const std::size_t it = iter_start + iter_count;
      if (it >= iter_cap) return LpStatus::IterationLimit;
      const bool bland = it >= bland_after;

      // BTRAN: y = c_B' * B^-1.
      for (std::size_t k = 0; k < m_; ++k) {
        double yk = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
          const double cb = w.cost[static_cast<std::size_t>(w.basis[i])];
          if (cb != 0.0) yk += cb * w.binv[i * m_ + k];
        }
        w.y[k] = yk;
      }

      // Pricing: entering column with the best eligible reduced cost.
      int enter = -1;
      double best = 0.0;
      for (std::size_t j = 0; j < total; ++j) {
        if (w.where[j] >= 0) continue;
        if (w.ub[j] - w.lb[j] < kPivotTol) continue;  // fixed column
        if (!phase1 && j >= n_ + m_) continue;        // artificials retired
        double d = w.cost[j];
        for_col(j, [&](std::size_t row, double v) { d -= w.y[row] * v; });
        const bool eligible =
            w.at_upper[j] ? d < -kCostTol : d > kCostTol;
        if (!eligible) continue;
        if (bland) {
          enter = static_cast<int>(j);
          break;
        }
        const double score = std::abs(d);
        if (score > best + 1e-15) {
          best = score;
          enter = static_cast<int>(j);
        }
      }
      if (enter < 0) return LpStatus::Optimal;
      const std::size_t q = static_cast<std::size_t>(enter);

      // FTRAN: w = B^-1 * a_q.
      std::fill(w.work_col.begin(), w.work_col.end(), 0.0);
      for_col(q, [&](std::size_t row, double v) {
        for (std::size_t i = 0; i < m_; ++i) {
          w.work_col[i] += w.binv[i * m_ + row] * v;
        }
      });

      const double dir = w.at_upper[q] ? -1.0 : 1.0;

      // Ratio test: the entering variable moves by t >= 0 toward its other
      // bound; basic i moves by -dir * w_i * t.
      double t_max = w.ub[q] - w.lb[q];  // bound flip distance
      int leave_row = -1;
      char leave_to_upper = 0;
      double leave_pivot = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = dir * w.work_col[i];
        const std::size_t bj = static_cast<std::size_t>(w.basis[i]);
        double limit = kInf;
        char to_upper = 0;
        if (alpha > kPivotTol) {
          limit = (w.x[bj] - w.lb[bj]) / alpha;
        } else if (alpha < -kPivotTol) {
          if (w.ub[bj] < kInf) limit = (w.ub[bj] - w.x[bj]) / (-alpha);
          to_upper = 1;
        } else {
          continue;
        }
        if (limit < -1e-12) limit = 0.0;
        const bool better =
            limit < t_max - 1e-12 ||
            (limit < t_max + 1e-12 && leave_row >= 0 &&
             std::abs(w.work_col[i]) >
                 std::abs(leave_pivot) + 1e-12);
        if (better) {
          t_max = std::max(limit, 0.0);
          leave_row = static_cast<int>(i);
          leave_to_upper = to_upper;
          leave_pivot = w.work_col[i];
        }
      }
      if (t_max >= kInf) {
        throw Error("LP relaxation unbounded; the program is malformed");
      }

      // Apply the step.
      if (t_max > 0.0) {
        for (std::size_t i = 0; i < m_; ++i) {
          const std::size_t bj = static_cast<std::size_t>(w.basis[i]);
          w.x[bj] -= dir * w.work_col[i] * t_max;
        }
        w.x[q] += dir * t_max;
      }

      ++iter_count;
      if (leave_row < 0) {
        // Bound flip only.
        w.at_upper[q] = !w.at_upper[q];
        w.x[q] = w.at_upper[q] ? w.ub[q] : w.lb[q];
        continue;
      }

      // Basis change.
      const std::size_t r = static_cast<std::size_t>(leave_row);
      const std::size_t out = static_cast<std::size_t>(w.basis[r]);
      w.where[out] = -1;
      w.at_upper[out] = leave_to_upper;
      w.x[out] = leave_to_upper ? w.ub[out] : w.lb[out];
      w.basis[r] = enter;
      w.where[q] = static_cast<int>(r);

      const double pivot = w.work_col[r];
      if (std::abs(pivot) < kPivotTol) {
        if (!refactorize()) return LpStatus::IterationLimit;
        recompute_basics();
        since_refactor = 0;
        continue;
      }
      const double inv_pivot = 1.0 / pivot;
      for (std::size_t c = 0; c < m_; ++c) w.binv[r * m_ + c] *= inv_pivot;
      for (std::size_t i = 0; i < m_; ++i) {
        if (i == r) continue;
        const double f = w.work_col[i];
        if (f == 0.0) continue;
        for (std::size_t c = 0; c < m_; ++c) {
          w.binv[i * m_ + c] -= f * w.binv[r * m_ + c];
        }
      }
      if (++since_refactor >= kRefactorEvery) {
        if (!refactorize()) return LpStatus::IterationLimit;
        recompute_basics();
        since_refactor = 0;
      }
    }
  };

  LpSolution out;
  std::size_t iters = 0;

  if (need_phase1) {
    for (std::size_t i = 0; i < m_; ++i) w.cost[n_ + m_ + i] = -1.0;
    const LpStatus st = run_phase(true, iters, 0);
    double infeas = 0.0;
    for (std::size_t i = 0; i < m_; ++i) infeas += w.x[n_ + m_ + i];
    if (st == LpStatus::IterationLimit) {
      out.status = LpStatus::IterationLimit;
      out.x.assign(lower.begin(), lower.end());
      out.objective = -kInf;
      out.iterations = iters;
      return out;
    }
    double rhs_scale = 1.0;
    for (const double b : rhs_) rhs_scale += std::abs(b);
    if (infeas > kFeasTol * rhs_scale) {
      out.status = LpStatus::Infeasible;
      out.x.assign(lower.begin(), lower.end());
      out.objective = -kInf;
      out.iterations = iters;
      return out;
    }
    // Retire artificials: pin them to zero for phase 2.
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t a = n_ + m_ + i;
      w.ub[a] = 0.0;
      w.x[a] = 0.0;
      w.cost[a] = 0.0;
    }
  }

  for (std::size_t j = 0; j < n_; ++j) w.cost[j] = obj_[j];
  std::size_t phase2_iters = 0;
  const LpStatus st = run_phase(false, phase2_iters, iters);
  out.iterations = iters + phase2_iters;
  out.status = st == LpStatus::Optimal ? LpStatus::Optimal
                                       : LpStatus::IterationLimit;

  out.x.resize(n_);
  double obj = 0.0;
  for (std::size_t j = 0; j < n_; ++j) {
    double v = w.x[j];
    v = std::min(std::max(v, lower[j]), upper[j]);
    out.x[j] = v;
    obj += obj_[j] * v;
  }
  out.objective = obj;
  return out;
}

}  // namespace cardmatch
