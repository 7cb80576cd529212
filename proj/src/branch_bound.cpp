#include "cardmatch/branch_bound.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <thread>
#include <unordered_map>

#include "cardmatch/csv.hpp"
#include "cardmatch/errors.hpp"
#include "cardmatch/log.hpp"

namespace cardmatch {

namespace {

constexpr double kRowTol = 1e-9;
constexpr double kIntTol = 1e-6;

// Column-major view of the constraint rows.
struct Columns {
  std::vector<int> ptr, row;
  std::vector<double> val;

  explicit Columns(const SelectionProblem& p) {
    const std::size_t n = p.n_vars();
    std::vector<std::size_t> count(n, 0);
    for (const auto& r : p.rows) {
      for (const auto& [j, v] : r.coeffs) {
        (void)v;
        ++count[static_cast<std::size_t>(j)];
      }
    }
    ptr.assign(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) {
      ptr[j + 1] = ptr[j] + static_cast<int>(count[j]);
    }
    row.resize(ptr[n]);
    val.resize(ptr[n]);
    std::vector<int> fill(ptr.begin(), ptr.end() - 1);
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
      for (const auto& [j, v] : p.rows[i].coeffs) {
        const int at = fill[static_cast<std::size_t>(j)]++;
        row[at] = static_cast<int>(i);
        val[at] = v;
      }
    }
  }

  template <class F>
  void each(std::size_t j, F f) const {
    for (int k = ptr[j]; k < ptr[j + 1]; ++k) {
      f(static_cast<std::size_t>(row[k]), val[k]);
    }
  }
};

// Incremental row sums for a growing selection. min_pairs style rows (rhs
// below zero) only bind the finished selection, so admission checks skip
// them; verify_solution still covers them at the end.
struct RowState {
  const SelectionProblem* p;
  const Columns* cols;
  std::vector<double> lhs;
  std::vector<char> skip;

  RowState(const SelectionProblem& problem, const Columns& columns)
      : p(&problem), cols(&columns), lhs(problem.rows.size(), 0.0),
        skip(problem.rows.size(), 0) {
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
      if (!problem.rows[i].equality && problem.rows[i].rhs < 0.0) skip[i] = 1;
    }
  }

  void add(std::size_t j) {
    cols->each(j, [&](std::size_t i, double v) { lhs[i] += v; });
  }

  bool feasible_adding(const std::vector<std::size_t>& vars,
                       std::vector<double>& delta,
                       std::vector<int>& touched) const {
    touched.clear();
    for (std::size_t j : vars) {
      cols->each(j, [&](std::size_t i, double v) {
        if (delta[i] == 0.0) touched.push_back(static_cast<int>(i));
        delta[i] += v;
      });
    }
    bool ok = true;
    for (int ti : touched) {
      const std::size_t i = static_cast<std::size_t>(ti);
      if (skip[i]) continue;
      const double next = lhs[i] + delta[i];
      const auto& r = p->rows[i];
      if (r.equality ? std::abs(next - r.rhs) > kRowTol
                     : next > r.rhs + kRowTol) {
        ok = false;
        break;
      }
    }
    for (int ti : touched) delta[static_cast<std::size_t>(ti)] = 0.0;
    return ok;
  }
};

MatchSolution make_solution(const SelectionProblem& problem,
                            const Dataset& dataset,
                            std::vector<char> selected) {
  MatchSolution s;
  s.selected = std::move(selected);
  s.stratum_counts.assign(dataset.strata.size(), 0);
  for (std::size_t j = 0; j < problem.n_vars(); ++j) {
    if (!s.selected[j]) continue;
    const std::string& id = dataset.units[problem.var_unit[j]].id;
    if (problem.is_treated_var(j)) {
      s.treated_ids.push_back(id);
      if (problem.var_stratum[j] >= 0) {
        ++s.stratum_counts[static_cast<std::size_t>(problem.var_stratum[j])];
      }
    } else {
      s.control_ids.push_back(id);
    }
  }
  s.n = s.treated_ids.size();
  s.bound = static_cast<double>(s.n);
  return s;
}

double l2_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d += (a[k] - b[k]) * (a[k] - b[k]);
  }
  return d;
}

// Full-capacity completion: select min(T,C) pairs in every stratum, choosing
// the bigger side's members to track the smaller side's covariates. Returns
// the selection only if it verifies.
std::optional<std::vector<char>> quota_completion(
    const SelectionProblem& problem, const Dataset& dataset, bool chase_mean) {
  std::vector<char> selected(problem.n_vars(), 0);
  std::vector<std::vector<std::size_t>> stratum_t(dataset.strata.size());
  std::vector<std::vector<std::size_t>> stratum_c(dataset.strata.size());
  for (std::size_t j = 0; j < problem.n_vars(); ++j) {
    if (problem.var_fixed_zero[j] || problem.var_stratum[j] < 0) continue;
    auto& side = problem.is_treated_var(j) ? stratum_t : stratum_c;
    side[static_cast<std::size_t>(problem.var_stratum[j])].push_back(j);
  }

  const auto cov = [&](std::size_t j) -> const std::vector<double>& {
    return dataset.units[problem.var_unit[j]].covariates;
  };

  for (std::size_t s = 0; s < dataset.strata.size(); ++s) {
    const bool treated_small = stratum_t[s].size() <= stratum_c[s].size();
    const auto& small = treated_small ? stratum_t[s] : stratum_c[s];
    const auto& large = treated_small ? stratum_c[s] : stratum_t[s];
    if (small.empty()) continue;
    for (std::size_t j : small) selected[j] = 1;

    std::vector<char> used(large.size(), 0);
    if (chase_mean) {
      const std::size_t k_dim = dataset.schema.size();
      std::vector<double> rest(k_dim, 0.0);
      for (std::size_t j : small) {
        for (std::size_t k = 0; k < k_dim; ++k) rest[k] += cov(j)[k];
      }
      for (std::size_t picks = small.size(); picks > 0; --picks) {
        std::vector<double> mu(k_dim);
        for (std::size_t k = 0; k < k_dim; ++k) {
          mu[k] = rest[k] / static_cast<double>(picks);
        }
        std::size_t best = large.size();
        double best_d = 0.0;
        for (std::size_t c = 0; c < large.size(); ++c) {
          if (used[c]) continue;
          const double d = l2_dist(cov(large[c]), mu);
          if (best == large.size() || d < best_d - 1e-15) {
            best = c;
            best_d = d;
          }
        }
        used[best] = 1;
        selected[large[best]] = 1;
        for (std::size_t k = 0; k < k_dim; ++k) {
          rest[k] -= cov(large[best])[k];
        }
      }
    } else {
      for (std::size_t j : small) {
        std::size_t best = large.size();
        double best_d = 0.0;
        for (std::size_t c = 0; c < large.size(); ++c) {
          if (used[c]) continue;
          const double d = l2_dist(cov(large[c]), cov(j));
          if (best == large.size() || d < best_d - 1e-15) {
            best = c;
            best_d = d;
          }
        }
        used[best] = 1;
        selected[large[best]] = 1;
      }
    }
  }

  if (!verify_solution(problem, selected).pass) return std::nullopt;
  return selected;
}

struct PairCandidate {
  std::size_t t_var = 0;
  std::size_t c_var = 0;
  double frac = 0.0;
  const std::string* t_id = nullptr;
};

// Per-stratum completion at the given quotas: treated picked by descending
// LP mass, controls chasing the mean of what the picked treated still need.
// The result may fail verification; the caller repairs or discards it.
std::vector<char> completion_at(const SelectionProblem& problem,
                                const Dataset& dataset,
                                const std::vector<double>& lp_x,
                                const std::vector<std::size_t>& quota) {
  std::vector<char> selected(problem.n_vars(), 0);
  std::vector<std::vector<std::size_t>> stratum_t(dataset.strata.size());
  std::vector<std::vector<std::size_t>> stratum_c(dataset.strata.size());
  for (std::size_t j = 0; j < problem.n_vars(); ++j) {
    if (problem.var_fixed_zero[j] || problem.var_stratum[j] < 0) continue;
    auto& side = problem.is_treated_var(j) ? stratum_t : stratum_c;
    side[static_cast<std::size_t>(problem.var_stratum[j])].push_back(j);
  }
  const auto cov = [&](std::size_t j) -> const std::vector<double>& {
    return dataset.units[problem.var_unit[j]].covariates;
  };
  const std::size_t k_dim = dataset.schema.size();

  for (std::size_t s = 0; s < dataset.strata.size(); ++s) {
    const std::size_t q = std::min(
        {quota[s], stratum_t[s].size(), stratum_c[s].size()});
    if (q == 0) continue;
    std::sort(stratum_t[s].begin(), stratum_t[s].end(),
              [&](std::size_t a, std::size_t b) {
                if (lp_x[a] != lp_x[b]) return lp_x[a] > lp_x[b];
                return a < b;
              });
    std::vector<double> rest(k_dim, 0.0);
    for (std::size_t k = 0; k < q; ++k) {
      selected[stratum_t[s][k]] = 1;
      for (std::size_t d = 0; d < k_dim; ++d) {
        rest[d] += cov(stratum_t[s][k])[d];
      }
    }
    std::vector<char> used(stratum_c[s].size(), 0);
    for (std::size_t picks = q; picks > 0; --picks) {
      std::vector<double> mu(k_dim);
      for (std::size_t d = 0; d < k_dim; ++d) {
        mu[d] = rest[d] / static_cast<double>(picks);
      }
      std::size_t best = stratum_c[s].size();
      double best_d = 0.0;
      for (std::size_t c = 0; c < stratum_c[s].size(); ++c) {
        if (used[c]) continue;
        const double d = l2_dist(cov(stratum_c[s][c]), mu);
        if (best == stratum_c[s].size() || d < best_d - 1e-15) {
          best = c;
          best_d = d;
        }
      }
      used[best] = 1;
      selected[stratum_c[s][best]] = 1;
      for (std::size_t d = 0; d < k_dim; ++d) {
        rest[d] -= cov(stratum_c[s][best])[d];
      }
    }
  }
  return selected;
}

// Shrinks a same-counts-per-stratum selection until it verifies, each step
// dropping the treated/control pair whose removal cuts the summed row
// violation the most. Small instances only; false when repair bottoms out.
bool repair_selection(const SelectionProblem& problem, const Columns& cols,
                      std::vector<char>& selected) {
  std::vector<double> lhs(problem.rows.size(), 0.0);
  for (std::size_t j = 0; j < problem.n_vars(); ++j) {
    if (selected[j]) {
      cols.each(j, [&](std::size_t i, double v) { lhs[i] += v; });
    }
  }
  const auto viol = [&](std::size_t i, double value) {
    const auto& r = problem.rows[i];
    return r.equality ? std::abs(value - r.rhs)
                      : std::max(0.0, value - r.rhs);
  };

  std::vector<double> delta(problem.rows.size(), 0.0);
  std::vector<int> touched;
  for (std::size_t step = 0; step <= problem.n_vars(); ++step) {
    if (verify_solution(problem, selected).pass) return true;
    std::size_t best_t = 0, best_c = 0;
    double best_gain = 0.0;
    bool have = false;
    for (std::size_t t = 0; t < problem.n_treated; ++t) {
      if (!selected[t]) continue;
      for (std::size_t c = problem.n_treated; c < problem.n_vars(); ++c) {
        if (!selected[c] || problem.var_stratum[c] != problem.var_stratum[t]) {
          continue;
        }
        touched.clear();
        for (std::size_t j : {t, c}) {
          cols.each(j, [&](std::size_t i, double v) {
            if (delta[i] == 0.0) touched.push_back(static_cast<int>(i));
            delta[i] += v;
          });
        }
        double gain = 0.0;
        for (int ti : touched) {
          const std::size_t i = static_cast<std::size_t>(ti);
          gain += viol(i, lhs[i]) - viol(i, lhs[i] - delta[i]);
          delta[i] = 0.0;
        }
        if (!have || gain > best_gain + 1e-12) {
          best_t = t;
          best_c = c;
          best_gain = gain;
          have = true;
        }
      }
    }
    if (!have) return false;
    for (std::size_t j : {best_t, best_c}) {
      selected[j] = 0;
      cols.each(j, [&](std::size_t i, double v) { lhs[i] -= v; });
    }
  }
  return false;
}

}  // namespace

MatchSolution round_heuristic(const LpSolution& lp,
                              const SelectionProblem& problem,
                              const Dataset& dataset) {
  // Integral LP points pass through unchanged.
  bool integral = true;
  for (double v : lp.x) {
    if (std::abs(v - std::round(v)) > kIntTol) {
      integral = false;
      break;
    }
  }
  if (integral) {
    std::vector<char> selected(problem.n_vars(), 0);
    for (std::size_t j = 0; j < problem.n_vars(); ++j) {
      selected[j] = std::round(lp.x[j]) >= 1.0 ? 1 : 0;
    }
    if (verify_solution(problem, selected).pass) {
      return make_solution(problem, dataset, std::move(selected));
    }
  }

  const Columns cols(problem);
  RowState state(problem, cols);

  const auto id_of = [&](std::size_t j) -> const std::string& {
    return dataset.units[problem.var_unit[j]].id;
  };
  const auto frac_order = [&](std::size_t a, std::size_t b) {
    if (lp.x[a] != lp.x[b]) return lp.x[a] > lp.x[b];
    return id_of(a) < id_of(b);
  };

  // Within each stratum, rank both sides by fractional value and pair off
  // rank for rank.
  std::vector<std::vector<std::size_t>> stratum_t(dataset.strata.size());
  std::vector<std::vector<std::size_t>> stratum_c(dataset.strata.size());
  for (std::size_t j = 0; j < problem.n_vars(); ++j) {
    if (problem.var_fixed_zero[j] || problem.var_stratum[j] < 0) continue;
    auto& side = problem.is_treated_var(j) ? stratum_t : stratum_c;
    side[static_cast<std::size_t>(problem.var_stratum[j])].push_back(j);
  }
  std::vector<PairCandidate> pairs;
  for (std::size_t s = 0; s < dataset.strata.size(); ++s) {
    std::sort(stratum_t[s].begin(), stratum_t[s].end(), frac_order);
    std::sort(stratum_c[s].begin(), stratum_c[s].end(), frac_order);
    const std::size_t quota =
        std::min(stratum_t[s].size(), stratum_c[s].size());
    for (std::size_t k = 0; k < quota; ++k) {
      PairCandidate cand;
      cand.t_var = stratum_t[s][k];
      cand.c_var = stratum_c[s][k];
      cand.frac = std::min(lp.x[cand.t_var], lp.x[cand.c_var]);
      cand.t_id = &id_of(cand.t_var);
      pairs.push_back(cand);
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const PairCandidate& a, const PairCandidate& b) {
              if (a.frac != b.frac) return a.frac > b.frac;
              return *a.t_id < *b.t_id;
            });

  std::vector<char> admitted(pairs.size(), 0);
  std::vector<char> selected(problem.n_vars(), 0);
  std::vector<double> delta(problem.rows.size(), 0.0);
  std::vector<int> touched;
  std::vector<std::size_t> vars;

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (admitted[i]) continue;
      vars = {pairs[i].t_var, pairs[i].c_var};
      if (!state.feasible_adding(vars, delta, touched)) continue;
      state.add(pairs[i].t_var);
      state.add(pairs[i].c_var);
      selected[pairs[i].t_var] = 1;
      selected[pairs[i].c_var] = 1;
      admitted[i] = 1;
      changed = true;
    }
  }

  // Complementary-pair lookahead: two pairs whose imbalances cancel can be
  // admissible together while each alone is not.
  if (pairs.size() <= 5000) {
    changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (admitted[i]) continue;
        for (std::size_t j = i + 1; j < pairs.size(); ++j) {
          if (admitted[j]) continue;
          if (pairs[i].t_var == pairs[j].t_var ||
              pairs[i].c_var == pairs[j].c_var) {
            continue;
          }
          vars = {pairs[i].t_var, pairs[i].c_var, pairs[j].t_var,
                  pairs[j].c_var};
          if (!state.feasible_adding(vars, delta, touched)) continue;
          for (std::size_t v : vars) {
            state.add(v);
            selected[v] = 1;
          }
          admitted[i] = 1;
          admitted[j] = 1;
          changed = true;
          break;
        }
      }
    }
  }

  if (!verify_solution(problem, selected).pass) {
    // min_pairs can leave the greedy result short; report an empty selection
    // rather than an infeasible one.
    std::fill(selected.begin(), selected.end(), 0);
  }

  // Pair-at-a-time admission cannot start when the tolerance scales with the
  // selection size, so on small instances also try group-level completions
  // shrunk until they verify, and keep the largest survivor.
  if (problem.n_vars() <= 256) {
    const auto n_of = [&](const std::vector<char>& sel) {
      std::size_t n = 0;
      for (std::size_t t = 0; t < problem.n_treated; ++t) n += sel[t];
      return n;
    };
    std::size_t best_n = n_of(selected);

    std::vector<std::size_t> capacity(dataset.strata.size(), 0);
    std::vector<double> mass(dataset.strata.size(), 0.0);
    for (std::size_t s = 0; s < dataset.strata.size(); ++s) {
      capacity[s] = std::min(stratum_t[s].size(), stratum_c[s].size());
    }
    for (std::size_t t = 0; t < problem.n_treated; ++t) {
      if (problem.var_stratum[t] >= 0) {
        mass[static_cast<std::size_t>(problem.var_stratum[t])] += lp.x[t];
      }
    }
    std::vector<std::size_t> lp_quota(dataset.strata.size());
    for (std::size_t s = 0; s < dataset.strata.size(); ++s) {
      lp_quota[s] = std::min(
          capacity[s], static_cast<std::size_t>(std::llround(mass[s])));
    }

    for (const auto& quota : {capacity, lp_quota}) {
      std::vector<char> cand = completion_at(problem, dataset, lp.x, quota);
      if (repair_selection(problem, cols, cand) && n_of(cand) > best_n) {
        best_n = n_of(cand);
        selected = std::move(cand);
      }
    }
  }
  return make_solution(problem, dataset, std::move(selected));
}

std::size_t enumerate_oracle(const SelectionProblem& problem) {
  const std::size_t n = problem.n_vars();
  if (n > 26) throw TooLargeError(n);
  const std::size_t nt = problem.n_treated;
  const std::size_t nc = problem.n_controls;

  int n_strata = 0;
  for (int s : problem.var_stratum) n_strata = std::max(n_strata, s + 1);
  if (n_strata > 16) throw Error("enumeration oracle limited to 16 strata");

  std::vector<std::size_t> ineq_rows;
  for (std::size_t i = 0; i < problem.rows.size(); ++i) {
    if (!problem.rows[i].equality) ineq_rows.push_back(i);
  }
  const std::size_t mi = ineq_rows.size();

  // Per-variable contribution to each inequality row.
  std::vector<double> contrib(n * mi, 0.0);
  for (std::size_t q = 0; q < mi; ++q) {
    for (const auto& [j, v] : problem.rows[ineq_rows[q]].coeffs) {
      contrib[static_cast<std::size_t>(j) * mi + q] = v;
    }
  }

  const auto side_tables = [&](std::size_t count, std::size_t var_base) {
    struct Tables {
      std::vector<double> lhs;        // mask -> per-row sums
      std::vector<std::uint64_t> sig; // mask -> packed per-stratum counts
      std::vector<char> dead;        // mask touches a fixed-zero variable
    } t;
    const std::size_t total = std::size_t{1} << count;
    t.lhs.assign(total * mi, 0.0);
    t.sig.assign(total, 0);
    t.dead.assign(total, 0);
    for (std::size_t mask = 1; mask < total; ++mask) {
      const std::size_t bit = static_cast<std::size_t>(
          std::countr_zero(mask));
      const std::size_t rest = mask & (mask - 1);
      const std::size_t j = var_base + bit;
      t.dead[mask] = t.dead[rest] | problem.var_fixed_zero[j];
      t.sig[mask] =
          t.sig[rest] +
          (problem.var_stratum[j] >= 0
               ? (std::uint64_t{1} << (4 * problem.var_stratum[j]))
               : 0);
      for (std::size_t q = 0; q < mi; ++q) {
        t.lhs[mask * mi + q] = t.lhs[rest * mi + q] + contrib[j * mi + q];
      }
    }
    return t;
  };

  const auto treated = side_tables(nt, 0);
  const auto controls = side_tables(nc, nt);

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_sig;
  for (std::size_t mask = 0; mask < (std::size_t{1} << nc); ++mask) {
    if (controls.dead[mask]) continue;
    by_sig[controls.sig[mask]].push_back(mask);
  }

  std::vector<std::vector<std::size_t>> by_count(nt + 1);
  for (std::size_t mask = 0; mask < (std::size_t{1} << nt); ++mask) {
    if (treated.dead[mask]) continue;
    by_count[static_cast<std::size_t>(std::popcount(mask))].push_back(mask);
  }

  for (std::size_t k = nt + 1; k-- > 0;) {
    for (std::size_t tmask : by_count[k]) {
      const auto it = by_sig.find(treated.sig[tmask]);
      if (it == by_sig.end()) continue;
      for (std::size_t cmask : it->second) {
        bool ok = true;
        for (std::size_t q = 0; q < mi; ++q) {
          const double lhs =
              treated.lhs[tmask * mi + q] + controls.lhs[cmask * mi + q];
          if (lhs > problem.rows[ineq_rows[q]].rhs + kRowTol) {
            ok = false;
            break;
          }
        }
        if (ok) return k;
      }
    }
  }
  throw Error("no feasible selection exists (min_pairs too high)");
}

namespace {

struct Node {
  std::vector<std::pair<int, char>> fixings;
  double bound = 0.0;
  bool open = true;
};

struct NodeRef {
  double bound;
  std::size_t id;
  bool operator<(const NodeRef& o) const {
    if (bound != o.bound) return bound < o.bound;  // max-heap on bound
    return id > o.id;                              // then lowest id first
  }
};

}  // namespace

MatchSolution branch_and_bound(const SelectionProblem& problem,
                               const Dataset& dataset,
                               const SolveLimits& limits,
                               std::string* log_out) {
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };
  std::string log;
  const auto say = [&](const std::string& line) {
    log_info(line);
    log += line;
    log += '\n';
  };

  bool has_min_pairs = false;
  for (const auto& r : problem.rows) {
    if (!r.equality && r.rhs < 0.0) has_min_pairs = true;
  }

  // Capacity bound: no selection can pair more than min(T,C) per stratum.
  std::vector<std::size_t> cap_t(dataset.strata.size(), 0);
  std::vector<std::size_t> cap_c(dataset.strata.size(), 0);
  for (std::size_t j = 0; j < problem.n_vars(); ++j) {
    if (problem.var_fixed_zero[j] || problem.var_stratum[j] < 0) continue;
    auto& cap = problem.is_treated_var(j) ? cap_t : cap_c;
    ++cap[static_cast<std::size_t>(problem.var_stratum[j])];
  }
  std::size_t capacity = 0;
  for (std::size_t s = 0; s < dataset.strata.size(); ++s) {
    capacity += std::min(cap_t[s], cap_c[s]);
  }

  MatchSolution best;
  bool have = false;
  if (!has_min_pairs) {
    best = make_solution(problem, dataset,
                         std::vector<char>(problem.n_vars(), 0));
    have = true;
  }
  const auto offer = [&](MatchSolution&& cand, const char* who) {
    if (!verify_solution(problem, cand.selected).pass) return;
    if (!have || cand.n > best.n) {
      best = std::move(cand);
      have = true;
      say("incumbent n=" + std::to_string(best.n) + " (" + who + ")");
    }
  };

  // Full-capacity completions certify full retention without any LP work.
  for (const bool chase : {false, true}) {
    if (have && best.n == capacity) break;
    if (auto sel = quota_completion(problem, dataset, chase)) {
      offer(make_solution(problem, dataset, std::move(*sel)),
            chase ? "mean completion" : "nearest completion");
    }
  }
  if (have && best.n == capacity) {
    best.bound = static_cast<double>(capacity);
    best.gap = 0.0;
    best.nodes = 0;
    best.seed = limits.seed;
    best.solve_seconds = elapsed();
    say("optimal n=" + std::to_string(best.n) + " at capacity bound, 0 nodes");
    if (log_out) *log_out = log;
    return best;
  }

  const LpSolver solver(problem);
  const std::vector<double> root_lo = solver.root_lower();
  const std::vector<double> root_hi = solver.root_upper();

  std::vector<Node> nodes(1);
  nodes[0].bound = static_cast<double>(capacity);
  std::priority_queue<NodeRef> queue;
  queue.push({nodes[0].bound, 0});

  const auto pruned = [&](double bound) {
    if (!have) return false;
    const double inc = static_cast<double>(best.n);
    return bound <= inc + limits.gap_abs - 1e-9 || bound < inc + 1.0 - 1e-9;
  };
  const int threads = std::max(1, limits.threads);
  std::size_t explored = 0;
  bool hit_limit = false;

  struct Eval {
    std::size_t id;
    LpSolution lp;
  };

  while (!queue.empty()) {
    if (elapsed() > limits.time_s) {
      hit_limit = true;
      say("time limit reached after " + std::to_string(explored) + " nodes");
      break;
    }

    std::vector<Eval> batch;
    while (!queue.empty() && batch.size() < static_cast<std::size_t>(threads)) {
      const NodeRef ref = queue.top();
      queue.pop();
      if (pruned(ref.bound)) {
        nodes[ref.id].open = false;
        continue;
      }
      batch.push_back({ref.id, {}});
    }
    if (batch.empty()) continue;

    const auto evaluate = [&](Eval& e) {
      std::vector<double> lo = root_lo;
      std::vector<double> hi = root_hi;
      for (const auto& [j, v] : nodes[e.id].fixings) {
        if (v) lo[static_cast<std::size_t>(j)] = 1.0;
        else hi[static_cast<std::size_t>(j)] = 0.0;
      }
      e.lp = solver.solve(lo, hi);
    };
    if (batch.size() == 1) {
      evaluate(batch[0]);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = 1; i < batch.size(); ++i) {
        pool.emplace_back(evaluate, std::ref(batch[i]));
      }
      evaluate(batch[0]);
      for (auto& t : pool) t.join();
    }

    // Results are applied strictly in pop order, so the search trajectory
    // does not depend on the thread count.
    for (Eval& e : batch) {
      nodes[e.id].open = false;
      const std::vector<std::pair<int, char>> parent_fixings =
          nodes[e.id].fixings;
      const double parent_bound = nodes[e.id].bound;
      ++explored;
      if (e.lp.status == LpStatus::Infeasible) continue;
      double beta = e.lp.objective;
      if (e.lp.status == LpStatus::IterationLimit) {
        // The LP point is feasible but its objective is not a proven bound;
        // fall back to the inherited bound to keep pruning sound.
        say("node " + std::to_string(e.id) + ": LP iteration limit");
        hit_limit = true;
        beta = parent_bound;
      }
      const double node_bound = std::floor(beta + kIntTol);
      if (pruned(node_bound)) continue;

      offer(round_heuristic(e.lp, problem, dataset), "rounding");
      if (pruned(node_bound)) continue;

      int branch_var = -1;
      double best_frac = 2.0;
      for (std::size_t j = 0; j < e.lp.x.size(); ++j) {
        const double f = std::abs(e.lp.x[j] - 0.5);
        if (f < 0.5 - kIntTol && f < best_frac - 1e-12) {
          best_frac = f;
          branch_var = static_cast<int>(j);
        }
      }
      if (branch_var < 0) {
        // Integral but not captured by the incumbent update above: branch on
        // the first variable still free at this node to keep the proof exact.
        std::vector<char> fixed(problem.n_vars(), 0);
        for (const auto& [j, v] : parent_fixings) {
          (void)v;
          fixed[static_cast<std::size_t>(j)] = 1;
        }
        for (std::size_t j = 0; j < problem.n_vars(); ++j) {
          if (!fixed[j] && !problem.var_fixed_zero[j]) {
            branch_var = static_cast<int>(j);
            break;
          }
        }
        if (branch_var < 0) continue;  // fully fixed leaf
        const std::vector<char> sel = [&] {
          std::vector<char> s(problem.n_vars(), 0);
          for (std::size_t j = 0; j < e.lp.x.size(); ++j) {
            s[j] = e.lp.x[j] > 0.5 ? 1 : 0;
          }
          return s;
        }();
        if (verify_solution(problem, sel).pass) {
          offer(make_solution(problem, dataset, sel), "leaf");
          continue;
        }
      }

      for (const char value : {char(1), char(0)}) {
        Node child;
        child.fixings = parent_fixings;
        child.fixings.emplace_back(branch_var, value);
        child.bound = beta;
        nodes.push_back(std::move(child));
        queue.push({beta, nodes.size() - 1});
      }
    }
  }

  if (!have) {
    throw Error(hit_limit
                    ? "stopped before any selection met the constraints"
                    : "no selection satisfies the constraints (min_pairs)");
  }

  double bound = static_cast<double>(best.n);
  if (hit_limit) {
    while (!queue.empty()) {
      const NodeRef ref = queue.top();
      queue.pop();
      if (nodes[ref.id].open) {
        bound = std::max(bound, std::floor(ref.bound + kIntTol));
        break;  // queue is bound-ordered; the top open node dominates
      }
    }
  }
  best.bound = bound;
  best.gap = bound - static_cast<double>(best.n);
  best.hit_limit = hit_limit && best.gap > limits.gap_abs;
  best.nodes = explored;
  best.seed = limits.seed;
  best.solve_seconds = elapsed();
  say((best.gap <= limits.gap_abs ? "optimal n=" : "incumbent n=") +
      std::to_string(best.n) + " bound=" + format_double(best.bound) +
      " gap=" + format_double(best.gap) + " nodes=" + std::to_string(explored));
  if (log_out) *log_out = log;
  return best;
}

}  // namespace cardmatch
