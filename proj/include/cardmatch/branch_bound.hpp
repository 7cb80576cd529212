#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardmatch/dataset.hpp"
#include "cardmatch/problem.hpp"
#include "cardmatch/simplex.hpp"

namespace cardmatch {

struct MatchSolution {
  std::vector<char> selected;  // one 0/1 per problem variable
  std::vector<std::string> treated_ids;
  std::vector<std::string> control_ids;
  std::size_t n = 0;                        // matched pairs
  std::vector<std::size_t> stratum_counts;  // pairs per stratum
  double bound = 0.0;                       // proven upper bound on n
  double gap = 0.0;                         // bound - n
  bool hit_limit = false;                   // stopped on time or iterations
  std::size_t nodes = 0;
  double solve_seconds = 0.0;
  std::uint64_t seed = 0;
};

struct SolveLimits {
  double time_s = 600.0;
  double gap_abs = 0.0;
  int threads = 1;
  std::uint64_t seed = 0;
};

/// Greedy rounding of an LP point. Integral solutions pass through as-is;
/// fractional ones are rounded by admitting within-stratum treated/control
/// pairs in decreasing fractional-value order while every constraint row
/// stays satisfied, with a two-pair lookahead on small instances. Small
/// instances additionally try capacity- and LP-quota completions shrunk
/// pair by pair until they verify, keeping the largest survivor. The result
/// always verifies (worst case n = 0).
MatchSolution round_heuristic(const LpSolution& lp,
                              const SelectionProblem& problem,
                              const Dataset& dataset);

/// Best-first branch and bound on the LP relaxation. Deterministic: node
/// order is (bound, creation index), branching picks the most fractional
/// variable with ties to the lowest index, and parallel workers only batch
/// LP evaluations while results are applied in serial order.
MatchSolution branch_and_bound(const SelectionProblem& problem,
                               const Dataset& dataset,
                               const SolveLimits& limits,
                               std::string* log_out = nullptr);

/// Exhaustive optimum for testing. Enumerates every equal-count-per-stratum
/// selection; requires n_vars <= 26.
std::size_t enumerate_oracle(const SelectionProblem& problem);

}  // namespace cardmatch
