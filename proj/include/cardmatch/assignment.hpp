#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace cardmatch {

struct Assignment {
  std::vector<int> row_to_col;
  std::vector<double> u, v;  // optimal duals: cost(i,j) >= u[i] + v[j]
  double total = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix by shortest
/// augmenting paths. `cost(i, j)` is called lazily, so no matrix needs to be
/// materialized. Deterministic for fixed inputs.
template <class Cost>
Assignment solve_assignment(std::size_t n, const Cost& cost) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based internally; p[j] is the row matched to column j, p[0] the row
  // currently seeking a column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = static_cast<int>(i);
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = static_cast<std::size_t>(p[j0]);
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<int>(j0);
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[static_cast<std::size_t>(p[j])] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = static_cast<std::size_t>(way[j0]);
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.row_to_col.assign(n, -1);
  out.u.assign(n, 0.0);
  out.v.assign(n, 0.0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] > 0) out.row_to_col[static_cast<std::size_t>(p[j] - 1)] =
        static_cast<int>(j - 1);
  }
  for (std::size_t i = 0; i < n; ++i) out.u[i] = u[i + 1];
  for (std::size_t j = 0; j < n; ++j) out.v[j] = v[j + 1];
  for (std::size_t i = 0; i < n; ++i) {
    out.total += cost(i, static_cast<std::size_t>(out.row_to_col[i]));
  }
  return out;
}

/// Rewire an optimal assignment to the lexicographically smallest matching
/// (rows in order, each taking the lowest column it can) among all matchings
/// of equal cost. Every minimum-cost matching uses only edges that are tight
/// under the optimal duals, and any perfect matching inside that subgraph is
/// itself minimum-cost, so the search never leaves the optimum. Skipped when
/// the tight subgraph is too dense to afford the rewiring passes.
template <class Cost>
void lexicographic_refine(std::size_t n, const Cost& cost, Assignment& a) {
  if (n <= 1) return;
  constexpr double kTightTol = 1e-9;

  std::vector<std::vector<int>> adj(n);
  std::size_t edges = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool matched = a.row_to_col[i] == static_cast<int>(j);
      if (matched || cost(i, j) - a.u[i] - a.v[j] <= kTightTol) {
        adj[i].push_back(static_cast<int>(j));
        ++edges;
      }
    }
  }
  if (n > 128 && edges > 8 * n) return;

  std::vector<int> match_rc = a.row_to_col;
  std::vector<int> match_cr(n, -1);
  for (std::size_t i = 0; i < n; ++i) match_cr[match_rc[i]] = static_cast<int>(i);

  std::vector<char> locked_col(n, 0);
  std::vector<char> visited(n, 0);

  // Kuhn-style augmenting search over unlocked tight edges.
  const auto augment = [&](auto&& self, int row) -> bool {
    for (int j : adj[static_cast<std::size_t>(row)]) {
      if (locked_col[j] || visited[j]) continue;
      visited[j] = 1;
      if (match_cr[j] < 0 || self(self, match_cr[j])) {
        match_cr[j] = row;
        match_rc[static_cast<std::size_t>(row)] = j;
        return true;
      }
    }
    return false;
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (int j : adj[i]) {
      if (j >= match_rc[i]) break;  // adj is ascending; no improvement left
      if (locked_col[j]) continue;
      const std::vector<int> save_rc = match_rc;
      const std::vector<int> save_cr = match_cr;
      const int displaced = match_cr[j];
      const int freed = match_rc[i];  // becomes the open end of the rewire
      match_rc[i] = j;
      match_cr[j] = static_cast<int>(i);
      match_cr[static_cast<std::size_t>(freed)] = -1;
      match_rc[static_cast<std::size_t>(displaced)] = -1;
      std::fill(visited.begin(), visited.end(), 0);
      visited[j] = 1;  // column j is claimed by row i for this attempt
      if (augment(augment, displaced)) break;
      match_rc = save_rc;
      match_cr = save_cr;
    }
    locked_col[match_rc[i]] = 1;
  }
  a.row_to_col = std::move(match_rc);
}

}  // namespace cardmatch
