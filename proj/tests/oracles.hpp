#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

namespace testutil {

struct MatchingOracle {
  double total = 0.0;
  std::vector<int> row_to_col;  // lexicographically smallest optimum
};

// Exhaustive minimum-cost perfect matching via std::next_permutation, which
// enumerates permutations in lexicographic order, so the first one attaining
// the minimum is also the lexicographically smallest optimal assignment.
// Usable up to n = 8 or so.
template <class Cost>
MatchingOracle min_matching_bruteforce(std::size_t n, const Cost& cost) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  MatchingOracle best;
  bool have = false;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
    if (!have || total < best.total - 1e-9) {
      best.total = total;
      best.row_to_col = perm;
      have = true;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Composite Simpson integration with a fixed even interval count.
template <class F>
double simpson(const F& f, double a, double b, int intervals = 20000) {
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int i = 1; i < intervals; ++i)
    sum += f(a + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

// Standard normal CDF by direct quadrature of the density; error well
// below 1e-12 for |x| <= 8.
inline double normal_cdf_oracle(double x) {
  const auto density = [](double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * 3.14159265358979323846);
  };
  if (x < 0.0) return 0.5 - simpson(density, x, 0.0);
  return 0.5 + simpson(density, 0.0, x);
}

// Student t CDF by quadrature of the density with lgamma normalization.
inline double t_cdf_oracle(double t, double df) {
  const double ln_norm = std::lgamma(0.5 * (df + 1.0)) -
                         std::lgamma(0.5 * df) -
                         0.5 * std::log(df * 3.14159265358979323846);
  const auto density = [&](double u) {
    return std::exp(ln_norm - 0.5 * (df + 1.0) * std::log1p(u * u / df));
  };
  if (t < 0.0) return 0.5 - simpson(density, t, 0.0);
  return 0.5 + simpson(density, 0.0, t);
}

// Profile log-likelihood of a one-covariate logistic model at slope b, with
// the intercept solved by bisection of its monotone score equation.
inline double profile_loglik(const std::vector<double>& x,
                             const std::vector<char>& y, double b,
                             double* a_out = nullptr) {
  double sum_y = 0.0;
  for (char v : y) sum_y += v;
  const auto resid = [&](double a) {
    double s = 0.0;
    for (double xi : x) s += 1.0 / (1.0 + std::exp(-(a + b * xi)));
    return s - sum_y;
  };
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (resid(mid) > 0.0 ? hi : lo) = mid;
  }
  const double a = 0.5 * (lo + hi);
  if (a_out) *a_out = a;
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double eta = a + b * x[i];
    ll += (y[i] ? eta : 0.0) -
          (std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))));
  }
  return ll;
}

// Maximum-likelihood slope by staged grid search on the profile likelihood:
// scan a fixed grid, zoom around the best cell, repeat. Resolution after the
// final stage is 4e-7, comfortably inside a 1e-4 comparison.
inline double grid_search_mle(const std::vector<double>& x,
                              const std::vector<char>& y) {
  double lo = -20.0, hi = 20.0;
  double best_b = 0.0;
  for (int stage = 0; stage < 4; ++stage) {
    const double step = (hi - lo) / 100.0;
    double best_ll = -1e300;
    for (int i = 0; i <= 100; ++i) {
      const double b = lo + step * i;
      const double ll = profile_loglik(x, y, b);
      if (ll > best_ll) {
        best_ll = ll;
        best_b = b;
      }
    }
    lo = best_b - step;
    hi = best_b + step;
  }
  return best_b;
}

// Maximum-likelihood slope by golden-section search on the profile
// likelihood, independent of the Newton path the fitter takes.
inline double golden_section_mle(const std::vector<double>& x,
                                 const std::vector<char>& y) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = -20.0, hi = 20.0;
  double c = hi - phi * (hi - lo);
  double d = lo + phi * (hi - lo);
  double fc = profile_loglik(x, y, c);
  double fd = profile_loglik(x, y, d);
  for (int it = 0; it < 300; ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = profile_loglik(x, y, c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = profile_loglik(x, y, d);
    }
  }
  return 0.5 * (lo + hi);
}

// Exact two-sided McNemar p-value by integer Pascal-triangle summation,
// exact in double for b + c <= 25.
inline double mcnemar_exact_oracle(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  std::vector<std::uint64_t> row{1};  // binomial row, built incrementally
  for (std::size_t i = 1; i <= n; ++i) {
    std::vector<std::uint64_t> next(i + 1, 1);
    for (std::size_t j = 1; j < i; ++j) next[j] = row[j - 1] + row[j];
    row = std::move(next);
  }
  std::uint64_t tail = 0;
  for (std::size_t i = 0; i <= std::min(b, c); ++i) tail += row[i];
  const double p = 2.0 * std::ldexp(static_cast<double>(tail),
                                    -static_cast<int>(n));
  return std::min(1.0, p);
}

}  // namespace testutil
