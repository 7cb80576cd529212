#include "cardmatch/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cardmatch/csv.hpp"
#include "cardmatch/errors.hpp"
#include "cardmatch/linalg.hpp"
#include "cardmatch/log.hpp"

namespace cardmatch {

namespace {

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow.
double log1p_exp(double eta) {
  return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
}

double log_likelihood(const std::vector<double>& eta,
                      const std::vector<char>& y) {
  double ll = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i)
    ll += (y[i] ? eta[i] : 0.0) - log1p_exp(eta[i]);
  return ll;
}

}  // namespace

PropensityModel fit_logistic_propensity(const Dataset& dataset) {
  const std::size_t n = dataset.units.size();
  const std::size_t k = dataset.schema.size();
  if (k == 0) throw Error("propensity model needs at least one balance covariate");
  const std::size_t p = k + 1;  // intercept plus covariates

  std::vector<char> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = dataset.units[i].exposed;

  const auto x_of = [&](std::size_t i, std::size_t j) {
    return j == 0 ? 1.0 : dataset.units[i].covariates[j - 1];
  };

  PropensityModel model;
  model.coef.assign(p, 0.0);
  std::vector<double> eta(n, 0.0);
  double ll = log_likelihood(eta, y);
  model.ll_trace.push_back(ll);

  std::vector<double> grad(p), hess(p * p), step(p), trial(p), trial_eta(n);
  for (std::size_t iter = 0; iter < 100; ++iter) {
    // Gradient X^T (y - p) and Hessian X^T W X with W = p (1 - p).
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double pi = sigmoid(eta[i]);
      const double r = (y[i] ? 1.0 : 0.0) - pi;
      const double w = pi * (1.0 - pi);
      for (std::size_t a = 0; a < p; ++a) {
        const double xa = x_of(i, a);
        grad[a] += xa * r;
        for (std::size_t b = a; b < p; ++b)
          hess[a * p + b] += w * xa * x_of(i, b);
      }
    }
    // Conditioning ridge, not a penalty: scaled to the Hessian so a
    // uniformly shrinking H (separation) cannot stall the Newton direction.
    double trace = 0.0;
    for (std::size_t a = 0; a < p; ++a) trace += hess[a * p + a];
    const double damp =
        std::max(1e-6 * trace / static_cast<double>(p), 1e-12);
    for (std::size_t a = 0; a < p; ++a) {
      hess[a * p + a] += damp;
      for (std::size_t b = 0; b < a; ++b) hess[a * p + b] = hess[b * p + a];
    }

    model.grad_norm = 0.0;
    for (double g : grad) model.grad_norm = std::max(model.grad_norm, std::abs(g));
    if (model.grad_norm <= 1e-8) {
      model.converged = true;
      break;
    }

    if (!cholesky_solve(hess, grad, p, step))
      throw Error("propensity fit: singular weighted normal equations");

    // Step halving keeps the log-likelihood non-decreasing.
    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, scale *= 0.5) {
      for (std::size_t a = 0; a < p; ++a)
        trial[a] = model.coef[a] + scale * step[a];
      for (std::size_t i = 0; i < n; ++i) {
        double e = 0.0;
        for (std::size_t a = 0; a < p; ++a) e += trial[a] * x_of(i, a);
        trial_eta[i] = e;
      }
      const double trial_ll = log_likelihood(trial_eta, y);
      if (trial_ll >= ll) {
        model.coef = trial;
        eta = trial_eta;
        ll = trial_ll;
        accepted = true;
        break;
      }
    }
    model.iterations = iter + 1;
    const double prev_ll =
        model.ll_trace.empty() ? -HUGE_VAL : model.ll_trace.back();
    model.ll_trace.push_back(ll);
    if (!accepted) {
      // No uphill step exists at double precision: the likelihood ascent is
      // finished even though the gradient test never fired.
      model.converged = true;
      break;
    }

    bool blowup = false;
    for (double c : model.coef)
      if (std::abs(c) > 30.0) blowup = true;
    if (blowup) break;

    // Relative tolerance on the objective. The absolute gradient test above
    // is unreachable on large ill-conditioned fits, where the attainable
    // gradient floor grows with n; a vanishing likelihood gain is the
    // scale-free signal that the ascent is done.
    if (ll - prev_ll <= 1e-10 * (std::abs(ll) + 0.1)) {
      model.converged = true;
      break;
    }
  }

  // Separation: the optimizer is chasing an MLE at infinity. Either a
  // coefficient blew past 30, or the training loss is essentially zero
  // (perfect classification), which no overlapping data can produce; the
  // latter catches separation on unit-scale covariates, where the gradient
  // criterion is met near |coef| ~ 18-20 before any coefficient reaches 30.
  for (double c : model.coef)
    if (std::abs(c) > 30.0) model.separation = true;
  if (ll >= -1e-5) model.separation = true;

  model.logit = eta;
  model.score.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // sigmoid rounds to exactly 1.0 past eta ~ 37; clamp to keep the score
    // strictly inside (0, 1).
    model.score[i] = std::clamp(sigmoid(eta[i]), 1e-12, 1.0 - 1e-12);
  }
  if (model.separation)
    log_warn("propensity fit shows separation; scores are saturated");
  return model;
}

namespace {

struct ControlEntry {
  double logit;
  std::size_t unit;  // index into dataset.units
};

// Sorted control pool with linked-list deletion, so each treated unit can
// find its nearest unused control in O(log n + scan over used entries).
struct ControlPool {
  std::vector<ControlEntry> entries;  // sorted by (logit, id)
  std::vector<int> prev, next;
  std::vector<char> used;

  void build(const Dataset& dataset, const PropensityModel& model,
             const std::vector<std::size_t>& controls) {
    entries.clear();
    for (std::size_t u : controls) entries.push_back({model.logit[u], u});
    std::stable_sort(entries.begin(), entries.end(),
                     [&](const ControlEntry& a, const ControlEntry& b) {
                       if (a.logit != b.logit) return a.logit < b.logit;
                       return dataset.units[a.unit].id < dataset.units[b.unit].id;
                     });
    const int m = static_cast<int>(entries.size());
    prev.resize(entries.size());
    next.resize(entries.size());
    used.assign(entries.size(), 0);
    for (int i = 0; i < m; ++i) {
      prev[i] = i - 1;
      next[i] = i + 1 < m ? i + 1 : -1;
    }
  }

  // Nearest unused entry to the given logit; equal distances take the
  // smaller unit id. Returns -1 when empty.
  int nearest(double logit, const Dataset& dataset) const {
    if (entries.empty()) return -1;
    auto it = std::lower_bound(
        entries.begin(), entries.end(), logit,
        [](const ControlEntry& e, double v) { return e.logit < v; });
    int right = static_cast<int>(it - entries.begin());
    while (right != -1 && right < static_cast<int>(entries.size()) &&
           used[right])
      right = next[right];
    if (right >= static_cast<int>(entries.size())) right = -1;
    int left = right == -1 ? static_cast<int>(entries.size()) - 1
                           : prev[right];
    while (left != -1 && used[left]) left = prev[left];

    if (left == -1) return right;
    if (right == -1) return left;
    const double dl = std::abs(entries[left].logit - logit);
    const double dr = std::abs(entries[right].logit - logit);
    if (dl < dr) return left;
    if (dr < dl) return right;
    return dataset.units[entries[left].unit].id <
                   dataset.units[entries[right].unit].id
               ? left
               : right;
  }

  void take(int i) {
    used[i] = 1;
    if (prev[i] != -1) next[prev[i]] = next[i];
    if (next[i] != -1) prev[next[i]] = prev[i];
  }
};

}  // namespace

PsmResult greedy_nn_match(const Dataset& dataset, const PropensityModel& model,
                          double caliper_sd, bool respect_strata) {
  const std::size_t n = dataset.units.size();
  PsmResult result;

  // Caliper width in absolute logit units, from the full-sample SD.
  if (caliper_sd < 0.0) {
    result.caliper_width = std::numeric_limits<double>::infinity();
  } else {
    double mean = 0.0;
    for (double l : model.logit) mean += l;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double l : model.logit) ss += (l - mean) * (l - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    result.caliper_width = caliper_sd * sd;
  }

  // Treated units hardest to match first: descending score, id as the tie
  // rule so the order is total.
  std::vector<std::size_t> treated;
  for (std::size_t i = 0; i < n; ++i)
    if (dataset.units[i].exposed) treated.push_back(i);
  std::stable_sort(treated.begin(), treated.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (model.score[a] != model.score[b])
                       return model.score[a] > model.score[b];
                     return dataset.units[a].id < dataset.units[b].id;
                   });

  // One pool per stratum when strata are respected, else a single pool.
  std::vector<ControlPool> pools;
  std::vector<int> pool_of(n, 0);
  if (respect_strata) {
    pools.resize(dataset.strata.size());
    for (std::size_t s = 0; s < dataset.strata.size(); ++s) {
      pools[s].build(dataset, model, dataset.strata[s].controls);
      for (std::size_t u : dataset.strata[s].treated) pool_of[u] = static_cast<int>(s);
    }
  } else {
    std::vector<std::size_t> controls;
    for (std::size_t i = 0; i < n; ++i)
      if (!dataset.units[i].exposed) controls.push_back(i);
    pools.resize(1);
    pools[0].build(dataset, model, controls);
  }

  for (std::size_t t : treated) {
    ControlPool& pool = pools[static_cast<std::size_t>(pool_of[t])];
    const int hit = pool.nearest(model.logit[t], dataset);
    if (hit == -1 ||
        std::abs(pool.entries[hit].logit - model.logit[t]) >
            result.caliper_width) {
      ++result.excluded_treated;
      continue;
    }
    const std::size_t c = pool.entries[hit].unit;
    pool.take(hit);
    result.pairs.push_back({dataset.units[t].id, dataset.units[c].id,
                            model.logit[t], model.logit[c],
                            std::abs(model.logit[t] - model.logit[c])});
  }
  return result;
}

MatchSolution psm_to_solution(const PsmResult& result) {
  MatchSolution sol;
  for (const auto& p : result.pairs) {
    sol.treated_ids.push_back(p.treated_id);
    sol.control_ids.push_back(p.control_id);
  }
  sol.n = result.pairs.size();
  return sol;
}

std::string psm_pairs_to_csv(const PsmResult& result) {
  std::string out = "pair_id,treated_id,control_id,logit_treated,logit_control,distance\n";
  for (std::size_t i = 0; i < result.pairs.size(); ++i) {
    const PsmPair& p = result.pairs[i];
    out += std::to_string(i + 1);
    out += ',';
    out += csv_escape(p.treated_id);
    out += ',';
    out += csv_escape(p.control_id);
    out += ',';
    out += format_double(p.logit_t);
    out += ',';
    out += format_double(p.logit_c);
    out += ',';
    out += format_double(p.distance);
    out += '\n';
  }
  return out;
}

}  // namespace cardmatch
