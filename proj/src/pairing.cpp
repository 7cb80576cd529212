#include "cardmatch/pairing.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "cardmatch/assignment.hpp"
#include "cardmatch/csv.hpp"
#include "cardmatch/errors.hpp"
#include "cardmatch/log.hpp"

namespace cardmatch {

double pair_distance(const Unit& a, const Unit& b, PairMetric metric) {
  double acc = 0.0;
  const std::size_t k = a.covariates.size();
  for (std::size_t i = 0; i < k; ++i) {
    const double d = a.covariates[i] - b.covariates[i];
    acc += metric == PairMetric::L1 ? std::abs(d) : d * d;
  }
  return metric == PairMetric::L1 ? acc : std::sqrt(acc);
}

std::vector<double> distance_matrix(const std::vector<const Unit*>& treated,
                                    const std::vector<const Unit*>& controls,
                                    PairMetric metric) {
  std::vector<double> m(treated.size() * controls.size());
  for (std::size_t i = 0; i < treated.size(); ++i)
    for (std::size_t j = 0; j < controls.size(); ++j)
      m[i * controls.size() + j] =
          pair_distance(*treated[i], *controls[j], metric);
  return m;
}

namespace {

// Selected units of one side of one stratum, sorted by id so the assignment
// row/column order (and therefore the lexicographic tie rule) is stable.
std::vector<const Unit*> selected_side(const Dataset& dataset,
                                       const std::vector<std::size_t>& members,
                                       const std::vector<char>& picked) {
  std::vector<const Unit*> side;
  for (std::size_t u : members)
    if (picked[u]) side.push_back(&dataset.units[u]);
  std::sort(side.begin(), side.end(),
            [](const Unit* a, const Unit* b) { return a->id < b->id; });
  return side;
}

struct StratumPairs {
  std::vector<MatchedPair> pairs;
  double distance = 0.0;
};

StratumPairs pair_stratum(const Dataset& dataset, std::size_t s,
                          const std::vector<char>& picked, PairMetric metric) {
  const Stratum& st = dataset.strata[s];
  const auto treated = selected_side(dataset, st.treated, picked);
  const auto controls = selected_side(dataset, st.controls, picked);
  if (treated.size() != controls.size())
    throw UnbalancedStratumError(st.label, treated.size(), controls.size());

  StratumPairs out;
  const std::size_t n = treated.size();
  if (n == 0) return out;

  const auto cost = [&](std::size_t i, std::size_t j) {
    return pair_distance(*treated[i], *controls[j], metric);
  };
  Assignment a = solve_assignment(n, cost);
  lexicographic_refine(n, cost, a);

  out.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Unit& c = *controls[static_cast<std::size_t>(a.row_to_col[i])];
    const double d = cost(i, static_cast<std::size_t>(a.row_to_col[i]));
    out.pairs.push_back({treated[i]->id, c.id, s, d});
    out.distance += d;
  }
  return out;
}

}  // namespace

PairSet pair_within_strata(const MatchSolution& solution,
                           const Dataset& dataset, PairMetric metric,
                           int threads) {
  std::vector<char> picked(dataset.units.size(), 0);
  for (const auto& id : solution.treated_ids) {
    const int u = dataset.unit_index(id);
    if (u < 0) throw Error("selected treated id '" + id + "' is not in the dataset");
    picked[static_cast<std::size_t>(u)] = 1;
  }
  for (const auto& id : solution.control_ids) {
    const int u = dataset.unit_index(id);
    if (u < 0) throw Error("selected control id '" + id + "' is not in the dataset");
    picked[static_cast<std::size_t>(u)] = 1;
  }

  const std::size_t n_strata = dataset.strata.size();
  std::vector<StratumPairs> per_stratum(n_strata);

  const int workers =
      std::max(1, std::min<int>(threads, static_cast<int>(n_strata)));
  if (workers <= 1) {
    for (std::size_t s = 0; s < n_strata; ++s)
      per_stratum[s] = pair_stratum(dataset, s, picked, metric);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t s = next.fetch_add(1);
          if (s >= n_strata) return;
          try {
            per_stratum[s] = pair_stratum(dataset, s, picked, metric);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  PairSet out;
  out.stratum_distance.assign(n_strata, 0.0);
  for (std::size_t s = 0; s < n_strata; ++s) {
    out.stratum_distance[s] = per_stratum[s].distance;
    out.total_distance += per_stratum[s].distance;
    for (auto& p : per_stratum[s].pairs) out.pairs.push_back(std::move(p));
  }
  log_info("paired " + std::to_string(out.pairs.size()) +
           " treated units, total distance " +
           format_double(out.total_distance));
  return out;
}

bool exchange_stable(const PairSet& pairs, const Dataset& dataset,
                     PairMetric metric) {
  // Swapping partners inside a stratum must never strictly improve the total.
  for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs.pairs.size(); ++j) {
      const MatchedPair& p = pairs.pairs[i];
      const MatchedPair& q = pairs.pairs[j];
      if (p.stratum != q.stratum) continue;
      const Unit& ti = dataset.by_id(p.treated_id);
      const Unit& tj = dataset.by_id(q.treated_id);
      const Unit& ci = dataset.by_id(p.control_id);
      const Unit& cj = dataset.by_id(q.control_id);
      const double now = p.distance + q.distance;
      const double swapped =
          pair_distance(ti, cj, metric) + pair_distance(tj, ci, metric);
      if (swapped < now - 1e-9) return false;
    }
  }
  return true;
}

std::string pairs_to_csv(const PairSet& pairs, const Dataset& dataset) {
  std::string out = "pair_id,treated_id,control_id,stratum,distance\n";
  for (std::size_t i = 0; i < pairs.pairs.size(); ++i) {
    const MatchedPair& p = pairs.pairs[i];
    out += std::to_string(i + 1);
    out += ',';
    out += csv_escape(p.treated_id);
    out += ',';
    out += csv_escape(p.control_id);
    out += ',';
    out += csv_escape(dataset.strata[p.stratum].label);
    out += ',';
    out += format_double(p.distance);
    out += '\n';
  }
  return out;
}

}  // namespace cardmatch
