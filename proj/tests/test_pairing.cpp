#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cardmatch/branch_bound.hpp"
#include "cardmatch/errors.hpp"
#include "cardmatch/pairing.hpp"
#include "cardmatch/problem.hpp"
#include "cardmatch/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cardmatch;

namespace {

MatchSolution select_all(const Dataset& ds) {
  MatchSolution sol;
  for (const auto& u : ds.units) {
    (u.exposed ? sol.treated_ids : sol.control_ids).push_back(u.id);
  }
  sol.n = sol.treated_ids.size();
  return sol;
}

// One-covariate stratum whose L1 cost matrix is exactly the given one.
// treated[i] sits at x = 3 * i, controls are placed by offsets.
Dataset grid_dataset(const std::vector<double>& treated_x,
                     const std::vector<double>& control_x) {
  std::vector<Unit> units;
  for (std::size_t i = 0; i < treated_x.size(); ++i)
    units.push_back(testutil::make_unit("t" + std::to_string(i), true,
                                        {treated_x[i]}));
  for (std::size_t j = 0; j < control_x.size(); ++j)
    units.push_back(testutil::make_unit("c" + std::to_string(j), false,
                                        {control_x[j]}));
  return testutil::preset_dataset(std::move(units), {"x"}, {"g"});
}

}  // namespace

TEST_CASE("distance respects the chosen metric") {
  Unit a = testutil::make_unit("a", true, {1.0, -2.0, 0.5});
  Unit b = testutil::make_unit("b", false, {0.0, 1.0, 0.5});
  CHECK(pair_distance(a, b, PairMetric::L1) == doctest::Approx(4.0));
  CHECK(pair_distance(a, b, PairMetric::L2) ==
        doctest::Approx(std::sqrt(1.0 + 9.0)));
}

TEST_CASE("distance matrix agrees with a direct recomputation") {
  Dataset ds = testutil::random_instance(11, 4, 6, 3, 1);
  std::vector<const Unit*> treated, controls;
  for (const auto& u : ds.units)
    (u.exposed ? treated : controls).push_back(&u);
  const auto m = distance_matrix(treated, controls, PairMetric::L2);
  REQUIRE(m.size() == treated.size() * controls.size());
  for (std::size_t i = 0; i < treated.size(); ++i) {
    for (std::size_t j = 0; j < controls.size(); ++j) {
      double ss = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        const double d =
            treated[i]->covariates[k] - controls[j]->covariates[k];
        ss += d * d;
      }
      CHECK(m[i * controls.size() + j] ==
            doctest::Approx(std::sqrt(ss)).epsilon(1e-12));
    }
  }
}

TEST_CASE("two by two cost matrix picks the diagonal") {
  // L1 costs: t0 = 0, t1 = 3 against c0 = 1, c1 = 2 give
  // [[1, 2], [2, 1]]; the off-diagonal matching would cost 4.
  Dataset ds = grid_dataset({0.0, 3.0}, {1.0, 2.0});
  const PairSet ps = pair_within_strata(select_all(ds), ds, PairMetric::L1);
  REQUIRE(ps.pairs.size() == 2);
  CHECK(ps.pairs[0].treated_id == "t0");
  CHECK(ps.pairs[0].control_id == "c0");
  CHECK(ps.pairs[1].treated_id == "t1");
  CHECK(ps.pairs[1].control_id == "c1");
  CHECK(ps.total_distance == doctest::Approx(2.0));
}

TEST_CASE("all-equal costs fall back to id order") {
  std::vector<Unit> units;
  for (int i = 0; i < 4; ++i)
    units.push_back(
        testutil::make_unit("t" + std::to_string(i), true, {1.0, 2.0}));
  for (int j = 0; j < 4; ++j)
    units.push_back(
        testutil::make_unit("c" + std::to_string(j), false, {1.0, 2.0}));
  Dataset ds = testutil::preset_dataset(std::move(units), {"x", "y"}, {"g"});
  const PairSet ps = pair_within_strata(select_all(ds), ds, PairMetric::L1);
  REQUIRE(ps.pairs.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(ps.pairs[i].treated_id == "t" + std::to_string(i));
    CHECK(ps.pairs[i].control_id == "c" + std::to_string(i));
    CHECK(ps.pairs[i].distance == 0.0);
  }
  CHECK(ps.total_distance == 0.0);
}

TEST_CASE("matches the exhaustive minimum over permutations") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed, 7);
    const std::size_t n = 2 + rng.below(0, 0, 6);  // 2..7 pairs
    std::vector<Unit> units;
    for (std::size_t i = 0; i < n; ++i)
      units.push_back(testutil::make_unit(
          "t" + std::to_string(i), true,
          {rng.normal(i, 1), rng.normal(i, 2)}));
    for (std::size_t j = 0; j < n; ++j)
      units.push_back(testutil::make_unit(
          "c" + std::to_string(j), false,
          {rng.normal(n + j, 1), rng.normal(n + j, 2)}));
    Dataset ds = testutil::preset_dataset(std::move(units), {"x", "y"}, {"g"});

    std::vector<const Unit*> treated, controls;
    for (const auto& u : ds.units)
      (u.exposed ? treated : controls).push_back(&u);
    const auto cost = [&](std::size_t i, std::size_t j) {
      return pair_distance(*treated[i], *controls[j], PairMetric::L1);
    };
    const auto oracle = testutil::min_matching_bruteforce(n, cost);

    const PairSet ps = pair_within_strata(select_all(ds), ds, PairMetric::L1);
    CHECK(ps.total_distance == doctest::Approx(oracle.total).epsilon(1e-9));
    REQUIRE(ps.pairs.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(ps.pairs[i].control_id ==
            "c" + std::to_string(oracle.row_to_col[i]));
    }
  }
}

TEST_CASE("ties resolve to the lexicographically smallest pair list") {
  // Costs [[1, 1], [1, 1]]: both matchings total 2, t0 must take c0.
  Dataset ds = grid_dataset({0.0, 0.0}, {1.0, 1.0});
  const PairSet ps = pair_within_strata(select_all(ds), ds, PairMetric::L1);
  CHECK(ps.pairs[0].control_id == "c0");
  CHECK(ps.pairs[1].control_id == "c1");

  // Three-way tie across a cycle: every matching costs 3.
  Dataset ds3 = grid_dataset({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
  const PairSet ps3 = pair_within_strata(select_all(ds3), ds3, PairMetric::L1);
  for (int i = 0; i < 3; ++i)
    CHECK(ps3.pairs[i].control_id == "c" + std::to_string(i));
}

TEST_CASE("pairing preserves the selection and stays within strata") {
  Dataset ds = testutil::random_instance(21, 10, 18, 3, 3);
  StudySpec spec;
  spec.covariates.balance = ds.schema.balance_names;
  spec.covariates.exact = {"g"};
  const auto problem = compile_problem(ds, spec);
  const auto sol = branch_and_bound(problem, ds, SolveLimits{});
  REQUIRE(sol.n > 0);

  const PairSet ps = pair_within_strata(sol, ds, PairMetric::L1);
  REQUIRE(ps.pairs.size() == sol.n);

  std::set<std::string> treated(sol.treated_ids.begin(),
                                sol.treated_ids.end());
  std::set<std::string> controls(sol.control_ids.begin(),
                                 sol.control_ids.end());
  std::set<std::string> seen_t, seen_c;
  for (const auto& p : ps.pairs) {
    CHECK(treated.count(p.treated_id) == 1);
    CHECK(controls.count(p.control_id) == 1);
    CHECK(seen_t.insert(p.treated_id).second);
    CHECK(seen_c.insert(p.control_id).second);
    CHECK(ds.by_id(p.treated_id).exact_keys ==
          ds.by_id(p.control_id).exact_keys);
    CHECK(p.distance == doctest::Approx(pair_distance(
                            ds.by_id(p.treated_id), ds.by_id(p.control_id),
                            PairMetric::L1)));
  }
  CHECK(seen_t.size() == sol.n);
  CHECK(seen_c.size() == sol.n);

  double total = 0.0;
  for (double d : ps.stratum_distance) total += d;
  CHECK(ps.total_distance == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("no two pairs can swap partners and improve") {
  for (std::uint64_t seed = 40; seed < 46; ++seed) {
    Dataset ds = testutil::random_instance(seed, 8, 14, 2, 2);
    StudySpec spec;
    spec.covariates.balance = ds.schema.balance_names;
    spec.covariates.exact = {"g"};
    const auto sol = branch_and_bound(compile_problem(ds, spec), ds,
                                      SolveLimits{});
    for (PairMetric metric : {PairMetric::L1, PairMetric::L2}) {
      const PairSet ps = pair_within_strata(sol, ds, metric);
      CHECK(exchange_stable(ps, ds, metric));
    }
  }
}

TEST_CASE("duplicating a covariate doubles L1 totals, pairing unchanged") {
  Dataset ds = testutil::random_instance(55, 6, 6, 2, 1);
  Dataset doubled = ds;
  doubled.schema.balance_names.push_back("x0_copy");
  doubled.schema.balance_names.push_back("x1_copy");
  doubled.schema.standardization.resize(4, Standardization{0.0, 1.0});
  for (auto& u : doubled.units) {
    u.covariates.push_back(u.covariates[0]);
    u.covariates.push_back(u.covariates[1]);
    u.raw = u.covariates;
  }

  const auto sol = select_all(ds);
  const PairSet base = pair_within_strata(sol, ds, PairMetric::L1);
  const PairSet twice = pair_within_strata(sol, doubled, PairMetric::L1);
  CHECK(twice.total_distance ==
        doctest::Approx(2.0 * base.total_distance).epsilon(1e-9));
  REQUIRE(base.pairs.size() == twice.pairs.size());
  for (std::size_t i = 0; i < base.pairs.size(); ++i) {
    CHECK(base.pairs[i].treated_id == twice.pairs[i].treated_id);
    CHECK(base.pairs[i].control_id == twice.pairs[i].control_id);
  }
}

TEST_CASE("parallel pairing is identical to serial") {
  Dataset ds = testutil::random_instance(70, 20, 30, 3, 5);
  StudySpec spec;
  spec.covariates.balance = ds.schema.balance_names;
  spec.covariates.exact = {"g"};
  const auto sol = branch_and_bound(compile_problem(ds, spec), ds,
                                    SolveLimits{});
  const PairSet one = pair_within_strata(sol, ds, PairMetric::L1, 1);
  const PairSet four = pair_within_strata(sol, ds, PairMetric::L1, 4);
  REQUIRE(one.pairs.size() == four.pairs.size());
  for (std::size_t i = 0; i < one.pairs.size(); ++i) {
    CHECK(one.pairs[i].treated_id == four.pairs[i].treated_id);
    CHECK(one.pairs[i].control_id == four.pairs[i].control_id);
  }
  CHECK(one.total_distance == four.total_distance);
}

TEST_CASE("unequal sides inside a stratum are rejected") {
  Dataset ds = grid_dataset({0.0, 3.0}, {1.0, 2.0});
  MatchSolution sol = select_all(ds);
  sol.control_ids.pop_back();
  CHECK_THROWS_AS(pair_within_strata(sol, ds, PairMetric::L1),
                  UnbalancedStratumError);
}

TEST_CASE("pairs csv lists one row per pair with formatted distances") {
  Dataset ds = grid_dataset({0.0, 3.0}, {1.0, 2.0});
  const PairSet ps = pair_within_strata(select_all(ds), ds, PairMetric::L1);
  const std::string csv = pairs_to_csv(ps, ds);
  CHECK(csv ==
        "pair_id,treated_id,control_id,stratum,distance\n"
        "1,t0,c0,s0,1\n"
        "2,t1,c1,s0,1\n");
}
