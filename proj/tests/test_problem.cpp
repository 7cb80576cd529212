#include "cardmatch/problem.hpp"

#include <cmath>

#include "cardmatch/errors.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cardmatch;
using testutil::make_unit;
using testutil::preset_dataset;
using testutil::random_instance;
using testutil::TempFile;

namespace {

StudySpec basic_spec() {
  StudySpec spec;
  spec.covariates.balance = {"x0", "x1"};
  spec.covariates.exact = {"g"};
  return spec;
}

}  // namespace

TEST_CASE("row count: one stratum, two covariates, target set gives 13 rows") {
  Dataset ds = preset_dataset(
      {make_unit("t0", true, {0.5, -1.0}), make_unit("t1", true, {-0.5, 1.0}),
       make_unit("c0", false, {0.2, 0.8}), make_unit("c1", false, {-0.2, -0.8})},
      {"x0", "x1"}, {"g"});
  StudySpec spec = basic_spec();
  spec.target.source = TargetSource::Treated;
  SelectionProblem p = compile_problem(ds, spec);
  CHECK(p.rows.size() == 1 + 4 + 8);
  CHECK(p.n_vars() == 4);
  CHECK(p.n_treated == 2);
}

TEST_CASE("row count: no balance covariates, three strata gives 3 rows") {
  Dataset ds = preset_dataset(
      {make_unit("t0", true, {}, "a"), make_unit("c0", false, {}, "a"),
       make_unit("t1", true, {}, "b"), make_unit("c1", false, {}, "b"),
       make_unit("t2", true, {}, "c"), make_unit("c2", false, {}, "c")},
      {}, {"g"});
  StudySpec spec;
  spec.covariates.exact = {"g"};
  SelectionProblem p = compile_problem(ds, spec);
  CHECK(p.rows.size() == 3);
  for (const auto& row : p.rows) CHECK(row.equality);
}

TEST_CASE("row count formula holds for randomized shapes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cardmatch::Rng rng(seed, 7);
    const std::size_t k = 1 + rng.below(0, 0, 3);
    const std::size_t strata = 1 + rng.below(0, 1, 4);
    Dataset ds = random_instance(seed, 5, 7, k, strata);
    StudySpec spec;
    for (std::size_t i = 0; i < k; ++i) {
      spec.covariates.balance.push_back("x" + std::to_string(i));
    }
    spec.covariates.exact = {"g"};
    const bool with_target = rng.below(0, 2, 2) == 0;
    if (with_target) spec.target.source = TargetSource::Full;
    SelectionProblem p = compile_problem(ds, spec);
    CHECK(p.rows.size() ==
          ds.strata.size() + 2 * k + (with_target ? 4 * k : 0));
    CHECK(p.n_vars() == 12);
  }
}

TEST_CASE("min_pairs adds one extra row") {
  Dataset ds = random_instance(3, 4, 4, 2, 1);
  StudySpec spec = basic_spec();
  spec.min_pairs = 2;
  SelectionProblem p = compile_problem(ds, spec);
  CHECK(p.rows.size() == ds.strata.size() + 4 + 1);
  const auto& row = p.rows.back();
  CHECK(row.name == "min_pairs");
  CHECK(row.rhs == -2.0);
}

TEST_CASE("zero-capacity strata have their variables pinned to zero") {
  Dataset ds = preset_dataset(
      {make_unit("t0", true, {0.1}, "a"), make_unit("c0", false, {0.2}, "a"),
       make_unit("t1", true, {0.3}, "b"), make_unit("t2", true, {-0.3}, "b"),
       make_unit("c1", false, {0.4}, "c")},
      {"x0"}, {"g"});
  StudySpec spec;
  spec.covariates.balance = {"x0"};
  spec.covariates.exact = {"g"};
  SelectionProblem p = compile_problem(ds, spec);
  std::size_t pinned = 0;
  for (std::size_t j = 0; j < p.n_vars(); ++j) {
    if (p.var_fixed_zero[j]) ++pinned;
  }
  CHECK(pinned == 3);  // t1, t2 in stratum b, c1 in stratum c
}

TEST_CASE("all strata dead means nothing can be matched") {
  Dataset ds = preset_dataset(
      {make_unit("t0", true, {0.1}, "a"), make_unit("t1", true, {0.2}, "a"),
       make_unit("c0", false, {0.3}, "b"), make_unit("c1", false, {0.4}, "b")},
      {"x0"}, {"g"});
  StudySpec spec;
  spec.covariates.balance = {"x0"};
  spec.covariates.exact = {"g"};
  CHECK_THROWS_AS(compile_problem(ds, spec), EmptyProblemError);
}

TEST_CASE("tolerance map keys must name balance covariates") {
  Dataset ds = random_instance(4, 4, 4, 2, 1);
  StudySpec spec = basic_spec();
  spec.group_tolerance_map["nope"] = 0.5;
  CHECK_THROWS_AS(compile_problem(ds, spec), UnknownColumnError);
}

TEST_CASE("target profile sources") {
  Dataset ds = random_instance(5, 6, 8, 2, 1);

  SUBCASE("treated source equals treated raw means") {
    TargetSpec t;
    t.source = TargetSource::Treated;
    TargetProfile profile = derive_target_profile(ds, t);
    for (std::size_t k = 0; k < 2; ++k) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& u : ds.units) {
        if (u.exposed) {
          sum += u.raw[k];
          ++n;
        }
      }
      CHECK(profile.raw[k] == doctest::Approx(sum / n).epsilon(1e-12));
    }
  }

  SUBCASE("full-sample source standardizes to zero") {
    TargetSpec t;
    t.source = TargetSource::Full;
    TargetProfile profile = derive_target_profile(ds, t);
    for (double v : profile.standardized) CHECK(std::abs(v) <= 1e-12);
  }

  SUBCASE("file source, complete and incomplete") {
    TempFile good("covariate,mean\nx0,0.25\nx1,-0.5\n");
    TargetSpec t;
    t.source = TargetSource::File;
    t.path = good.path;
    TargetProfile profile = derive_target_profile(ds, t);
    CHECK(profile.raw == std::vector<double>{0.25, -0.5});

    TempFile missing("covariate,mean\nx0,0.25\n");
    t.path = missing.path;
    CHECK_THROWS_AS(derive_target_profile(ds, t), MissingTargetMeanError);
  }
}

TEST_CASE("compiled matrix is invariant to positive covariate rescaling") {
  Dataset base = random_instance(6, 5, 7, 2, 2, false);
  Dataset scaled = base;
  for (auto& u : scaled.units) {
    u.covariates[0] = 4.0 * u.covariates[0] + 3.0;
    u.raw[0] = u.covariates[0];
  }
  StudySpec spec = basic_spec();
  SelectionProblem pb = compile_problem(standardize(base), spec);
  SelectionProblem ps = compile_problem(standardize(scaled), spec);
  REQUIRE(pb.rows.size() == ps.rows.size());
  for (std::size_t i = 0; i < pb.rows.size(); ++i) {
    REQUIRE(pb.rows[i].coeffs.size() == ps.rows[i].coeffs.size());
    for (std::size_t e = 0; e < pb.rows[i].coeffs.size(); ++e) {
      CHECK(pb.rows[i].coeffs[e].first == ps.rows[i].coeffs[e].first);
      CHECK(std::abs(pb.rows[i].coeffs[e].second -
                     ps.rows[i].coeffs[e].second) <= 1e-10);
    }
  }
}

TEST_CASE("verify_solution judges selections independently") {
  Dataset ds = preset_dataset(
      {make_unit("t0", true, {1.0}), make_unit("t1", true, {-1.0}),
       make_unit("c0", false, {1.0}), make_unit("c1", false, {-1.0})},
      {"x0"}, {"g"});
  StudySpec spec;
  spec.covariates.balance = {"x0"};
  spec.covariates.exact = {"g"};
  spec.group_tolerance = 0.1;
  SelectionProblem p = compile_problem(ds, spec);

  SUBCASE("the empty selection always passes") {
    FeasibilityReport rep = verify_solution(p, {0, 0, 0, 0});
    CHECK(rep.pass);
    CHECK(rep.n_pairs == 0);
    CHECK(rep.rows.size() == p.rows.size());
  }
  SUBCASE("a balanced full selection passes") {
    FeasibilityReport rep = verify_solution(p, {1, 1, 1, 1});
    CHECK(rep.pass);
    CHECK(rep.n_pairs == 2);
  }
  SUBCASE("an unbalanced selection fails naming the row") {
    // t0 (x=+1) with c1 (x=-1): group difference 2 with n=1, tolerance 0.1.
    FeasibilityReport rep = verify_solution(p, {1, 0, 0, 1});
    CHECK(!rep.pass);
    REQUIRE(!rep.violations.empty());
    CHECK(rep.violations[0].find("group[x0]") != std::string::npos);
  }
  SUBCASE("unequal stratum counts fail") {
    FeasibilityReport rep = verify_solution(p, {1, 0, 0, 0});
    CHECK(!rep.pass);
  }
}
