#include "cardmatch/study_spec.hpp"

#include "cardmatch/errors.hpp"
#include "doctest.h"

using namespace cardmatch;

TEST_CASE("minimal config applies documented defaults") {
  StudySpec spec = parse_spec_text(R"({
    "covariates": {"balance": ["age", "income"], "exact": ["region"]}
  })");
  CHECK(spec.covariates.balance == std::vector<std::string>{"age", "income"});
  CHECK(spec.covariates.exact == std::vector<std::string>{"region"});
  CHECK(spec.group_tolerance == 0.1);
  CHECK(spec.target_tolerance == 0.1);
  CHECK(spec.group_balance);
  CHECK(spec.min_pairs == 0);
  CHECK(spec.target.source == TargetSource::None);
  CHECK(spec.solver.time_limit_s == 600.0);
  CHECK(spec.solver.gap_abs == 0.0);
  CHECK(spec.solver.threads == 1);
  CHECK(spec.solver.seed == 0);
  CHECK(spec.pairing.metric == PairMetric::L1);
  CHECK(spec.outcome.test == OutcomeTest::Auto);
  CHECK(!spec.outcome.continuity_correction);
  CHECK(spec.group_delta("age") == 0.1);
}

TEST_CASE("full config round-trips every section") {
  StudySpec spec = parse_spec_text(R"({
    "covariates": {
      "balance": ["a", "b"],
      "exact": ["g"],
      "ignore": ["junk"],
      "one_hot": ["b"],
      "group_tolerance": {"a": 0.05},
      "target_tolerance": 0.2,
      "group_balance": false,
      "min_pairs": 10
    },
    "target": {"source": "file", "path": "agg.csv"},
    "solver": {"time_limit_s": 30.5, "gap_abs": 1, "threads": 4, "seed": 9},
    "pairing": {"metric": "l2"},
    "outcome": {"column": "y", "test": "mcnemar", "continuity_correction": true}
  })");
  CHECK(spec.group_delta("a") == 0.05);
  CHECK(spec.group_delta("b") == 0.1);  // map overrides only listed names
  CHECK(spec.target_eps("a") == 0.2);
  CHECK(!spec.group_balance);
  CHECK(spec.min_pairs == 10);
  CHECK(spec.target.source == TargetSource::File);
  CHECK(spec.target.path == "agg.csv");
  CHECK(spec.solver.time_limit_s == 30.5);
  CHECK(spec.solver.gap_abs == 1.0);
  CHECK(spec.solver.threads == 4);
  CHECK(spec.solver.seed == 9);
  CHECK(spec.pairing.metric == PairMetric::L2);
  CHECK(spec.covariates.outcome_column == "y");
  CHECK(spec.outcome.test == OutcomeTest::McNemar);
  CHECK(spec.outcome.continuity_correction);
}

TEST_CASE("unknown keys are rejected with their full path") {
  try {
    parse_spec_text(R"({"covariates": {"balance": ["a"]}, "solvr": {}})");
    FAIL("expected UnknownKeyError");
  } catch (const UnknownKeyError& e) {
    CHECK(e.path == "solvr");
  }
  try {
    parse_spec_text(
        R"({"covariates": {"balance": ["a"]}, "solver": {"thread": 2}})");
    FAIL("expected UnknownKeyError");
  } catch (const UnknownKeyError& e) {
    CHECK(e.path == "solver.thread");
  }
  try {
    parse_spec_text(R"({"covariates": {"balanced": ["a"]}})");
    FAIL("expected UnknownKeyError");
  } catch (const UnknownKeyError& e) {
    CHECK(e.path == "covariates.balanced");
  }
}

TEST_CASE("invalid tolerances are rejected") {
  CHECK_THROWS_AS(parse_spec_text(R"({
    "covariates": {"balance": ["a"], "group_tolerance": -0.1}
  })"),
                  InvalidToleranceError);
  try {
    parse_spec_text(R"({
      "covariates": {"balance": ["a"], "group_tolerance": {"a": -1}}
    })");
    FAIL("expected InvalidToleranceError");
  } catch (const InvalidToleranceError& e) {
    CHECK(e.name == "group_tolerance.a");
  }
  CHECK_THROWS_AS(parse_spec_text(R"({
    "covariates": {"balance": ["a"], "target_tolerance": "big"}
  })"),
                  InvalidToleranceError);
}

TEST_CASE("syntax errors carry the line number") {
  try {
    parse_spec_text("{\n  \"covariates\": {\n  \"balance\": [,]\n}\n}");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.line == 3);
  }
}

TEST_CASE("config validation rules") {
  CHECK_THROWS_AS(parse_spec_text(R"({"solver": {"threads": 2}})"),
                  InvalidConfigError);  // no covariates at all
  CHECK_THROWS_AS(parse_spec_text(R"({
    "covariates": {"balance": ["a"], "min_pairs": -1}
  })"),
                  InvalidConfigError);
  CHECK_THROWS_AS(parse_spec_text(R"({
    "covariates": {"balance": ["a"]}, "target": {"source": "file"}
  })"),
                  InvalidConfigError);  // file source without path
  CHECK_THROWS_AS(parse_spec_text(R"({
    "covariates": {"balance": ["a"]}, "target": {"source": "nowhere"}
  })"),
                  InvalidConfigError);
  CHECK_THROWS_AS(parse_spec_text(R"({
    "covariates": {"balance": ["a"]}, "solver": {"threads": 0}
  })"),
                  InvalidConfigError);
}
