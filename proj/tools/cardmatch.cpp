// cardmatch: cardinality matching for observational studies.
//
// Subcommands cover the whole pipeline: simulate a synthetic study, match
// (select + solve + pair + diagnose), analyze paired outcomes, run the
// greedy propensity baseline, benchmark scaling, and verify artifacts.
// Exit codes: 0 success, 2 feasible-but-not-proven-optimal, 1 error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cardmatch/branch_bound.hpp"
#include "cardmatch/csv.hpp"
#include "cardmatch/dataset.hpp"
#include "cardmatch/diagnostics.hpp"
#include "cardmatch/errors.hpp"
#include "cardmatch/log.hpp"
#include "cardmatch/manifest.hpp"
#include "cardmatch/pairing.hpp"
#include "cardmatch/problem.hpp"
#include "cardmatch/propensity.hpp"
#include "cardmatch/stats.hpp"
#include "cardmatch/study_spec.hpp"
#include "cardmatch/synth.hpp"

namespace {

using namespace cardmatch;

// Collects input hashes and written artifacts, then lands manifest.json in
// the run directory. Timestamps appear only here; every other artifact is a
// pure function of the inputs and the seed.
class RunScope {
 public:
  RunScope(std::string subcommand, std::string out_dir)
      : out_dir_(std::move(out_dir)) {
    manifest_.subcommand = std::move(subcommand);
    manifest_.started_at = iso_utc_now();
    std::error_code ec;
    std::filesystem::create_directories(out_dir_, ec);
    if (ec) {
      throw IoError("cannot create directory '" + out_dir_ +
                    "': " + ec.message());
    }
  }

  void set_config(const std::string& path) {
    manifest_.config_path = path;
    manifest_.config_hash = hash_file(path);
  }
  void add_input(const std::string& path) {
    manifest_.inputs.push_back({path, hash_file(path)});
  }
  void set_seed(std::uint64_t seed) { manifest_.seed = seed; }

  std::string write(const std::string& name, const std::string& content) {
    const std::string path =
        (std::filesystem::path(out_dir_) / name).string();
    write_text_file_atomic(path, content);
    manifest_.outputs.push_back({name, fnv1a64_hex(content)});
    return path;
  }

  void record(const std::string& name, const std::string& path) {
    manifest_.outputs.push_back({name, hash_file(path)});
  }

  void finish() {
    manifest_.finished_at = iso_utc_now();
    write_manifest(
        manifest_,
        (std::filesystem::path(out_dir_) / "manifest.json").string());
  }

 private:
  RunManifest manifest_;
  std::string out_dir_;
};

void apply_solver_flags(const CLI::App* sub, StudySpec& spec,
                        const double& time_limit, const double& gap_abs,
                        const int& threads, const std::uint64_t& seed) {
  if (sub->count("--time-limit")) spec.solver.time_limit_s = time_limit;
  if (sub->count("--gap-abs")) spec.solver.gap_abs = gap_abs;
  if (sub->count("--threads")) spec.solver.threads = threads;
  if (sub->count("--seed")) spec.solver.seed = seed;
}

SolveLimits to_limits(const StudySpec& spec) {
  SolveLimits limits;
  limits.time_s = spec.solver.time_limit_s;
  limits.gap_abs = spec.solver.gap_abs;
  limits.threads = spec.solver.threads;
  limits.seed = spec.solver.seed;
  return limits;
}

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * x);
  return std::string(buf);
}

// Selection vector and id lists reconstructed from a pairs.csv.
MatchSolution solution_from_pairs(const CsvTable& table,
                                  const Dataset& dataset) {
  const int t_col = table.column("treated_id");
  const int c_col = table.column("control_id");
  if (t_col < 0 || c_col < 0) {
    throw Error("pairs file needs treated_id and control_id columns");
  }
  MatchSolution sol;
  sol.selected.assign(dataset.units.size(), 0);
  for (const auto& row : table.rows) {
    for (int col : {t_col, c_col}) {
      const std::string& id = row[static_cast<std::size_t>(col)];
      const int idx = dataset.unit_index(id);
      if (idx < 0) throw Error("pairs file names unknown unit '" + id + "'");
      if (sol.selected[static_cast<std::size_t>(idx)]) {
        throw Error("pairs file selects unit '" + id + "' twice");
      }
      sol.selected[static_cast<std::size_t>(idx)] = 1;
    }
    sol.treated_ids.push_back(row[static_cast<std::size_t>(t_col)]);
    sol.control_ids.push_back(row[static_cast<std::size_t>(c_col)]);
  }
  sol.n = table.rows.size();
  return sol;
}

struct MatchArgs {
  std::string data, config, out = "run";
  double time_limit = 0, gap_abs = 0, group_tol = 0, target_tol = 0;
  int threads = 0;
  std::uint64_t seed = 0;
  const CLI::App* sub = nullptr;
};

int cmd_match(const MatchArgs& args) {
  StudySpec spec = parse_spec(args.config);
  apply_solver_flags(args.sub, spec, args.time_limit, args.gap_abs,
                     args.threads, args.seed);
  if (args.sub->count("--group-tol")) spec.group_tolerance = args.group_tol;
  if (args.sub->count("--target-tol")) spec.target_tolerance = args.target_tol;

  RunScope run("match", args.out);
  run.set_config(args.config);
  run.add_input(args.data);
  run.set_seed(spec.solver.seed);

  const Dataset raw = load_dataset(args.data, spec.covariates);
  const Dataset dataset = standardize(raw);
  const TargetProfile target = derive_target_profile(dataset, spec.target);
  const SelectionProblem problem = compile_problem(dataset, spec);

  std::string solve_log;
  const MatchSolution solution =
      branch_and_bound(problem, dataset, to_limits(spec), &solve_log);
  const FeasibilityReport feasibility =
      verify_solution(problem, solution.selected);
  if (!feasibility.pass) {
    if (!solution.hit_limit) {
      throw Error("solver returned an infeasible selection; this is a bug");
    }
    log_warn("time limit hit before any feasible selection; artifacts "
             "describe the best attempt");
  }

  const PairSet pairs = pair_within_strata(solution, dataset,
                                           spec.pairing.metric,
                                           spec.solver.threads);
  const BalanceReport report = balance_report(dataset, solution, target, spec);

  run.write("pairs.csv", pairs_to_csv(pairs, dataset));
  run.write("balance.csv", balance_to_csv(report));
  run.write("balance.json", balance_to_json(report));
  run.write("love.svg", render_love_plot(report));
  run.write("solve.log", solve_log);
  run.finish();

  double worst = 0.0;
  for (const auto& cov : report.covariates) {
    if (std::abs(cov.smd_after) > worst) worst = std::abs(cov.smd_after);
  }
  const double retention =
      dataset.n_treated() == 0
          ? 0.0
          : static_cast<double>(solution.n) /
                static_cast<double>(dataset.n_treated());
  std::printf("matched pairs     %zu\n", solution.n);
  std::printf("exposed retained  %zu / %zu (%s)\n", solution.n,
              dataset.n_treated(), percent(retention).c_str());
  std::printf("bound             %s\n", format_double(solution.bound).c_str());
  std::printf("gap               %s\n", format_double(solution.gap).c_str());
  std::printf("nodes             %zu\n", solution.nodes);
  std::printf("worst |SMD| after %s\n", format_double(worst).c_str());
  std::printf("feasibility       %s\n", feasibility.pass ? "PASS" : "FAIL");
  std::printf("artifacts         %s\n", args.out.c_str());
  return solution.hit_limit ? 2 : 0;
}

struct AnalyzeArgs {
  std::string data, config, pairs, out, outcome_col, test;
  long events_treated = -1, events_control = -1, group_size = -1;
  bool continuity = false;
  const CLI::App* sub = nullptr;
};

void print_outcome(const OutcomeReport& report) {
  std::printf("test        %s\n", report.test.c_str());
  std::printf("n           %zu\n", report.n);
  if (report.test != "paired_t") {
    std::printf("events      %zu vs %zu\n", report.events_t, report.events_c);
    std::printf("proportion  %s vs %s\n", format_double(report.prop_t).c_str(),
                format_double(report.prop_c).c_str());
  }
  std::printf("estimate    %s\n", format_double(report.estimate).c_str());
  std::printf("statistic   %s\n", format_double(report.statistic).c_str());
  std::printf("p value     %s\n", format_double(report.p_value).c_str());
  if (!report.note.empty()) std::printf("note        %s\n", report.note.c_str());
}

int cmd_analyze(const AnalyzeArgs& args) {
  const bool count_mode = args.events_treated >= 0 ||
                          args.events_control >= 0 || args.group_size >= 0;
  OutcomeReport report;

  if (count_mode) {
    if (args.events_treated < 0 || args.events_control < 0 ||
        args.group_size < 0) {
      throw Error("count mode needs --events-treated, --events-control and "
                  "--group-size together");
    }
    if (!args.test.empty() && args.test != "ztest") {
      throw Error("count mode supports --test ztest only");
    }
    report = two_proportion_ztest(static_cast<std::size_t>(args.events_treated),
                                  static_cast<std::size_t>(args.events_control),
                                  static_cast<std::size_t>(args.group_size),
                                  args.continuity);
  } else {
    if (args.data.empty() || args.config.empty() || args.pairs.empty()) {
      throw Error("paired mode needs --data, --config and --pairs");
    }
    StudySpec spec = parse_spec(args.config);
    if (!args.outcome_col.empty()) {
      spec.covariates.outcome_column = args.outcome_col;
    }
    if (args.sub->count("--continuity")) {
      spec.outcome.continuity_correction = true;
    }
    const Dataset dataset = load_dataset(args.data, spec.covariates);
    if (!dataset.has_outcome) {
      throw Error("dataset has no outcome column '" +
                  spec.covariates.outcome_column + "'");
    }
    const CsvTable table = read_csv(args.pairs);
    const MatchSolution sol = solution_from_pairs(table, dataset);
    std::vector<double> treated, controls;
    for (std::size_t i = 0; i < sol.n; ++i) {
      treated.push_back(*dataset.by_id(sol.treated_ids[i]).outcome);
      controls.push_back(*dataset.by_id(sol.control_ids[i]).outcome);
    }
    if (args.test == "ztest") {
      std::size_t events_t = 0, events_c = 0;
      for (double y : treated) events_t += y > 0.5 ? 1 : 0;
      for (double y : controls) events_c += y > 0.5 ? 1 : 0;
      report = two_proportion_ztest(events_t, events_c, treated.size(),
                                    spec.outcome.continuity_correction);
    } else {
      if (args.test == "mcnemar") spec.outcome.test = OutcomeTest::McNemar;
      if (args.test == "paired-t") spec.outcome.test = OutcomeTest::PairedT;
      report = analyze_outcomes(treated, controls, spec.outcome);
    }
  }

  print_outcome(report);
  if (!args.out.empty()) {
    RunScope run("analyze", args.out);
    if (!args.config.empty()) run.set_config(args.config);
    if (!args.data.empty()) run.add_input(args.data);
    if (!args.pairs.empty()) run.add_input(args.pairs);
    run.write("outcome.json", outcome_to_json(report));
    run.finish();
  }
  return 0;
}

struct BaselineArgs {
  std::string data, config, out = "baseline";
  double caliper_sd = 0.2;
  bool respect_strata = false;
};

int cmd_baseline(const BaselineArgs& args) {
  const StudySpec spec = parse_spec(args.config);
  RunScope run("baseline", args.out);
  run.set_config(args.config);
  run.add_input(args.data);
  run.set_seed(spec.solver.seed);

  const Dataset raw = load_dataset(args.data, spec.covariates);
  const Dataset dataset = standardize(raw);
  const PropensityModel model = fit_logistic_propensity(dataset);
  const PsmResult result =
      greedy_nn_match(dataset, model, args.caliper_sd, args.respect_strata);
  const MatchSolution as_solution = psm_to_solution(result);
  const TargetProfile target = derive_target_profile(dataset, spec.target);
  const BalanceReport report =
      balance_report(dataset, as_solution, target, spec);

  run.write("psm_pairs.csv", psm_pairs_to_csv(result));
  run.write("psm_balance.csv", balance_to_csv(report));
  run.write("psm_balance.json", balance_to_json(report));
  run.finish();

  const std::size_t total = dataset.n_treated();
  const double retention =
      total == 0 ? 0.0
                 : static_cast<double>(result.pairs.size()) /
                       static_cast<double>(total);
  std::printf("method            greedy nearest neighbor\n");
  std::printf("converged         %s\n", model.converged ? "yes" : "no");
  std::printf("separation        %s\n", model.separation ? "yes" : "no");
  std::printf("caliper (logit)   %s\n",
              format_double(result.caliper_width).c_str());
  std::printf("matched pairs     %zu\n", result.pairs.size());
  std::printf("exposed retained  %zu / %zu (%s)\n", result.pairs.size(), total,
              percent(retention).c_str());
  std::printf("exposed excluded  %zu\n", result.excluded_treated);
  std::printf("artifacts         %s\n", args.out.c_str());
  return 0;
}

struct SimulateArgs {
  std::string config, out = "scenario";
  std::uint64_t seed = 0;
  const CLI::App* sub = nullptr;
};

int cmd_simulate(const SimulateArgs& args) {
  ScenarioConfig config;
  if (!args.config.empty()) config = parse_scenario(args.config);
  if (args.sub->count("--seed")) config.seed = args.seed;

  RunScope run("simulate", args.out);
  if (!args.config.empty()) run.set_config(args.config);
  run.set_seed(config.seed);

  const ScenarioFiles files = generate_scenario(config, args.out);
  run.record("data.csv", files.data_csv);
  run.record("study.json", files.study_json);
  run.finish();

  std::printf("units             %zu\n", config.total_units());
  std::printf("exposed           %zu\n", config.n_exposed_individuals);
  std::printf("young exposed     %zu\n", config.n_young_exposed);
  std::printf("neighborhoods     %zu (%zu exposed)\n", config.n_neighborhoods,
              config.n_exposed_neighborhoods);
  std::printf("artifacts         %s\n", args.out.c_str());
  return 0;
}

struct BenchArgs {
  std::string config, out = "bench";
  std::vector<std::size_t> sizes = {1000, 10000, 100000};
  double time_limit = 600.0;
  int threads = 1;
  std::uint64_t seed = 0;
  const CLI::App* sub = nullptr;
};

int cmd_bench(const BenchArgs& args) {
  ScenarioConfig base;
  if (!args.config.empty()) base = parse_scenario(args.config);
  if (args.sub->count("--seed")) base.seed = args.seed;

  SolveLimits limits;
  limits.time_s = args.time_limit;
  limits.threads = args.threads;
  limits.seed = base.seed;

  RunScope run("bench", args.out);
  if (!args.config.empty()) run.set_config(args.config);
  run.set_seed(base.seed);

  const std::vector<BenchRow> rows =
      run_benchmark(args.sizes, base, limits, &std::cerr);
  const std::string csv = bench_to_csv(rows);
  run.write("bench.csv", csv);
  run.finish();

  std::fputs(csv.c_str(), stdout);
  for (const BenchRow& row : rows) {
    if (row.hit_limit) return 2;
  }
  return 0;
}

struct VerifyArgs {
  std::string data, config, pairs;
};

int cmd_verify(const VerifyArgs& args) {
  const StudySpec spec = parse_spec(args.config);
  const Dataset raw = load_dataset(args.data, spec.covariates);
  const Dataset dataset = standardize(raw);
  const SelectionProblem problem = compile_problem(dataset, spec);
  const CsvTable table = read_csv(args.pairs);
  const MatchSolution solution = solution_from_pairs(table, dataset);

  const FeasibilityReport feasibility =
      verify_solution(problem, solution.selected);
  const TargetProfile target = derive_target_profile(dataset, spec.target);
  const BalanceReport report = balance_report(dataset, solution, target, spec);

  std::printf("pairs             %zu\n", solution.n);
  std::printf("constraints       %s\n", feasibility.pass ? "PASS" : "FAIL");
  for (const std::string& violation : feasibility.violations) {
    std::printf("  violated: %s\n", violation.c_str());
  }
  std::printf("balance echo      %s\n", report.feasible ? "PASS" : "FAIL");
  for (const std::string& breach : report.breaches) {
    std::printf("  breach: %s\n", breach.c_str());
  }
  return feasibility.pass && report.feasible ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardinality matching toolkit"};
  app.set_version_flag("--version", cardmatch::kToolVersion);
  app.require_subcommand(1);

  MatchArgs match_args;
  CLI::App* match = app.add_subcommand(
      "match", "select the largest balanced sample and pair it");
  match->add_option("--data", match_args.data, "unit CSV")->required();
  match->add_option("--config", match_args.config, "study JSON")->required();
  match->add_option("--out", match_args.out, "run directory");
  match->add_option("--time-limit", match_args.time_limit, "seconds");
  match->add_option("--gap-abs", match_args.gap_abs, "absolute gap to accept");
  match->add_option("--threads", match_args.threads, "solver threads");
  match->add_option("--seed", match_args.seed, "tie-break seed");
  match->add_option("--group-tol", match_args.group_tol,
                    "group SMD tolerance override");
  match->add_option("--target-tol", match_args.target_tol,
                    "target deviation tolerance override");
  match_args.sub = match;

  AnalyzeArgs analyze_args;
  CLI::App* analyze =
      app.add_subcommand("analyze", "outcome inference on matched pairs");
  analyze->add_option("--data", analyze_args.data, "unit CSV");
  analyze->add_option("--config", analyze_args.config, "study JSON");
  analyze->add_option("--pairs", analyze_args.pairs, "pairs.csv from match");
  analyze->add_option("--out", analyze_args.out, "run directory (optional)");
  analyze->add_option("--outcome", analyze_args.outcome_col,
                      "outcome column override");
  analyze->add_option("--test", analyze_args.test,
                      "ztest, mcnemar or paired-t")
      ->check(CLI::IsMember({"ztest", "mcnemar", "paired-t"}));
  analyze->add_option("--events-treated", analyze_args.events_treated,
                      "count mode: events among exposed");
  analyze->add_option("--events-control", analyze_args.events_control,
                      "count mode: events among unexposed");
  analyze->add_option("--group-size", analyze_args.group_size,
                      "count mode: per-group size");
  analyze->add_flag("--continuity", analyze_args.continuity,
                    "apply a continuity correction");
  analyze_args.sub = analyze;

  BaselineArgs baseline_args;
  CLI::App* baseline = app.add_subcommand(
      "baseline", "greedy propensity-score matching for comparison");
  baseline->add_option("--data", baseline_args.data, "unit CSV")->required();
  baseline->add_option("--config", baseline_args.config, "study JSON")
      ->required();
  baseline->add_option("--out", baseline_args.out, "run directory");
  baseline->add_option("--caliper-sd", baseline_args.caliper_sd,
                       "caliper in logit SD units, negative disables");
  baseline->add_flag("--respect-strata", baseline_args.respect_strata,
                     "match only within exact strata");

  SimulateArgs simulate_args;
  CLI::App* simulate =
      app.add_subcommand("simulate", "generate a synthetic study");
  simulate->add_option("--config", simulate_args.config, "scenario JSON");
  simulate->add_option("--seed", simulate_args.seed, "generator seed");
  simulate->add_option("--out", simulate_args.out, "output directory");
  simulate_args.sub = simulate;

  BenchArgs bench_args;
  CLI::App* bench =
      app.add_subcommand("bench", "scaling benchmark over scenario sizes");
  bench->add_option("--sizes", bench_args.sizes, "unit counts")
      ->delimiter(',');
  bench->add_option("--config", bench_args.config, "scenario JSON base");
  bench->add_option("--out", bench_args.out, "run directory");
  bench->add_option("--time-limit", bench_args.time_limit, "per-size seconds");
  bench->add_option("--threads", bench_args.threads, "solver threads");
  bench->add_option("--seed", bench_args.seed, "generator seed");
  bench_args.sub = bench;

  VerifyArgs verify_args;
  CLI::App* verify = app.add_subcommand(
      "verify", "re-check a pairs.csv against data and config");
  verify->add_option("--data", verify_args.data, "unit CSV")->required();
  verify->add_option("--config", verify_args.config, "study JSON")->required();
  verify->add_option("--pairs", verify_args.pairs, "pairs.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (match->parsed()) return cmd_match(match_args);
    if (analyze->parsed()) return cmd_analyze(analyze_args);
    if (baseline->parsed()) return cmd_baseline(baseline_args);
    if (simulate->parsed()) return cmd_simulate(simulate_args);
    if (bench->parsed()) return cmd_bench(bench_args);
    if (verify->parsed()) return cmd_verify(verify_args);
  } catch (const cardmatch::Error& e) {
    cardmatch::log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    cardmatch::log_error(std::string("unexpected failure: ") + e.what());
    return 1;
  }
  return 0;
}
