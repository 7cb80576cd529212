#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cardmatch/branch_bound.hpp"
#include "cardmatch/study_spec.hpp"

namespace cardmatch {

/// Binary-outcome risk per exposure x age cell, used as generator parameters.
struct ScenarioRisks {
  double young_exposed = 0.1269;
  double young_unexposed = 0.0508;
  double old_exposed = 0.0774;
  double old_unexposed = 0.0681;
};

/// Knobs for the synthetic neighborhood study. Exposure is assigned at the
/// neighborhood level and inherited by every resident. Each exposed
/// individual gets four unexposed counterparts living in mirror
/// neighborhoods: two exact covariate copies and two noise-shifted ones, so
/// selecting the copies retains every exposed unit within any nonnegative
/// tolerance. Background residents pad the pool with off-distribution noise.
struct ScenarioConfig {
  std::size_t n_neighborhoods = 151;
  std::size_t n_exposed_neighborhoods = 15;
  std::size_t n_exposed_individuals = 520;
  std::size_t n_young_exposed = 197;
  std::size_t n_background_individuals = 260;
  std::size_t ethnicity_levels = 3;

  double neighborhood_shift = 0.6;  // exposed-area covariate offset, SD units
  double control_noise = 0.35;      // covariate jitter for shifted twins

  ScenarioRisks risks;
  std::uint64_t seed = 0;

  // Throws InvalidConfigError when counts or risks are inconsistent.
  void validate() const;

  std::size_t total_units() const {
    return n_exposed_individuals * 5 + n_background_individuals;
  }
};

/// Parse a scenario JSON file / text. Unknown keys are hard errors.
ScenarioConfig parse_scenario(const std::string& path);
ScenarioConfig parse_scenario_text(const std::string& text);

/// CSV with columns id, exposed, age_cat, ethnicity, gender, education,
/// nbhd_school, nbhd_clinic, nbhd_wealth, neighborhood, outcome. Pure
/// function of the config, byte-stable across runs.
std::string scenario_csv(const ScenarioConfig& config);

/// Study config that ingests scenario_csv output unchanged: five balance
/// covariates, exact matching on age_cat and ethnicity, treated-profile
/// target, default 0.1 tolerances.
std::string scenario_study_json(const ScenarioConfig& config);

struct ScenarioFiles {
  std::string data_csv;
  std::string study_json;
};

/// Write data.csv and study.json under out_dir (created if absent).
ScenarioFiles generate_scenario(const ScenarioConfig& config,
                                const std::string& out_dir);

/// Rescale the per-entity counts so total_units() lands near total. Keeps
/// ratios (young fraction, neighborhood occupancy) and the config's seed.
ScenarioConfig scale_scenario(const ScenarioConfig& base, std::size_t total);

struct BenchRow {
  std::size_t size = 0;      // requested unit count
  std::size_t units = 0;     // realized unit count
  std::size_t exposed = 0;
  std::size_t n = 0;         // matched pairs
  double bound = 0.0;
  double gap = 0.0;
  double retention = 0.0;    // n / exposed
  double solve_seconds = 0.0;
  double pair_seconds = 0.0;
  bool hit_limit = false;
};

/// Generate, solve, and pair one scenario per requested size, sequentially
/// so timings do not interleave. Time-limit hits are recorded, not thrown.
std::vector<BenchRow> run_benchmark(const std::vector<std::size_t>& sizes,
                                    const ScenarioConfig& base,
                                    const SolveLimits& limits,
                                    std::ostream* progress = nullptr);

std::string bench_to_csv(const std::vector<BenchRow>& rows);

}  // namespace cardmatch
