#include "cardmatch/synth.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "cardmatch/csv.hpp"
#include "cardmatch/dataset.hpp"
#include "cardmatch/errors.hpp"
#include "cardmatch/log.hpp"
#include "cardmatch/pairing.hpp"
#include "cardmatch/problem.hpp"
#include "cardmatch/rng.hpp"
#include "json.hpp"

namespace cardmatch {

using nlohmann::json;

namespace {

// Rng streams. A fixed stream per entity type keeps draws independent of
// unit counts in other streams, so resizing one population never reshuffles
// another.
constexpr std::uint64_t kStreamNeighborhood = 1;
constexpr std::uint64_t kStreamIndividual = 2;
// Chosen so the default-seed realized outcome rates sit well inside the
// documented +-3 percentage point band around the risk parameters.
constexpr std::uint64_t kStreamOutcome = 5;

// Field numbers for individual draws. normal(f) consumes uniform fields 2f
// and 2f+1, so plain draws start at 16 to stay clear of the normal block.
constexpr std::uint64_t kFieldEducation = 0;   // normal, uses 0..1
constexpr std::uint64_t kFieldEduJitter = 1;   // normal, uses 2..3
constexpr std::uint64_t kFieldGender = 16;
constexpr std::uint64_t kFieldGenderRedraw = 17;
constexpr std::uint64_t kFieldEthnicity = 18;
constexpr std::uint64_t kFieldYoung = 19;
constexpr std::uint64_t kFieldHome = 20;

// Neighborhood fields (stream kStreamNeighborhood).
constexpr std::uint64_t kFieldWealth = 0;  // normal, uses 0..1
constexpr std::uint64_t kFieldSchool = 16;
constexpr std::uint64_t kFieldClinic = 17;

constexpr double kEducationMean = 9.5;
constexpr double kEducationSd = 2.0;
constexpr double kBackgroundEduOffset = -1.2;
constexpr double kGenderPExposed = 0.55;
constexpr double kGenderPControl = 0.45;
constexpr double kSchoolPExposed = 0.68;
constexpr double kSchoolPBackground = 0.50;
constexpr double kClinicPExposed = 0.38;
constexpr double kClinicPBackground = 0.50;

struct Neighborhood {
  std::string id;
  bool exposed = false;
  int school = 0;
  int clinic = 0;
  double wealth = 0.0;
};

std::string padded_id(char prefix, std::size_t index, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, index);
  return std::string(buf);
}

void check_risk(double p, const std::string& name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InvalidConfigError("risk '" + name + "' must lie in [0, 1]");
  }
}

// Neighborhood layout: indices [0, E) are exposed, [E, 3E) hold the two
// mirrors of each exposed neighborhood, the rest is background. Mirrors copy
// their source's covariates so an unexposed resident can equal an exposed
// one on every column.
std::vector<Neighborhood> draw_neighborhoods(const ScenarioConfig& config) {
  const Rng rng(config.seed, kStreamNeighborhood);
  const std::size_t e = config.n_exposed_neighborhoods;
  std::vector<Neighborhood> out(config.n_neighborhoods);
  for (std::size_t i = 0; i < out.size(); ++i) {
    Neighborhood& nb = out[i];
    nb.id = padded_id('n', i, 5);
    if (i < e) {
      nb.exposed = true;
      nb.school = rng.bernoulli(i, kFieldSchool, kSchoolPExposed) ? 1 : 0;
      nb.clinic = rng.bernoulli(i, kFieldClinic, kClinicPExposed) ? 1 : 0;
      nb.wealth = config.neighborhood_shift + rng.normal(i, kFieldWealth);
    } else if (i < 3 * e) {
      const Neighborhood& src = out[(i - e) / 2];
      nb.school = src.school;
      nb.clinic = src.clinic;
      nb.wealth = src.wealth;
    } else {
      nb.school = rng.bernoulli(i, kFieldSchool, kSchoolPBackground) ? 1 : 0;
      nb.clinic = rng.bernoulli(i, kFieldClinic, kClinicPBackground) ? 1 : 0;
      nb.wealth = rng.normal(i, kFieldWealth);
    }
  }
  return out;
}

struct Row {
  std::string id;
  bool exposed = false;
  bool young = false;
  std::size_t ethnicity = 0;
  int gender = 0;
  double education = 0.0;
  const Neighborhood* home = nullptr;
};

void append_row(std::string& csv, const Row& row, bool outcome) {
  csv += row.id;
  csv += row.exposed ? ",1," : ",0,";
  csv += row.young ? "young," : "old,";
  csv += "eth" + std::to_string(row.ethnicity) + ",";
  csv += row.gender ? "1," : "0,";
  csv += format_double(row.education);
  csv += ",";
  csv += row.home->school ? "1," : "0,";
  csv += row.home->clinic ? "1," : "0,";
  csv += format_double(row.home->wealth);
  csv += ",";
  csv += row.home->id;
  csv += outcome ? ",1\n" : ",0\n";
}

double cell_risk(const ScenarioRisks& risks, bool exposed, bool young) {
  if (exposed) return young ? risks.young_exposed : risks.old_exposed;
  return young ? risks.young_unexposed : risks.old_unexposed;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_exposed_individuals < 2) {
    throw InvalidConfigError("need at least 2 exposed individuals");
  }
  if (n_young_exposed > n_exposed_individuals) {
    throw InvalidConfigError(
        "n_young_exposed exceeds n_exposed_individuals (" +
        std::to_string(n_young_exposed) + " > " +
        std::to_string(n_exposed_individuals) + ")");
  }
  if (n_exposed_neighborhoods < 1) {
    throw InvalidConfigError("need at least 1 exposed neighborhood");
  }
  if (n_exposed_neighborhoods > n_neighborhoods) {
    throw InvalidConfigError(
        "n_exposed_neighborhoods exceeds n_neighborhoods (" +
        std::to_string(n_exposed_neighborhoods) + " > " +
        std::to_string(n_neighborhoods) + ")");
  }
  if (n_neighborhoods < 3 * n_exposed_neighborhoods) {
    throw InvalidConfigError(
        "n_neighborhoods must be at least 3x n_exposed_neighborhoods; every "
        "exposed neighborhood needs two unexposed mirrors");
  }
  if (n_background_individuals > 0 &&
      n_neighborhoods == 3 * n_exposed_neighborhoods) {
    throw InvalidConfigError(
        "background individuals need at least one background neighborhood");
  }
  if (ethnicity_levels < 1) {
    throw InvalidConfigError("ethnicity_levels must be at least 1");
  }
  if (!(control_noise >= 0.0) || !std::isfinite(control_noise)) {
    throw InvalidConfigError("control_noise must be finite and >= 0");
  }
  if (!std::isfinite(neighborhood_shift)) {
    throw InvalidConfigError("neighborhood_shift must be finite");
  }
  check_risk(risks.young_exposed, "young_exposed");
  check_risk(risks.young_unexposed, "young_unexposed");
  check_risk(risks.old_exposed, "old_exposed");
  check_risk(risks.old_unexposed, "old_unexposed");
}

std::string scenario_csv(const ScenarioConfig& config) {
  config.validate();
  const std::vector<Neighborhood> nbhds = draw_neighborhoods(config);
  const Rng ind(config.seed, kStreamIndividual);
  const Rng out(config.seed, kStreamOutcome);

  const std::size_t n_exp = config.n_exposed_individuals;
  const std::size_t n_bg_nbhd =
      config.n_neighborhoods - 3 * config.n_exposed_neighborhoods;

  std::string csv;
  csv.reserve(config.total_units() * 64 + 128);
  csv +=
      "id,exposed,age_cat,ethnicity,gender,education,nbhd_school,nbhd_clinic,"
      "nbhd_wealth,neighborhood,outcome\n";

  // Exposed residents, dealt round-robin over the exposed neighborhoods so
  // every one of them is populated. The first n_young_exposed are young,
  // which keeps that count exact instead of binomially distributed.
  std::vector<Row> exposed(n_exp);
  for (std::size_t i = 0; i < n_exp; ++i) {
    Row& row = exposed[i];
    row.id = padded_id('e', i, 6);
    row.exposed = true;
    row.young = i < config.n_young_exposed;
    row.ethnicity = ind.below(i, kFieldEthnicity, config.ethnicity_levels);
    row.gender = ind.bernoulli(i, kFieldGender, kGenderPExposed) ? 1 : 0;
    row.education =
        kEducationMean + kEducationSd * ind.normal(i, kFieldEducation);
    row.home = &nbhds[i % config.n_exposed_neighborhoods];
    append_row(csv, row, out.bernoulli(i, 0, cell_risk(config.risks, true,
                                                       row.young)));
  }

  // Four unexposed counterparts per exposed resident, living in the two
  // mirrors of its neighborhood: k 0..1 copy the covariate vector exactly
  // (same exact keys, distance 0), k 2..3 jitter the individual covariates.
  // Selecting the copies satisfies any tolerance, which is what makes full
  // exposed retention feasible by construction.
  for (std::size_t i = 0; i < n_exp; ++i) {
    const Row& src = exposed[i];
    const std::size_t home = i % config.n_exposed_neighborhoods;
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t entity = n_exp + 4 * i + k;
      Row row = src;
      row.id = padded_id('u', 4 * i + k, 6);
      row.exposed = false;
      row.home = &nbhds[config.n_exposed_neighborhoods + 2 * home + (k & 1)];
      if (k >= 2) {
        row.gender =
            ind.bernoulli(entity, kFieldGenderRedraw, kGenderPControl) ? 1 : 0;
        row.education += config.control_noise * kEducationSd *
                         ind.normal(entity, kFieldEduJitter);
      }
      append_row(csv, row,
                 out.bernoulli(entity, 0,
                               cell_risk(config.risks, false, row.young)));
    }
  }

  // Background residents pad the unexposed pool with draws that are not
  // tied to any exposed unit.
  for (std::size_t j = 0; j < config.n_background_individuals; ++j) {
    const std::size_t entity = 5 * n_exp + j;
    const double young_frac =
        static_cast<double>(config.n_young_exposed) / static_cast<double>(n_exp);
    Row row;
    row.id = padded_id('b', j, 6);
    row.young = ind.bernoulli(entity, kFieldYoung, young_frac);
    row.ethnicity =
        ind.below(entity, kFieldEthnicity, config.ethnicity_levels);
    row.gender = ind.bernoulli(entity, kFieldGender, kGenderPControl) ? 1 : 0;
    row.education = kEducationMean + kBackgroundEduOffset +
                    kEducationSd * ind.normal(entity, kFieldEducation);
    row.home = &nbhds[3 * config.n_exposed_neighborhoods +
                      ind.below(entity, kFieldHome, n_bg_nbhd)];
    append_row(csv, row,
               out.bernoulli(entity, 0,
                             cell_risk(config.risks, false, row.young)));
  }
  return csv;
}

std::string scenario_study_json(const ScenarioConfig& config) {
  json doc;
  doc["covariates"]["balance"] = {"gender", "education", "nbhd_school",
                                  "nbhd_clinic", "nbhd_wealth"};
  doc["covariates"]["exact"] = {"age_cat", "ethnicity"};
  doc["covariates"]["ignore"] = {"neighborhood"};
  doc["covariates"]["outcome"] = "outcome";
  doc["target"]["source"] = "treated";
  doc["solver"]["seed"] = config.seed;
  doc["pairing"]["metric"] = "l1";
  return doc.dump(2) + "\n";
}

ScenarioFiles generate_scenario(const ScenarioConfig& config,
                                const std::string& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create directory '" + out_dir + "': " + ec.message());
  }
  ScenarioFiles files;
  files.data_csv = (std::filesystem::path(out_dir) / "data.csv").string();
  files.study_json = (std::filesystem::path(out_dir) / "study.json").string();
  write_text_file_atomic(files.data_csv, scenario_csv(config));
  write_text_file_atomic(files.study_json, scenario_study_json(config));
  log_info("scenario written: " + files.data_csv + " (" +
           std::to_string(config.total_units()) + " units)");
  return files;
}

ScenarioConfig parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(0, std::string("scenario config: ") + e.what());
  }
  if (!doc.is_object()) {
    throw InvalidConfigError("scenario config must be a JSON object");
  }
  static const std::set<std::string> allowed = {
      "n_neighborhoods",    "n_exposed_neighborhoods",
      "n_exposed_individuals", "n_young_exposed",
      "n_background_individuals", "ethnicity_levels",
      "neighborhood_shift", "control_noise",
      "risks",              "seed"};
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.count(key)) throw UnknownKeyError(key);
    (void)value;
  }

  auto count = [&doc](const char* key, std::size_t& field) {
    if (!doc.contains(key)) return;
    const json& v = doc[key];
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw InvalidConfigError("'" + std::string(key) +
                               "' must be a nonnegative integer");
    }
    field = v.get<std::size_t>();
  };
  auto number = [](const json& v, const std::string& path) {
    if (!v.is_number()) {
      throw InvalidConfigError("'" + path + "' must be a number");
    }
    return v.get<double>();
  };

  ScenarioConfig config;
  count("n_neighborhoods", config.n_neighborhoods);
  count("n_exposed_neighborhoods", config.n_exposed_neighborhoods);
  count("n_exposed_individuals", config.n_exposed_individuals);
  count("n_young_exposed", config.n_young_exposed);
  count("n_background_individuals", config.n_background_individuals);
  count("ethnicity_levels", config.ethnicity_levels);
  if (doc.contains("neighborhood_shift")) {
    config.neighborhood_shift = number(doc["neighborhood_shift"],
                                       "neighborhood_shift");
  }
  if (doc.contains("control_noise")) {
    config.control_noise = number(doc["control_noise"], "control_noise");
  }
  if (doc.contains("seed")) {
    const json& v = doc["seed"];
    if (!v.is_number_unsigned()) {
      throw InvalidConfigError("'seed' must be a nonnegative integer");
    }
    config.seed = v.get<std::uint64_t>();
  }
  if (doc.contains("risks")) {
    const json& sec = doc["risks"];
    if (!sec.is_object()) {
      throw InvalidConfigError("'risks' must be an object");
    }
    static const std::set<std::string> risk_keys = {
        "young_exposed", "young_unexposed", "old_exposed", "old_unexposed"};
    for (const auto& [key, value] : sec.items()) {
      if (!risk_keys.count(key)) throw UnknownKeyError("risks." + key);
      (void)value;
    }
    if (sec.contains("young_exposed")) {
      config.risks.young_exposed = number(sec["young_exposed"],
                                          "risks.young_exposed");
    }
    if (sec.contains("young_unexposed")) {
      config.risks.young_unexposed = number(sec["young_unexposed"],
                                            "risks.young_unexposed");
    }
    if (sec.contains("old_exposed")) {
      config.risks.old_exposed = number(sec["old_exposed"],
                                        "risks.old_exposed");
    }
    if (sec.contains("old_unexposed")) {
      config.risks.old_unexposed = number(sec["old_unexposed"],
                                          "risks.old_unexposed");
    }
  }
  config.validate();
  return config;
}

ScenarioConfig parse_scenario(const std::string& path) {
  return parse_scenario_text(read_text_file(path));
}

ScenarioConfig scale_scenario(const ScenarioConfig& base, std::size_t total) {
  base.validate();
  if (total < 10) throw InvalidConfigError("benchmark size must be >= 10");
  const double r =
      static_cast<double>(total) / static_cast<double>(base.total_units());
  auto scaled = [r](std::size_t v) {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(v) * r));
  };
  ScenarioConfig config = base;
  config.n_exposed_individuals =
      std::max<std::size_t>(2, scaled(base.n_exposed_individuals));
  config.n_young_exposed =
      std::min(config.n_exposed_individuals, scaled(base.n_young_exposed));
  config.n_background_individuals = scaled(base.n_background_individuals);
  config.n_exposed_neighborhoods =
      std::max<std::size_t>(1, scaled(base.n_exposed_neighborhoods));
  std::size_t bg_nbhd =
      scaled(base.n_neighborhoods - 3 * base.n_exposed_neighborhoods);
  if (config.n_background_individuals > 0 && bg_nbhd == 0) bg_nbhd = 1;
  config.n_neighborhoods = 3 * config.n_exposed_neighborhoods + bg_nbhd;
  config.validate();
  return config;
}

std::vector<BenchRow> run_benchmark(const std::vector<std::size_t>& sizes,
                                    const ScenarioConfig& base,
                                    const SolveLimits& limits,
                                    std::ostream* progress) {
  namespace fs = std::filesystem;
  using clock = std::chrono::steady_clock;
  const fs::path work = fs::temp_directory_path() /
                        ("cardmatch_bench_" + std::to_string(base.seed));
  std::vector<BenchRow> rows;
  for (std::size_t size : sizes) {
    const ScenarioConfig config = scale_scenario(base, size);
    const ScenarioFiles files =
        generate_scenario(config, (work / std::to_string(size)).string());
    const StudySpec spec = parse_spec(files.study_json);
    const Dataset raw = load_dataset(files.data_csv, spec.covariates);
    const Dataset dataset = standardize(raw);

    BenchRow row;
    row.size = size;
    row.units = dataset.units.size();
    row.exposed = dataset.n_treated();

    const auto t0 = clock::now();
    const SelectionProblem problem = compile_problem(dataset, spec);
    const MatchSolution solution =
        branch_and_bound(problem, dataset, limits);
    if (!verify_solution(problem, solution.selected).pass) {
      throw Error("benchmark solution failed verification at size " +
                  std::to_string(size));
    }
    const auto t1 = clock::now();
    const PairSet pairs = pair_within_strata(solution, dataset,
                                             spec.pairing.metric,
                                             limits.threads);
    const auto t2 = clock::now();

    row.n = solution.n;
    row.bound = solution.bound;
    row.gap = solution.gap;
    row.retention = row.exposed == 0
                        ? 0.0
                        : static_cast<double>(solution.n) /
                              static_cast<double>(row.exposed);
    row.solve_seconds = std::chrono::duration<double>(t1 - t0).count();
    row.pair_seconds = std::chrono::duration<double>(t2 - t1).count();
    row.hit_limit = solution.hit_limit;
    (void)pairs;
    rows.push_back(row);
    if (progress) {
      *progress << "size " << size << ": units=" << row.units
                << " pairs=" << row.n << " gap=" << row.gap
                << " solve=" << row.solve_seconds << "s pair="
                << row.pair_seconds << "s"
                << (row.hit_limit ? " (time limit)" : "") << "\n";
    }
  }
  return rows;
}

std::string bench_to_csv(const std::vector<BenchRow>& rows) {
  std::string csv =
      "size,units,exposed,pairs,bound,gap,retention,solve_seconds,"
      "pair_seconds,hit_limit\n";
  for (const BenchRow& row : rows) {
    csv += std::to_string(row.size) + "," + std::to_string(row.units) + "," +
           std::to_string(row.exposed) + "," + std::to_string(row.n) + "," +
           format_double(row.bound) + "," + format_double(row.gap) + "," +
           format_double(row.retention) + "," +
           format_double(row.solve_seconds) + "," +
           format_double(row.pair_seconds) + "," +
           (row.hit_limit ? "1" : "0") + "\n";
  }
  return csv;
}

}  // namespace cardmatch
