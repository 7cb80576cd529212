#include "cardmatch/problem.hpp"

#include <cmath>
#include <cstdlib>

#include "cardmatch/csv.hpp"
#include "cardmatch/errors.hpp"
#include "cardmatch/log.hpp"

namespace cardmatch {

namespace {

std::vector<double> group_means(const Dataset& ds, bool exposed_only,
                                bool everyone) {
  const std::size_t k = ds.schema.size();
  std::vector<double> sum(k, 0.0);
  std::size_t n = 0;
  for (const auto& u : ds.units) {
    if (!everyone && u.exposed != exposed_only) continue;
    for (std::size_t j = 0; j < k; ++j) sum[j] += u.raw[j];
    ++n;
  }
  for (auto& s : sum) s /= static_cast<double>(n);
  return sum;
}

}  // namespace

TargetProfile derive_target_profile(const Dataset& dataset,
                                    const TargetSpec& target) {
  TargetProfile profile;
  profile.source = target.source;
  const auto& names = dataset.schema.balance_names;

  switch (target.source) {
    case TargetSource::None:
      return profile;
    case TargetSource::Treated:
      profile.raw = group_means(dataset, true, false);
      break;
    case TargetSource::Full:
      profile.raw = group_means(dataset, false, true);
      break;
    case TargetSource::File: {
      CsvTable table = read_csv(target.path);
      const int name_col = table.column("covariate");
      const int mean_col = table.column("mean");
      if (name_col < 0 || mean_col < 0) {
        throw IoError("target file '" + target.path +
                      "' needs columns covariate,mean");
      }
      profile.raw.assign(names.size(), 0.0);
      std::vector<char> found(names.size(), 0);
      for (const auto& row : table.rows) {
        const int k = dataset.schema.index_of(row[name_col]);
        if (k < 0) {
          log_warn("target file names unknown covariate '" + row[name_col] +
                   "'; ignoring it");
          continue;
        }
        char* end = nullptr;
        const double v = std::strtod(row[mean_col].c_str(), &end);
        if (end != row[mean_col].c_str() + row[mean_col].size() ||
            !std::isfinite(v)) {
          throw MissingTargetMeanError(row[name_col]);
        }
        profile.raw[static_cast<std::size_t>(k)] = v;
        found[static_cast<std::size_t>(k)] = 1;
      }
      for (std::size_t k = 0; k < names.size(); ++k) {
        if (!found[k]) throw MissingTargetMeanError(names[k]);
      }
      break;
    }
  }

  if (dataset.schema.standardization.size() != names.size()) {
    throw Error("target profile needs the dataset's standardization");
  }
  profile.standardized.resize(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    const Standardization& s = dataset.schema.standardization[k];
    profile.standardized[k] = (profile.raw[k] - s.mean) / s.pooled_sd;
  }
  return profile;
}

SelectionProblem compile_problem(const Dataset& dataset,
                                 const StudySpec& spec) {
  if (!dataset.schema.standardized && !dataset.schema.balance_names.empty()) {
    throw Error("compile_problem requires a standardized dataset");
  }
  for (const auto& [name, tol] : spec.group_tolerance_map) {
    (void)tol;
    if (dataset.schema.index_of(name) < 0) throw UnknownColumnError(name);
  }
  for (const auto& [name, tol] : spec.target_tolerance_map) {
    (void)tol;
    if (dataset.schema.index_of(name) < 0) throw UnknownColumnError(name);
  }

  SelectionProblem p;
  p.n_treated = dataset.n_treated();
  p.n_controls = dataset.n_controls();
  p.var_unit.resize(p.n_vars());
  p.var_stratum.assign(p.n_vars(), -1);
  p.var_fixed_zero.assign(p.n_vars(), 0);

  // Treated variables first, in unit order; controls after, in unit order.
  std::vector<int> unit_var(dataset.units.size(), -1);
  {
    std::size_t t = 0, c = p.n_treated;
    for (std::size_t i = 0; i < dataset.units.size(); ++i) {
      const std::size_t j = dataset.units[i].exposed ? t++ : c++;
      p.var_unit[j] = i;
      unit_var[i] = static_cast<int>(j);
    }
  }

  bool any_capacity = false;
  for (std::size_t s = 0; s < dataset.strata.size(); ++s) {
    const Stratum& st = dataset.strata[s];
    const bool dead = st.zero_capacity();
    if (!dead) any_capacity = true;
    for (std::size_t i : st.treated) {
      p.var_stratum[unit_var[i]] = static_cast<int>(s);
      if (dead) p.var_fixed_zero[unit_var[i]] = 1;
    }
    for (std::size_t i : st.controls) {
      p.var_stratum[unit_var[i]] = static_cast<int>(s);
      if (dead) p.var_fixed_zero[unit_var[i]] = 1;
    }
  }
  if (!any_capacity) throw EmptyProblemError();

  // Stratum equalities: sum a - sum b = 0.
  for (std::size_t s = 0; s < dataset.strata.size(); ++s) {
    const Stratum& st = dataset.strata[s];
    ConstraintRow row;
    row.name = "stratum[" + st.label + "]";
    row.equality = true;
    for (std::size_t i : st.treated) row.coeffs.emplace_back(unit_var[i], 1.0);
    for (std::size_t i : st.controls)
      row.coeffs.emplace_back(unit_var[i], -1.0);
    p.rows.push_back(std::move(row));
  }

  const auto& names = dataset.schema.balance_names;
  const auto x = [&](std::size_t j, std::size_t k) {
    return dataset.units[p.var_unit[j]].covariates[k];
  };

  // Group balance: |sum_t a x - sum_c b x| <= delta * sum_t a, two rows.
  if (spec.group_balance) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      const double delta = spec.group_delta(names[k]);
      for (int sign : {+1, -1}) {
        ConstraintRow row;
        row.name = "group[" + names[k] + (sign > 0 ? "]+" : "]-");
        row.coeffs.reserve(p.n_vars());
        for (std::size_t j = 0; j < p.n_vars(); ++j) {
          const double c = p.is_treated_var(j) ? sign * x(j, k) - delta
                                               : -sign * x(j, k);
          row.coeffs.emplace_back(static_cast<int>(j), c);
        }
        p.rows.push_back(std::move(row));
      }
    }
  }

  // Target rows: each side's selected mean within eps of the target, so
  // |sum_g x - tau * sum_g| <= eps * sum_g for g in {treated, control}.
  if (spec.target.source != TargetSource::None) {
    const TargetProfile profile = derive_target_profile(dataset, spec.target);
    for (std::size_t k = 0; k < names.size(); ++k) {
      const double eps = spec.target_eps(names[k]);
      const double tau = profile.standardized[k];
      for (const bool treated_side : {true, false}) {
        for (int sign : {+1, -1}) {
          ConstraintRow row;
          row.name = std::string("target_") + (treated_side ? "t[" : "c[") +
                     names[k] + (sign > 0 ? "]+" : "]-");
          for (std::size_t j = 0; j < p.n_vars(); ++j) {
            if (p.is_treated_var(j) != treated_side) continue;
            row.coeffs.emplace_back(static_cast<int>(j),
                                    sign * (x(j, k) - tau) - eps);
          }
          p.rows.push_back(std::move(row));
        }
      }
    }
  }

  if (spec.min_pairs > 0) {
    ConstraintRow row;
    row.name = "min_pairs";
    row.rhs = -static_cast<double>(spec.min_pairs);
    for (std::size_t j = 0; j < p.n_treated; ++j) {
      row.coeffs.emplace_back(static_cast<int>(j), -1.0);
    }
    p.rows.push_back(std::move(row));
  }
  return p;
}

FeasibilityReport verify_solution(const SelectionProblem& problem,
                                  const std::vector<char>& selected) {
  FeasibilityReport report;
  if (selected.size() != problem.n_vars()) {
    report.pass = false;
    report.violations.push_back("selection vector has wrong length");
    return report;
  }
  for (std::size_t j = 0; j < selected.size(); ++j) {
    if (selected[j] != 0 && selected[j] != 1) {
      report.violations.push_back("variable " + std::to_string(j) +
                                  " is not binary");
    }
    if (problem.var_fixed_zero[j] && selected[j]) {
      report.violations.push_back("variable " + std::to_string(j) +
                                  " is fixed to 0 but selected");
    }
  }
  for (std::size_t j = 0; j < problem.n_treated; ++j) {
    report.n_pairs += selected[j] ? 1 : 0;
  }

  constexpr double kTol = 1e-9;
  for (const auto& row : problem.rows) {
    double lhs = 0.0;
    for (const auto& [j, c] : row.coeffs) {
      if (selected[static_cast<std::size_t>(j)]) lhs += c;
    }
    FeasibilityReport::Row r;
    r.name = row.name;
    r.lhs = lhs;
    r.rhs = row.rhs;
    r.slack = row.equality ? -std::abs(lhs - row.rhs) : row.rhs - lhs;
    if (r.slack < -kTol) {
      report.violations.push_back(row.name + " violated by " +
                                  format_double(-r.slack));
    }
    report.rows.push_back(std::move(r));
  }
  report.pass = report.violations.empty();
  return report;
}

}  // namespace cardmatch
