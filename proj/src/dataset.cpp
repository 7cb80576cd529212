#include "cardmatch/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include "cardmatch/csv.hpp"
#include "cardmatch/errors.hpp"
#include "cardmatch/log.hpp"

namespace cardmatch {

int CovariateSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < balance_names.size(); ++i) {
    if (balance_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t Dataset::n_treated() const {
  std::size_t n = 0;
  for (const auto& u : units) n += u.exposed ? 1 : 0;
  return n;
}

std::size_t Dataset::n_controls() const { return units.size() - n_treated(); }

void Dataset::ensure_index() const {
  if (id_index_.size() == units.size()) return;
  id_index_.clear();
  id_index_.reserve(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    id_index_.emplace_back(units[i].id, i);
  }
  std::sort(id_index_.begin(), id_index_.end());
}

int Dataset::unit_index(const std::string& id) const {
  ensure_index();
  auto it = std::lower_bound(
      id_index_.begin(), id_index_.end(), id,
      [](const auto& entry, const std::string& key) { return entry.first < key; });
  if (it == id_index_.end() || it->first != id) return -1;
  return static_cast<int>(it->second);
}

const Unit& Dataset::by_id(const std::string& id) const {
  const int idx = unit_index(id);
  if (idx < 0) throw Error("unit id '" + id + "' not in dataset");
  return units[static_cast<std::size_t>(idx)];
}

namespace {

bool parse_strict_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end != begin + s.size()) return false;
  return std::isfinite(out);
}

struct GroupMoments {
  double mean = 0.0;
  double var_t = 0.0;  // sample variance, exposed group
  double var_c = 0.0;  // sample variance, unexposed group
};

GroupMoments column_moments(const std::vector<Unit>& units, std::size_t k) {
  double sum = 0.0, sum_t = 0.0, sum_c = 0.0;
  std::size_t n = 0, n_t = 0, n_c = 0;
  for (const auto& u : units) {
    const double x = u.covariates[k];
    sum += x;
    ++n;
    if (u.exposed) {
      sum_t += x;
      ++n_t;
    } else {
      sum_c += x;
      ++n_c;
    }
  }
  GroupMoments m;
  m.mean = sum / static_cast<double>(n);
  const double mean_t = sum_t / static_cast<double>(n_t);
  const double mean_c = sum_c / static_cast<double>(n_c);
  double ss_t = 0.0, ss_c = 0.0;
  for (const auto& u : units) {
    const double x = u.covariates[k];
    if (u.exposed) ss_t += (x - mean_t) * (x - mean_t);
    else ss_c += (x - mean_c) * (x - mean_c);
  }
  m.var_t = ss_t / static_cast<double>(n_t - 1);
  m.var_c = ss_c / static_cast<double>(n_c - 1);
  return m;
}

std::vector<Standardization> compute_standardization(
    const std::vector<Unit>& units, const std::vector<std::string>& names) {
  std::vector<Standardization> out(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    const GroupMoments m = column_moments(units, k);
    const double pooled = std::sqrt((m.var_t + m.var_c) / 2.0);
    if (!(pooled > 0.0)) throw ConstantCovariateError(names[k]);
    out[k] = Standardization{m.mean, pooled};
  }
  return out;
}

}  // namespace

std::vector<Stratum> build_strata(const Dataset& dataset) {
  std::map<std::vector<std::string>, Stratum> groups;
  for (std::size_t i = 0; i < dataset.units.size(); ++i) {
    const Unit& u = dataset.units[i];
    Stratum& s = groups[u.exact_keys];
    if (s.label.empty() && s.key.empty()) {
      s.key = u.exact_keys;
      std::string label;
      for (std::size_t j = 0; j < s.key.size(); ++j) {
        if (j > 0) label += '|';
        label += s.key[j];
      }
      s.label = label;
    }
    if (u.exposed) s.treated.push_back(i);
    else s.controls.push_back(i);
  }
  std::vector<Stratum> strata;
  strata.reserve(groups.size());
  for (auto& [key, s] : groups) strata.push_back(std::move(s));
  for (const auto& s : strata) {
    if (s.zero_capacity()) {
      log_warn("stratum '" + s.label + "' has " +
               std::to_string(s.treated.size()) + " treated and " +
               std::to_string(s.controls.size()) +
               " control units; zero capacity, its units cannot be matched");
    }
  }
  return strata;
}

Dataset load_dataset(const std::string& path, const SchemaConfig& config) {
  CsvTable table = read_csv(path);

  const int id_col = table.column("id");
  const int exposed_col = table.column("exposed");
  if (id_col < 0) throw UnknownColumnError("id");
  if (exposed_col < 0) throw UnknownColumnError("exposed");

  // One-hot expansion rewrites the table in place: each listed column is
  // replaced by one indicator column per distinct value, named col=value.
  std::vector<std::string> balance = config.balance;
  for (const auto& col : config.one_hot) {
    const int c = table.column(col);
    if (c < 0) throw UnknownColumnError(col);
    auto bal_it = std::find(balance.begin(), balance.end(), col);
    if (bal_it == balance.end()) {
      throw InvalidConfigError("one-hot column '" + col +
                               "' must have the balance role");
    }
    std::set<std::string> levels;
    for (const auto& row : table.rows) levels.insert(row[c]);
    std::vector<std::string> expanded;
    for (const auto& level : levels) {
      const std::string name = col + "=" + level;
      table.header.push_back(name);
      expanded.push_back(name);
      for (auto& row : table.rows) row.push_back(row[c] == level ? "1" : "0");
    }
    // Drop the original column from header and rows.
    table.header.erase(table.header.begin() + c);
    for (auto& row : table.rows) row.erase(row.begin() + c);
    bal_it = std::find(balance.begin(), balance.end(), col);
    bal_it = balance.erase(bal_it);
    balance.insert(bal_it, expanded.begin(), expanded.end());
  }

  // Resolve every configured column; anything the config names must exist.
  for (const auto& name : balance) {
    if (table.column(name) < 0) throw UnknownColumnError(name);
  }
  for (const auto& name : config.exact) {
    if (table.column(name) < 0) throw UnknownColumnError(name);
  }
  for (const auto& name : config.ignore) {
    if (table.column(name) < 0) throw UnknownColumnError(name);
  }

  Dataset ds;
  ds.schema.balance_names = balance;
  ds.schema.exact_names = config.exact;
  ds.schema.ignore_names = config.ignore;

  const int outcome_col = table.column(config.outcome_column);
  ds.has_outcome = outcome_col >= 0;
  ds.outcome_column = config.outcome_column;

  // Columns not mentioned anywhere default to ignore.
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (static_cast<int>(c) == id_col || static_cast<int>(c) == exposed_col ||
        static_cast<int>(c) == outcome_col) {
      continue;
    }
    const bool known =
        std::find(balance.begin(), balance.end(), name) != balance.end() ||
        std::find(config.exact.begin(), config.exact.end(), name) !=
            config.exact.end() ||
        std::find(config.ignore.begin(), config.ignore.end(), name) !=
            config.ignore.end();
    if (!known) {
      log_info("column '" + name + "' has no configured role; ignoring it");
      ds.schema.ignore_names.push_back(name);
    }
  }

  std::vector<int> balance_cols, exact_cols;
  for (const auto& name : balance) balance_cols.push_back(table.column(name));
  for (const auto& name : config.exact) exact_cols.push_back(table.column(name));

  std::set<std::string> seen_ids;
  ds.units.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    Unit u;
    u.row = row_no;
    u.id = row[id_col];
    if (!seen_ids.insert(u.id).second) throw DuplicateIdError(u.id);

    const std::string& exp = row[exposed_col];
    if (exp == "0") u.exposed = false;
    else if (exp == "1") u.exposed = true;
    else throw NonBinaryExposureError(row_no);

    u.raw.reserve(balance_cols.size());
    for (std::size_t k = 0; k < balance_cols.size(); ++k) {
      double v = 0.0;
      if (!parse_strict_double(row[balance_cols[k]], v)) {
        throw MissingValueError(row_no, balance[k]);
      }
      u.raw.push_back(v);
    }
    u.covariates = u.raw;

    for (std::size_t k = 0; k < exact_cols.size(); ++k) {
      const std::string& key = row[exact_cols[k]];
      if (key.empty()) throw MissingValueError(row_no, config.exact[k]);
      u.exact_keys.push_back(key);
    }

    if (outcome_col >= 0) {
      double v = 0.0;
      if (!parse_strict_double(row[outcome_col], v)) {
        throw MissingValueError(row_no, config.outcome_column);
      }
      u.outcome = v;
    }
    ds.units.push_back(std::move(u));
  }

  const std::size_t n_t = ds.n_treated();
  const std::size_t n_c = ds.units.size() - n_t;
  if (n_t < 2 || n_c < 2) {
    throw Error("dataset needs at least 2 exposed and 2 unexposed units, got " +
                std::to_string(n_t) + " exposed and " + std::to_string(n_c) +
                " unexposed");
  }

  if (!ds.schema.balance_names.empty()) {
    ds.schema.standardization =
        compute_standardization(ds.units, ds.schema.balance_names);
  }
  ds.strata = build_strata(ds);
  return ds;
}

Dataset standardize(const Dataset& dataset) {
  if (dataset.schema.balance_names.empty()) {
    throw Error("standardize requires at least one balance covariate");
  }
  Dataset out = dataset;
  const auto params =
      compute_standardization(out.units, out.schema.balance_names);
  for (auto& u : out.units) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      u.covariates[k] = (u.covariates[k] - params[k].mean) / params[k].pooled_sd;
    }
  }
  // Keep the raw -> current mapping composable across repeated calls.
  if (out.schema.standardized) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      Standardization& s = out.schema.standardization[k];
      s.mean = s.mean + params[k].mean * s.pooled_sd;
      s.pooled_sd = s.pooled_sd * params[k].pooled_sd;
    }
  } else {
    out.schema.standardization = params;
  }
  out.schema.standardized = true;
  return out;
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::ostringstream out;
  out << "id,exposed";
  for (const auto& name : dataset.schema.exact_names) {
    out << ',' << csv_escape(name);
  }
  for (const auto& name : dataset.schema.balance_names) {
    out << ',' << csv_escape(name);
  }
  if (dataset.has_outcome) out << ',' << csv_escape(dataset.outcome_column);
  out << '\n';
  for (const auto& u : dataset.units) {
    out << csv_escape(u.id) << ',' << (u.exposed ? '1' : '0');
    for (const auto& key : u.exact_keys) out << ',' << csv_escape(key);
    for (double v : u.raw) out << ',' << format_double(v);
    if (dataset.has_outcome) out << ',' << format_double(u.outcome.value());
    out << '\n';
  }
  return out.str();
}

}  // namespace cardmatch
