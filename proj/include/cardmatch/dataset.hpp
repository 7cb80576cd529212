#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace cardmatch {

/// One observational unit. Covariate order follows the schema's balance list;
/// `covariates` holds standardized values once standardize() has run, `raw`
/// always keeps the values as loaded.
struct Unit {
  std::string id;
  bool exposed = false;
  std::vector<double> covariates;
  std::vector<double> raw;
  std::vector<std::string> exact_keys;
  std::optional<double> outcome;
  std::size_t row = 0;
};

struct Standardization {
  double mean = 0.0;
  double pooled_sd = 1.0;
};

struct CovariateSchema {
  std::vector<std::string> balance_names;
  std::vector<std::string> exact_names;
  std::vector<std::string> ignore_names;
  std::vector<Standardization> standardization;  // one per balance covariate
  bool standardized = false;

  std::size_t size() const { return balance_names.size(); }
  int index_of(const std::string& name) const;
};

struct Stratum {
  std::vector<std::string> key;
  std::string label;                 // key parts joined with '|'
  std::vector<std::size_t> treated;  // indices into Dataset::units
  std::vector<std::size_t> controls;

  bool zero_capacity() const { return treated.empty() || controls.empty(); }
};

// The covariates section of a study config, enough to drive ingestion.
struct SchemaConfig {
  std::vector<std::string> balance;
  std::vector<std::string> exact;
  std::vector<std::string> ignore;
  std::vector<std::string> one_hot;  // columns expanded to indicator columns
  std::string outcome_column = "outcome";
};

struct Dataset {
  std::vector<Unit> units;
  CovariateSchema schema;
  std::vector<Stratum> strata;  // sorted by key tuple
  bool has_outcome = false;
  std::string outcome_column;

  std::size_t n_treated() const;
  std::size_t n_controls() const;
  const Unit& by_id(const std::string& id) const;
  int unit_index(const std::string& id) const;  // -1 if absent

 private:
  mutable std::vector<std::pair<std::string, std::size_t>> id_index_;
  void ensure_index() const;
};

/// Load and validate a CSV of units. Requires `id` and `exposed` columns,
/// rejects missing values, duplicate ids, non-binary exposure and covariate
/// columns the config does not cover in either direction. Row order is kept.
Dataset load_dataset(const std::string& path, const SchemaConfig& config);

/// Replace every balance covariate x by (x - mean) / pooled_sd, where the
/// mean is the full-sample mean and pooled_sd = sqrt((sd_T^2 + sd_C^2) / 2)
/// from the exposure-group sample SDs of the full pre-match sample.
Dataset standardize(const Dataset& dataset);

/// Group units by their exact-key tuple. Strata with no treated or no control
/// units are kept but flagged zero-capacity (warning logged).
std::vector<Stratum> build_strata(const Dataset& dataset);

/// Serialize back to the CSV schema load_dataset consumes (raw values).
std::string dataset_to_csv(const Dataset& dataset);

}  // namespace cardmatch
