#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "cardmatch/csv.hpp"
#include "cardmatch/dataset.hpp"
#include "cardmatch/rng.hpp"

namespace testutil {

// Writes content to a uniquely named file in the working directory and
// removes it on scope exit.
struct TempFile {
  std::string path;
  TempFile(const std::string& content, const std::string& ext = ".csv") {
    static int counter = 0;
    path = "test_tmp_" + std::to_string(counter++) + ext;
    cardmatch::write_text_file(path, content);
  }
  ~TempFile() { std::remove(path.c_str()); }
};

// Dataset assembled directly from units whose `covariates` already hold the
// values the caller wants the compiler to see; marked standardized with
// identity parameters so compile_problem uses them verbatim.
inline cardmatch::Dataset preset_dataset(
    std::vector<cardmatch::Unit> units,
    std::vector<std::string> balance_names,
    std::vector<std::string> exact_names = {}) {
  cardmatch::Dataset ds;
  ds.units = std::move(units);
  for (auto& u : ds.units) {
    if (u.raw.empty()) u.raw = u.covariates;
  }
  ds.schema.balance_names = std::move(balance_names);
  ds.schema.exact_names = std::move(exact_names);
  ds.schema.standardized = true;
  ds.schema.standardization.assign(ds.schema.balance_names.size(),
                                   cardmatch::Standardization{0.0, 1.0});
  ds.strata = cardmatch::build_strata(ds);
  return ds;
}

inline cardmatch::Unit make_unit(std::string id, bool exposed,
                                 std::vector<double> x,
                                 std::string stratum = "s0") {
  cardmatch::Unit u;
  u.id = std::move(id);
  u.exposed = exposed;
  u.covariates = std::move(x);
  u.raw = u.covariates;
  u.exact_keys = {std::move(stratum)};
  return u;
}

// Seeded random instance for solver cross-checks: continuous covariates,
// random stratum labels, ids zero-padded so string order is stable.
inline cardmatch::Dataset random_instance(std::uint64_t seed, std::size_t nt,
                                          std::size_t nc, std::size_t k,
                                          std::size_t n_strata,
                                          bool do_standardize = true) {
  cardmatch::Rng rng(seed, 1);
  std::vector<cardmatch::Unit> units;
  for (std::size_t i = 0; i < nt + nc; ++i) {
    cardmatch::Unit u;
    const bool exposed = i < nt;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%c%03zu", exposed ? 't' : 'c',
                  exposed ? i : i - nt);
    u.id = buf;
    u.exposed = exposed;
    u.exact_keys = {"s" + std::to_string(rng.below(i, 0, n_strata))};
    for (std::size_t kk = 0; kk < k; ++kk) {
      u.covariates.push_back(rng.normal(i, kk + 1));
    }
    u.raw = u.covariates;
    u.row = i + 1;
    units.push_back(std::move(u));
  }
  std::vector<std::string> names;
  for (std::size_t kk = 0; kk < k; ++kk) {
    names.push_back("x" + std::to_string(kk));
  }
  cardmatch::Dataset ds;
  ds.units = std::move(units);
  ds.schema.balance_names = std::move(names);
  ds.schema.exact_names = {"g"};
  ds.strata = cardmatch::build_strata(ds);
  return do_standardize ? cardmatch::standardize(ds) : ds;
}

}  // namespace testutil
