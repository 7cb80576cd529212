#pragma once

#include <string>
#include <vector>

#include "cardmatch/branch_bound.hpp"
#include "cardmatch/dataset.hpp"
#include "cardmatch/study_spec.hpp"

namespace cardmatch {

struct MatchedPair {
  std::string treated_id;
  std::string control_id;
  std::size_t stratum = 0;   // index into dataset.strata
  double distance = 0.0;     // standardized units
};

struct PairSet {
  std::vector<MatchedPair> pairs;
  double total_distance = 0.0;
  std::vector<double> stratum_distance;  // one entry per stratum
};

/// Distance between two units over the standardized balance covariates.
double pair_distance(const Unit& a, const Unit& b, PairMetric metric);

/// Dense cost matrix (row-major, treated x controls) for small instances.
std::vector<double> distance_matrix(const std::vector<const Unit*>& treated,
                                    const std::vector<const Unit*>& controls,
                                    PairMetric metric);

/// Pair the selected units within each stratum by minimum-cost perfect
/// matching; among equal-cost matchings the lexicographically smallest pair
/// list wins (up to the density guard in lexicographic_refine). Strata can
/// be processed by parallel workers; output order is deterministic.
PairSet pair_within_strata(const MatchSolution& solution,
                           const Dataset& dataset, PairMetric metric,
                           int threads = 1);

/// True when no two pairs of one stratum could swap partners and strictly
/// lower the total distance.
bool exchange_stable(const PairSet& pairs, const Dataset& dataset,
                     PairMetric metric);

/// pairs.csv content: pair_id, treated_id, control_id, stratum, distance.
std::string pairs_to_csv(const PairSet& pairs, const Dataset& dataset);

}  // namespace cardmatch
