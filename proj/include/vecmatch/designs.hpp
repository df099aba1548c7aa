#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "vecmatch/cluster.hpp"
#include "vecmatch/dataset.hpp"
#include "vecmatch/gps.hpp"

namespace vecmatch {

/// A matched cohort. Each tuple holds one row per arm, in the order given
/// by `arms`; the same non-reference row may appear in several tuples when
/// matching ran with replacement, which `psi` counts per source row.
struct MatchedCohort {
  std::string design;
  int reference = 1;
  std::vector<int> arms;                // arm codes, tuple column order
  std::vector<std::vector<int>> tuples; // n_trip x arms.size(), rows of the source dataset
  std::vector<int> psi;                 // appearance count per source row
  // Reference units inside the design's own support, the %Matched
  // denominator. -1 when the design does not decide eligibility itself
  // (vector matching takes the already-trimmed reference count).
  int eligible_refs = -1;
  std::vector<std::string> notes;

  int n_trip() const { return static_cast<int>(tuples.size()); }
};

/// Consistency check (row ranges, arm membership, psi recount). Throws
/// ValidationError on the first violation.
void validate_cohort(const MatchedCohort& c, const Dataset& ds);

struct VmOptions {
  int k = 5;              // strata per comparator run
  double epsilon = 0.25;  // caliper in pooled-SD units of the matching score
  std::uint64_t seed = 0;
  int restarts = 10;
  int max_reseeds = 10;
};

/// Vector matching on an already-trimmed dataset with its re-fitted
/// scores. For each comparator arm: stratify everyone by k-means on the
/// z-2 logit columns that belong to neither the reference nor the
/// comparator, then match reference units to comparator units within each
/// stratum, with replacement, on the reference-arm logit. A reference unit
/// enters the cohort only if every comparator run matched it.
MatchedCohort vector_match(const Dataset& trimmed, const GpsMatrix& gps,
                           int reference, const VmOptions& opts);

/// Common-referent matching for exactly three arms: two separate binary
/// propensity matchings (reference vs each comparator, greedy, without
/// replacement, caliper epsilon * SD of the fitted score, restricted to
/// the pairwise score overlap), intersected on the reference units matched
/// in both.
MatchedCohort crm_match(const Dataset& ds, int reference, double epsilon,
                        const FitOptions& fit = {});

/// One comparison from a series-of-binary-comparisons analysis: the same
/// per-pair matching CRM uses (binary score, pairwise overlap, greedy
/// without replacement), kept as a standalone two-arm cohort.
MatchedCohort sbc_match(const Dataset& ds, int arm_a, int arm_b,
                        double epsilon, const FitOptions& fit = {});

/// k-means subclassification on all z logit columns. Subclasses are NOT
/// repaired to contain every arm; deficient ones are flagged and later
/// skipped (with a note) by the balance summary.
struct Subclassification {
  Clustering clustering;
  std::vector<int> sizes;
  std::vector<bool> deficient;  // subclass misses at least one arm
  std::vector<std::string> notes;
};

Subclassification kmc_subclassify(const Dataset& ds, const GpsMatrix& gps,
                                  int k, std::uint64_t seed, int restarts = 10);

/// Inverse-probability weights 1 / r(T_i, X_i) for the given sample
/// (typically the trimmed one). Extreme weights are noted, never
/// truncated.
struct IpwWeights {
  Eigen::VectorXd w;
  std::vector<std::string> notes;
};

IpwWeights ipw_weights(const Dataset& ds, const GpsMatrix& gps);

}  // namespace vecmatch
