#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "vecmatch/dataset.hpp"
#include "vecmatch/designs.hpp"

namespace vecmatch {

/// Covariate balance across arms under some weighting. `means` has one row
/// per entry of `arms`; standardized bias always divides by the scale
/// passed in (per-covariate SD of the original reference arm), never by a
/// post-weighting SD.
struct BalanceReport {
  std::vector<int> arms;
  Eigen::MatrixXd means;    // arms.size() x P
  std::vector<std::pair<int, int>> arm_pairs;  // indices into arms
  Eigen::MatrixXd sb;       // arm_pairs.size() x P, signed bias per pair
  Eigen::VectorXd max2sb;   // per covariate, max |bias| over arm pairs
  Eigen::VectorXd avg_abs_sb;  // per covariate, mean |bias| over arm pairs
  Eigen::VectorXd scale;    // the denominators used
  double max2sb_mean = 0.0; // max2sb averaged over covariates
  std::vector<std::string> notes;
};

/// Sample SD (n-1 denominator) of each covariate within the reference arm
/// of `ds`. Compute this on the full pre-trim data so biases before and
/// after adjustment share one scale.
Eigen::VectorXd reference_sd(const Dataset& ds, int reference);

/// Means over matched tuples: each tuple contributes its row for the arm,
/// so multiply-matched rows count once per appearance.
BalanceReport cohort_balance(const Dataset& ds, const MatchedCohort& c,
                             const Eigen::VectorXd& scale);

/// Self-normalized weighted means per arm.
BalanceReport ipw_balance(const Dataset& ds, const IpwWeights& w,
                          const Eigen::VectorXd& scale);

/// Within-subclass arm means combined with subclass-size weights;
/// subclasses missing an arm are skipped and noted.
BalanceReport kmc_balance(const Dataset& ds, const Subclassification& sc,
                          const Eigen::VectorXd& scale);

/// Raw per-arm means, for the pre-adjustment baseline.
BalanceReport unweighted_balance(const Dataset& ds, const Eigen::VectorXd& scale);

/// Share of eligible reference units that made it into the cohort.
double pct_matched(const MatchedCohort& c, int eligible_refs);

}  // namespace vecmatch
