#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "vecmatch/dataset.hpp"
#include "vecmatch/designs.hpp"

namespace vecmatch {

/// Outcome contrasts between arms on a common weighting. `effects(a, b)`
/// is arm_means(a) - arm_means(b) in the order of `arms`.
struct EffectEstimates {
  std::vector<int> arms;
  Eigen::VectorXd arm_means;
  Eigen::MatrixXd effects;
  int n_trip = 0;
};

/// Average effects on the matched reference cohort: per-arm outcome means
/// over tuples, then pairwise differences.
EffectEstimates satt(const Dataset& ds, const MatchedCohort& c);

/// Population-level contrasts from inverse-probability weights, each arm
/// mean self-normalized by its total weight.
EffectEstimates ipw_effects(const Dataset& ds, const IpwWeights& w);

/// Matched outcomes as an n_trip x arms matrix, rows aligned with tuples.
Eigen::MatrixXd outcome_matrix(const Dataset& ds, const MatchedCohort& c);

struct TestResult {
  double statistic = 0.0;
  double dof1 = 0.0;
  double dof2 = 0.0;  // 0 when the reference distribution has one dof parameter
  double p_asymptotic = 1.0;
  std::optional<double> p_exact;  // set when blocks <= exact_threshold
};

/// Friedman rank test across arms with matched blocks, tie-corrected.
/// Blocks where every value ties contribute nothing; if all blocks are
/// like that the statistic is 0. The exact p-value enumerates within-block
/// permutations when feasible.
TestResult friedman_test(const Eigen::MatrixXd& y, int exact_threshold = 8);

/// Quade test: blocks weighted by the rank of their range. Throws
/// ValidationError when no block has any variation. A statistic of
/// infinity (perfect separation) is legitimate and keeps its exact
/// p-value.
TestResult quade_test(const Eigen::MatrixXd& y, int exact_threshold = 8);

/// Average ranks of `v`, ties sharing their mean rank (1-based).
Eigen::VectorXd average_ranks(const Eigen::VectorXd& v);

}  // namespace vecmatch
