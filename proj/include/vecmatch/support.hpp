#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vecmatch/dataset.hpp"
#include "vecmatch/gps.hpp"

namespace vecmatch {

/// A common-support region over assignment probabilities. For the
/// rectangular kind there is one (low, high) interval per arm column; for
/// the pairwise kind there is a single interval over a binary score.
struct CommonSupport {
  enum class Kind { Rectangular, Pairwise };
  Kind kind = Kind::Rectangular;
  Eigen::VectorXd low;
  Eigen::VectorXd high;
  std::vector<int> eligible;  // row indices, ascending
};

/// Rectangular region: for each arm column t, low = the largest per-arm
/// minimum of that column and high = the smallest per-arm maximum. A unit
/// is eligible when every probability lies strictly inside its interval;
/// a width-zero interval admits the value it collapses to.
CommonSupport rectangular_support(const Eigen::MatrixXd& probs,
                                  const std::vector<int>& treatment, int z);

/// Pairwise region over one binary propensity score: the closed overlap
/// of the two arms' score ranges. Throws ValidationError when the ranges
/// are disjoint.
CommonSupport pairwise_support(const Eigen::VectorXd& ps,
                               const std::vector<int>& arm_of_row);

/// One full trim pass: fit the assignment model on everything, drop units
/// outside the rectangular region, then re-fit once on the survivors.
/// Scores carried forward come from the re-fit.
struct TrimResult {
  Dataset trimmed;
  std::vector<int> survivor_rows;  // indices into the input dataset
  GpsModel first_fit;
  GpsModel refit;
  GpsMatrix gps;  // re-fitted scores for the trimmed rows
  CommonSupport support;
  double dropped_fraction = 0.0;
};

TrimResult trim_to_support(const Dataset& ds, const FitOptions& opts = {});

}  // namespace vecmatch
