#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vecmatch/dataset.hpp"

namespace vecmatch {

struct FitOptions {
  double ridge = 1e-8;  // L2 penalty on slopes; intercepts are never penalized
  double tol = 1e-8;    // max-norm of the penalized score at convergence
  int max_iter = 100;
};

/// Multinomial logit for P(T = t | X). Arm Z is the baseline with
/// coefficients pinned to zero; row t-1 of `coefficients` holds
/// (intercept, slopes...) for arm t in 1..Z-1.
struct GpsModel {
  Eigen::MatrixXd coefficients;  // (Z-1) x (P+1)
  int z = 0;
  double ridge = 0.0;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;  // penalized, at the returned coefficients
};

/// Estimated assignment probabilities for every unit and arm, with the
/// per-arm logits used as matching scores. Probabilities are clamped away
/// from 0 and 1 before the logit so scores stay finite.
struct GpsMatrix {
  Eigen::MatrixXd probs;   // n x Z, rows sum to 1
  Eigen::MatrixXd logits;  // n x Z, log(p/(1-p)) per cell
};

/// Newton-Raphson fit with step halving. Throws NumericError when the
/// unpenalized fit diverges (typically separation); with ridge > 0 a fit
/// that runs out of iterations is returned with converged = false.
GpsModel fit_multinomial_logit(const Eigen::MatrixXd& covariates,
                               const std::vector<int>& treatment, int z,
                               const FitOptions& opts = {});

GpsMatrix predict_gps(const GpsModel& model, const Eigen::MatrixXd& covariates);

/// Penalized log-likelihood of a flattened coefficient vector, exposed for
/// direct use by derivative-free optimizers.
double multinomial_loglik(const Eigen::MatrixXd& covariates,
                          const std::vector<int>& treatment, int z,
                          const Eigen::VectorXd& beta_flat, double ridge);

/// Binary propensity scores for the two-arm subset {arm_a, arm_b}.
/// `ps` holds P(T = arm_a | X, T in {arm_a, arm_b}) for each selected row.
struct BinaryPsFit {
  std::vector<int> rows;  // row indices into the source dataset
  Eigen::VectorXd ps;
  GpsModel model;
};

BinaryPsFit fit_binary_ps(const Dataset& ds, int arm_a, int arm_b,
                          const FitOptions& opts = {});

}  // namespace vecmatch
