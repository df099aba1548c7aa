#include "vecmatch/gps.hpp"

#include <cmath>
#include <stdexcept>

#include "vecmatch/errors.hpp"

namespace vecmatch {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd xt(x.rows(), x.cols() + 1);
  xt.col(0).setOnes();
  xt.rightCols(x.cols()) = x;
  return xt;
}

// Softmax over [Xb | 0] with row-max subtraction; returns n x z probabilities.
Eigen::MatrixXd softmax_probs(const Eigen::MatrixXd& xt, const Eigen::MatrixXd& beta) {
  const int n = static_cast<int>(xt.rows());
  const int z = static_cast<int>(beta.rows()) + 1;
  Eigen::MatrixXd eta(n, z);
  eta.leftCols(z - 1) = xt * beta.transpose();
  eta.col(z - 1).setZero();
  Eigen::MatrixXd p(n, z);
  for (int i = 0; i < n; ++i) {
    const double m = eta.row(i).maxCoeff();
    p.row(i) = (eta.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

double penalized_loglik(const Eigen::MatrixXd& xt, const std::vector<int>& treatment,
                        const Eigen::MatrixXd& beta, double ridge) {
  const int n = static_cast<int>(xt.rows());
  const int z = static_cast<int>(beta.rows()) + 1;
  Eigen::MatrixXd eta(n, z);
  eta.leftCols(z - 1) = xt * beta.transpose();
  eta.col(z - 1).setZero();
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = eta.row(i).maxCoeff();
    const double lse = m + std::log((eta.row(i).array() - m).exp().sum());
    ll += eta(i, treatment[i] - 1) - lse;
  }
  // Slopes only: column 0 of each row is the intercept.
  ll -= 0.5 * ridge * beta.rightCols(beta.cols() - 1).squaredNorm();
  return ll;
}

}  // namespace

double multinomial_loglik(const Eigen::MatrixXd& covariates,
                          const std::vector<int>& treatment, int z,
                          const Eigen::VectorXd& beta_flat, double ridge) {
  const int d = static_cast<int>(covariates.cols()) + 1;
  if (beta_flat.size() != static_cast<Eigen::Index>((z - 1) * d)) {
    throw std::invalid_argument("beta length does not match (z-1)*(p+1)");
  }
  Eigen::MatrixXd beta(z - 1, d);
  for (int t = 0; t < z - 1; ++t) beta.row(t) = beta_flat.segment(t * d, d);
  return penalized_loglik(with_intercept(covariates), treatment, beta, ridge);
}

GpsModel fit_multinomial_logit(const Eigen::MatrixXd& covariates,
                               const std::vector<int>& treatment, int z,
                               const FitOptions& opts) {
  const int n = static_cast<int>(covariates.rows());
  if (n == 0) throw ValidationError("no rows to fit");
  if (z < 2) throw ValidationError("need at least 2 treatment arms, got " +
                                   std::to_string(z));
  if (static_cast<int>(treatment.size()) != n) {
    throw std::invalid_argument("treatment length does not match covariate rows");
  }
  std::vector<int> counts(z, 0);
  for (int t : treatment) {
    if (t < 1 || t > z) {
      throw ValidationError("treatment code " + std::to_string(t) +
                            " outside 1.." + std::to_string(z));
    }
    ++counts[t - 1];
  }
  for (int t = 0; t < z; ++t) {
    if (counts[t] == 0) {
      throw ValidationError("treatment arm " + std::to_string(t + 1) +
                            " has no units");
    }
  }

  const Eigen::MatrixXd xt = with_intercept(covariates);
  const int d = static_cast<int>(xt.cols());
  const int k = z - 1;
  const int dim = k * d;
  // Any unpenalized optimum this large is separation in practice; the
  // score criterion alone would eventually "converge" at garbage values.
  constexpr double kDivergenceLimit = 1e3;

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, k);
  for (int i = 0; i < n; ++i) {
    if (treatment[i] <= k) y(i, treatment[i] - 1) = 1.0;
  }

  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(k, d);
  double ll = penalized_loglik(xt, treatment, beta, opts.ridge);

  GpsModel model;
  model.z = z;
  model.ridge = opts.ridge;

  Eigen::VectorXd grad(dim);
  Eigen::MatrixXd neg_hess(dim, dim);
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    const Eigen::MatrixXd p = softmax_probs(xt, beta);
    const Eigen::MatrixXd resid = y - p.leftCols(k);
    for (int t = 0; t < k; ++t) {
      grad.segment(t * d, d) = xt.transpose() * resid.col(t);
      grad.segment(t * d + 1, d - 1) -= opts.ridge * beta.row(t).tail(d - 1);
    }
    if (grad.lpNorm<Eigen::Infinity>() <= opts.tol) {
      model.converged = true;
      break;
    }

    for (int t = 0; t < k; ++t) {
      for (int u = t; u < k; ++u) {
        Eigen::ArrayXd w;
        if (t == u) {
          w = p.col(t).array() * (1.0 - p.col(t).array());
        } else {
          w = -p.col(t).array() * p.col(u).array();
        }
        const Eigen::MatrixXd block =
            xt.transpose() * w.matrix().asDiagonal() * xt;
        neg_hess.block(t * d, u * d, d, d) = block;
        if (u != t) neg_hess.block(u * d, t * d, d, d) = block.transpose();
      }
      for (int j = 1; j < d; ++j) neg_hess(t * d + j, t * d + j) += opts.ridge;
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_hess);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      throw NumericError(
          "singular Hessian in multinomial logit fit; data may be separated "
          "or collinear (set ridge > 0)");
    }

    Eigen::MatrixXd trial = beta;
    double alpha = 1.0;
    double trial_ll = ll;
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      for (int t = 0; t < k; ++t) {
        trial.row(t) = beta.row(t) + alpha * step.segment(t * d, d).transpose();
      }
      trial_ll = penalized_loglik(xt, treatment, trial, opts.ridge);
      // Flat-to-rounding steps are accepted: near the optimum the true gain
      // falls below the resolution of ll itself long before the score does.
      if (std::isfinite(trial_ll) &&
          trial_ll >= ll - 1e-10 * (1.0 + std::abs(ll))) {
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;  // stalled; convergence is judged by the score below
    beta = trial;
    ll = trial_ll;
    if (opts.ridge == 0.0 &&
        beta.lpNorm<Eigen::Infinity>() > kDivergenceLimit) {
      throw NumericError(
          "coefficients diverged in multinomial logit fit; data may be "
          "separated or badly scaled (set ridge > 0)");
    }
  }

  if (!model.converged) {
    // Re-check the score at the final coefficients.
    const Eigen::MatrixXd p = softmax_probs(xt, beta);
    const Eigen::MatrixXd resid = y - p.leftCols(k);
    for (int t = 0; t < k; ++t) {
      grad.segment(t * d, d) = xt.transpose() * resid.col(t);
      grad.segment(t * d + 1, d - 1) -= opts.ridge * beta.row(t).tail(d - 1);
    }
    if (grad.lpNorm<Eigen::Infinity>() <= opts.tol) {
      model.converged = true;
    } else if (opts.ridge == 0.0) {
      throw NumericError(
          "multinomial logit did not converge in " +
          std::to_string(opts.max_iter) +
          " iterations; data may be separated (set ridge > 0)");
    }
  }

  // An unpenalized fit can only drive the log-likelihood to zero by pushing
  // every unit's own-arm probability to one, i.e. complete separation: the
  // score criterion is then met on the way to an optimum that does not exist.
  if (opts.ridge == 0.0 && ll > -1e-6) {
    throw NumericError(
        "the arms are perfectly separated; the unpenalized multinomial logit "
        "has no finite optimum (set ridge > 0)");
  }

  model.coefficients = beta;
  model.iterations = iter;
  model.log_likelihood = ll;
  return model;
}

GpsMatrix predict_gps(const GpsModel& model, const Eigen::MatrixXd& covariates) {
  if (covariates.cols() + 1 != model.coefficients.cols()) {
    throw std::invalid_argument("covariate width does not match fitted model");
  }
  constexpr double kClamp = 1e-12;
  GpsMatrix g;
  g.probs = softmax_probs(with_intercept(covariates), model.coefficients);
  g.probs = g.probs.cwiseMax(kClamp).cwiseMin(1.0 - kClamp);
  for (int i = 0; i < g.probs.rows(); ++i) g.probs.row(i) /= g.probs.row(i).sum();
  g.logits = g.probs.unaryExpr(
      [](double p) { return std::log(p) - std::log1p(-p); });
  return g;
}

BinaryPsFit fit_binary_ps(const Dataset& ds, int arm_a, int arm_b,
                          const FitOptions& opts) {
  if (arm_a == arm_b) throw std::invalid_argument("arms must differ");
  if (arm_a < 1 || arm_a > ds.z() || arm_b < 1 || arm_b > ds.z()) {
    throw std::invalid_argument("arm outside 1.." + std::to_string(ds.z()));
  }
  BinaryPsFit fit;
  std::vector<int> coded;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.treatment[i] == arm_a || ds.treatment[i] == arm_b) {
      fit.rows.push_back(i);
      coded.push_back(ds.treatment[i] == arm_a ? 1 : 2);
    }
  }
  Eigen::MatrixXd x(fit.rows.size(), ds.p());
  for (std::size_t i = 0; i < fit.rows.size(); ++i) {
    x.row(i) = ds.covariates.row(fit.rows[i]);
  }
  fit.model = fit_multinomial_logit(x, coded, 2, opts);
  fit.ps = predict_gps(fit.model, x).probs.col(0);
  return fit;
}

}  // namespace vecmatch
