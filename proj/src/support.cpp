#include "vecmatch/support.hpp"

#include <limits>

#include "vecmatch/errors.hpp"

namespace vecmatch {

CommonSupport rectangular_support(const Eigen::MatrixXd& probs,
                                  const std::vector<int>& treatment, int z) {
  const int n = static_cast<int>(probs.rows());
  if (probs.cols() != z) throw std::invalid_argument("probs must have z columns");
  if (static_cast<int>(treatment.size()) != n) {
    throw std::invalid_argument("treatment length does not match probs rows");
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd arm_min = Eigen::MatrixXd::Constant(z, z, kInf);
  Eigen::MatrixXd arm_max = Eigen::MatrixXd::Constant(z, z, -kInf);
  for (int i = 0; i < n; ++i) {
    const int a = treatment[i] - 1;
    for (int t = 0; t < z; ++t) {
      arm_min(a, t) = std::min(arm_min(a, t), probs(i, t));
      arm_max(a, t) = std::max(arm_max(a, t), probs(i, t));
    }
  }
  for (int a = 0; a < z; ++a) {
    if (arm_min(a, 0) == kInf) {
      throw ValidationError("treatment arm " + std::to_string(a + 1) +
                            " has no units");
    }
  }

  CommonSupport cs;
  cs.kind = CommonSupport::Kind::Rectangular;
  cs.low = arm_min.colwise().maxCoeff();
  cs.high = arm_max.colwise().minCoeff();
  for (int i = 0; i < n; ++i) {
    bool ok = true;
    for (int t = 0; t < z; ++t) {
      const double p = probs(i, t);
      const bool inside = cs.low(t) < p && p < cs.high(t);
      const bool collapsed = cs.low(t) == cs.high(t) && p == cs.low(t);
      if (!inside && !collapsed) {
        ok = false;
        break;
      }
    }
    if (ok) cs.eligible.push_back(i);
  }
  return cs;
}

CommonSupport pairwise_support(const Eigen::VectorXd& ps,
                               const std::vector<int>& arm_of_row) {
  const int n = static_cast<int>(ps.size());
  if (static_cast<int>(arm_of_row.size()) != n) {
    throw std::invalid_argument("arm label length does not match scores");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double min_a = kInf, max_a = -kInf, min_b = kInf, max_b = -kInf;
  int first_arm = -1;
  for (int i = 0; i < n; ++i) {
    if (first_arm < 0) first_arm = arm_of_row[i];
    if (arm_of_row[i] == first_arm) {
      min_a = std::min(min_a, ps(i));
      max_a = std::max(max_a, ps(i));
    } else {
      min_b = std::min(min_b, ps(i));
      max_b = std::max(max_b, ps(i));
    }
  }
  if (min_a == kInf || min_b == kInf) {
    throw ValidationError("pairwise support needs units from two arms");
  }

  CommonSupport cs;
  cs.kind = CommonSupport::Kind::Pairwise;
  cs.low = Eigen::VectorXd::Constant(1, std::max(min_a, min_b));
  cs.high = Eigen::VectorXd::Constant(1, std::min(max_a, max_b));
  if (cs.low(0) > cs.high(0)) {
    throw ValidationError("score ranges of the two arms do not overlap");
  }
  for (int i = 0; i < n; ++i) {
    if (cs.low(0) <= ps(i) && ps(i) <= cs.high(0)) cs.eligible.push_back(i);
  }
  return cs;
}

TrimResult trim_to_support(const Dataset& ds, const FitOptions& opts) {
  TrimResult r;
  r.first_fit = fit_multinomial_logit(ds.covariates, ds.treatment, ds.z(), opts);
  const GpsMatrix first = predict_gps(r.first_fit, ds.covariates);
  r.support = rectangular_support(first.probs, ds.treatment, ds.z());
  if (r.support.eligible.empty()) {
    throw ValidationError("common support is empty; no unit is eligible");
  }
  r.survivor_rows = r.support.eligible;
  r.trimmed = ds.subset(r.survivor_rows);
  r.dropped_fraction =
      1.0 - static_cast<double>(r.survivor_rows.size()) / ds.n();
  r.refit = fit_multinomial_logit(r.trimmed.covariates, r.trimmed.treatment,
                                  r.trimmed.z(), opts);
  r.gps = predict_gps(r.refit, r.trimmed.covariates);
  return r;
}

}  // namespace vecmatch
