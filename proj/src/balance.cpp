#include "vecmatch/balance.hpp"

#include <cmath>

#include "vecmatch/errors.hpp"

namespace vecmatch {

namespace {

void finish_bias(BalanceReport& r, const Eigen::VectorXd& scale) {
  const int z = static_cast<int>(r.arms.size());
  const int p = static_cast<int>(r.means.cols());
  if (scale.size() != p) {
    throw std::invalid_argument("scale length does not match covariates");
  }
  for (int j = 0; j < p; ++j) {
    if (scale(j) <= 0.0) {
      throw ValidationError("covariate " + std::to_string(j) +
                            " has a non-positive scale; bias is undefined");
    }
  }
  r.scale = scale;
  r.arm_pairs.clear();
  for (int a = 0; a < z; ++a) {
    for (int b = a + 1; b < z; ++b) r.arm_pairs.emplace_back(a, b);
  }
  r.sb.resize(r.arm_pairs.size(), p);
  for (std::size_t q = 0; q < r.arm_pairs.size(); ++q) {
    const auto [a, b] = r.arm_pairs[q];
    r.sb.row(q) = (r.means.row(a) - r.means.row(b)).cwiseQuotient(scale.transpose());
  }
  r.max2sb = r.sb.cwiseAbs().colwise().maxCoeff();
  r.avg_abs_sb = r.sb.cwiseAbs().colwise().mean();
  r.max2sb_mean = r.max2sb.mean();
}

}  // namespace

Eigen::VectorXd reference_sd(const Dataset& ds, int reference) {
  std::vector<int> rows;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.treatment[i] == reference) rows.push_back(i);
  }
  if (rows.size() < 2) {
    throw ValidationError("reference arm needs at least 2 units for a scale");
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(ds.p());
  for (int i : rows) mean += ds.covariates.row(i).transpose();
  mean /= static_cast<double>(rows.size());
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(ds.p());
  for (int i : rows) {
    const Eigen::VectorXd d = ds.covariates.row(i).transpose() - mean;
    ss += d.cwiseProduct(d);
  }
  return (ss / static_cast<double>(rows.size() - 1)).cwiseSqrt();
}

BalanceReport cohort_balance(const Dataset& ds, const MatchedCohort& c,
                             const Eigen::VectorXd& scale) {
  if (c.tuples.empty()) throw ValidationError("cohort has no matched tuples");
  BalanceReport r;
  r.arms = c.arms;
  r.means = Eigen::MatrixXd::Zero(c.arms.size(), ds.p());
  for (const auto& tuple : c.tuples) {
    for (std::size_t j = 0; j < tuple.size(); ++j) {
      r.means.row(j) += ds.covariates.row(tuple[j]);
    }
  }
  r.means /= static_cast<double>(c.n_trip());
  finish_bias(r, scale);
  return r;
}

BalanceReport ipw_balance(const Dataset& ds, const IpwWeights& w,
                          const Eigen::VectorXd& scale) {
  if (w.w.size() != ds.n()) {
    throw std::invalid_argument("weight length does not match the dataset");
  }
  BalanceReport r;
  const int z = ds.z();
  for (int t = 1; t <= z; ++t) r.arms.push_back(t);
  r.means = Eigen::MatrixXd::Zero(z, ds.p());
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(z);
  for (int i = 0; i < ds.n(); ++i) {
    const int t = ds.treatment[i] - 1;
    r.means.row(t) += w.w(i) * ds.covariates.row(i);
    wsum(t) += w.w(i);
  }
  for (int t = 0; t < z; ++t) {
    if (wsum(t) <= 0.0) {
      throw ValidationError("arm " + std::to_string(t + 1) +
                            " has zero total weight");
    }
    r.means.row(t) /= wsum(t);
  }
  r.notes = w.notes;
  finish_bias(r, scale);
  return r;
}

BalanceReport kmc_balance(const Dataset& ds, const Subclassification& sc,
                          const Eigen::VectorXd& scale) {
  const int z = ds.z();
  const int k = static_cast<int>(sc.sizes.size());
  BalanceReport r;
  for (int t = 1; t <= z; ++t) r.arms.push_back(t);

  // Per-subclass arm means and counts.
  std::vector<Eigen::MatrixXd> mean_in(k, Eigen::MatrixXd::Zero(z, ds.p()));
  std::vector<Eigen::VectorXd> n_in(k, Eigen::VectorXd::Zero(z));
  for (int i = 0; i < ds.n(); ++i) {
    const int s = sc.clustering.assignment[i];
    const int t = ds.treatment[i] - 1;
    mean_in[s].row(t) += ds.covariates.row(i);
    n_in[s](t) += 1.0;
  }

  // Each arm averages over the subclasses that contain it, weighted by the
  // subclass's total size. Arms may therefore average over different
  // subclass sets — the baseline's known defect, kept on purpose.
  r.means = Eigen::MatrixXd::Zero(z, ds.p());
  for (int t = 0; t < z; ++t) {
    double total = 0.0;
    for (int s = 0; s < k; ++s) {
      if (n_in[s](t) > 0.0) total += sc.sizes[s];
    }
    if (total <= 0.0) {
      throw ValidationError("arm " + std::to_string(t + 1) +
                            " appears in no subclass");
    }
    for (int s = 0; s < k; ++s) {
      if (n_in[s](t) > 0.0) {
        r.means.row(t) += (sc.sizes[s] / total) * (mean_in[s].row(t) / n_in[s](t));
      }
    }
  }
  r.notes = sc.notes;
  finish_bias(r, scale);
  return r;
}

BalanceReport unweighted_balance(const Dataset& ds, const Eigen::VectorXd& scale) {
  BalanceReport r;
  const int z = ds.z();
  for (int t = 1; t <= z; ++t) r.arms.push_back(t);
  r.means = Eigen::MatrixXd::Zero(z, ds.p());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(z);
  for (int i = 0; i < ds.n(); ++i) {
    const int t = ds.treatment[i] - 1;
    r.means.row(t) += ds.covariates.row(i);
    counts(t) += 1.0;
  }
  for (int t = 0; t < z; ++t) {
    if (counts(t) == 0.0) {
      throw ValidationError("arm " + std::to_string(t + 1) + " has no units");
    }
    r.means.row(t) /= counts(t);
  }
  finish_bias(r, scale);
  return r;
}

double pct_matched(const MatchedCohort& c, int eligible_refs) {
  if (eligible_refs <= 0) {
    throw ValidationError("no eligible reference units");
  }
  return static_cast<double>(c.n_trip()) / eligible_refs;
}

}  // namespace vecmatch
