#include "vecmatch/inference.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "vecmatch/errors.hpp"

namespace vecmatch {

namespace {

constexpr double kExactBudget = 8e6;  // permutations we are willing to enumerate

double upper_chi_squared(double stat, double dof) {
  if (!(stat > 0.0)) return 1.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

double upper_fisher_f(double stat, double d1, double d2) {
  if (std::isinf(stat)) return 0.0;
  if (!(stat > 0.0)) return 1.0;
  boost::math::fisher_f dist(d1, d2);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// All k! orderings of column indices, in lexicographic order.
std::vector<std::vector<int>> all_permutations(int k) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::vector<int>> perms;
  do {
    perms.push_back(idx);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return perms;
}

// Runs fn(choice) for every way of assigning one permutation per block.
template <typename Fn>
void for_each_assignment(int n_blocks, int n_perms, Fn&& fn) {
  std::vector<int> choice(n_blocks, 0);
  while (true) {
    fn(choice);
    int pos = n_blocks - 1;
    while (pos >= 0 && ++choice[pos] == n_perms) {
      choice[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
}

double friedman_stat(const Eigen::MatrixXd& ranks) {
  const int n = static_cast<int>(ranks.rows());
  const int k = static_cast<int>(ranks.cols());
  const double a = ranks.array().square().sum();
  const double c = n * k * (k + 1.0) * (k + 1.0) / 4.0;
  if (a == c) return 0.0;  // every block fully tied
  const Eigen::RowVectorXd colsum = ranks.colwise().sum();
  const double target = n * (k + 1.0) / 2.0;
  double dev = 0.0;
  for (int j = 0; j < k; ++j) {
    dev += (colsum(j) - target) * (colsum(j) - target);
  }
  return (k - 1.0) * dev / (a - c);
}

// Quade statistic from the S_ij = Q_i * (R_ij - (k+1)/2) matrix.
double quade_stat(const Eigen::MatrixXd& s) {
  const int n = static_cast<int>(s.rows());
  const double a2 = s.array().square().sum();
  const Eigen::RowVectorXd colsum = s.colwise().sum();
  const double b = colsum.squaredNorm() / n;
  if (a2 == b) return std::numeric_limits<double>::infinity();
  return (n - 1.0) * b / (a2 - b);
}

}  // namespace

Eigen::VectorXd average_ranks(const Eigen::VectorXd& v) {
  const int k = static_cast<int>(v.size());
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return v(a) < v(b); });
  Eigen::VectorXd ranks(k);
  int i = 0;
  while (i < k) {
    int j = i;
    while (j + 1 < k && v(order[j + 1]) == v(order[i])) ++j;
    const double shared = (i + j) / 2.0 + 1.0;  // mean of ranks i+1 .. j+1
    for (int t = i; t <= j; ++t) ranks(order[t]) = shared;
    i = j + 1;
  }
  return ranks;
}

EffectEstimates satt(const Dataset& ds, const MatchedCohort& c) {
  if (!ds.outcome) throw ValidationError("dataset has no outcome column");
  if (c.tuples.empty()) throw ValidationError("cohort has no matched tuples");
  EffectEstimates e;
  e.arms = c.arms;
  e.n_trip = c.n_trip();
  const int z = static_cast<int>(c.arms.size());
  e.arm_means = Eigen::VectorXd::Zero(z);
  for (const auto& tuple : c.tuples) {
    for (int j = 0; j < z; ++j) e.arm_means(j) += (*ds.outcome)(tuple[j]);
  }
  e.arm_means /= static_cast<double>(e.n_trip);
  e.effects.resize(z, z);
  for (int a = 0; a < z; ++a) {
    for (int b = 0; b < z; ++b) e.effects(a, b) = e.arm_means(a) - e.arm_means(b);
  }
  return e;
}

EffectEstimates ipw_effects(const Dataset& ds, const IpwWeights& w) {
  if (!ds.outcome) throw ValidationError("dataset has no outcome column");
  if (w.w.size() != ds.n()) {
    throw std::invalid_argument("weight length does not match the dataset");
  }
  EffectEstimates e;
  const int z = ds.z();
  for (int t = 1; t <= z; ++t) e.arms.push_back(t);
  e.arm_means = Eigen::VectorXd::Zero(z);
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(z);
  for (int i = 0; i < ds.n(); ++i) {
    const int t = ds.treatment[i] - 1;
    e.arm_means(t) += w.w(i) * (*ds.outcome)(i);
    wsum(t) += w.w(i);
  }
  for (int t = 0; t < z; ++t) {
    if (wsum(t) <= 0.0) {
      throw ValidationError("arm " + std::to_string(t + 1) +
                            " has zero total weight");
    }
    e.arm_means(t) /= wsum(t);
  }
  e.n_trip = ds.n();
  e.effects.resize(z, z);
  for (int a = 0; a < z; ++a) {
    for (int b = 0; b < z; ++b) e.effects(a, b) = e.arm_means(a) - e.arm_means(b);
  }
  return e;
}

Eigen::MatrixXd outcome_matrix(const Dataset& ds, const MatchedCohort& c) {
  if (!ds.outcome) throw ValidationError("dataset has no outcome column");
  Eigen::MatrixXd y(c.n_trip(), c.arms.size());
  for (int i = 0; i < c.n_trip(); ++i) {
    for (std::size_t j = 0; j < c.arms.size(); ++j) {
      y(i, j) = (*ds.outcome)(c.tuples[i][j]);
    }
  }
  return y;
}

TestResult friedman_test(const Eigen::MatrixXd& y, int exact_threshold) {
  const int n = static_cast<int>(y.rows());
  const int k = static_cast<int>(y.cols());
  if (n < 2 || k < 2) throw ValidationError("need >= 2 blocks and >= 2 arms");

  Eigen::MatrixXd ranks(n, k);
  for (int i = 0; i < n; ++i) {
    ranks.row(i) = average_ranks(y.row(i).transpose()).transpose();
  }

  TestResult r;
  r.statistic = friedman_stat(ranks);
  r.dof1 = k - 1.0;
  r.p_asymptotic = upper_chi_squared(r.statistic, r.dof1);

  if (n <= exact_threshold) {
    const auto perms = all_permutations(k);
    const double total = std::pow(static_cast<double>(perms.size()), n);
    if (total <= kExactBudget) {
      const double obs = r.statistic - 1e-12;
      long long hits = 0, count = 0;
      Eigen::MatrixXd permuted(n, k);
      for_each_assignment(n, static_cast<int>(perms.size()),
                          [&](const std::vector<int>& choice) {
                            for (int i = 0; i < n; ++i) {
                              const auto& p = perms[choice[i]];
                              for (int j = 0; j < k; ++j) {
                                permuted(i, j) = ranks(i, p[j]);
                              }
                            }
                            if (friedman_stat(permuted) >= obs) ++hits;
                            ++count;
                          });
      r.p_exact = static_cast<double>(hits) / count;
    }
  }
  return r;
}

TestResult quade_test(const Eigen::MatrixXd& y, int exact_threshold) {
  const int n = static_cast<int>(y.rows());
  const int k = static_cast<int>(y.cols());
  if (n < 2 || k < 2) throw ValidationError("need >= 2 blocks and >= 2 arms");

  Eigen::VectorXd range(n);
  for (int i = 0; i < n; ++i) {
    range(i) = y.row(i).maxCoeff() - y.row(i).minCoeff();
  }
  if (range.maxCoeff() == 0.0) {
    throw ValidationError("every block is constant; the test is undefined");
  }
  const Eigen::VectorXd q = average_ranks(range);

  Eigen::MatrixXd ranks(n, k);
  for (int i = 0; i < n; ++i) {
    ranks.row(i) = average_ranks(y.row(i).transpose()).transpose();
  }
  const double center = (k + 1.0) / 2.0;
  Eigen::MatrixXd s(n, k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) s(i, j) = q(i) * (ranks(i, j) - center);
  }

  TestResult r;
  r.statistic = quade_stat(s);
  r.dof1 = k - 1.0;
  r.dof2 = (n - 1.0) * (k - 1.0);
  r.p_asymptotic = upper_fisher_f(r.statistic, r.dof1, r.dof2);

  if (n <= exact_threshold) {
    const auto perms = all_permutations(k);
    const double total = std::pow(static_cast<double>(perms.size()), n);
    if (total <= kExactBudget) {
      const double obs = r.statistic;
      long long hits = 0, count = 0;
      Eigen::MatrixXd permuted(n, k);
      for_each_assignment(
          n, static_cast<int>(perms.size()),
          [&](const std::vector<int>& choice) {
            for (int i = 0; i < n; ++i) {
              const auto& p = perms[choice[i]];
              for (int j = 0; j < k; ++j) permuted(i, j) = s(i, p[j]);
            }
            const double stat = quade_stat(permuted);
            if (std::isinf(obs) ? std::isinf(stat) : stat >= obs - 1e-12) ++hits;
            ++count;
          });
      r.p_exact = static_cast<double>(hits) / count;
    }
  }
  return r;
}

}  // namespace vecmatch
