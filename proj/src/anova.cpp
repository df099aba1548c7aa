#include "vecmatch/anova.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>

#include "vecmatch/errors.hpp"

namespace vecmatch {

namespace {

struct Term {
  std::string name;
  std::vector<int> cols;  // columns in the design matrix
};

// Sum-to-zero contrast value of `level` on contrast column j (0-based):
// +1 on its own column, -1 for the last level, 0 elsewhere.
double contrast(int level, int j, int n_levels) {
  if (level == j) return 1.0;
  if (level == n_levels - 1) return -1.0;
  return 0.0;
}

double rss_of(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  return (y - x * qr.solve(y)).squaredNorm();
}

Eigen::MatrixXd drop_cols(const Eigen::MatrixXd& x, const std::vector<int>& cols) {
  std::vector<bool> remove(x.cols(), false);
  for (int c : cols) remove[c] = true;
  Eigen::MatrixXd out(x.rows(), x.cols() - static_cast<int>(cols.size()));
  int w = 0;
  for (int c = 0; c < x.cols(); ++c) {
    if (!remove[c]) out.col(w++) = x.col(c);
  }
  return out;
}

}  // namespace

std::vector<AnovaRow> anova_rank(const FactorTable& t) {
  const int n = static_cast<int>(t.rows.size());
  const int f = static_cast<int>(t.factors.size());
  if (n < 2 || f < 1) throw ValidationError("need >= 2 rows and >= 1 factor");
  if (static_cast<int>(t.metric.size()) != n) {
    throw std::invalid_argument("metric length does not match rows");
  }
  std::vector<int> nlev(f);
  for (int a = 0; a < f; ++a) {
    nlev[a] = static_cast<int>(t.levels[a].size());
    if (nlev[a] < 2) {
      throw ValidationError("factor '" + t.factors[a] +
                            "' has fewer than 2 levels");
    }
  }

  // Main-effect contrast columns per factor, then all pairwise products.
  std::vector<std::vector<Eigen::VectorXd>> main_cols(f);
  for (int a = 0; a < f; ++a) {
    for (int j = 0; j < nlev[a] - 1; ++j) {
      Eigen::VectorXd col(n);
      for (int i = 0; i < n; ++i) col(i) = contrast(t.rows[i][a], j, nlev[a]);
      main_cols[a].push_back(std::move(col));
    }
  }

  std::vector<Term> terms;
  std::vector<Eigen::VectorXd> cols;
  cols.push_back(Eigen::VectorXd::Ones(n));  // intercept
  for (int a = 0; a < f; ++a) {
    Term term{t.factors[a], {}};
    for (const auto& col : main_cols[a]) {
      term.cols.push_back(static_cast<int>(cols.size()));
      cols.push_back(col);
    }
    terms.push_back(std::move(term));
  }
  for (int a = 0; a < f; ++a) {
    for (int b = a + 1; b < f; ++b) {
      Term term{t.factors[a] + ":" + t.factors[b], {}};
      for (const auto& ca : main_cols[a]) {
        for (const auto& cb : main_cols[b]) {
          term.cols.push_back(static_cast<int>(cols.size()));
          cols.push_back(ca.cwiseProduct(cb));
        }
      }
      terms.push_back(std::move(term));
    }
  }

  Eigen::MatrixXd x(n, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) x.col(c) = cols[c];
  const Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(t.metric.data(), n);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  const auto full_rank = qr.rank();
  if (full_rank < x.cols()) {
    std::string aliased;
    for (const Term& term : terms) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> sub(drop_cols(x, term.cols));
      if (sub.rank() == full_rank) {
        if (!aliased.empty()) aliased += ", ";
        aliased += term.name;
      }
    }
    throw ValidationError("design matrix is rank deficient; aliased terms: " +
                          (aliased.empty() ? std::string("(intercept-level)")
                                           : aliased));
  }
  const double rss_full = (y - x * qr.solve(y)).squaredNorm();

  std::vector<AnovaRow> rows;
  for (const Term& term : terms) {
    AnovaRow r;
    r.term = term.name;
    r.df = static_cast<int>(term.cols.size());
    r.ss = std::max(0.0, rss_of(drop_cols(x, term.cols), y) - rss_full);
    r.ms = r.ss / r.df;
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const AnovaRow& a, const AnovaRow& b) { return a.ms > b.ms; });

  AnovaRow resid;
  resid.term = "residual";
  resid.df = n - static_cast<int>(x.cols());
  resid.ss = rss_full;
  resid.ms = resid.df > 0 ? rss_full / resid.df : 0.0;
  rows.push_back(resid);
  return rows;
}

}  // namespace vecmatch
