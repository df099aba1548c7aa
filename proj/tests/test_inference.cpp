#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "vecmatch/errors.hpp"
#include "vecmatch/inference.hpp"
#include "vecmatch/rng.hpp"

using namespace vecmatch;

namespace {

std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& y) {
  std::vector<std::vector<double>> out(y.rows(), std::vector<double>(y.cols()));
  for (int i = 0; i < y.rows(); ++i)
    for (int j = 0; j < y.cols(); ++j) out[i][j] = y(i, j);
  return out;
}

// dyadic-rational outcomes keep every mean and difference exact in binary
Eigen::MatrixXd dyadic_outcomes(Rng& rng, int n, int k) {
  Eigen::MatrixXd y(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j)
      y(i, j) = 0.25 * static_cast<double>(rng.next_u64() % 64) - 4.0;
  return y;
}

MatchedCohort triplet_cohort(int n_trip) {
  MatchedCohort c;
  c.design = "vm";
  c.reference = 1;
  c.arms = {1, 2, 3};
  for (int i = 0; i < n_trip; ++i)
    c.tuples.push_back({3 * i, 3 * i + 1, 3 * i + 2});
  c.psi.assign(3 * n_trip, 1);
  return c;
}

Dataset dataset_for(const Eigen::MatrixXd& y) {
  const int n_trip = static_cast<int>(y.rows());
  Dataset ds;
  ds.covariates = Eigen::MatrixXd::Zero(3 * n_trip, 1);
  Eigen::VectorXd out(3 * n_trip);
  ds.treatment.resize(3 * n_trip);
  for (int i = 0; i < n_trip; ++i) {
    for (int j = 0; j < 3; ++j) {
      ds.treatment[3 * i + j] = j + 1;
      out(3 * i + j) = y(i, j);
    }
  }
  ds.outcome = out;
  ds.treatment_labels = {"1", "2", "3"};
  ds.covariate_names = {"x"};
  for (int i = 0; i < 3 * n_trip; ++i) ds.unit_ids.push_back("u" + std::to_string(i));
  return ds;
}

}  // namespace

TEST_CASE("matched-cohort effects are transitive and exact") {
  Rng rng(60);
  // a power-of-two triplet count makes the divisions exact too
  Eigen::MatrixXd y = dyadic_outcomes(rng, 8, 3);
  Dataset ds = dataset_for(y);
  MatchedCohort c = triplet_cohort(8);
  EffectEstimates e = satt(ds, c);
  REQUIRE(e.arms == std::vector<int>{1, 2, 3});
  CHECK(e.n_trip == 8);
  // effects are mean differences, so they close exactly under addition
  CHECK(e.effects(0, 2) == e.effects(0, 1) + e.effects(1, 2));
  CHECK(e.effects(0, 1) == -e.effects(1, 0));
  CHECK(e.effects(0, 0) == 0.0);
  CHECK(e.arm_means(0) == y.col(0).mean());
  CHECK(e.effects(0, 1) == e.arm_means(0) - e.arm_means(1));
}

TEST_CASE("repeated comparator rows enter the effect means repeatedly") {
  Eigen::MatrixXd y(2, 3);
  y << 1.0, 2.0, 3.0, 5.0, 2.0, 7.0;
  Dataset ds = dataset_for(y);
  MatchedCohort c = triplet_cohort(2);
  c.tuples[1][1] = c.tuples[0][1];  // same arm-2 row in both tuples
  c.psi.assign(ds.n(), 0);
  for (auto& t : c.tuples)
    for (int r : t) ++c.psi[r];
  EffectEstimates e = satt(ds, c);
  CHECK(e.arm_means(1) == doctest::Approx(2.0));  // (2 + 2) / 2
  CHECK(e.arm_means(0) == doctest::Approx(3.0));
}

TEST_CASE("outcome matrix lines up with tuples") {
  Eigen::MatrixXd y(3, 3);
  y << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  Dataset ds = dataset_for(y);
  MatchedCohort c = triplet_cohort(3);
  CHECK(outcome_matrix(ds, c).isApprox(y, 0.0));

  Dataset no_outcome = ds;
  no_outcome.outcome.reset();
  CHECK_THROWS_AS(outcome_matrix(no_outcome, c), ValidationError);
}

TEST_CASE("friedman exact p-values match full enumeration") {
  Rng rng(71);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + trial % 4;  // 2..5 blocks
    Eigen::MatrixXd y = dyadic_outcomes(rng, n, 3);
    if (trial == 4) y(0, 1) = y(0, 0);  // force a tie inside a block
    if (trial == 5) y.row(0).setConstant(1.0);  // fully tied block
    TestResult r = friedman_test(y);
    REQUIRE(r.p_exact.has_value());
    auto rows = to_rows(y);
    CHECK(r.statistic == doctest::Approx(oracle::friedman_stat(rows)).epsilon(1e-12));
    CHECK(*r.p_exact ==
          doctest::Approx(oracle::exact_p(rows, oracle::friedman_stat)).epsilon(1e-12));
    CHECK(r.p_asymptotic >= 0.0);
    CHECK(r.p_asymptotic <= 1.0);
  }
}

TEST_CASE("quade exact p-values match full enumeration") {
  Rng rng(72);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + trial % 4;
    Eigen::MatrixXd y = dyadic_outcomes(rng, n, 3);
    if (trial == 3) y.row(1).setConstant(0.5);  // one zero-range block
    TestResult r = quade_test(y);
    REQUIRE(r.p_exact.has_value());
    auto rows = to_rows(y);
    const double want = oracle::quade_stat(rows);
    if (std::isinf(want)) {
      CHECK(std::isinf(r.statistic));
    } else {
      CHECK(r.statistic == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK(*r.p_exact ==
          doctest::Approx(oracle::exact_p(rows, oracle::quade_stat)).epsilon(1e-12));
  }
}

TEST_CASE("all-tied blocks give a zero friedman statistic") {
  Eigen::MatrixXd y(3, 3);
  y.setConstant(2.0);
  TestResult r = friedman_test(y);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_asymptotic == doctest::Approx(1.0));
}

TEST_CASE("quade needs at least one block with variation") {
  Eigen::MatrixXd y(3, 3);
  y.setConstant(2.0);
  CHECK_THROWS_AS(quade_test(y), ValidationError);
}

TEST_CASE("perfectly separated arms give quade an infinite statistic") {
  // arm order identical in every block: B equals A2
  Eigen::MatrixXd y(3, 3);
  y << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  TestResult r = quade_test(y);
  CHECK(std::isinf(r.statistic));
  REQUIRE(r.p_exact.has_value());
  CHECK(*r.p_exact == doctest::Approx(oracle::exact_p(to_rows(y), oracle::quade_stat)));
  CHECK(r.p_asymptotic == doctest::Approx(0.0));
}

TEST_CASE("single-block input is rejected") {
  Eigen::MatrixXd y(1, 3);
  y << 1, 2, 3;
  CHECK_THROWS_AS(friedman_test(y), ValidationError);
}

TEST_CASE("exact enumeration switches off beyond the threshold or budget") {
  Rng rng(73);
  Eigen::MatrixXd wide = dyadic_outcomes(rng, 9, 3);
  CHECK(!friedman_test(wide, 8).p_exact.has_value());  // too many blocks
  // (3!)^9 exceeds the enumeration budget even when the threshold allows it
  CHECK(!friedman_test(wide, 9).p_exact.has_value());
  Eigen::MatrixXd narrow = dyadic_outcomes(rng, 9, 2);
  CHECK(friedman_test(narrow, 9).p_exact.has_value());  // 2^9 assignments
}

TEST_CASE("average ranks share ties") {
  Eigen::VectorXd v(5);
  v << 3.0, 1.0, 3.0, 2.0, 3.0;
  Eigen::VectorXd r = average_ranks(v);
  CHECK(r(0) == doctest::Approx(4.0));
  CHECK(r(1) == doctest::Approx(1.0));
  CHECK(r(3) == doctest::Approx(2.0));
}

TEST_CASE("weighted effects agree with a hand computation") {
  Dataset ds;
  ds.covariates = Eigen::MatrixXd::Zero(4, 1);
  ds.treatment = {1, 1, 2, 2};
  Eigen::VectorXd y(4);
  y << 1.0, 3.0, 2.0, 6.0;
  ds.outcome = y;
  ds.treatment_labels = {"1", "2"};
  ds.covariate_names = {"x"};
  for (int i = 0; i < 4; ++i) ds.unit_ids.push_back("u" + std::to_string(i));
  IpwWeights w;
  w.w.resize(4);
  w.w << 1.0, 3.0, 2.0, 2.0;
  EffectEstimates e = ipw_effects(ds, w);
  // arm 1: (1*1 + 3*3) / 4 = 2.5; arm 2: (2*2 + 2*6) / 4 = 4
  CHECK(e.arm_means(0) == doctest::Approx(2.5));
  CHECK(e.arm_means(1) == doctest::Approx(4.0));
  CHECK(e.effects(0, 1) == doctest::Approx(-1.5));
}
