#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "vecmatch/balance.hpp"
#include "vecmatch/errors.hpp"
#include "vecmatch/rng.hpp"
#include "vecmatch/sim.hpp"

using namespace vecmatch;

namespace {

double arm_mean(const Dataset& ds, int arm, int col) {
  double s = 0.0;
  int n = 0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.treatment[i] == arm) {
      s += ds.covariates(i, col);
      ++n;
    }
  }
  return s / n;
}

double arm_cov(const Dataset& ds, int arm, int a, int b) {
  double ma = arm_mean(ds, arm, a), mb = arm_mean(ds, arm, b);
  double s = 0.0;
  int n = 0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.treatment[i] == arm) {
      s += (ds.covariates(i, a) - ma) * (ds.covariates(i, b) - mb);
      ++n;
    }
  }
  return s / (n - 1);
}

int arm_count(const Dataset& ds, int arm) {
  int n = 0;
  for (int t : ds.treatment) n += t == arm ? 1 : 0;
  return n;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("three-arm factorial has 1080 unique cells") {
  auto cells = full_factorial_z3();
  CHECK(cells.size() == 1080);
  std::set<std::string> ids;
  for (const auto& c : cells) {
    CHECK(!(c.P == 6 && c.n_t1 == 500));  // the sparse corner stays out
    CHECK(c.z == 3);
    ids.insert(c.id());
    CHECK(c.id().find('/') == std::string::npos);
    CHECK(c.id().find(' ') == std::string::npos);
  }
  CHECK(ids.size() == cells.size());
  // canonical order: first cell is the smallest level of every factor
  CHECK(cells[0].n_t1 == 500);
  CHECK(cells[0].gamma == 1);
  CHECK(cells[0].dist == "normal");
  CHECK(cells[0].B == 0.0);
  CHECK(cells[0].P == 3);
}

TEST_CASE("five-arm factorial has 20 unique cells") {
  auto cells = factorial_z5();
  CHECK(cells.size() == 20);
  std::set<std::string> ids;
  for (const auto& c : cells) {
    CHECK(c.z == 5);
    CHECK(c.P == 5);
    CHECK(c.n_t1 == 1000);
    ids.insert(c.id());
  }
  CHECK(ids.size() == 20);
}

TEST_CASE("separation follows the standardized-bias formula") {
  CHECK(b_from_B(0.0, 2.0, 0.5) == 0.0);
  CHECK(b_from_B(1.0, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(b_from_B(1.0, 0.5, 2.0) == doctest::Approx(std::sqrt(3.5 / 3.0)));
  CHECK(b_from_B(0.5, 2.0, 2.0) == doctest::Approx(0.5 * std::sqrt(5.0 / 3.0)));
}

TEST_CASE("three-arm generator hits its sizes, means and covariances") {
  SimConfig cfg;
  cfg.n_t1 = 4000;
  cfg.gamma = 2;
  cfg.B = 1.0;
  cfg.tau = 0.25;
  cfg.sigma2_sq = 2.0;
  cfg.sigma3_sq = 0.5;
  cfg.P = 6;
  Dataset ds = generate_z3(cfg, 99);
  CHECK(ds.n() == 4000 + 8000 + 16000);
  CHECK(arm_count(ds, 1) == 4000);
  CHECK(arm_count(ds, 2) == 8000);
  CHECK(arm_count(ds, 3) == 16000);
  CHECK(ds.p() == 6);

  const double b = b_from_B(1.0, 2.0, 0.5);
  // means tile every three columns: arm 1 loads cols 0 and 3, arm 2 cols
  // 1 and 4, arm 3 cols 2 and 5
  CHECK(near(arm_mean(ds, 1, 0), b, 0.08));
  CHECK(near(arm_mean(ds, 1, 3), b, 0.08));
  CHECK(near(arm_mean(ds, 1, 1), 0.0, 0.08));
  CHECK(near(arm_mean(ds, 2, 4), b, 0.08));
  CHECK(near(arm_mean(ds, 3, 2), b, 0.08));

  // diagonals 1 / sigma2_sq / sigma3_sq, off-diagonals tau, in every arm
  CHECK(near(arm_cov(ds, 1, 0, 0), 1.0, 0.1));
  CHECK(near(arm_cov(ds, 2, 1, 1), 2.0, 0.15));
  CHECK(near(arm_cov(ds, 3, 2, 2), 0.5, 0.06));
  CHECK(near(arm_cov(ds, 1, 0, 1), 0.25, 0.1));
  CHECK(near(arm_cov(ds, 2, 2, 5), 0.25, 0.1));
}

TEST_CASE("heavy-tailed draws inflate the variance by 7/5") {
  SimConfig cfg;
  cfg.n_t1 = 6000;
  cfg.gamma = 1;
  cfg.dist = "t7";
  cfg.B = 0.0;
  cfg.P = 3;
  Dataset ds = generate_z3(cfg, 7);
  CHECK(near(arm_cov(ds, 1, 0, 0), 1.4, 0.2));
  CHECK(near(arm_cov(ds, 2, 1, 1), 1.4, 0.2));
  CHECK(near(arm_mean(ds, 1, 0), 0.0, 0.08));
}

TEST_CASE("five-arm generator separates arms along unit vectors") {
  SimConfig cfg;
  cfg.z = 5;
  cfg.n_t1 = 3000;
  cfg.gamma = 2;
  cfg.B = 0.75;
  cfg.P = 5;
  Dataset ds = generate_z5(cfg, 13);
  CHECK(arm_count(ds, 1) == 3000);
  CHECK(arm_count(ds, 2) == 6000);
  CHECK(arm_count(ds, 3) == 6000);
  CHECK(arm_count(ds, 4) == 12000);
  CHECK(arm_count(ds, 5) == 12000);
  for (int t = 1; t <= 5; ++t) {
    for (int j = 0; j < 5; ++j) {
      const double want = j == t - 1 ? 0.75 : 0.0;
      CHECK(near(arm_mean(ds, t, j), want, 0.08));
    }
    CHECK(near(arm_cov(ds, t, 0, 0), 1.0, 0.1));
  }
}

TEST_CASE("two-covariate example places arms at the stated means") {
  Dataset ds = generate_interlude(2.0, 4000, 8000, 8000, 3);
  CHECK(arm_count(ds, 1) == 4000);
  CHECK(arm_count(ds, 2) == 8000);
  CHECK(arm_count(ds, 3) == 8000);
  CHECK(ds.p() == 2);
  CHECK(near(arm_mean(ds, 1, 0), 0.0, 0.08));
  CHECK(near(arm_mean(ds, 2, 0), 2.0, 0.08));
  CHECK(near(arm_mean(ds, 2, 1), 0.0, 0.08));
  CHECK(near(arm_mean(ds, 3, 1), 2.0, 0.08));
}

TEST_CASE("generators are pure functions of their seed") {
  SimConfig cfg;
  cfg.n_t1 = 300;
  cfg.B = 0.5;
  Dataset a = generate_z3(cfg, 42);
  Dataset b = generate_z3(cfg, 42);
  CHECK(a.covariates.isApprox(b.covariates, 0.0));
  CHECK(a.treatment == b.treatment);
  Dataset c = generate_z3(cfg, 43);
  CHECK(!a.covariates.isApprox(c.covariates, 1e-12));
}

TEST_CASE("a zero-separation cell starts nearly balanced") {
  SimConfig cfg;
  cfg.n_t1 = 2000;
  cfg.B = 0.0;
  Dataset ds = generate_z3(cfg, 11);
  BalanceReport r = unweighted_balance(ds, reference_sd(ds, 1));
  CHECK(r.max2sb_mean < 0.10);
}

TEST_CASE("one replication reports every requested design") {
  SimConfig cfg;
  cfg.n_t1 = 200;
  cfg.B = 0.5;
  SweepOptions opts;
  opts.seed = 5;
  RepMetrics m = run_replication(cfg, 0, opts);
  REQUIRE(m.ok);
  CHECK(m.error.empty());
  CHECK(m.pre_max2sb > 0.0);
  CHECK(m.dropped_fraction >= 0.0);
  CHECK(m.dropped_fraction < 0.5);
  for (const auto& d : {"vm", "crm", "ipw", "kmc"}) {
    REQUIRE(m.max2sb.count(d) == 1);
    CHECK(m.max2sb.at(d) >= 0.0);
  }
  CHECK(m.pct.count("vm") == 1);
  CHECK(m.pct.count("crm") == 1);
  CHECK(m.pct.count("ipw") == 0);
  CHECK(m.pct.at("vm") >= 0.0);
  CHECK(m.pct.at("vm") <= 1.0);
}

TEST_CASE("sweep results are identical for any worker count") {
  SweepOptions opts;
  opts.reps = 4;
  opts.seed = 77;
  opts.designs = {"vm", "ipw"};
  SimConfig a;
  a.n_t1 = 150;
  a.B = 0.5;
  SimConfig b = a;
  b.B = 1.0;

  opts.jobs = 1;
  auto serial = run_sweep({a, b}, opts);
  opts.jobs = 3;
  auto parallel = run_sweep({a, b}, opts);

  REQUIRE(serial.size() == parallel.size());
  for (size_t c = 0; c < serial.size(); ++c) {
    CHECK(serial[c].mean_pre == parallel[c].mean_pre);
    CHECK(serial[c].mean_max2sb == parallel[c].mean_max2sb);
    CHECK(serial[c].mean_pct == parallel[c].mean_pct);
    REQUIRE(serial[c].reps.size() == parallel[c].reps.size());
    for (size_t r = 0; r < serial[c].reps.size(); ++r) {
      CHECK(serial[c].reps[r].max2sb == parallel[c].reps[r].max2sb);
      CHECK(serial[c].reps[r].pre_max2sb == parallel[c].reps[r].pre_max2sb);
    }
  }
}

TEST_CASE("aggregation skips missing values and counts failures") {
  SimResult r;
  r.reps.resize(3);
  r.reps[0].ok = true;
  r.reps[0].pre_max2sb = 0.4;
  r.reps[0].max2sb["vm"] = 0.1;
  r.reps[0].pct["vm"] = 0.9;
  r.reps[1].ok = true;
  r.reps[1].pre_max2sb = 0.6;
  r.reps[1].max2sb["vm"] = std::nan("");  // empty cohort that replication
  r.reps[1].pct["vm"] = 0.0;
  r.reps[2].ok = false;
  r.reps[2].error = "boom";
  aggregate(r);
  CHECK(r.failures == 1);
  CHECK(r.mean_pre == doctest::Approx(0.5));
  CHECK(r.mean_max2sb.at("vm") == doctest::Approx(0.1));  // NaN left out
  CHECK(r.mean_pct.at("vm") == doctest::Approx(0.45));
}

TEST_CASE("sweep config files parse factors, filters and overrides") {
  const char* text =
      "# comment\n"
      "[factors]\n"
      "z = 3\n"
      "n_t1 = 500\n"
      "gamma = 1 2\n"
      "dist = normal\n"
      "B = 0 1.0\n"
      "tau = 0\n"
      "sigma2_sq = 1\n"
      "sigma3_sq = 1\n"
      "P = 3\n"
      "[run]\n"
      "reps = 7\n"
      "designs = vm ipw\n";
  std::ofstream("stest_sweep.cfg") << text;
  SweepSpec spec = parse_sweep_config("stest_sweep.cfg");
  CHECK(spec.configs.size() == 4);  // 2 gammas x 2 Bs
  CHECK(spec.options.reps == 7);
  CHECK(spec.options.designs == std::vector<std::string>{"vm", "ipw"});
  for (const auto& c : spec.configs) {
    CHECK(c.z == 3);
    CHECK(c.dist == "normal");
  }
  std::remove("stest_sweep.cfg");

  std::ofstream("stest_bad.cfg") << "[nope]\nx = 1\n";
  CHECK_THROWS_AS(parse_sweep_config("stest_bad.cfg"), ValidationError);
  std::remove("stest_bad.cfg");

  std::ofstream("stest_badkey.cfg") << "[factors]\nwhat = 1\n";
  CHECK_THROWS_AS(parse_sweep_config("stest_badkey.cfg"), ValidationError);
  std::remove("stest_badkey.cfg");

  // the master seed is a command-line concern, never a config key
  std::ofstream("stest_seed.cfg") << "[run]\nseed = 5\n";
  CHECK_THROWS_AS(parse_sweep_config("stest_seed.cfg"), ValidationError);
  std::remove("stest_seed.cfg");

  CHECK_THROWS_AS(parse_sweep_config("missing_file.cfg"), ValidationError);
}
