#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vecmatch/dataset.hpp"
#include "vecmatch/gps.hpp"

namespace vecmatch {

/// One cell of the factorial study. For z=5 only gamma, dist and B apply
/// (B equals the raw separation b there, the covariance being identity).
struct SimConfig {
  int z = 3;
  int n_t1 = 500;
  int gamma = 1;
  std::string dist = "normal";  // "normal" or "t7"
  double B = 0.0;
  double tau = 0.0;
  double sigma2_sq = 1.0;
  double sigma3_sq = 1.0;
  int P = 3;

  std::string id() const;  // filesystem-safe, unique per cell
  int total_n() const;
};

/// Separation implied by a standardized-bias level.
double b_from_B(double B, double sigma2_sq, double sigma3_sq);

/// Three-arm sample: sizes (n_t1, gamma*n_t1, gamma^2*n_t1); arm means
/// tile (b,0,0)/(0,b,0)/(0,0,b) across P; covariances have unit /
/// sigma2_sq / sigma3_sq diagonals and tau off-diagonals. dist "t7" draws
/// mu + L*z/sqrt(w/7) with the same scale matrix.
Dataset generate_z3(const SimConfig& cfg, std::uint64_t rep_seed);

/// Five-arm sample: sizes (n1, g*n1, g*n1, g^2*n1, g^2*n1); mean of arm t
/// is B times the t-th unit vector; identity covariance.
Dataset generate_z5(const SimConfig& cfg, std::uint64_t rep_seed);

/// Two-covariate, three-arm example: means (0,0), (a,0), (0,a) with unit
/// covariance.
Dataset generate_interlude(double a, int n1, int n2, int n3,
                           std::uint64_t seed);

struct SweepOptions {
  std::vector<std::string> designs = {"vm", "crm", "ipw", "kmc"};
  int reps = 200;
  std::uint64_t seed = 0;
  int jobs = 1;
  int k = 5;
  double epsilon = 0.25;
  FitOptions fit;
};

/// Everything recorded for one replication. Metrics are NaN when the
/// design failed or produced an empty cohort (kept out of aggregates but
/// counted).
struct RepMetrics {
  int rep = 0;
  bool ok = false;
  std::string error;
  double pre_max2sb = 0.0;
  double dropped_fraction = 0.0;
  std::map<std::string, double> max2sb;   // per design
  std::map<std::string, double> pct;      // vm / crm only
};

struct SimResult {
  SimConfig config;
  std::vector<RepMetrics> reps;                // rep index order
  double mean_pre = 0.0;
  double mean_dropped = 0.0;
  std::map<std::string, double> mean_max2sb;
  std::map<std::string, double> mean_pct;
  int failures = 0;
};

RepMetrics run_replication(const SimConfig& cfg, int rep_index,
                           const SweepOptions& opts);

/// Runs every (config, replication) cell, multi-threaded when jobs > 1.
/// Replication seeds come from (master seed, config id, rep index), and
/// aggregation reads the stored per-rep values in index order, so results
/// are identical for any degree of parallelism.
std::vector<SimResult> run_sweep(const std::vector<SimConfig>& configs,
                                 const SweepOptions& opts);

/// Recompute a SimResult's aggregate fields from its stored replications
/// (pairwise summation, fixed order).
void aggregate(SimResult& result);

/// The full three-arm factorial in canonical order, with the sparse
/// (P=6, n_t1=500) corner removed: 1080 cells.
std::vector<SimConfig> full_factorial_z3();

/// The five-arm factorial: 20 cells.
std::vector<SimConfig> factorial_z5();

/// Parsed `simulate` configuration file (sections [factors] and [run]).
struct SweepSpec {
  std::vector<SimConfig> configs;
  SweepOptions options;
};

SweepSpec parse_sweep_config(const std::string& path);

}  // namespace vecmatch
