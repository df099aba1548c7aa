#include "vecmatch/sim.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include "vecmatch/balance.hpp"
#include "vecmatch/designs.hpp"
#include "vecmatch/errors.hpp"
#include "vecmatch/manifest.hpp"
#include "vecmatch/rng.hpp"
#include "vecmatch/support.hpp"
#include "vecmatch/table.hpp"

namespace vecmatch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed sub-stream labels within one replication.
constexpr std::uint64_t kVmStream = 11;
constexpr std::uint64_t kKmcStream = 12;

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success) {
    throw NumericError("eigendecomposition of a covariance failed");
  }
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw NumericError("covariance matrix is not positive definite");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd equicovariance(int p, double diag, double tau) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(p, p, tau);
  s.diagonal().setConstant(diag);
  return s;
}

// Fills rows [row0, row0+count) of X: mu + L*z, or the t7 scale mixture.
// Draw order per unit is fixed (P normals, then the mixing chi-square) so
// streams stay stable.
void sample_arm(Eigen::MatrixXd& x, int row0, int count,
                const Eigen::VectorXd& mu, const Eigen::MatrixXd& l, bool t7,
                Rng& rng) {
  const int p = static_cast<int>(mu.size());
  Eigen::VectorXd z(p);
  for (int i = 0; i < count; ++i) {
    for (int j = 0; j < p; ++j) z(j) = rng.normal();
    Eigen::VectorXd v = l * z;
    if (t7) v /= std::sqrt(rng.chi_square(7) / 7.0);
    x.row(row0 + i) = (mu + v).transpose();
  }
}

Dataset assemble(const Eigen::MatrixXd& x, const std::vector<int>& sizes) {
  Dataset ds;
  ds.covariates = x;
  for (int j = 0; j < x.cols(); ++j) {
    ds.covariate_names.push_back("x" + std::to_string(j + 1));
  }
  int row = 0;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    ds.treatment_labels.push_back(std::to_string(t + 1));
    for (int i = 0; i < sizes[t]; ++i) {
      ds.treatment.push_back(static_cast<int>(t) + 1);
      ds.unit_ids.push_back("u" + std::to_string(row));
      ++row;
    }
  }
  return ds;
}

bool wants(const SweepOptions& opts, const std::string& design) {
  return std::find(opts.designs.begin(), opts.designs.end(), design) !=
         opts.designs.end();
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
}

}  // namespace

std::string SimConfig::id() const {
  std::string s = "z" + std::to_string(z) + "_n" + std::to_string(n_t1) + "_g" +
                  std::to_string(gamma) + "_" + dist + "_B" + format_double(B);
  if (z == 3) {
    s += "_t" + format_double(tau) + "_s2" + format_double(sigma2_sq) + "_s3" +
         format_double(sigma3_sq) + "_P" + std::to_string(P);
  }
  return s;
}

int SimConfig::total_n() const {
  if (z == 5) return n_t1 * (1 + 2 * gamma + 2 * gamma * gamma);
  return n_t1 * (1 + gamma + gamma * gamma);
}

double b_from_B(double B, double sigma2_sq, double sigma3_sq) {
  if (sigma2_sq <= 0.0 || sigma3_sq <= 0.0) {
    throw std::invalid_argument("variances must be positive");
  }
  return B * std::sqrt((1.0 + sigma2_sq + sigma3_sq) / 3.0);
}

Dataset generate_z3(const SimConfig& cfg, std::uint64_t rep_seed) {
  if (cfg.z != 3) throw std::invalid_argument("config is not a three-arm cell");
  if (cfg.dist != "normal" && cfg.dist != "t7") {
    throw ValidationError("unknown distribution tag: " + cfg.dist);
  }
  const int p = cfg.P;
  const double b = b_from_B(cfg.B, cfg.sigma2_sq, cfg.sigma3_sq);
  const std::vector<int> sizes = {cfg.n_t1, cfg.gamma * cfg.n_t1,
                                  cfg.gamma * cfg.gamma * cfg.n_t1};
  const double diags[3] = {1.0, cfg.sigma2_sq, cfg.sigma3_sq};

  Eigen::MatrixXd x(sizes[0] + sizes[1] + sizes[2], p);
  Rng rng(rep_seed);
  int row = 0;
  for (int t = 0; t < 3; ++t) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < p; ++j) {
      if (j % 3 == t) mu(j) = b;
    }
    const Eigen::MatrixXd l =
        symmetric_sqrt(equicovariance(p, diags[t], cfg.tau));
    sample_arm(x, row, sizes[t], mu, l, cfg.dist == "t7", rng);
    row += sizes[t];
  }
  return assemble(x, sizes);
}

Dataset generate_z5(const SimConfig& cfg, std::uint64_t rep_seed) {
  if (cfg.z != 5) throw std::invalid_argument("config is not a five-arm cell");
  if (cfg.dist != "normal" && cfg.dist != "t7") {
    throw ValidationError("unknown distribution tag: " + cfg.dist);
  }
  const int p = 5;
  const int g = cfg.gamma;
  const std::vector<int> sizes = {cfg.n_t1, g * cfg.n_t1, g * cfg.n_t1,
                                  g * g * cfg.n_t1, g * g * cfg.n_t1};
  Eigen::MatrixXd x(cfg.total_n(), p);
  const Eigen::MatrixXd l = Eigen::MatrixXd::Identity(p, p);
  Rng rng(rep_seed);
  int row = 0;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
    mu(t) = cfg.B;
    sample_arm(x, row, sizes[t], mu, l, cfg.dist == "t7", rng);
    row += sizes[t];
  }
  return assemble(x, sizes);
}

Dataset generate_interlude(double a, int n1, int n2, int n3,
                           std::uint64_t seed) {
  const std::vector<int> sizes = {n1, n2, n3};
  Eigen::MatrixXd x(n1 + n2 + n3, 2);
  const Eigen::MatrixXd l = Eigen::MatrixXd::Identity(2, 2);
  Rng rng(seed);
  Eigen::VectorXd mu(2);
  int row = 0;
  for (int t = 0; t < 3; ++t) {
    mu << (t == 1 ? a : 0.0), (t == 2 ? a : 0.0);
    sample_arm(x, row, sizes[t], mu, l, false, rng);
    row += sizes[t];
  }
  return assemble(x, sizes);
}

RepMetrics run_replication(const SimConfig& cfg, int rep_index,
                           const SweepOptions& opts) {
  RepMetrics m;
  m.rep = rep_index;
  const std::uint64_t rep_seed =
      derive_seed(opts.seed, fnv1a(cfg.id()), static_cast<std::uint64_t>(rep_index));
  try {
    const Dataset ds =
        cfg.z == 5 ? generate_z5(cfg, rep_seed) : generate_z3(cfg, rep_seed);
    const Eigen::VectorXd scale = reference_sd(ds, 1);
    const TrimResult trim = trim_to_support(ds, opts.fit);
    m.dropped_fraction = trim.dropped_fraction;
    int eligible_refs = 0;
    for (int t : trim.trimmed.treatment) {
      if (t == 1) ++eligible_refs;
    }
    m.pre_max2sb = unweighted_balance(trim.trimmed, scale).max2sb_mean;

    if (wants(opts, "vm")) {
      VmOptions vo;
      vo.k = opts.k;
      vo.epsilon = opts.epsilon;
      vo.seed = derive_seed(rep_seed, kVmStream);
      const MatchedCohort c = vector_match(trim.trimmed, trim.gps, 1, vo);
      m.pct["vm"] = pct_matched(c, eligible_refs);
      m.max2sb["vm"] =
          c.n_trip() > 0 ? cohort_balance(trim.trimmed, c, scale).max2sb_mean
                         : kNaN;
    }
    if (wants(opts, "crm")) {
      // The sweep gives every design the trimmed sample, and %Matched uses
      // the same denominator as vector matching: reference units eligible
      // for every treatment.
      const MatchedCohort c = crm_match(trim.trimmed, 1, opts.epsilon, opts.fit);
      m.pct["crm"] = pct_matched(c, eligible_refs);
      m.max2sb["crm"] =
          c.n_trip() > 0 ? cohort_balance(trim.trimmed, c, scale).max2sb_mean
                         : kNaN;
    }
    if (wants(opts, "ipw")) {
      const IpwWeights w = ipw_weights(trim.trimmed, trim.gps);
      m.max2sb["ipw"] = ipw_balance(trim.trimmed, w, scale).max2sb_mean;
    }
    if (wants(opts, "kmc")) {
      const Subclassification sc = kmc_subclassify(
          trim.trimmed, trim.gps, opts.k, derive_seed(rep_seed, kKmcStream));
      m.max2sb["kmc"] = kmc_balance(trim.trimmed, sc, scale).max2sb_mean;
    }
    m.ok = true;
  } catch (const std::exception& e) {
    m.ok = false;
    m.error = e.what();
  }
  return m;
}

void aggregate(SimResult& r) {
  std::vector<double> pre, dropped;
  std::map<std::string, std::vector<double>> bias, pct;
  r.failures = 0;
  for (const RepMetrics& m : r.reps) {
    if (!m.ok) {
      ++r.failures;
      continue;
    }
    pre.push_back(m.pre_max2sb);
    dropped.push_back(m.dropped_fraction);
    for (const auto& [d, v] : m.max2sb) {
      if (!std::isnan(v)) bias[d].push_back(v);
    }
    for (const auto& [d, v] : m.pct) pct[d].push_back(v);
  }
  r.mean_pre = mean_of(pre);
  r.mean_dropped = mean_of(dropped);
  r.mean_max2sb.clear();
  r.mean_pct.clear();
  for (const auto& [d, v] : bias) r.mean_max2sb[d] = mean_of(v);
  for (const auto& [d, v] : pct) r.mean_pct[d] = mean_of(v);
}

std::vector<SimResult> run_sweep(const std::vector<SimConfig>& configs,
                                 const SweepOptions& opts) {
  if (opts.reps < 1) throw std::invalid_argument("need at least one replication");
  std::vector<SimResult> results(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    results[c].config = configs[c];
    results[c].reps.resize(opts.reps);
  }

  const std::size_t total = configs.size() * static_cast<std::size_t>(opts.reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
      const std::size_t c = i / opts.reps;
      const int rep = static_cast<int>(i % opts.reps);
      results[c].reps[rep] = run_replication(configs[c], rep, opts);
    }
  };

  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (SimResult& r : results) aggregate(r);
  return results;
}

std::vector<SimConfig> full_factorial_z3() {
  const std::vector<int> n_levels = {500, 1000};
  const std::vector<int> g_levels = {1, 2};
  const std::vector<std::string> f_levels = {"normal", "t7"};
  const std::vector<double> b_levels = {0.0, 0.25, 0.5, 0.75, 1.0};
  const std::vector<double> tau_levels = {0.0, 0.25};
  const std::vector<double> s_levels = {0.5, 1.0, 2.0};
  const std::vector<int> p_levels = {3, 6};

  std::vector<SimConfig> out;
  for (int n : n_levels) {
    for (int g : g_levels) {
      for (const auto& f : f_levels) {
        for (double b : b_levels) {
          for (double tau : tau_levels) {
            for (double s2 : s_levels) {
              for (double s3 : s_levels) {
                for (int p : p_levels) {
                  if (p == 6 && n == 500) continue;  // sparse corner, discarded
                  SimConfig c;
                  c.z = 3;
                  c.n_t1 = n;
                  c.gamma = g;
                  c.dist = f;
                  c.B = b;
                  c.tau = tau;
                  c.sigma2_sq = s2;
                  c.sigma3_sq = s3;
                  c.P = p;
                  out.push_back(c);
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

std::vector<SimConfig> factorial_z5() {
  std::vector<SimConfig> out;
  for (int g : {1, 2}) {
    for (const std::string& f : {std::string("normal"), std::string("t7")}) {
      for (double b : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        SimConfig c;
        c.z = 5;
        c.n_t1 = 1000;
        c.gamma = g;
        c.dist = f;
        c.B = b;
        c.P = 5;
        out.push_back(c);
      }
    }
  }
  return out;
}

SweepSpec parse_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);

  std::map<std::string, std::vector<std::string>> factors, run;
  std::string section, line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);

    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      if (section != "factors" && section != "run") {
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty()) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected 'key = values' inside a section");
    }
    std::string key = line.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    std::vector<std::string> values;
    std::string tok;
    for (std::size_t i = eq + 1; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ' ' || line[i] == '\t') {
        if (!tok.empty()) values.push_back(tok);
        tok.clear();
      } else {
        tok.push_back(line[i]);
      }
    }
    if (values.empty()) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": no values for key '" + key + "'");
    }
    static const std::set<std::string> factor_keys = {
        "z", "n_t1", "gamma", "dist", "B", "tau", "sigma2_sq", "sigma3_sq", "P"};
    static const std::set<std::string> run_keys = {"reps", "designs", "k",
                                                   "epsilon", "ridge"};
    const bool known = section == "factors" ? factor_keys.count(key) > 0
                                            : run_keys.count(key) > 0;
    if (!known) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": unknown key '" + key + "' in [" + section + "]");
    }
    (section == "factors" ? factors : run)[key] = values;
  }

  auto ints = [&](const std::string& key, std::vector<int> dflt) {
    auto it = factors.find(key);
    if (it == factors.end()) return dflt;
    std::vector<int> out;
    for (const auto& s : it->second) out.push_back(static_cast<int>(parse_double(s)));
    return out;
  };
  auto doubles = [&](const std::string& key, std::vector<double> dflt) {
    auto it = factors.find(key);
    if (it == factors.end()) return dflt;
    std::vector<double> out;
    for (const auto& s : it->second) out.push_back(parse_double(s));
    return out;
  };
  auto strings = [&](const std::string& key, std::vector<std::string> dflt) {
    auto it = factors.find(key);
    return it == factors.end() ? dflt : it->second;
  };

  int z = 3;
  if (auto it = factors.find("z"); it != factors.end()) {
    if (it->second.size() != 1) throw ValidationError("z must be a single value");
    z = static_cast<int>(parse_double(it->second[0]));
  }
  if (z != 3 && z != 5) throw ValidationError("z must be 3 or 5");

  SweepSpec spec;
  const auto dists = strings("dist", {"normal", "t7"});
  for (const auto& d : dists) {
    if (d != "normal" && d != "t7") {
      throw ValidationError("unknown distribution tag: " + d);
    }
  }

  if (z == 3) {
    for (int n : ints("n_t1", {500, 1000}))
      for (int g : ints("gamma", {1, 2}))
        for (const auto& f : dists)
          for (double b : doubles("B", {0.0, 0.25, 0.5, 0.75, 1.0}))
            for (double tau : doubles("tau", {0.0, 0.25}))
              for (double s2 : doubles("sigma2_sq", {0.5, 1.0, 2.0}))
                for (double s3 : doubles("sigma3_sq", {0.5, 1.0, 2.0}))
                  for (int p : ints("P", {3, 6})) {
                    if (p == 6 && n == 500) continue;
                    SimConfig c;
                    c.z = 3;
                    c.n_t1 = n;
                    c.gamma = g;
                    c.dist = f;
                    c.B = b;
                    c.tau = tau;
                    c.sigma2_sq = s2;
                    c.sigma3_sq = s3;
                    c.P = p;
                    spec.configs.push_back(c);
                  }
  } else {
    for (const char* bad : {"tau", "sigma2_sq", "sigma3_sq", "P"}) {
      if (factors.count(bad)) {
        throw ValidationError(std::string("'") + bad +
                              "' is not a five-arm factor");
      }
    }
    for (int n : ints("n_t1", {1000}))
      for (int g : ints("gamma", {1, 2}))
        for (const auto& f : dists)
          for (double b : doubles("B", {0.0, 0.25, 0.5, 0.75, 1.0})) {
            SimConfig c;
            c.z = 5;
            c.n_t1 = n;
            c.gamma = g;
            c.dist = f;
            c.B = b;
            c.P = 5;
            spec.configs.push_back(c);
          }
  }
  if (spec.configs.empty()) {
    throw ValidationError("factor selection produced no configurations");
  }

  if (auto it = run.find("designs"); it != run.end()) {
    spec.options.designs = it->second;
  } else if (z == 5) {
    spec.options.designs = {"vm", "ipw"};
  }
  for (const auto& d : spec.options.designs) {
    if (d != "vm" && d != "crm" && d != "ipw" && d != "kmc") {
      throw ValidationError("unknown design: " + d);
    }
  }
  auto run_scalar = [&](const std::string& key) -> const std::string* {
    auto it = run.find(key);
    if (it == run.end()) return nullptr;
    if (it->second.size() != 1) {
      throw ValidationError("'" + key + "' takes a single value");
    }
    return &it->second[0];
  };
  if (const auto* v = run_scalar("reps")) {
    spec.options.reps = static_cast<int>(parse_double(*v));
  }
  if (const auto* v = run_scalar("k")) {
    spec.options.k = static_cast<int>(parse_double(*v));
  }
  if (const auto* v = run_scalar("epsilon")) spec.options.epsilon = parse_double(*v);
  if (const auto* v = run_scalar("ridge")) spec.options.fit.ridge = parse_double(*v);
  return spec;
}

}  // namespace vecmatch
