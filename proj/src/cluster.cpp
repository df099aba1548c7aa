#include "vecmatch/cluster.hpp"

#include <limits>
#include <set>
#include <stdexcept>

#include "vecmatch/errors.hpp"
#include "vecmatch/rng.hpp"

namespace vecmatch {

namespace {

constexpr int kMaxLloydIters = 300;

void assign_points(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& centroids,
                   std::vector<int>& assignment) {
  const int n = static_cast<int>(pts.rows());
  const int k = static_cast<int>(centroids.rows());
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int c = 0; c < k; ++c) {
      const double d = (pts.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    assignment[i] = arg;
  }
}

double objective_of(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& centroids,
                    const std::vector<int>& assignment) {
  double obj = 0.0;
  for (int i = 0; i < pts.rows(); ++i) {
    obj += (pts.row(i) - centroids.row(assignment[i])).squaredNorm();
  }
  return obj;
}

// Give every empty cluster the point currently farthest from its centroid.
// Returns whether anything was moved (the move can bump the objective, so
// the caller skips its monotonicity check on such iterations).
bool repair_empty(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& centroids,
                  std::vector<int>& assignment, int k) {
  const int n = static_cast<int>(pts.rows());
  std::vector<int> sizes(k, 0);
  for (int a : assignment) ++sizes[a];
  bool moved = false;
  for (int c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    double worst = -1.0;
    int victim = -1;
    for (int i = 0; i < n; ++i) {
      if (sizes[assignment[i]] <= 1) continue;  // never empty another cluster
      const double d = (pts.row(i) - centroids.row(assignment[i])).squaredNorm();
      if (d > worst) {
        worst = d;
        victim = i;
      }
    }
    if (victim < 0) throw NumericError("cannot repair empty cluster");
    --sizes[assignment[victim]];
    assignment[victim] = c;
    ++sizes[c];
    moved = true;
  }
  return moved;
}

Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& pts, int k, Rng& rng) {
  const int n = static_cast<int>(pts.rows());
  Eigen::MatrixXd centroids(k, pts.cols());
  centroids.row(0) = pts.row(rng.uniform_int(n));
  Eigen::VectorXd d2 =
      (pts.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    int pick;
    if (total <= 0.0) {
      pick = rng.uniform_int(n);
    } else {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        r -= d2(i);
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = pts.row(pick);
    d2 = d2.cwiseMin(
        (pts.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

}  // namespace

Clustering lloyd_from(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& init) {
  const int n = static_cast<int>(pts.rows());
  const int k = static_cast<int>(init.rows());
  if (k < 1) throw std::invalid_argument("need at least one cluster");
  if (n < k) {
    throw ValidationError("fewer points (" + std::to_string(n) +
                          ") than clusters (" + std::to_string(k) + ")");
  }

  Clustering c;
  c.centroids = init;
  c.assignment.assign(n, 0);
  assign_points(pts, c.centroids, c.assignment);
  repair_empty(pts, c.centroids, c.assignment, k);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kMaxLloydIters; ++it) {
    for (int cl = 0; cl < k; ++cl) {
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(pts.cols());
      int cnt = 0;
      for (int i = 0; i < n; ++i) {
        if (c.assignment[i] == cl) {
          sum += pts.row(i);
          ++cnt;
        }
      }
      c.centroids.row(cl) = sum / cnt;
    }
    std::vector<int> next = c.assignment;
    assign_points(pts, c.centroids, next);
    const bool repaired = repair_empty(pts, c.centroids, next, k);
    const double obj = objective_of(pts, c.centroids, next);
    if (!repaired && obj > prev + 1e-9 * (1.0 + prev)) {
      throw NumericError("k-means objective increased between iterations");
    }
    const bool stable = next == c.assignment;
    c.assignment = std::move(next);
    c.objective = obj;
    prev = obj;
    if (stable) break;
  }
  return c;
}

Clustering kmeans(const Eigen::MatrixXd& pts, int k, std::uint64_t seed,
                  int restarts) {
  if (restarts < 1) throw std::invalid_argument("need at least one restart");
  Clustering best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(seed + static_cast<std::uint64_t>(r));
    Clustering cur = lloyd_from(pts, seed_centroids(pts, k, rng));
    cur.seed = seed + static_cast<std::uint64_t>(r);
    if (cur.objective < best.objective) best = std::move(cur);
  }
  return best;
}

Clustering strata_with_all_arms(const Eigen::MatrixXd& pts,
                                const std::vector<int>& treatment, int z, int k,
                                std::uint64_t seed, int restarts,
                                int max_reseeds) {
  const int n = static_cast<int>(pts.rows());
  if (static_cast<int>(treatment.size()) != n) {
    throw std::invalid_argument("treatment length does not match points");
  }
  std::vector<int> arm_total(z, 0);
  for (int t : treatment) ++arm_total[t - 1];
  for (int a = 0; a < z; ++a) {
    if (arm_total[a] == 0) {
      throw ValidationError("treatment arm " + std::to_string(a + 1) +
                            " has no units to stratify");
    }
  }

  auto deficient = [&](const std::vector<int>& assignment, int strata) {
    std::vector<std::set<int>> seen(strata);
    for (int i = 0; i < n; ++i) seen[assignment[i]].insert(treatment[i]);
    std::vector<int> bad;
    for (int s = 0; s < strata; ++s) {
      if (static_cast<int>(seen[s].size()) < z) bad.push_back(s);
    }
    return bad;
  };

  Clustering c;
  for (int attempt = 0; attempt <= max_reseeds; ++attempt) {
    c = kmeans(pts, k, seed + static_cast<std::uint64_t>(attempt), restarts);
    c.attempts = attempt;
    if (deficient(c.assignment, k).empty()) return c;
  }

  // Fallback: fold each deficient stratum into its nearest surviving
  // centroid until every stratum holds all arms.
  c.merged_fallback = true;
  std::vector<int> label_of(k);
  for (int s = 0; s < k; ++s) label_of[s] = s;
  int strata = k;
  Eigen::MatrixXd cent = c.centroids;
  std::vector<int> assignment = c.assignment;
  while (strata > 1) {
    auto bad = deficient(assignment, strata);
    if (bad.empty()) break;
    const int victim = bad.front();
    double bestd = std::numeric_limits<double>::infinity();
    int target = -1;
    for (int s = 0; s < strata; ++s) {
      if (s == victim) continue;
      const double d = (cent.row(victim) - cent.row(s)).squaredNorm();
      if (d < bestd) {
        bestd = d;
        target = s;
      }
    }
    // Merge victim into target, recompute target's centroid, renumber.
    for (int i = 0; i < n; ++i) {
      if (assignment[i] == victim) assignment[i] = target;
    }
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(pts.cols());
    int cnt = 0;
    for (int i = 0; i < n; ++i) {
      if (assignment[i] == target) {
        sum += pts.row(i);
        ++cnt;
      }
    }
    cent.row(target) = sum / cnt;
    for (int i = 0; i < n; ++i) {
      if (assignment[i] > victim) --assignment[i];
    }
    Eigen::MatrixXd shrunk(strata - 1, cent.cols());
    for (int s = 0, w = 0; s < strata; ++s) {
      if (s != victim) shrunk.row(w++) = cent.row(s);
    }
    cent = shrunk;
    --strata;
  }
  if (!deficient(assignment, strata).empty()) {
    throw ValidationError(
        "cannot form strata containing every arm, even as one stratum");
  }
  c.assignment = std::move(assignment);
  c.centroids = cent;
  c.objective = objective_of(pts, c.centroids, c.assignment);
  return c;
}

}  // namespace vecmatch
