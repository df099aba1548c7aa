#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace vecmatch {

struct Clustering {
  std::vector<int> assignment;  // 0-based cluster per point
  Eigen::MatrixXd centroids;    // k x dim (k may shrink after merging)
  double objective = 0.0;       // sum of squared distances to assigned centroid
  std::uint64_t seed = 0;       // seed of the restart that won
  int attempts = 0;             // reseed attempts consumed (stratification only)
  bool merged_fallback = false;
};

/// Lloyd iterations from the given centroids. Ties in assignment go to the
/// lowest centroid index; empty clusters steal the point farthest from its
/// centroid. Capped at 300 iterations.
Clustering lloyd_from(const Eigen::MatrixXd& pts, const Eigen::MatrixXd& init);

/// Restarted k-means. Each restart seeds centroids k-means++ style
/// (next center drawn with probability proportional to squared distance)
/// from seed + restart index; the best objective wins and ties keep the
/// earliest restart.
Clustering kmeans(const Eigen::MatrixXd& pts, int k, std::uint64_t seed,
                  int restarts = 10);

/// k-means strata that each contain every treatment arm. Reseeds up to
/// max_reseeds times; if some stratum still misses an arm, deficient
/// strata are merged into the nearest centroid until all qualify.
Clustering strata_with_all_arms(const Eigen::MatrixXd& pts,
                                const std::vector<int>& treatment, int z, int k,
                                std::uint64_t seed, int restarts = 10,
                                int max_reseeds = 10);

}  // namespace vecmatch
