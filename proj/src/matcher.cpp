#include "vecmatch/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "vecmatch/errors.hpp"

namespace vecmatch {

namespace {

struct SortedCands {
  std::vector<double> score;  // ascending
  std::vector<int> index;     // original index; ties sorted ascending
  std::vector<int> run_start; // first position sharing this position's score
};

SortedCands sort_cands(const std::vector<double>& cand_scores) {
  SortedCands s;
  const int m = static_cast<int>(cand_scores.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (cand_scores[a] != cand_scores[b]) return cand_scores[a] < cand_scores[b];
    return a < b;
  });
  s.score.resize(m);
  s.index.resize(m);
  s.run_start.resize(m);
  for (int j = 0; j < m; ++j) {
    s.score[j] = cand_scores[order[j]];
    s.index[j] = order[j];
    s.run_start[j] = (j > 0 && s.score[j] == s.score[j - 1]) ? s.run_start[j - 1] : j;
  }
  return s;
}

}  // namespace

std::vector<MatchPair> caliper_nn_with_replacement(
    const std::vector<double>& ref_scores,
    const std::vector<double>& cand_scores, double caliper) {
  if (caliper < 0.0) throw std::invalid_argument("caliper must be >= 0");
  std::vector<MatchPair> out;
  if (cand_scores.empty()) return out;
  const SortedCands s = sort_cands(cand_scores);
  const int m = static_cast<int>(s.score.size());
  for (int r = 0; r < static_cast<int>(ref_scores.size()); ++r) {
    const double x = ref_scores[r];
    const int pos = static_cast<int>(
        std::lower_bound(s.score.begin(), s.score.end(), x) - s.score.begin());
    const double d_right =
        pos < m ? s.score[pos] - x : std::numeric_limits<double>::infinity();
    const double d_left =
        pos > 0 ? x - s.score[pos - 1] : std::numeric_limits<double>::infinity();
    const double d = std::min(d_left, d_right);
    if (d > caliper) continue;
    int cand;
    if (d_left < d_right) {
      cand = s.index[s.run_start[pos - 1]];
    } else if (d_right < d_left) {
      cand = s.index[s.run_start[pos]];
    } else {
      cand = std::min(s.index[s.run_start[pos - 1]], s.index[s.run_start[pos]]);
    }
    out.push_back({r, cand, d});
  }
  return out;
}

std::vector<MatchPair> caliper_nn_without_replacement(
    const std::vector<double>& ref_scores,
    const std::vector<double>& cand_scores, double caliper) {
  if (caliper < 0.0) throw std::invalid_argument("caliper must be >= 0");
  std::vector<MatchPair> out;
  if (cand_scores.empty()) return out;

  std::vector<int> ref_order(ref_scores.size());
  std::iota(ref_order.begin(), ref_order.end(), 0);
  std::sort(ref_order.begin(), ref_order.end(), [&](int a, int b) {
    if (ref_scores[a] != ref_scores[b]) return ref_scores[a] > ref_scores[b];
    return a < b;
  });

  std::set<std::pair<double, int>> avail;
  for (int j = 0; j < static_cast<int>(cand_scores.size()); ++j) {
    avail.emplace(cand_scores[j], j);
  }

  for (int r : ref_order) {
    if (avail.empty()) break;
    const double x = ref_scores[r];
    auto right = avail.lower_bound({x, std::numeric_limits<int>::min()});
    const double d_right = right != avail.end()
                               ? right->first - x
                               : std::numeric_limits<double>::infinity();
    double d_left = std::numeric_limits<double>::infinity();
    auto left = avail.end();
    if (right != avail.begin()) {
      left = std::prev(right);
      d_left = x - left->first;
    }
    const double d = std::min(d_left, d_right);
    if (d > caliper) continue;
    // The left neighbor is the last of its equal-score run, so walk back to
    // the run's smallest available index. The right neighbor is already the
    // first of its run (set order is score, then index).
    auto left_best = left;
    if (left != avail.end()) {
      for (auto it = left; it != avail.begin();) {
        --it;
        if (it->first != left->first) break;
        left_best = it;
      }
    }
    auto best = avail.end();
    if (d_left < d_right) {
      best = left_best;
    } else if (d_right < d_left) {
      best = right;
    } else {
      best = left_best->second < right->second ? left_best : right;
    }
    out.push_back({r, best->second, std::abs(best->first - x)});
    avail.erase(best);
  }
  std::sort(out.begin(), out.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.ref < b.ref; });
  return out;
}

double caliper_from_sd(const std::vector<double>& pooled, double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");
  const int n = static_cast<int>(pooled.size());
  if (n < 2) throw ValidationError("need at least two scores to set a caliper");
  const double mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : pooled) ss += (v - mean) * (v - mean);
  return epsilon * std::sqrt(ss / (n - 1));
}

}  // namespace vecmatch
