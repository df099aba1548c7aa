#pragma once

#include <vector>

namespace vecmatch {

/// One matched pair; `ref` and `cand` index the score vectors given to the
/// matcher, not dataset rows.
struct MatchPair {
  int ref = -1;
  int cand = -1;
  double distance = 0.0;
};

/// 1:1 nearest-neighbor matching with replacement: every reference
/// independently takes its closest candidate with |score difference| <=
/// caliper. Distance ties go to the smallest candidate index. References
/// without a candidate in range are simply absent from the result.
std::vector<MatchPair> caliper_nn_with_replacement(
    const std::vector<double>& ref_scores,
    const std::vector<double>& cand_scores, double caliper);

/// Greedy 1:1 matching without replacement: references are processed in
/// descending score order (ties by ascending index) and each takes its
/// closest still-available candidate within the caliper.
std::vector<MatchPair> caliper_nn_without_replacement(
    const std::vector<double>& ref_scores,
    const std::vector<double>& cand_scores, double caliper);

/// epsilon times the sample standard deviation (n-1 denominator) of the
/// pooled scores.
double caliper_from_sd(const std::vector<double>& pooled, double epsilon);

}  // namespace vecmatch
