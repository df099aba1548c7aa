#pragma once

#include <string>
#include <vector>

namespace vecmatch {

/// Categorical factors over a set of observations (one per simulation
/// cell) plus the metric to be decomposed.
struct FactorTable {
  std::vector<std::string> factors;
  std::vector<std::vector<std::string>> levels;  // label list per factor
  std::vector<std::vector<int>> rows;            // level index per factor, per row
  std::vector<double> metric;
};

struct AnovaRow {
  std::string term;  // factor, "a:b" interaction, or "residual"
  int df = 0;
  double ss = 0.0;
  double ms = 0.0;
};

/// Fixed-effects factorial ANOVA with sum-to-zero contrasts, fitting all
/// main effects and two-way interactions. Each term's sum of squares is
/// the fit's loss in residual sum of squares when that term is dropped.
/// Rows come back sorted by mean square, largest first, with a residual
/// row appended. Throws ValidationError when the design matrix is rank
/// deficient, naming the aliased terms.
std::vector<AnovaRow> anova_rank(const FactorTable& t);

}  // namespace vecmatch
