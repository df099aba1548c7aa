#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vecmatch/anova.hpp"
#include "vecmatch/errors.hpp"
#include "vecmatch/rng.hpp"

using namespace vecmatch;

namespace {

// full crossing of the given level counts, one observation per cell
FactorTable crossing(const std::vector<int>& sizes) {
  FactorTable t;
  for (size_t f = 0; f < sizes.size(); ++f) {
    t.factors.push_back(std::string(1, static_cast<char>('a' + f)));
    std::vector<std::string> lv;
    for (int l = 0; l < sizes[f]; ++l) lv.push_back(std::to_string(l));
    t.levels.push_back(lv);
  }
  std::vector<int> idx(sizes.size(), 0);
  while (true) {
    t.rows.push_back(idx);
    t.metric.push_back(0.0);
    size_t pos = sizes.size();
    while (pos > 0 && ++idx[pos - 1] == sizes[pos - 1]) {
      idx[pos - 1] = 0;
      --pos;
    }
    if (pos == 0) break;
  }
  return t;
}

const AnovaRow& row_named(const std::vector<AnovaRow>& rows,
                          const std::string& term) {
  for (const auto& r : rows)
    if (r.term == term) return r;
  throw std::runtime_error("missing term " + term);
}

}  // namespace

TEST_CASE("a constant response leaves every mean square at zero") {
  FactorTable t = crossing({2, 3});
  for (auto& m : t.metric) m = 4.2;
  auto rows = anova_rank(t);
  for (const auto& r : rows) CHECK(r.ms == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("the loaded factor dominates the decomposition") {
  FactorTable t = crossing({2, 3, 2});
  Rng rng(88);
  for (size_t i = 0; i < t.rows.size(); ++i)
    t.metric[i] = 3.0 * t.rows[i][1] + 0.01 * rng.normal();
  auto rows = anova_rank(t);
  CHECK(rows.front().term == "b");
  CHECK(rows.back().term == "residual");
  // main effect of b: between-level SS of levels {0, 3, 6} times cells/level
  CHECK(row_named(rows, "b").df == 2);
  CHECK(row_named(rows, "b").ss == doctest::Approx(72.0).epsilon(0.01));
  CHECK(row_named(rows, "a").ss < 0.1);
  CHECK(row_named(rows, "a:b").ss < 0.1);
}

TEST_CASE("terms carry factorial degrees of freedom") {
  FactorTable t = crossing({2, 3, 4});
  Rng rng(5);
  for (auto& m : t.metric) m = rng.normal();
  auto rows = anova_rank(t);
  CHECK(row_named(rows, "a").df == 1);
  CHECK(row_named(rows, "b").df == 2);
  CHECK(row_named(rows, "c").df == 3);
  CHECK(row_named(rows, "a:b").df == 2);
  CHECK(row_named(rows, "a:c").df == 3);
  CHECK(row_named(rows, "b:c").df == 6);
  // residual: 24 - 1 - (1+2+3) - (2+3+6) = 6
  CHECK(row_named(rows, "residual").df == 6);
  double total = 0.0;
  for (const auto& r : rows) total += r.ss;
  double mean = 0.0;
  for (double m : t.metric) mean += m;
  mean /= t.metric.size();
  double want = 0.0;
  for (double m : t.metric) want += (m - mean) * (m - mean);
  // two-way model on a three-factor crossing: SS parts add up to the total
  // only through the three-way remainder captured in the residual row
  CHECK(total == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("an interaction shows up as its own term") {
  FactorTable t = crossing({2, 2, 2});
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const int a = t.rows[i][0], b = t.rows[i][1];
    t.metric[i] = (a == b) ? 1.0 : -1.0;  // pure a:b interaction
  }
  auto rows = anova_rank(t);
  CHECK(rows.front().term == "a:b");
  CHECK(row_named(rows, "a:b").ss == doctest::Approx(8.0));
  CHECK(row_named(rows, "a").ss == doctest::Approx(0.0).scale(1.0));
  CHECK(row_named(rows, "b").ss == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("aliased factors are reported by name") {
  // factor b duplicates factor a row by row, so neither is estimable
  FactorTable t;
  t.factors = {"a", "b"};
  t.levels = {{"0", "1"}, {"0", "1"}};
  for (int i = 0; i < 8; ++i) {
    const int a = i % 2;
    t.rows.push_back({a, a});
    t.metric.push_back(static_cast<double>(i));
  }
  CHECK_THROWS_WITH_AS(anova_rank(t), doctest::Contains("a:b"),
                       ValidationError);
}

TEST_CASE("a single-level factor cannot be decomposed") {
  FactorTable t = crossing({1, 2});
  for (size_t i = 0; i < t.metric.size(); ++i) t.metric[i] = i;
  CHECK_THROWS_AS(anova_rank(t), ValidationError);
}
