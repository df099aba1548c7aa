#include "vecmatch/designs.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "vecmatch/errors.hpp"
#include "vecmatch/matcher.hpp"
#include "vecmatch/rng.hpp"
#include "vecmatch/support.hpp"

namespace vecmatch {

namespace {

void check_reference(const Dataset& ds, int reference) {
  if (reference < 1 || reference > ds.z()) {
    throw std::invalid_argument("reference arm " + std::to_string(reference) +
                                " outside 1.." + std::to_string(ds.z()));
  }
}

std::vector<int> comparators_of(int z, int reference) {
  std::vector<int> comps;
  for (int t = 1; t <= z; ++t) {
    if (t != reference) comps.push_back(t);
  }
  return comps;
}

void recount_psi(MatchedCohort& c, int n_rows) {
  c.psi.assign(n_rows, 0);
  for (const auto& tuple : c.tuples) {
    for (int row : tuple) ++c.psi[row];
  }
}

// One greedy without-replacement binary matching, used by both the
// common-referent and the series-of-binary designs.
struct PairRun {
  std::vector<std::pair<int, int>> pairs;  // (ref row, cand row), dataset rows
  std::vector<int> eligible_ref_rows;      // reference rows inside the overlap
  std::vector<std::string> notes;
};

PairRun match_pair(const Dataset& ds, int reference, int comp, double epsilon,
                   const FitOptions& fit) {
  const BinaryPsFit bfit = fit_binary_ps(ds, reference, comp, fit);
  std::vector<int> arm(bfit.rows.size());
  for (std::size_t i = 0; i < bfit.rows.size(); ++i) {
    arm[i] = ds.treatment[bfit.rows[i]];
  }
  const CommonSupport cs = pairwise_support(bfit.ps, arm);

  // Matching runs on the logit of the fitted score; the caliper is epsilon
  // SDs of that logit pooled over the units inside the overlap.
  const auto to_logit = [](double p) { return std::log(p) - std::log1p(-p); };
  std::vector<double> pooled;
  pooled.reserve(cs.eligible.size());
  for (int i : cs.eligible) pooled.push_back(to_logit(bfit.ps(i)));
  const double caliper = caliper_from_sd(pooled, epsilon);

  std::vector<int> ref_rows, cand_rows;
  std::vector<double> ref_scores, cand_scores;
  for (int i : cs.eligible) {
    const int row = bfit.rows[i];
    if (ds.treatment[row] == reference) {
      ref_rows.push_back(row);
      ref_scores.push_back(to_logit(bfit.ps(i)));
    } else {
      cand_rows.push_back(row);
      cand_scores.push_back(to_logit(bfit.ps(i)));
    }
  }

  PairRun run;
  run.eligible_ref_rows = ref_rows;
  const auto matches =
      caliper_nn_without_replacement(ref_scores, cand_scores, caliper);
  run.pairs.reserve(matches.size());
  for (const auto& m : matches) {
    run.pairs.emplace_back(ref_rows[m.ref], cand_rows[m.cand]);
  }
  run.notes.push_back("arm " + std::to_string(comp) + ": matched " +
                      std::to_string(run.pairs.size()) + " of " +
                      std::to_string(ref_rows.size()) + " eligible reference units");
  return run;
}

}  // namespace

void validate_cohort(const MatchedCohort& c, const Dataset& ds) {
  if (c.arms.empty()) throw ValidationError("cohort has no arms");
  std::set<int> seen_arms;
  for (int a : c.arms) {
    if (a < 1 || a > ds.z()) {
      throw ValidationError("cohort arm " + std::to_string(a) + " outside 1.." +
                            std::to_string(ds.z()));
    }
    if (!seen_arms.insert(a).second) {
      throw ValidationError("duplicate arm " + std::to_string(a) + " in cohort");
    }
  }
  if (seen_arms.count(c.reference) == 0) {
    throw ValidationError("reference arm missing from cohort arms");
  }
  int ref_col = 0;
  while (c.arms[ref_col] != c.reference) ++ref_col;

  std::set<int> ref_rows;
  for (const auto& tuple : c.tuples) {
    if (tuple.size() != c.arms.size()) {
      throw ValidationError("tuple width does not match arm count");
    }
    for (std::size_t j = 0; j < tuple.size(); ++j) {
      const int row = tuple[j];
      if (row < 0 || row >= ds.n()) {
        throw ValidationError("tuple row " + std::to_string(row) +
                              " outside the dataset");
      }
      if (ds.treatment[row] != c.arms[j]) {
        throw ValidationError("row " + std::to_string(row) + " is in arm " +
                              std::to_string(ds.treatment[row]) +
                              " but sits in the column for arm " +
                              std::to_string(c.arms[j]));
      }
    }
    if (!ref_rows.insert(tuple[ref_col]).second) {
      throw ValidationError("reference row " + std::to_string(tuple[ref_col]) +
                            " appears in more than one tuple");
    }
  }

  if (c.psi.size() != static_cast<std::size_t>(ds.n())) {
    throw ValidationError("psi length does not match the dataset");
  }
  std::vector<int> recount(ds.n(), 0);
  for (const auto& tuple : c.tuples) {
    for (int row : tuple) ++recount[row];
  }
  for (int i = 0; i < ds.n(); ++i) {
    if (recount[i] != c.psi[i]) {
      throw ValidationError("psi mismatch at row " + std::to_string(i));
    }
  }
}

MatchedCohort vector_match(const Dataset& trimmed, const GpsMatrix& gps,
                           int reference, const VmOptions& opts) {
  check_reference(trimmed, reference);
  const int z = trimmed.z();
  const int n = trimmed.n();
  if (z < 3) {
    throw ValidationError("vector matching needs at least 3 arms, got " +
                          std::to_string(z));
  }
  if (gps.logits.rows() != n || gps.logits.cols() != z) {
    throw std::invalid_argument("score matrix does not match the dataset");
  }

  MatchedCohort cohort;
  cohort.design = "vm";
  cohort.reference = reference;
  cohort.arms.push_back(reference);
  const auto comps = comparators_of(z, reference);
  cohort.arms.insert(cohort.arms.end(), comps.begin(), comps.end());

  // ref row -> comparator arm -> matched row
  std::map<int, std::map<int, int>> matched;

  for (int comp : comps) {
    // Caliper from the reference-arm logit pooled over the two arms involved.
    std::vector<double> pooled;
    for (int i = 0; i < n; ++i) {
      if (trimmed.treatment[i] == reference || trimmed.treatment[i] == comp) {
        pooled.push_back(gps.logits(i, reference - 1));
      }
    }
    const double caliper = caliper_from_sd(pooled, opts.epsilon);

    std::vector<int> strata(n, 0);
    int n_strata = 1;
    if (z > 2) {
      Eigen::MatrixXd pts(n, z - 2);
      int col = 0;
      for (int t = 1; t <= z; ++t) {
        if (t == reference || t == comp) continue;
        pts.col(col++) = gps.logits.col(t - 1);
      }
      const Clustering cl = strata_with_all_arms(
          pts, trimmed.treatment, z, opts.k,
          derive_seed(opts.seed, static_cast<std::uint64_t>(comp)),
          opts.restarts, opts.max_reseeds);
      strata = cl.assignment;
      n_strata = static_cast<int>(cl.centroids.rows());
      if (cl.merged_fallback) {
        cohort.notes.push_back("arm " + std::to_string(comp) +
                               ": strata merged down to " +
                               std::to_string(n_strata) +
                               " to keep every arm represented");
      }
    }

    int run_matched = 0;
    for (int s = 0; s < n_strata; ++s) {
      std::vector<int> ref_rows, cand_rows;
      std::vector<double> ref_scores, cand_scores;
      for (int i = 0; i < n; ++i) {
        if (strata[i] != s) continue;
        if (trimmed.treatment[i] == reference) {
          ref_rows.push_back(i);
          ref_scores.push_back(gps.logits(i, reference - 1));
        } else if (trimmed.treatment[i] == comp) {
          cand_rows.push_back(i);
          cand_scores.push_back(gps.logits(i, reference - 1));
        }
      }
      for (const auto& m :
           caliper_nn_with_replacement(ref_scores, cand_scores, caliper)) {
        matched[ref_rows[m.ref]][comp] = cand_rows[m.cand];
        ++run_matched;
      }
    }
    cohort.notes.push_back("arm " + std::to_string(comp) + ": matched " +
                           std::to_string(run_matched) + " reference units");
  }

  for (const auto& [ref_row, per_comp] : matched) {
    if (static_cast<int>(per_comp.size()) != z - 1) continue;
    std::vector<int> tuple;
    tuple.push_back(ref_row);
    for (int comp : comps) tuple.push_back(per_comp.at(comp));
    cohort.tuples.push_back(std::move(tuple));
  }
  if (cohort.tuples.empty()) {
    cohort.notes.push_back("no reference unit was matched in every run");
  }
  recount_psi(cohort, n);
  return cohort;
}

MatchedCohort crm_match(const Dataset& ds, int reference, double epsilon,
                        const FitOptions& fit) {
  check_reference(ds, reference);
  if (ds.z() != 3) {
    throw ValidationError("common-referent matching needs exactly 3 arms, got " +
                          std::to_string(ds.z()));
  }
  const auto comps = comparators_of(3, reference);

  MatchedCohort cohort;
  cohort.design = "crm";
  cohort.reference = reference;
  cohort.arms.push_back(reference);
  cohort.arms.insert(cohort.arms.end(), comps.begin(), comps.end());

  std::map<int, std::map<int, int>> matched;
  std::map<int, int> eligible_in;  // ref row -> number of pair overlaps it is in
  for (int comp : comps) {
    PairRun run = match_pair(ds, reference, comp, epsilon, fit);
    for (const auto& [rr, cr] : run.pairs) matched[rr][comp] = cr;
    for (int rr : run.eligible_ref_rows) ++eligible_in[rr];
    cohort.notes.insert(cohort.notes.end(), run.notes.begin(), run.notes.end());
  }
  cohort.eligible_refs = 0;
  for (const auto& [rr, hits] : eligible_in) {
    if (hits == static_cast<int>(comps.size())) ++cohort.eligible_refs;
  }
  for (const auto& [ref_row, per_comp] : matched) {
    if (per_comp.size() != comps.size()) continue;
    std::vector<int> tuple;
    tuple.push_back(ref_row);
    for (int comp : comps) tuple.push_back(per_comp.at(comp));
    cohort.tuples.push_back(std::move(tuple));
  }
  recount_psi(cohort, ds.n());
  return cohort;
}

MatchedCohort sbc_match(const Dataset& ds, int arm_a, int arm_b,
                        double epsilon, const FitOptions& fit) {
  check_reference(ds, arm_a);
  check_reference(ds, arm_b);
  if (arm_a == arm_b) throw std::invalid_argument("arms must differ");
  MatchedCohort cohort;
  cohort.design = "sbc";
  cohort.reference = arm_a;
  cohort.arms = {arm_a, arm_b};
  PairRun run = match_pair(ds, arm_a, arm_b, epsilon, fit);
  for (const auto& [rr, cr] : run.pairs) cohort.tuples.push_back({rr, cr});
  std::sort(cohort.tuples.begin(), cohort.tuples.end());
  cohort.eligible_refs = static_cast<int>(run.eligible_ref_rows.size());
  cohort.notes = std::move(run.notes);
  recount_psi(cohort, ds.n());
  return cohort;
}

Subclassification kmc_subclassify(const Dataset& ds, const GpsMatrix& gps,
                                  int k, std::uint64_t seed, int restarts) {
  if (gps.logits.rows() != ds.n() || gps.logits.cols() != ds.z()) {
    throw std::invalid_argument("score matrix does not match the dataset");
  }
  Subclassification sc;
  sc.clustering = kmeans(gps.logits, k, seed, restarts);
  sc.sizes.assign(k, 0);
  std::vector<std::set<int>> arms_in(k);
  for (int i = 0; i < ds.n(); ++i) {
    const int s = sc.clustering.assignment[i];
    ++sc.sizes[s];
    arms_in[s].insert(ds.treatment[i]);
  }
  sc.deficient.assign(k, false);
  for (int s = 0; s < k; ++s) {
    if (static_cast<int>(arms_in[s].size()) < ds.z()) {
      sc.deficient[s] = true;
      sc.notes.push_back("subclass " + std::to_string(s) +
                         " is missing at least one arm and will be skipped "
                         "by balance summaries");
    }
  }
  return sc;
}

IpwWeights ipw_weights(const Dataset& ds, const GpsMatrix& gps) {
  if (gps.probs.rows() != ds.n() || gps.probs.cols() != ds.z()) {
    throw std::invalid_argument("score matrix does not match the dataset");
  }
  IpwWeights w;
  w.w.resize(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    w.w(i) = 1.0 / gps.probs(i, ds.treatment[i] - 1);
  }
  const double wmax = w.w.maxCoeff();
  if (wmax > 1e4) {
    w.notes.push_back("largest weight " + std::to_string(wmax) +
                      " exceeds 10000; estimates may be unstable");
  }
  return w;
}

}  // namespace vecmatch
