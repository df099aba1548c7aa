// Reference implementations used to cross-check the library. Everything here
// is deliberately naive: derivative-free optimization, exhaustive enumeration
// and linear scans. Nothing below shares code with the library beyond basic
// containers, so agreement is meaningful evidence.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

// ---- Nelder-Mead ------------------------------------------------------------

// Minimizes f over R^d. Restarted downhill simplex; good enough to resolve
// smooth strictly convex objectives to ~1e-10 in function value for small d.
inline std::vector<double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, double initial_step = 0.5, int restarts = 6,
    int max_iter_per_restart = 40000) {
    const std::size_t d = x0.size();
    double step = initial_step;
    for (int restart = 0; restart < restarts; ++restart) {
        std::vector<std::vector<double>> simplex(d + 1, x0);
        for (std::size_t i = 0; i < d; ++i) simplex[i + 1][i] += step;
        std::vector<double> fv(d + 1);
        for (std::size_t i = 0; i <= d; ++i) fv[i] = f(simplex[i]);

        for (int iter = 0; iter < max_iter_per_restart; ++iter) {
            std::vector<std::size_t> order(d + 1);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
            const std::size_t best = order[0], worst = order[d], second = order[d - 1];
            if (fv[worst] - fv[best] < 1e-13) break;

            std::vector<double> centroid(d, 0.0);
            for (std::size_t i = 0; i <= d; ++i) {
                if (i == worst) continue;
                for (std::size_t j = 0; j < d; ++j) centroid[j] += simplex[i][j];
            }
            for (double& c : centroid) c /= static_cast<double>(d);

            auto blend = [&](double t) {
                std::vector<double> p(d);
                for (std::size_t j = 0; j < d; ++j)
                    p[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
                return p;
            };
            std::vector<double> refl = blend(-1.0);
            double f_refl = f(refl);
            if (f_refl < fv[order[second]] && f_refl >= fv[best]) {
                simplex[worst] = std::move(refl);
                fv[worst] = f_refl;
            } else if (f_refl < fv[best]) {
                std::vector<double> exp_p = blend(-2.0);
                double f_exp = f(exp_p);
                if (f_exp < f_refl) {
                    simplex[worst] = std::move(exp_p);
                    fv[worst] = f_exp;
                } else {
                    simplex[worst] = std::move(refl);
                    fv[worst] = f_refl;
                }
            } else {
                std::vector<double> con =
                    blend(f_refl < fv[worst] ? -0.5 : 0.5);
                double f_con = f(con);
                if (f_con < std::min(f_refl, fv[worst])) {
                    simplex[worst] = std::move(con);
                    fv[worst] = f_con;
                } else {
                    for (std::size_t i = 0; i <= d; ++i) {
                        if (i == best) continue;
                        for (std::size_t j = 0; j < d; ++j)
                            simplex[i][j] = simplex[best][j] +
                                            0.5 * (simplex[i][j] - simplex[best][j]);
                        fv[i] = f(simplex[i]);
                    }
                }
            }
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i <= d; ++i)
            if (fv[i] < fv[best]) best = i;
        x0 = simplex[best];
        step *= 0.2;  // re-seed a tighter simplex around the current best
    }
    return x0;
}

// ---- exhaustive k-means -----------------------------------------------------

// Global optimum of the k-means objective by enumerating every partition of
// n points into exactly k non-empty clusters. Points are row-major n x p.
// Returns {assignment, objective}.
inline std::pair<std::vector<int>, double> best_partition(
    const std::vector<std::vector<double>>& pts, int k) {
    const int n = static_cast<int>(pts.size());
    std::vector<int> assign(n, 0), best_assign;
    double best_obj = std::numeric_limits<double>::infinity();
    const std::size_t p = pts.empty() ? 0 : pts[0].size();

    std::function<void(int, int)> rec = [&](int i, int used) {
        if (n - i < k - used) return;  // cannot fill remaining clusters
        if (i == n) {
            if (used != k) return;
            std::vector<std::vector<double>> centroid(k, std::vector<double>(p, 0.0));
            std::vector<int> count(k, 0);
            for (int r = 0; r < n; ++r) {
                ++count[assign[r]];
                for (std::size_t j = 0; j < p; ++j) centroid[assign[r]][j] += pts[r][j];
            }
            for (int c = 0; c < k; ++c)
                for (std::size_t j = 0; j < p; ++j) centroid[c][j] /= count[c];
            double obj = 0.0;
            for (int r = 0; r < n; ++r)
                for (std::size_t j = 0; j < p; ++j) {
                    const double dlt = pts[r][j] - centroid[assign[r]][j];
                    obj += dlt * dlt;
                }
            if (obj < best_obj) {
                best_obj = obj;
                best_assign = assign;
            }
            return;
        }
        // canonical labelling: a point may start cluster `used` but not skip one
        for (int c = 0; c <= std::min(used, k - 1); ++c) {
            assign[i] = c;
            rec(i + 1, std::max(used, c + 1));
        }
    };
    rec(0, 0);
    return {best_assign, best_obj};
}

// ---- matching ---------------------------------------------------------------

struct Pair {
    int ref;
    int cand;
    double distance;
};

// With replacement: independent linear scan per reference unit; ties go to the
// smallest candidate index; matches farther than the caliper are discarded.
inline std::vector<Pair> nn_with_replacement(const std::vector<double>& ref_scores,
                                             const std::vector<double>& cand_scores,
                                             double caliper) {
    std::vector<Pair> out;
    for (int r = 0; r < static_cast<int>(ref_scores.size()); ++r) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < static_cast<int>(cand_scores.size()); ++c) {
            const double d = std::abs(ref_scores[r] - cand_scores[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best >= 0 && best_d <= caliper) out.push_back({r, best, best_d});
    }
    return out;
}

// Without replacement: greedy over references in descending score order
// (ties: ascending index); each candidate is used at most once.
inline std::vector<Pair> nn_without_replacement(const std::vector<double>& ref_scores,
                                                const std::vector<double>& cand_scores,
                                                double caliper) {
    std::vector<int> order(ref_scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (ref_scores[a] != ref_scores[b]) return ref_scores[a] > ref_scores[b];
        return a < b;
    });
    std::vector<bool> used(cand_scores.size(), false);
    std::vector<Pair> out;
    for (int r : order) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < static_cast<int>(cand_scores.size()); ++c) {
            if (used[c]) continue;
            const double d = std::abs(ref_scores[r] - cand_scores[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best >= 0 && best_d <= caliper) {
            used[best] = true;
            out.push_back({r, best, best_d});
        }
    }
    std::sort(out.begin(), out.end(), [](const Pair& a, const Pair& b) { return a.ref < b.ref; });
    return out;
}

// ---- rank tests by brute force ----------------------------------------------

// Ranks within one row, ties averaged, 1-based.
inline std::vector<double> row_ranks(const std::vector<double>& v) {
    const int k = static_cast<int>(v.size());
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> ranks(k, 0.0);
    int i = 0;
    while (i < k) {
        int j = i;
        while (j + 1 < k && v[order[j + 1]] == v[order[i]]) ++j;
        const double shared = 0.5 * (i + j) + 1.0;
        for (int t = i; t <= j; ++t) ranks[order[t]] = shared;
        i = j + 1;
    }
    return ranks;
}

inline double friedman_stat(const std::vector<std::vector<double>>& y) {
    const int n = static_cast<int>(y.size());
    const int k = static_cast<int>(y[0].size());
    std::vector<double> col_rank_sum(k, 0.0);
    double a = 0.0;
    for (int i = 0; i < n; ++i) {
        auto r = row_ranks(y[i]);
        for (int j = 0; j < k; ++j) {
            col_rank_sum[j] += r[j];
            a += r[j] * r[j];
        }
    }
    const double c = n * k * (k + 1.0) * (k + 1.0) / 4.0;
    if (a == c) return 0.0;
    double num = 0.0;
    for (int j = 0; j < k; ++j) {
        const double d = col_rank_sum[j] - n * (k + 1.0) / 2.0;
        num += d * d;
    }
    return (k - 1.0) * num / (a - c);
}

inline double quade_stat(const std::vector<std::vector<double>>& y) {
    const int n = static_cast<int>(y.size());
    const int k = static_cast<int>(y[0].size());
    std::vector<double> range(n);
    for (int i = 0; i < n; ++i) {
        auto [mn, mx] = std::minmax_element(y[i].begin(), y[i].end());
        range[i] = *mx - *mn;
    }
    std::vector<double> q = row_ranks(range);
    std::vector<double> col_sum(k, 0.0);
    double a2 = 0.0;
    for (int i = 0; i < n; ++i) {
        auto r = row_ranks(y[i]);
        for (int j = 0; j < k; ++j) {
            const double s = q[i] * (r[j] - (k + 1.0) / 2.0);
            a2 += s * s;
            col_sum[j] += s;
        }
    }
    double b = 0.0;
    for (int j = 0; j < k; ++j) b += col_sum[j] * col_sum[j];
    b /= n;
    if (a2 == b) return std::numeric_limits<double>::infinity();
    return (n - 1.0) * b / (a2 - b);
}

// Exact permutation p-value: apply every combination of within-row
// permutations and count statistics at least as large as the observed one.
// `stat` maps the permuted matrix to a scalar; infinities compare as equal.
inline double exact_p(const std::vector<std::vector<double>>& y,
                      const std::function<double(const std::vector<std::vector<double>>&)>& stat) {
    const int n = static_cast<int>(y.size());
    const int k = static_cast<int>(y[0].size());
    std::vector<std::vector<int>> perms;
    std::vector<int> p(k);
    std::iota(p.begin(), p.end(), 0);
    do {
        perms.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));

    const double obs = stat(y);
    std::vector<int> idx(n, 0);
    long long total = 0, hits = 0;
    std::vector<std::vector<double>> perm_y(n, std::vector<double>(k));
    while (true) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) perm_y[i][j] = y[i][perms[idx[i]][j]];
        const double s = stat(perm_y);
        const bool ge = std::isinf(obs) ? std::isinf(s) && s > 0 : s >= obs - 1e-12;
        if (ge) ++hits;
        ++total;
        int pos = n - 1;
        while (pos >= 0 && ++idx[pos] == static_cast<int>(perms.size())) {
            idx[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

// ---- misc -------------------------------------------------------------------

inline double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sd(const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
}

}  // namespace oracle
