// Command-line front end: fit generalized propensity scores, trim to common
// support, build matched cohorts, report covariate balance, estimate effects,
// and drive the simulation sweep.
#include <CLI11.hpp>

#include "vecmatch/anova.hpp"
#include "vecmatch/balance.hpp"
#include "vecmatch/cluster.hpp"
#include "vecmatch/dataset.hpp"
#include "vecmatch/designs.hpp"
#include "vecmatch/errors.hpp"
#include "vecmatch/gps.hpp"
#include "vecmatch/inference.hpp"
#include "vecmatch/manifest.hpp"
#include "vecmatch/rng.hpp"
#include "vecmatch/sim.hpp"
#include "vecmatch/support.hpp"
#include "vecmatch/table.hpp"
#include "vecmatch/version.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fs = std::filesystem;
using namespace vecmatch;

namespace {

struct CommonArgs {
    std::string data_path;
    std::string out_dir;
    ColumnSchema schema;
    double ridge = 1e-8;
};

void add_data_flags(CLI::App* cmd, CommonArgs& a, bool need_data = true) {
    auto* d = cmd->add_option("--data", a.data_path, "input CSV file");
    if (need_data) d->required();
    cmd->add_option("--out", a.out_dir, "output directory")->required();
    cmd->add_option("--treatment", a.schema.treatment, "treatment column name");
    cmd->add_option("--outcome", a.schema.outcome, "outcome column name");
    cmd->add_option("--id", a.schema.id, "unit id column name");
    cmd->add_option("--ridge", a.ridge, "ridge penalty for score model slopes");
}

fs::path ensure_out_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw ValidationError("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

int code_of_label(const Dataset& ds, const std::string& label) {
    for (std::size_t i = 0; i < ds.treatment_labels.size(); ++i)
        if (ds.treatment_labels[i] == label) return static_cast<int>(i) + 1;
    throw ValidationError("treatment label '" + label + "' not present in data");
}

// ---- artifact writers -------------------------------------------------------

void write_scores(const fs::path& file, const Dataset& ds, const GpsMatrix& g) {
    Table t;
    t.columns = {"unit_id", "treatment"};
    for (const auto& lab : ds.treatment_labels) t.columns.push_back("prob_" + lab);
    for (const auto& lab : ds.treatment_labels) t.columns.push_back("logit_" + lab);
    for (int i = 0; i < ds.n(); ++i) {
        std::vector<std::string> row{ds.unit_ids[i], ds.treatment_labels[ds.treatment[i] - 1]};
        for (int z = 0; z < g.probs.cols(); ++z) row.push_back(format_double(g.probs(i, z)));
        for (int z = 0; z < g.logits.cols(); ++z) row.push_back(format_double(g.logits(i, z)));
        t.add_row(row);
    }
    write_tsv(t, file.string());
}

void write_model(const fs::path& file, const Dataset& ds, const GpsModel& m) {
    Table t;
    t.columns = {"arm", "term", "estimate"};
    for (int r = 0; r < m.coefficients.rows(); ++r) {
        const std::string arm = ds.treatment_labels[r];
        t.add_row({arm, "intercept", format_double(m.coefficients(r, 0))});
        for (int j = 0; j < ds.p(); ++j)
            t.add_row({arm, ds.covariate_names[j], format_double(m.coefficients(r, j + 1))});
    }
    write_tsv(t, file.string());
}

void write_support(const fs::path& file, const Dataset& ds, const CommonSupport& s) {
    Table t;
    t.columns = {"arm", "low", "high"};
    for (std::size_t z = 0; z < s.low.size(); ++z)
        t.add_row({ds.treatment_labels[z], format_double(s.low[z]), format_double(s.high[z])});
    write_tsv(t, file.string());
}

void write_cohort(const fs::path& file, const Dataset& ds, const MatchedCohort& c) {
    Table t;
    t.columns = {"set", "design", "reference", "eligible_refs"};
    for (int arm : c.arms) t.columns.push_back("arm:" + ds.treatment_labels[arm - 1]);
    const std::string ref_label = ds.treatment_labels[c.reference - 1];
    for (std::size_t s = 0; s < c.tuples.size(); ++s) {
        std::vector<std::string> row{std::to_string(s), c.design, ref_label,
                                     std::to_string(c.eligible_refs)};
        for (int row_idx : c.tuples[s]) row.push_back(ds.unit_ids[row_idx]);
        t.add_row(row);
    }
    if (c.tuples.empty()) {
        // keep metadata readable even when nothing matched
        std::vector<std::string> row{"-", c.design, ref_label, std::to_string(c.eligible_refs)};
        for (std::size_t k = 0; k < c.arms.size(); ++k) row.push_back("-");
        t.add_row(row);
    }
    write_tsv(t, file.string());
}

void write_weights(const fs::path& file, const Dataset& ds, const IpwWeights& w) {
    Table t;
    t.columns = {"unit_id", "treatment", "weight"};
    for (int i = 0; i < ds.n(); ++i)
        t.add_row({ds.unit_ids[i], ds.treatment_labels[ds.treatment[i] - 1],
                   format_double(w.w[i])});
    write_tsv(t, file.string());
}

void write_subclasses(const fs::path& file, const Dataset& ds, const Subclassification& s) {
    Table t;
    t.columns = {"unit_id", "treatment", "subclass"};
    for (int i = 0; i < ds.n(); ++i)
        t.add_row({ds.unit_ids[i], ds.treatment_labels[ds.treatment[i] - 1],
                   std::to_string(s.clustering.assignment[i])});
    write_tsv(t, file.string());
}

void write_balance(const fs::path& file, const Dataset& ds, const BalanceReport& r,
                   double pct_matched) {
    Table t;
    t.columns = {"covariate"};
    for (int arm : r.arms) t.columns.push_back("mean_" + ds.treatment_labels[arm - 1]);
    for (const auto& pr : r.arm_pairs)
        t.columns.push_back("sb_" + ds.treatment_labels[r.arms[pr.first] - 1] + "_" +
                            ds.treatment_labels[r.arms[pr.second] - 1]);
    t.columns.push_back("max2sb");
    for (int j = 0; j < static_cast<int>(r.max2sb.size()); ++j) {
        std::vector<std::string> row{ds.covariate_names[j]};
        for (std::size_t a = 0; a < r.arms.size(); ++a) row.push_back(format_double(r.means(a, j)));
        for (std::size_t p = 0; p < r.arm_pairs.size(); ++p) row.push_back(format_double(r.sb(p, j)));
        row.push_back(format_double(r.max2sb[j]));
        t.add_row(row);
    }
    write_tsv(t, file.string());

    Table s;
    s.columns = {"metric", "value"};
    s.add_row({"max2sb_mean", format_double(r.max2sb_mean)});
    s.add_row({"avg_abs_sb", format_double(r.avg_abs_sb.mean())});
    s.add_row({"pct_matched", format_double(pct_matched)});
    write_tsv(s, (file.parent_path() / "balance_summary.tsv").string());
}

// ---- artifact readers -------------------------------------------------------

std::unordered_map<std::string, int> id_index(const Dataset& ds) {
    std::unordered_map<std::string, int> m;
    for (int i = 0; i < ds.n(); ++i) {
        if (!m.emplace(ds.unit_ids[i], i).second)
            throw ValidationError("duplicate unit id '" + ds.unit_ids[i] + "' in data");
    }
    return m;
}

MatchedCohort read_cohort(const std::string& file, const Dataset& ds) {
    Table t = read_tsv(file);
    MatchedCohort c;
    const int set_col = t.col_index("set");
    const int design_col = t.col_index("design");
    const int ref_col = t.col_index("reference");
    const int elig_col = t.col_index("eligible_refs");
    std::vector<int> arm_cols;
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
        const auto& name = t.columns[j];
        if (name.rfind("arm:", 0) == 0) {
            c.arms.push_back(code_of_label(ds, name.substr(4)));
            arm_cols.push_back(static_cast<int>(j));
        }
    }
    if (c.arms.empty()) throw ValidationError(file + ": no arm columns found");
    auto ids = id_index(ds);
    for (const auto& row : t.rows) {
        if (row[set_col] == "-") continue;  // metadata-only row of an empty cohort
        c.design = row[design_col];
        c.reference = code_of_label(ds, row[ref_col]);
        c.eligible_refs = static_cast<int>(std::llround(parse_double(row[elig_col])));
        std::vector<int> tuple;
        for (int jc : arm_cols) {
            auto it = ids.find(row[jc]);
            if (it == ids.end())
                throw ValidationError(file + ": unit id '" + row[jc] + "' not present in data");
            tuple.push_back(it->second);
        }
        c.tuples.push_back(std::move(tuple));
    }
    if (c.tuples.empty() && !t.rows.empty()) {
        c.design = t.rows[0][design_col];
        c.reference = code_of_label(ds, t.rows[0][ref_col]);
        c.eligible_refs = static_cast<int>(std::llround(parse_double(t.rows[0][elig_col])));
    }
    c.psi.assign(ds.n(), 0);
    for (const auto& tuple : c.tuples)
        for (int r : tuple) ++c.psi[r];
    validate_cohort(c, ds);
    return c;
}

// Rows referenced by an id/value artifact, in file order.
template <typename F>
std::vector<int> rows_of_ids(const Table& t, const Dataset& ds, F per_row) {
    auto ids = id_index(ds);
    const int id_col = t.col_index("unit_id");
    std::vector<int> rows;
    for (const auto& row : t.rows) {
        auto it = ids.find(row[id_col]);
        if (it == ids.end())
            throw ValidationError("unit id '" + row[id_col] + "' not present in data");
        rows.push_back(it->second);
        per_row(row);
    }
    return rows;
}

// ---- simulation output ------------------------------------------------------

const std::vector<std::string> kMetricCols = {
    "config", "z", "n_t1", "gamma", "dist", "B", "tau", "sigma2_sq", "sigma3_sq",
    "P", "design", "reps", "failures", "max2sb", "pct", "dropped"};

std::vector<std::string> config_prefix(const SimConfig& cfg) {
    const bool z3 = cfg.z == 3;
    return {cfg.id(),
            std::to_string(cfg.z),
            std::to_string(cfg.n_t1),
            format_double(cfg.gamma),
            cfg.dist,
            format_double(cfg.B),
            z3 ? format_double(cfg.tau) : "nan",
            z3 ? format_double(cfg.sigma2_sq) : "nan",
            z3 ? format_double(cfg.sigma3_sq) : "nan",
            z3 ? std::to_string(cfg.P) : "nan"};
}

void write_metrics(const fs::path& file, const std::vector<SimResult>& results,
                   const std::vector<std::string>& designs) {
    Table t;
    t.columns = kMetricCols;
    for (const auto& r : results) {
        auto pre = config_prefix(r.config);
        {
            std::vector<std::string> row = pre;
            row.push_back("pre");
            row.push_back(std::to_string(r.reps.size()));
            row.push_back(std::to_string(r.failures));
            row.push_back(format_double(r.mean_pre));
            row.push_back("nan");
            row.push_back(format_double(r.mean_dropped));
            t.add_row(row);
        }
        for (const auto& d : designs) {
            std::vector<std::string> row = pre;
            row.push_back(d);
            row.push_back(std::to_string(r.reps.size()));
            row.push_back(std::to_string(r.failures));
            auto it_m = r.mean_max2sb.find(d);
            auto it_p = r.mean_pct.find(d);
            row.push_back(format_double(it_m == r.mean_max2sb.end() ? std::nan("") : it_m->second));
            row.push_back(format_double(it_p == r.mean_pct.end() ? std::nan("") : it_p->second));
            row.push_back("nan");
            t.add_row(row);
        }
    }
    write_tsv(t, file.string());
}

std::string sanitize_cell(std::string s) {
    for (char& ch : s)
        if (ch == '\t' || ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

void write_raw(const fs::path& dir, const SimResult& r,
               const std::vector<std::string>& designs) {
    Table t;
    t.columns = {"rep", "ok", "error", "dropped", "pre"};
    for (const auto& d : designs) t.columns.push_back("max2sb_" + d);
    for (const auto& d : designs) t.columns.push_back("pct_" + d);
    for (const auto& m : r.reps) {
        std::vector<std::string> row{std::to_string(m.rep), m.ok ? "1" : "0",
                                     m.ok ? "-" : sanitize_cell(m.error),
                                     format_double(m.dropped_fraction),
                                     format_double(m.pre_max2sb)};
        for (const auto& d : designs) {
            auto it = m.max2sb.find(d);
            row.push_back(format_double(it == m.max2sb.end() ? std::nan("") : it->second));
        }
        for (const auto& d : designs) {
            auto it = m.pct.find(d);
            row.push_back(format_double(it == m.pct.end() ? std::nan("") : it->second));
        }
        t.add_row(row);
    }
    write_tsv(t, (dir / ("raw_" + r.config.id() + ".tsv")).string());
}

// ---- subcommand bodies ------------------------------------------------------

int run_gps(const CommonArgs& a) {
    auto wall0 = std::chrono::steady_clock::now();
    Dataset ds = load_dataset(a.data_path, a.schema);
    auto summary = summarize(ds);
    FitOptions opts;
    opts.ridge = a.ridge;
    GpsModel model = fit_multinomial_logit(ds.covariates, ds.treatment, summary.z, opts);
    GpsMatrix g = predict_gps(model, ds.covariates);
    fs::path out = ensure_out_dir(a.out_dir);
    write_scores(out / "gps.tsv", ds, g);
    write_model(out / "model.tsv", ds, model);
    Manifest man;
    man.command = "gps";
    man.config["data"] = a.data_path;
    man.config["ridge"] = format_double(a.ridge);
    man.config["converged"] = model.converged ? "true" : "false";
    man.config["iterations"] = std::to_string(model.iterations);
    man.input_digests[a.data_path] = hex64(digest_file(a.data_path));
    man.timings_sec["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    write_manifest(man, (out / "manifest.json").string());
    return 0;
}

int run_trim(const CommonArgs& a) {
    auto wall0 = std::chrono::steady_clock::now();
    Dataset ds = load_dataset(a.data_path, a.schema);
    FitOptions opts;
    opts.ridge = a.ridge;
    TrimResult tr = trim_to_support(ds, opts);
    fs::path out = ensure_out_dir(a.out_dir);
    save_dataset(tr.trimmed, (out / "trimmed.csv").string());
    write_scores(out / "gps.tsv", tr.trimmed, tr.gps);
    write_model(out / "model.tsv", tr.trimmed, tr.refit);
    write_support(out / "support.tsv", ds, tr.support);
    Manifest man;
    man.command = "trim";
    man.config["data"] = a.data_path;
    man.config["ridge"] = format_double(a.ridge);
    man.config["dropped_fraction"] = format_double(tr.dropped_fraction);
    man.config["n_in"] = std::to_string(ds.n());
    man.config["n_out"] = std::to_string(tr.trimmed.n());
    man.input_digests[a.data_path] = hex64(digest_file(a.data_path));
    man.timings_sec["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    write_manifest(man, (out / "manifest.json").string());
    return 0;
}

struct MatchArgs {
    CommonArgs common;
    std::string design;
    std::string reference;
    std::string arm_b;  // second arm for the single-pair design
    int k = 5;
    double epsilon = 0.25;
    std::uint64_t seed = 0;
};

int run_match(const MatchArgs& m) {
    auto wall0 = std::chrono::steady_clock::now();
    Dataset ds = load_dataset(m.common.data_path, m.common.schema);
    FitOptions fit;
    fit.ridge = m.common.ridge;
    fs::path out = ensure_out_dir(m.common.out_dir);
    Manifest man;
    man.command = "match";
    man.config["data"] = m.common.data_path;
    man.config["design"] = m.design;
    man.config["epsilon"] = format_double(m.epsilon);
    man.config["ridge"] = format_double(m.common.ridge);
    man.input_digests[m.common.data_path] = hex64(digest_file(m.common.data_path));
    std::vector<std::string> notes;

    if (m.design == "vm") {
        const int ref = code_of_label(ds, m.reference);
        TrimResult tr = trim_to_support(ds, fit);
        VmOptions vo;
        vo.k = m.k;
        vo.epsilon = m.epsilon;
        vo.seed = m.seed;
        MatchedCohort c = vector_match(tr.trimmed, tr.gps, ref, vo);
        c.eligible_refs = 0;
        for (int i = 0; i < tr.trimmed.n(); ++i)
            if (tr.trimmed.treatment[i] == ref) ++c.eligible_refs;
        write_cohort(out / "cohort.tsv", tr.trimmed, c);
        notes = c.notes;
        man.config["k"] = std::to_string(m.k);
        man.config["reference"] = m.reference;
        man.config["dropped_fraction"] = format_double(tr.dropped_fraction);
        man.config["n_matched_sets"] = std::to_string(c.n_trip());
        man.seeds["match"] = m.seed;
    } else if (m.design == "crm") {
        const int ref = code_of_label(ds, m.reference);
        MatchedCohort c = crm_match(ds, ref, m.epsilon, fit);
        write_cohort(out / "cohort.tsv", ds, c);
        notes = c.notes;
        man.config["reference"] = m.reference;
        man.config["n_matched_sets"] = std::to_string(c.n_trip());
    } else if (m.design == "sbc") {
        const int ref = code_of_label(ds, m.reference);
        if (m.arm_b.empty())
            throw ValidationError("--arm-b is required for the single-pair design");
        const int b = code_of_label(ds, m.arm_b);
        MatchedCohort c = sbc_match(ds, ref, b, m.epsilon, fit);
        write_cohort(out / "cohort.tsv", ds, c);
        notes = c.notes;
        man.config["reference"] = m.reference;
        man.config["arm_b"] = m.arm_b;
        man.config["n_matched_sets"] = std::to_string(c.n_trip());
    } else if (m.design == "kmc") {
        TrimResult tr = trim_to_support(ds, fit);
        Subclassification s = kmc_subclassify(tr.trimmed, tr.gps, m.k, m.seed);
        write_subclasses(out / "subclasses.tsv", tr.trimmed, s);
        notes = s.notes;
        man.config["k"] = std::to_string(m.k);
        man.config["dropped_fraction"] = format_double(tr.dropped_fraction);
        man.seeds["subclassify"] = m.seed;
    } else if (m.design == "ipw") {
        TrimResult tr = trim_to_support(ds, fit);
        IpwWeights w = ipw_weights(tr.trimmed, tr.gps);
        write_weights(out / "weights.tsv", tr.trimmed, w);
        notes = w.notes;
        man.config["dropped_fraction"] = format_double(tr.dropped_fraction);
    } else {
        throw ValidationError("unknown design '" + m.design +
                              "' (expected vm, crm, sbc, kmc, or ipw)");
    }
    for (std::size_t i = 0; i < notes.size(); ++i) man.config["note_" + std::to_string(i)] = notes[i];
    man.timings_sec["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    write_manifest(man, (out / "manifest.json").string());
    for (const auto& n : notes) std::cerr << "note: " << n << "\n";
    return 0;
}

struct BalanceArgs {
    CommonArgs common;
    std::string cohort_file;
    std::string weights_file;
    std::string subclass_file;
    std::string reference;
};

int run_balance(const BalanceArgs& b) {
    auto wall0 = std::chrono::steady_clock::now();
    Dataset ds = load_dataset(b.common.data_path, b.common.schema);
    const int given = (!b.cohort_file.empty()) + (!b.weights_file.empty()) +
                      (!b.subclass_file.empty());
    if (given != 1)
        throw ValidationError("exactly one of --cohort, --weights, --subclasses is required");
    fs::path out = ensure_out_dir(b.common.out_dir);
    Manifest man;
    man.command = "balance";
    man.config["data"] = b.common.data_path;
    man.input_digests[b.common.data_path] = hex64(digest_file(b.common.data_path));

    BalanceReport rep;
    double pct = std::nan("");
    if (!b.cohort_file.empty()) {
        MatchedCohort c = read_cohort(b.cohort_file, ds);
        Eigen::VectorXd scale = reference_sd(ds, c.reference);
        rep = cohort_balance(ds, c, scale);
        if (c.eligible_refs > 0) pct = pct_matched(c, c.eligible_refs);
        man.config["cohort"] = b.cohort_file;
        man.input_digests[b.cohort_file] = hex64(digest_file(b.cohort_file));
    } else if (!b.weights_file.empty()) {
        if (b.reference.empty())
            throw ValidationError("--reference is required with --weights");
        const int ref = code_of_label(ds, b.reference);
        Table t = read_tsv(b.weights_file);
        const int w_col = t.col_index("weight");
        std::vector<double> w;
        auto rows = rows_of_ids(t, ds, [&](const std::vector<std::string>& row) {
            w.push_back(parse_double(row[w_col]));
        });
        Dataset sub = ds.subset(rows);
        IpwWeights iw;
        iw.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        Eigen::VectorXd scale = reference_sd(ds, ref);
        rep = ipw_balance(sub, iw, scale);
        man.config["weights"] = b.weights_file;
        man.input_digests[b.weights_file] = hex64(digest_file(b.weights_file));
    } else {
        if (b.reference.empty())
            throw ValidationError("--reference is required with --subclasses");
        const int ref = code_of_label(ds, b.reference);
        Table t = read_tsv(b.subclass_file);
        const int s_col = t.col_index("subclass");
        std::vector<int> assign;
        auto rows = rows_of_ids(t, ds, [&](const std::vector<std::string>& row) {
            assign.push_back(static_cast<int>(std::llround(parse_double(row[s_col]))));
        });
        Dataset sub = ds.subset(rows);
        int k = 0;
        for (int s : assign) k = std::max(k, s + 1);
        Subclassification sc;
        sc.clustering.assignment = assign;
        sc.sizes.assign(k, 0);
        for (int s : assign) ++sc.sizes[s];
        auto sum = summarize(sub);
        sc.deficient.assign(k, false);
        std::vector<std::vector<int>> arm_counts(k, std::vector<int>(sum.z, 0));
        for (int i = 0; i < sub.n(); ++i) ++arm_counts[assign[i]][sub.treatment[i] - 1];
        for (int s = 0; s < k; ++s)
            for (int z = 0; z < sum.z; ++z)
                if (arm_counts[s][z] == 0) sc.deficient[s] = true;
        Eigen::VectorXd scale = reference_sd(ds, ref);
        rep = kmc_balance(sub, sc, scale);
        man.config["subclasses"] = b.subclass_file;
        man.input_digests[b.subclass_file] = hex64(digest_file(b.subclass_file));
    }
    write_balance(out / "balance.tsv", ds, rep, pct);
    std::cout << "max2sb_mean\t" << format_double(rep.max2sb_mean) << "\n";
    if (!std::isnan(pct)) std::cout << "pct_matched\t" << format_double(pct) << "\n";
    man.timings_sec["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    write_manifest(man, (out / "manifest.json").string());
    return 0;
}

struct EstimateArgs {
    CommonArgs common;
    std::string cohort_file;
    std::string weights_file;
    int exact_threshold = 8;
};

void write_effects(const fs::path& file, const Dataset& ds, const EffectEstimates& e,
                   const std::string& kind) {
    Table t;
    t.columns = {"arm_a", "arm_b", "estimate", "kind"};
    for (std::size_t a = 0; a < e.arms.size(); ++a)
        for (std::size_t b = 0; b < e.arms.size(); ++b) {
            if (a == b) continue;
            t.add_row({ds.treatment_labels[e.arms[a] - 1], ds.treatment_labels[e.arms[b] - 1],
                       format_double(e.effects(a, b)), kind});
        }
    write_tsv(t, file.string());
}

int run_estimate(const EstimateArgs& e) {
    auto wall0 = std::chrono::steady_clock::now();
    if (e.common.schema.outcome.empty())
        throw ValidationError("estimate requires --outcome naming the outcome column");
    Dataset ds = load_dataset(e.common.data_path, e.common.schema);
    if (!ds.outcome.has_value())
        throw ValidationError("outcome column '" + e.common.schema.outcome + "' not found in data");
    const int given = (!e.cohort_file.empty()) + (!e.weights_file.empty());
    if (given != 1)
        throw ValidationError("exactly one of --cohort, --weights is required");
    fs::path out = ensure_out_dir(e.common.out_dir);
    Manifest man;
    man.command = "estimate";
    man.config["data"] = e.common.data_path;
    man.input_digests[e.common.data_path] = hex64(digest_file(e.common.data_path));

    if (!e.cohort_file.empty()) {
        MatchedCohort c = read_cohort(e.cohort_file, ds);
        EffectEstimates eff = satt(ds, c);
        write_effects(out / "effects.tsv", ds, eff, "satt");
        Table t;
        t.columns = {"test", "statistic", "dof1", "dof2", "p_asymptotic", "p_exact"};
        if (c.n_trip() >= 2) {
            Eigen::MatrixXd y = outcome_matrix(ds, c);
            TestResult fr = friedman_test(y, e.exact_threshold);
            TestResult qu = quade_test(y, e.exact_threshold);
            t.add_row({"friedman", format_double(fr.statistic), format_double(fr.dof1), "nan",
                       format_double(fr.p_asymptotic),
                       fr.p_exact ? format_double(*fr.p_exact) : "nan"});
            t.add_row({"quade", format_double(qu.statistic), format_double(qu.dof1),
                       format_double(qu.dof2), format_double(qu.p_asymptotic),
                       qu.p_exact ? format_double(*qu.p_exact) : "nan"});
        }
        write_tsv(t, (out / "tests.tsv").string());
        man.config["cohort"] = e.cohort_file;
        man.config["n_matched_sets"] = std::to_string(c.n_trip());
        man.input_digests[e.cohort_file] = hex64(digest_file(e.cohort_file));
    } else {
        Table t = read_tsv(e.weights_file);
        const int w_col = t.col_index("weight");
        std::vector<double> w;
        auto rows = rows_of_ids(t, ds, [&](const std::vector<std::string>& row) {
            w.push_back(parse_double(row[w_col]));
        });
        Dataset sub = ds.subset(rows);
        IpwWeights iw;
        iw.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        EffectEstimates eff = ipw_effects(sub, iw);
        write_effects(out / "effects.tsv", ds, eff, "pate");
        man.config["weights"] = e.weights_file;
        man.input_digests[e.weights_file] = hex64(digest_file(e.weights_file));
    }
    man.timings_sec["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    write_manifest(man, (out / "manifest.json").string());
    return 0;
}

struct SimulateArgs {
    std::string config_file;
    std::string out_dir;
    std::uint64_t seed = 0;
    int jobs = 1;
    int reps = -1;  // -1 keeps the config/default value
};

int run_simulate(const SimulateArgs& s) {
    auto wall0 = std::chrono::steady_clock::now();
    SweepSpec spec = parse_sweep_config(s.config_file);
    spec.options.seed = s.seed;
    spec.options.jobs = s.jobs;
    if (s.reps > 0) spec.options.reps = s.reps;
    std::vector<SimResult> results = run_sweep(spec.configs, spec.options);
    fs::path out = ensure_out_dir(s.out_dir);
    write_metrics(out / "metrics.tsv", results, spec.options.designs);
    fs::path raw_dir = out / "raw";
    std::error_code ec;
    fs::create_directories(raw_dir, ec);
    for (const auto& r : results) write_raw(raw_dir, r, spec.options.designs);
    Manifest man;
    man.command = "simulate";
    man.config["config"] = s.config_file;
    man.config["jobs"] = std::to_string(s.jobs);
    man.config["reps"] = std::to_string(spec.options.reps);
    man.config["n_configs"] = std::to_string(spec.configs.size());
    {
        std::string joined;
        for (const auto& d : spec.options.designs) {
            if (!joined.empty()) joined += ",";
            joined += d;
        }
        man.config["designs"] = joined;
    }
    man.seeds["sweep"] = s.seed;
    man.input_digests[s.config_file] = hex64(digest_file(s.config_file));
    man.timings_sec["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    write_manifest(man, (out / "manifest.json").string());
    int failures = 0;
    for (const auto& r : results) failures += r.failures;
    std::cout << "configs\t" << results.size() << "\nfailures\t" << failures << "\n";
    return 0;
}

struct AnovaArgs {
    std::string metrics_file;
    std::string out_dir;
    std::string design = "vm";
    std::string metric = "max2sb";
};

int run_anova(const AnovaArgs& a) {
    auto wall0 = std::chrono::steady_clock::now();
    Table t = read_tsv(a.metrics_file);
    const int design_col = t.col_index("design");
    const int metric_col = t.col_index(a.metric);  // "max2sb" or "pct"
    const std::vector<std::string> factor_names = {"n_t1", "gamma", "dist", "B",
                                                   "tau", "sigma2_sq", "sigma3_sq", "P"};
    std::vector<int> factor_cols;
    for (const auto& f : factor_names) factor_cols.push_back(t.col_index(f));

    std::vector<std::vector<std::string>> raw_levels(factor_names.size());
    std::vector<double> metric_vals;
    for (const auto& row : t.rows) {
        if (row[design_col] != a.design) continue;
        double v = parse_double(row[metric_col]);
        if (std::isnan(v)) continue;
        metric_vals.push_back(v);
        for (std::size_t f = 0; f < factor_names.size(); ++f)
            raw_levels[f].push_back(row[factor_cols[f]]);
    }
    if (metric_vals.empty())
        throw ValidationError("no usable rows for design '" + a.design + "' and metric '" +
                              a.metric + "'");

    FactorTable ft;
    ft.metric = metric_vals;
    std::vector<std::vector<int>> per_factor;  // level index per row, kept factors
    for (std::size_t f = 0; f < factor_names.size(); ++f) {
        std::vector<std::string> levels;
        for (const auto& v : raw_levels[f])
            if (std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
        if (levels.size() < 2) continue;  // constant factors carry no information
        std::sort(levels.begin(), levels.end());
        ft.factors.push_back(factor_names[f]);
        ft.levels.push_back(levels);
        std::vector<int> idx;
        for (const auto& v : raw_levels[f])
            idx.push_back(static_cast<int>(
                std::find(levels.begin(), levels.end(), v) - levels.begin()));
        per_factor.push_back(std::move(idx));
    }
    if (ft.factors.empty())
        throw ValidationError("all candidate factors are constant in the metrics file");
    ft.rows.assign(metric_vals.size(), std::vector<int>(ft.factors.size()));
    for (std::size_t i = 0; i < metric_vals.size(); ++i)
        for (std::size_t a = 0; a < per_factor.size(); ++a) ft.rows[i][a] = per_factor[a][i];

    std::vector<AnovaRow> rows = anova_rank(ft);
    fs::path out = ensure_out_dir(a.out_dir);
    Table res;
    res.columns = {"term", "df", "ss", "ms"};
    for (const auto& r : rows)
        res.add_row({r.term, std::to_string(r.df), format_double(r.ss), format_double(r.ms)});
    write_tsv(res, (out / "anova.tsv").string());
    Manifest man;
    man.command = "anova";
    man.config["metrics"] = a.metrics_file;
    man.config["design"] = a.design;
    man.config["metric"] = a.metric;
    man.input_digests[a.metrics_file] = hex64(digest_file(a.metrics_file));
    man.timings_sec["total"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    write_manifest(man, (out / "manifest.json").string());
    std::cout << "top_term\t" << rows.front().term << "\t" << format_double(rows.front().ms)
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vecmatch: matched designs and balance diagnostics for multi-arm studies"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    CommonArgs gps_args;
    auto* gps_cmd = app.add_subcommand("gps", "fit the treatment-score model and emit scores");
    add_data_flags(gps_cmd, gps_args);

    CommonArgs trim_args;
    auto* trim_cmd = app.add_subcommand("trim", "drop units outside the common-support region");
    add_data_flags(trim_cmd, trim_args);

    MatchArgs match_args;
    auto* match_cmd = app.add_subcommand("match", "build a matched cohort or weighting artifact");
    add_data_flags(match_cmd, match_args.common);
    match_cmd->add_option("--design", match_args.design, "vm, crm, sbc, kmc, or ipw")->required();
    match_cmd->add_option("--reference", match_args.reference, "reference arm label");
    match_cmd->add_option("--arm-b", match_args.arm_b, "second arm label (sbc only)");
    match_cmd->add_option("--k", match_args.k, "number of strata / subclasses");
    match_cmd->add_option("--epsilon", match_args.epsilon, "caliper width in SD units");
    match_cmd->add_option("--seed", match_args.seed, "random seed")->required();

    BalanceArgs bal_args;
    auto* bal_cmd = app.add_subcommand("balance", "covariate balance for a matched artifact");
    add_data_flags(bal_cmd, bal_args.common);
    bal_cmd->add_option("--cohort", bal_args.cohort_file, "cohort.tsv from match");
    bal_cmd->add_option("--weights", bal_args.weights_file, "weights.tsv from match");
    bal_cmd->add_option("--subclasses", bal_args.subclass_file, "subclasses.tsv from match");
    bal_cmd->add_option("--reference", bal_args.reference,
                        "reference arm label (weights/subclasses)");

    EstimateArgs est_args;
    auto* est_cmd = app.add_subcommand("estimate", "effect estimates and rank tests");
    add_data_flags(est_cmd, est_args.common);
    est_cmd->add_option("--cohort", est_args.cohort_file, "cohort.tsv from match");
    est_cmd->add_option("--weights", est_args.weights_file, "weights.tsv from match");
    est_cmd->add_option("--exact-threshold", est_args.exact_threshold,
                        "max matched sets for exact permutation p-values");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "run the factorial simulation sweep");
    sim_cmd->add_option("--config", sim_args.config_file, "sweep configuration file")->required();
    sim_cmd->add_option("--out", sim_args.out_dir, "output directory")->required();
    sim_cmd->add_option("--seed", sim_args.seed, "master seed")->required();
    sim_cmd->add_option("--jobs", sim_args.jobs, "worker threads")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--reps", sim_args.reps, "replications per configuration");

    AnovaArgs an_args;
    auto* an_cmd = app.add_subcommand("anova", "factor attribution for sweep metrics");
    an_cmd->add_option("--metrics", an_args.metrics_file, "metrics.tsv from simulate")->required();
    an_cmd->add_option("--out", an_args.out_dir, "output directory")->required();
    an_cmd->add_option("--design", an_args.design, "design whose metric to analyse");
    an_cmd->add_option("--metric", an_args.metric, "max2sb or pct");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gps_cmd->parsed()) return run_gps(gps_args);
        if (trim_cmd->parsed()) return run_trim(trim_args);
        if (match_cmd->parsed()) return run_match(match_args);
        if (bal_cmd->parsed()) return run_balance(bal_args);
        if (est_cmd->parsed()) return run_estimate(est_args);
        if (sim_cmd->parsed()) return run_simulate(sim_args);
        if (an_cmd->parsed()) return run_anova(an_args);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
