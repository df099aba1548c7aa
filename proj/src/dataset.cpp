#include "vecmatch/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "vecmatch/errors.hpp"
#include "vecmatch/table.hpp"

namespace vecmatch {

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  const int m = static_cast<int>(rows.size());
  out.covariates.resize(m, covariates.cols());
  out.treatment.resize(m);
  out.unit_ids.resize(m);
  if (outcome) out.outcome = Eigen::VectorXd(m);
  for (int i = 0; i < m; ++i) {
    const int r = rows[i];
    if (r < 0 || r >= n()) {
      throw std::out_of_range("subset row " + std::to_string(r) +
                              " out of range [0, " + std::to_string(n()) + ")");
    }
    out.covariates.row(i) = covariates.row(r);
    out.treatment[i] = treatment[r];
    out.unit_ids[i] = unit_ids[r];
    if (outcome) (*out.outcome)(i) = (*outcome)(r);
  }
  out.covariate_names = covariate_names;
  out.treatment_labels = treatment_labels;
  return out;
}

TreatmentSummary summarize(const Dataset& ds) {
  TreatmentSummary s;
  s.z = ds.z();
  s.counts.assign(s.z, 0);
  for (int t : ds.treatment) ++s.counts[t - 1];
  int best = 0;
  for (int t = 1; t < s.z; ++t) {
    if (s.counts[t] < s.counts[best]) best = t;
  }
  s.reference = best + 1;
  return s;
}

Dataset load_dataset(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');

  int treat_col = -1, outcome_col = -1, id_col = -1;
  std::vector<int> cov_cols;
  Dataset ds;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    const std::string& name = header[j];
    if (name == schema.treatment) {
      treat_col = j;
    } else if (!schema.outcome.empty() && name == schema.outcome) {
      outcome_col = j;
    } else if (!schema.id.empty() && name == schema.id) {
      id_col = j;
    } else {
      cov_cols.push_back(j);
      ds.covariate_names.push_back(name);
    }
  }
  if (treat_col < 0) {
    throw ValidationError(path + ": no column named '" + schema.treatment + "'");
  }
  if (!schema.outcome.empty() && outcome_col < 0) {
    throw ValidationError(path + ": no column named '" + schema.outcome + "'");
  }
  if (!schema.id.empty() && id_col < 0) {
    throw ValidationError(path + ": no column named '" + schema.id + "'");
  }
  if (cov_cols.empty()) throw ValidationError(path + ": no covariate columns");

  std::unordered_map<std::string, int> label_to_code;
  std::vector<std::vector<double>> cov_rows;
  std::vector<double> outcomes;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cov_cols.size());
    for (int j : cov_cols) {
      try {
        row.push_back(parse_double(cells[j]));
      } catch (const ValidationError&) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": column '" +
                              header[j] + "': cannot parse number: '" + cells[j] + "'");
      }
    }
    cov_rows.push_back(std::move(row));

    const std::string& label = cells[treat_col];
    if (label.empty()) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": empty treatment label");
    }
    auto [it, inserted] =
        label_to_code.emplace(label, static_cast<int>(ds.treatment_labels.size()) + 1);
    if (inserted) ds.treatment_labels.push_back(label);
    ds.treatment.push_back(it->second);

    if (outcome_col >= 0) {
      try {
        outcomes.push_back(parse_double(cells[outcome_col]));
      } catch (const ValidationError&) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": column '" +
                              header[outcome_col] + "': cannot parse number: '" +
                              cells[outcome_col] + "'");
      }
    }
    ds.unit_ids.push_back(id_col >= 0 ? cells[id_col]
                                      : "u" + std::to_string(lineno - 1));
  }
  if (cov_rows.empty()) throw ValidationError(path + ": no data rows");

  const int n = static_cast<int>(cov_rows.size());
  const int p = static_cast<int>(cov_cols.size());
  ds.covariates.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) ds.covariates(i, j) = cov_rows[i][j];
  }
  if (outcome_col >= 0) {
    ds.outcome = Eigen::Map<Eigen::VectorXd>(outcomes.data(), n);
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "id,treatment";
  for (const auto& name : ds.covariate_names) out << ',' << name;
  if (ds.outcome) out << ",outcome";
  out << '\n';
  for (int i = 0; i < ds.n(); ++i) {
    out << ds.unit_ids[i] << ',' << ds.treatment_labels[ds.treatment[i] - 1];
    for (int j = 0; j < ds.p(); ++j) out << ',' << format_double(ds.covariates(i, j));
    if (ds.outcome) out << ',' << format_double((*ds.outcome)(i));
    out << '\n';
  }
  if (!out) throw ValidationError("write failed: " + path);
}

}  // namespace vecmatch
