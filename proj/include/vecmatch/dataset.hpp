#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace vecmatch {

/// Observational data for one study: an n x P covariate matrix, a nominal
/// treatment label per unit (coded 1..Z in first-appearance order of the
/// original labels), and optionally an outcome column.
struct Dataset {
  Eigen::MatrixXd covariates;            // n x P
  std::vector<int> treatment;            // n, values in 1..Z
  std::optional<Eigen::VectorXd> outcome;
  std::vector<std::string> unit_ids;     // n, synthesized "u<row>" when absent
  std::vector<std::string> covariate_names;
  std::vector<std::string> treatment_labels;  // index t-1 -> original label

  int n() const { return static_cast<int>(covariates.rows()); }
  int p() const { return static_cast<int>(covariates.cols()); }
  int z() const { return static_cast<int>(treatment_labels.size()); }

  /// Copy the given rows (0-based, in the given order) into a new dataset.
  /// Treatment coding and labels are preserved, including arms that end up
  /// empty in the subset.
  Dataset subset(const std::vector<int>& rows) const;
};

struct ColumnSchema {
  std::string treatment = "treatment";
  std::string outcome;  // empty = no outcome column
  std::string id;       // empty = synthesize ids
};

struct TreatmentSummary {
  std::vector<int> counts;  // index t-1
  int z = 0;
  int reference = 0;  // smallest arm; ties break to the smaller index
};

TreatmentSummary summarize(const Dataset& ds);

/// Read a CSV with a header row. Columns named by the schema are treated
/// specially; every remaining column is a numeric covariate. Parse errors
/// report file, line and column.
Dataset load_dataset(const std::string& path, const ColumnSchema& schema);

/// Write a CSV that load_dataset reads back to an identical dataset.
void save_dataset(const Dataset& ds, const std::string& path);

}  // namespace vecmatch
