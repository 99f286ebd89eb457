#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace refsel {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// Observation matrix with its target and, for simulated data, the truth.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXd> latent_f;
  std::optional<std::vector<bool>> relevant;
  std::vector<std::string> column_names;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }

  /// Throws InputError on inconsistent dimensions or non-finite entries.
  void validate() const;

  /// Row subset in the given order; duplicates allowed.
  Dataset rows(std::span<const Index> idx) const;
  Dataset with_target(Eigen::VectorXd target) const;
  /// Index of the named column, or -1.
  Index column_index(const std::string& name) const;
};

/// Sorted, unique index set helpers.
IndexList sorted_unique(IndexList v);
IndexList set_difference(const IndexList& a, const IndexList& b);
IndexList iota_indices(Index count);

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, std::span<const Index> cols);
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& X, std::span<const Index> rows);
Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const Index> rows);

}  // namespace refsel
