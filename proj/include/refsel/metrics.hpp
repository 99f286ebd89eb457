#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <string>
#include <vector>

#include "refsel/dataset.hpp"

namespace refsel {

double rmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

/// Share of selected variables that are not relevant; 0 for an empty selection.
double fdr(const IndexList& selected, const std::vector<bool>& relevant);
/// Share of selected variables that are relevant; 1 for an empty selection.
double precision(const IndexList& selected, const std::vector<bool>& relevant);
double sensitivity(const IndexList& selected, const std::vector<bool>& relevant);

/// Runs x variables inclusion indicators.
struct SelectionMatrix {
  Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> Z;
  std::vector<std::string> run_labels;
  std::vector<bool> relevant;

  SelectionMatrix() = default;
  SelectionMatrix(Index runs, Index p);
  static SelectionMatrix from_sets(const std::vector<IndexList>& sets, Index p);

  Index runs() const { return Z.rows(); }
  Index p() const { return Z.cols(); }
  void set_run(Index i, const IndexList& selected);
  IndexList run(Index i) const;
  Eigen::VectorXd inclusion_frequency() const;  ///< per variable, in [0, 1]
};

enum class EntropyKind {
  Variables,  ///< inclusion counts normalised over variables
  Sets,       ///< frequencies of distinct selected sets
};

double inclusion_entropy(const SelectionMatrix& S, EntropyKind kind = EntropyKind::Variables);

struct StabilityEstimate {
  double estimate = 0.0;  ///< raw, may be negative
  double clipped = 0.0;   ///< estimate clamped to [0, 1]
  double variance = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Nogueira-Sechidis-Brown stability with its asymptotic normal interval.
StabilityEstimate stability(const SelectionMatrix& S, double conf = 0.95);

struct MetricRow {
  std::string scenario;
  std::string method;
  bool filtered = false;
  std::string metric;
  double estimate = 0.0;
  double se_or_ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// CSV with columns scenario,method,filtered,metric,estimate,se_or_ci_lo,ci_hi.
void write_metric_table(const std::vector<MetricRow>& rows, std::ostream& out);

}  // namespace refsel
