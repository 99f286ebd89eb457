#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "refsel/dataset.hpp"
#include "refsel/refmodel.hpp"

namespace refsel {

struct OlsFit {
  Eigen::VectorXd beta;  ///< one entry per column; dropped columns are 0
  double rss = 0.0;
  Index df = 0;          ///< rank of the design
  IndexList dropped;
};

/// Least squares via column-pivoted QR. No intercept is added.
OlsFit ols_fit(const Eigen::MatrixXd& X_sub, const Eigen::VectorXd& y);

/// Gaussian AIC up to constants: n log(RSS / n) + 2 k. An exact fit (RSS = 0)
/// scores -infinity and is flagged; among exact fits fewer parameters win.
struct AicScore {
  double value = 0.0;
  bool perfect_fit = false;
  Index n_params = 0;

  bool operator<(const AicScore& o) const;
};

AicScore aic(double rss, Index n, Index n_params);

enum class StepDirection { Forward, Backward };

struct StepConfig {
  StepDirection direction = StepDirection::Backward;
  bool use_reference = false;
  int max_steps = 10000;

  void validate() const;
};

struct StepResult {
  IndexList selected;              ///< sorted
  std::vector<AicScore> aic_trace; ///< score after each accepted move, starting point first
  Eigen::VectorXd coef;            ///< intercept then one entry per selected variable

  Eigen::VectorXd predict(const Eigen::MatrixXd& X_full) const;
};

/// Stepwise OLS driven by AIC. With `use_reference` the target is replaced by
/// the reference model's predictive means before any fitting.
StepResult steplm(const Dataset& d, const StepConfig& cfg, const ReferenceFit* ref = nullptr);

struct BayesPValue {
  double value = 0.5;
  bool below_resolution = false;  ///< every draw on one side; true value < 1/S
};

/// min{P(theta <= 0), P(theta > 0)} from posterior draws.
BayesPValue bayes_pvalue(const Eigen::Ref<const Eigen::VectorXd>& draws);

struct BayesStepConfig {
  PriorConfig prior;
  McmcConfig mcmc{200, 200, 200, 1};
  int folds = 5;
  int max_steps = 10000;
  std::uint64_t seed = 1;
};

struct BayesStepResult {
  IndexList selected;
  std::vector<double> elpd_trace;
  ReferenceFit final_fit;  ///< regularised-horseshoe fit on the selected columns

  Eigen::VectorXd predict(const Eigen::MatrixXd& X_full) const;
};

/// Backward elimination by Bayesian p-value under a regularised-horseshoe
/// regression; a drop is kept only while the K-fold elpd does not decrease.
BayesStepResult bayes_stepwise(const Dataset& d, const BayesStepConfig& cfg,
                               const ReferenceFit* ref = nullptr);

/// K-fold elpd of a regularised-horseshoe regression of y on the given columns.
double rhs_kfold_elpd(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const IndexList& cols,
                      const std::vector<int>& fold_of, int K, const PriorConfig& prior,
                      const McmcConfig& mcmc);

}  // namespace refsel
