#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "refsel/dataset.hpp"

namespace refsel {

/// Maps a raw design onto the features a reference model regresses on:
/// selected columns, standardised, optionally rotated by `loadings`.
struct FeatureMap {
  Index n_inputs = 0;
  IndexList columns;
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  /// columns.size() x c; absent means the standardised columns are the features.
  std::optional<Eigen::MatrixXd> loadings;

  Index n_features() const;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

/// Supervised principal components: PCA on the standardised columns whose
/// absolute correlation with the target passes the screening threshold.
struct SPCBasis {
  FeatureMap map;
  Eigen::MatrixXd scores;  ///< n x c, columns mutually orthogonal
  double s_max = 0.0;      ///< sample SD of the leading component
  IndexList constant_columns;

  const IndexList& screened_idx() const { return map.columns; }
  const Eigen::MatrixXd& loadings() const { return *map.loadings; }
  Index n_components() const { return scores.cols(); }
};

SPCBasis screen_and_spc(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Index n_components,
                        double threshold_ratio);

enum class TauScaleRule { InvSmaxSquared, InvSmax };

struct PriorConfig {
  // Hierarchical SPC regression: beta_j ~ N(0, tau^2), tau ~ t+_{tau_df}(0, s).
  double tau_df = 4.0;
  TauScaleRule tau_scale_rule = TauScaleRule::InvSmaxSquared;
  std::optional<double> tau_scale;  ///< overrides the s_max rule
  // sigma ~ t+_{sigma_df}(0, sigma_scale)
  double sigma_df = 3.0;
  double sigma_scale = 10.0;
  // Regularised horseshoe (standardised scale).
  double slab_scale = 2.0;
  std::optional<double> expected_nonzero;  ///< p0; default min(p/10, n/5)
  // Degenerate priors, for conjugate checks.
  std::optional<double> fixed_tau;
  std::optional<double> fixed_sigma;

  void validate() const;
};

struct McmcConfig {
  int warmup = 1000;
  int draws = 1000;
  int keep = 400;  ///< retained draws after even thinning
  std::uint64_t seed = 1;

  void validate(int min_draws) const;
};

/// Posterior draws of a Gaussian linear reference model, y ~ N(a + F b, sigma^2)
/// with F = basis.apply(X).
struct ReferenceFit {
  Eigen::VectorXd intercept_draws;  ///< S
  Eigen::MatrixXd beta_draws;       ///< S x c
  Eigen::VectorXd sigma_draws;      ///< S
  Eigen::MatrixXd mean_draws;       ///< S x n, per-draw predictive means on the training rows
  Eigen::VectorXd yhat;             ///< column means of mean_draws
  FeatureMap basis;
  std::string kind;

  Index n_draws() const { return sigma_draws.size(); }
  /// Reference fit restricted to the given draws (used for thinned searches).
  ReferenceFit thinned(Index count) const;
};

ReferenceFit fit_spc_reference(const SPCBasis& basis, const Eigen::VectorXd& y,
                               const PriorConfig& prior, const McmcConfig& mcmc);

/// Regularised-horseshoe regression on all columns of X (standardised
/// internally, draws reported on the original scale).
ReferenceFit fit_rhs_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const PriorConfig& prior, const McmcConfig& mcmc);

/// Mean over draws of the linear predictor at the rows of X_new.
Eigen::VectorXd predictive_means(const ReferenceFit& fit, const Eigen::MatrixXd& X_new);
/// S x m matrix of per-draw linear predictors at the rows of X_new.
Eigen::MatrixXd predictive_mean_draws(const ReferenceFit& fit, const Eigen::MatrixXd& X_new);

/// Long-format CSV: draw,parameter,value.
void write_draws_csv(const ReferenceFit& fit, std::ostream& out);

/// How to build a reference model from (X, y).
struct ReferenceSpec {
  enum class Kind { Spc, Rhs } kind = Kind::Spc;
  Index n_components = 5;
  double threshold_ratio = 0.6;
  PriorConfig prior;
  McmcConfig mcmc;
};

using ReferenceBuilder = std::function<ReferenceFit(const Eigen::MatrixXd& X,
                                                    const Eigen::VectorXd& y,
                                                    std::uint64_t seed)>;

ReferenceBuilder make_reference_builder(const ReferenceSpec& spec);

}  // namespace refsel
