#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "refsel/dataset.hpp"
#include "refsel/refmodel.hpp"

namespace refsel {

/// Projection of one reference draw onto a Gaussian linear submodel.
struct DrawProjection {
  Eigen::VectorXd beta;  ///< intercept first, then one entry per column of X_sub
  double sigma = 0.0;
  double kl = 0.0;       ///< summed over the n observations
  IndexList dropped;     ///< columns of X_sub removed as linearly dependent
};

/// Least-squares fit of the draw's predictive means on [1, X_sub]; the
/// projected scale is sigma_s^2 + RSS / n and kl = n log(sigma_perp / sigma_s).
DrawProjection project_draw(const Eigen::VectorXd& f_s, double sigma_s,
                            const Eigen::MatrixXd& X_sub);

struct SubmodelProjection {
  IndexList idx;
  Eigen::MatrixXd beta_draws;  ///< S x (|idx| + 1), intercept first
  Eigen::VectorXd sigma_draws;
  Eigen::VectorXd kl_draws;
  IndexList dropped;           ///< entries of idx that were linearly dependent

  /// Mean over draws of the submodel's linear predictor at the rows of X_full.
  Eigen::VectorXd predict_mean(const Eigen::MatrixXd& X_full) const;
  double mean_kl() const { return kl_draws.mean(); }
};

SubmodelProjection project_submodel(const ReferenceFit& ref, const Eigen::MatrixXd& X,
                                    std::span<const Index> idx);

/// min(p, n - 2, 30), floored at 0.
Index default_max_size(Index n, Index p);

struct SearchOptions {
  std::optional<Index> max_size;
  Index draws = 20;      ///< reference draws used during the search
  IndexList candidates;  ///< empty means every column
};

struct SearchPath {
  IndexList ranking;
  std::vector<double> mean_kl;  ///< size ranking.size() + 1, starting with the empty model
  IndexList dependent;          ///< ranked variables that added nothing to the span
};

/// Greedy forward selection minimising the mean per-draw projection KL.
/// Ties go to the lowest column index.
SearchPath forward_search(const ReferenceFit& ref, const Eigen::MatrixXd& X,
                          const SearchOptions& opts = {});
IndexList forward_search(const ReferenceFit& ref, const Eigen::MatrixXd& X, Index max_size);

enum class Baseline { Reference, BestSubmodel };

/// Held-out log predictive densities along a ranking. Column i of `pointwise`
/// belongs to the submodel with the first i ranked variables.
struct UtilityPath {
  IndexList ranking;
  Eigen::MatrixXd pointwise;
  Eigen::VectorXd reference_pointwise;
  Eigen::VectorXd elpd;
  double reference_elpd = 0.0;
  Baseline baseline = Baseline::Reference;
  Index best_size = 0;
  Eigen::VectorXd diff;     ///< elpd_i - elpd_baseline
  Eigen::VectorXd se_diff;  ///< sd of pointwise differences times sqrt(n)

  Index max_size() const { return elpd.size() - 1; }
  double baseline_elpd() const;
  Eigen::VectorXd baseline_pointwise() const;
  void set_baseline(Baseline b);
};

/// Reference refits for K-fold cross-validation; shared between calls that
/// only change the ranking.
struct FoldReferences {
  std::vector<int> fold_of;
  std::vector<IndexList> train_rows;
  std::vector<IndexList> test_rows;
  std::vector<ReferenceFit> refs;
  int k() const { return static_cast<int>(refs.size()); }
};

FoldReferences fit_fold_references(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int K,
                                   const ReferenceBuilder& builder, std::uint64_t seed);

UtilityPath estimate_utility(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const FoldReferences& folds, std::span<const Index> ranking);

/// Same, but every fold reruns the forward search on its own reference and
/// training rows, so held-out rows never influence the ranking they score.
/// `ranking` is the full-data ranking reported in the path; the path is cut
/// to the shortest fold ranking.
UtilityPath estimate_utility_searched(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      const FoldReferences& folds, std::span<const Index> ranking,
                                      const SearchOptions& opts);

UtilityPath estimate_utility_kfold(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   std::span<const Index> ranking, int K,
                                   const ReferenceBuilder& builder, std::uint64_t seed);

/// P(elpd_i - elpd_baseline > 0) under the normal approximation.
double prob_not_worse(double diff, double se);

struct SizeDecision {
  Index size = 0;
  bool qualified = true;  ///< false when no size met the rule and the largest was returned
};

/// Smallest size i with P(elpd_i - elpd_baseline > 0) >= alpha.
SizeDecision select_size(const UtilityPath& path, double alpha);

struct ProjpredConfig {
  ReferenceSpec reference;
  int folds = 10;
  double alpha = 0.16;
  std::optional<Index> max_size;
  Index search_draws = 20;
  bool validate_search = true;  ///< repeat the search inside each fold
  std::uint64_t seed = 1;

  void validate() const;
};

struct SelectionResult {
  IndexList ranking;
  Index chosen_size = 0;
  IndexList chosen_idx;
  UtilityPath utility;
  double alpha = 0.16;
  bool qualified = true;
  ReferenceFit reference;
};

SelectionResult projpred_select(const Dataset& d, const ProjpredConfig& cfg);
/// Same, reusing a reference already fitted to d.
SelectionResult projpred_select(const Dataset& d, const ProjpredConfig& cfg,
                                const ReferenceFit& reference);

/// CSV with columns size,elpd,se_diff_to_baseline,added_variable.
void write_selection_csv(const SelectionResult& result, const std::vector<std::string>& names,
                         std::ostream& out);

}  // namespace refsel
