#pragma once

#include <Eigen/Dense>

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "refsel/dataset.hpp"
#include "refsel/refmodel.hpp"

namespace refsel {

struct NormalMeansProblem {
  enum class Source { Raw, ReferenceFiltered };

  Eigen::VectorXd r;  ///< sample correlations behind z
  Eigen::VectorXd z;
  double sigma = 1.0;
  std::optional<Eigen::VectorXd> theta_truth;
  Source source = Source::Raw;
  Index n_obs = 0;

  Index p() const { return z.size(); }
  Eigen::VectorXd standardized() const { return z / sigma; }
  void validate() const;
};

/// sqrt(n - 3) atanh(r).
double fisher_z(double r, Index n);

struct FisherOptions {
  /// Replace sigma = 1 by the SD of the z-values whose |z| lies below the
  /// 90th percentile of |z|.
  bool estimate_sigma = false;
};

NormalMeansProblem fisher_problem(const Eigen::MatrixXd& X, const Eigen::VectorXd& target,
                                  const FisherOptions& opts = {});

/// The same transform applied to correlations with the reference model's
/// predictive means.
NormalMeansProblem filter_problem(const NormalMeansProblem& raw, const ReferenceFit& ref,
                                  const Eigen::MatrixXd& X, const FisherOptions& opts = {});

/// Natural cubic spline basis (intercept included) with the given knots; the
/// first and last knots are the boundary.
class NaturalSplineBasis {
 public:
  explicit NaturalSplineBasis(std::vector<double> knots);
  Index size() const { return static_cast<Index>(knots_.size()); }
  Eigen::RowVectorXd eval(double x) const;
  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;

 private:
  double d(Index k, double x) const;
  std::vector<double> knots_;
  double center_ = 0.0;
  double scale_ = 1.0;
};

struct LocfdrConfig {
  int df = 7;
  int bins = 120;
  double threshold = 0.2;
  std::optional<double> pi0;  ///< overrides the central-matching estimate

  void validate() const;
};

struct LocfdrModel {
  Eigen::VectorXd centers;
  Eigen::VectorXd counts;
  double bin_width = 0.0;
  Eigen::VectorXd density;  ///< fitted marginal density at the bin centres
  Eigen::VectorXd coef;
  double pi0 = 1.0;
  bool pi0_clipped = false;
  int irls_iterations = 0;
  Eigen::VectorXd fdr;  ///< per coordinate, in [0, 1]
  std::optional<NaturalSplineBasis> basis;

  double marginal_density(double z) const;
};

LocfdrModel locfdr_fit(const NormalMeansProblem& problem, const LocfdrConfig& cfg = {});
IndexList locfdr_select(const NormalMeansProblem& problem, const LocfdrConfig& cfg = {});

/// Spike-and-Laplace prior (1 - w) delta_0 + w Laplace(a) for x ~ N(theta, 1).
struct EbLaplaceFit {
  double w = 0.5;
  double a = 0.5;
  double loglik = 0.0;
  bool boundary = false;  ///< w ended at an edge of its search interval
  double threshold = 0.0;
};

/// log of g(x) / phi(x) where g is the Laplace(a) convolved with N(0, 1).
double eb_log_marginal_ratio(double x, double a);
double eb_loglik(const Eigen::VectorXd& x, double w, double a);
double eb_posterior_median(double x, double w, double a);
/// Largest |x| whose posterior median is 0.
double eb_threshold(double w, double a);
EbLaplaceFit eb_laplace_mml(const Eigen::VectorXd& x);

struct EbSelection {
  EbLaplaceFit fit;
  Eigen::VectorXd medians;  ///< on the z scale
  IndexList selected;
};

EbSelection ebayes_median(const NormalMeansProblem& problem);
IndexList ebayes_median_select(const NormalMeansProblem& problem);

struct Ci90Config {
  McmcConfig mcmc{1000, 2000, 2000, 1};
  double slab_scale = 10.0;
  double p0_fraction = 0.1;  ///< prior guess of the non-null share, sets the global scale
  double lower = 0.05;
  double upper = 0.95;

  void validate() const;
};

struct Ci90Fit {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd mean;
  IndexList selected;
};

/// Horseshoe normal-means model z_j ~ N(theta_j, sigma^2) fitted by Gibbs sampling.
Ci90Fit ci90_fit(const NormalMeansProblem& problem, const Ci90Config& cfg = {});
IndexList ci90_select(const NormalMeansProblem& problem, const Ci90Config& cfg = {});

/// CSV with columns variable,r,z and one selected_by_<method> column per entry.
void write_problem_csv(const NormalMeansProblem& problem, const std::vector<std::string>& names,
                       const std::vector<std::pair<std::string, IndexList>>& selections,
                       std::ostream& out);

}  // namespace refsel
