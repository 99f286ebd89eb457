#include "refsel/linalg.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>

#include "refsel/errors.hpp"
#include "refsel/stats.hpp"

namespace refsel {

ColumnScaling ColumnScaling::fit(const Eigen::MatrixXd& X) {
  ColumnScaling s;
  const double n = static_cast<double>(X.rows());
  s.center = X.colwise().mean().transpose();
  s.scale.resize(X.cols());
  s.constant.assign(static_cast<std::size_t>(X.cols()), false);
  for (Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt((X.col(j).array() - s.center(j)).square().sum() / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(s.center(j))))) {
      s.scale(j) = 1.0;
      s.constant[static_cast<std::size_t>(j)] = true;
    } else {
      s.scale(j) = sd;
    }
  }
  return s;
}

Eigen::MatrixXd ColumnScaling::apply(const Eigen::MatrixXd& X) const {
  if (X.cols() != center.size()) throw InputError("column count differs from fitted scaling");
  return (X.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
}

Eigen::VectorXd column_correlations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw InputError("correlation: row count mismatch");
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double ynorm = yc.norm();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(X.cols());
  if (!(ynorm > 0)) return r;
  for (Index j = 0; j < X.cols(); ++j) {
    const Eigen::VectorXd xc = X.col(j).array() - X.col(j).mean();
    const double xn = xc.norm();
    if (xn > 1e-12 * std::max(1.0, X.col(j).cwiseAbs().maxCoeff()))
      r(j) = std::clamp(xc.dot(yc) / (xn * ynorm), -1.0, 1.0);
  }
  return r;
}

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
}

NestedBasis::NestedBasis(Index n, bool intercept, Index capacity) : n_(n) {
  reserve(std::max<Index>(capacity, 4));
  if (intercept) add(Eigen::VectorXd::Ones(n));
}

void NestedBasis::reserve(Index cols) {
  if (cols <= Q_.cols()) return;
  Q_.conservativeResize(n_, cols);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(cols, cols);
  R.topLeftCorner(m_, m_) = R_.topLeftCorner(m_, m_);
  R_ = std::move(R);
}

bool NestedBasis::add(const Eigen::VectorXd& x, double tol) {
  if (x.size() != n_) throw InputError("NestedBasis: column length mismatch");
  const double xnorm = x.norm();
  if (!(xnorm > 0) || m_ >= n_) return false;
  Eigen::VectorXd v = x;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(m_);
  for (int pass = 0; pass < 2; ++pass) {
    for (Index k = 0; k < m_; ++k) {
      const double c = Q_.col(k).dot(v);
      v.noalias() -= c * Q_.col(k);
      coef(k) += c;
    }
  }
  const double vnorm = v.norm();
  if (!(vnorm > tol * xnorm)) return false;
  if (m_ + 1 > Q_.cols()) reserve(2 * Q_.cols());
  Q_.col(m_) = v / vnorm;
  R_.col(m_).head(m_) = coef;
  R_(m_, m_) = vnorm;
  ++m_;
  return true;
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Asymptotic expansion of the Mills ratio in the far lower tail.
  const double t = -x;
  const double t2 = t * t;
  const double series = 1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2);
  return log_normal_pdf(t) - std::log(t) + std::log(series);
}

double mills_ratio(double x) {
  if (x < 25.0) return normal_sf(x) / normal_pdf(x);
  const double x2 = x * x;
  return (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)) / x;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw NumericalError("normal_quantile: probability outside [0,1]");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

}  // namespace refsel
