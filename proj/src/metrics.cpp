#include "refsel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>

#include "refsel/errors.hpp"
#include "refsel/stats.hpp"

namespace refsel {

double rmse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  if (y_true.size() == 0) throw InputError("rmse: empty input");
  if (y_true.size() != y_pred.size()) throw InputError("rmse: length mismatch");
  return std::sqrt((y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size()));
}

namespace {

Index count_relevant(const IndexList& selected, const std::vector<bool>& relevant) {
  Index hits = 0;
  for (Index j : selected) {
    if (j < 0 || static_cast<std::size_t>(j) >= relevant.size())
      throw InputError("selected index outside the relevance mask");
    if (relevant[static_cast<std::size_t>(j)]) ++hits;
  }
  return hits;
}

}  // namespace

double fdr(const IndexList& selected, const std::vector<bool>& relevant) {
  if (selected.empty()) return 0.0;
  const Index hits = count_relevant(selected, relevant);
  return static_cast<double>(static_cast<Index>(selected.size()) - hits) /
         static_cast<double>(selected.size());
}

double precision(const IndexList& selected, const std::vector<bool>& relevant) {
  return 1.0 - fdr(selected, relevant);
}

double sensitivity(const IndexList& selected, const std::vector<bool>& relevant) {
  const auto k = std::count(relevant.begin(), relevant.end(), true);
  if (k == 0) throw InputError("sensitivity is undefined without relevant variables");
  return static_cast<double>(count_relevant(selected, relevant)) / static_cast<double>(k);
}

SelectionMatrix::SelectionMatrix(Index runs, Index p) : Z(runs, p) { Z.setZero(); }

SelectionMatrix SelectionMatrix::from_sets(const std::vector<IndexList>& sets, Index p) {
  SelectionMatrix S(static_cast<Index>(sets.size()), p);
  for (std::size_t i = 0; i < sets.size(); ++i) S.set_run(static_cast<Index>(i), sets[i]);
  return S;
}

void SelectionMatrix::set_run(Index i, const IndexList& selected) {
  Z.row(i).setZero();
  for (Index j : selected) {
    if (j < 0 || j >= p()) throw InputError("selection index outside the variable range");
    Z(i, j) = 1;
  }
}

IndexList SelectionMatrix::run(Index i) const {
  IndexList out;
  for (Index j = 0; j < p(); ++j)
    if (Z(i, j)) out.push_back(j);
  return out;
}

Eigen::VectorXd SelectionMatrix::inclusion_frequency() const {
  if (runs() == 0) throw InputError("selection matrix has no runs");
  return Z.cast<double>().colwise().mean().transpose();
}

double inclusion_entropy(const SelectionMatrix& S, EntropyKind kind) {
  if (S.runs() < 1) throw InputError("inclusion_entropy: no runs");
  double h = 0.0;
  if (kind == EntropyKind::Variables) {
    const Eigen::VectorXd counts = S.Z.cast<double>().colwise().sum().transpose();
    const double total = counts.sum();
    if (total == 0.0) throw InputError("inclusion_entropy: no variable was ever included");
    for (Index j = 0; j < counts.size(); ++j)
      if (counts(j) > 0) {
        const double q = counts(j) / total;
        h -= q * std::log(q);
      }
    return h;
  }
  std::map<IndexList, int> freq;
  for (Index i = 0; i < S.runs(); ++i) ++freq[S.run(i)];
  const double M = static_cast<double>(S.runs());
  for (const auto& [set, c] : freq) {
    const double q = c / M;
    h -= q * std::log(q);
  }
  return h;
}

StabilityEstimate stability(const SelectionMatrix& S, double conf) {
  const Index M = S.runs();
  const Index d = S.p();
  if (M < 2) throw InputError("stability needs at least two runs");
  if (!(conf > 0.0 && conf < 1.0)) throw ConfigError("stability: conf must lie in (0, 1)");
  const Eigen::MatrixXd Z = S.Z.cast<double>();
  const Eigen::VectorXd k = Z.rowwise().sum();
  const double kbar = k.mean();
  const double dd = static_cast<double>(d);
  const double Md = static_cast<double>(M);
  if (kbar == 0.0 || kbar == dd) throw NumericalError("stability is undefined when every run selects nothing or everything");
  const Eigen::VectorXd phat = Z.colwise().mean().transpose();
  const double denom = (kbar / dd) * (1.0 - kbar / dd);
  const double mean_var = (Md / (Md - 1.0)) * (phat.array() * (1.0 - phat.array())).mean();

  StabilityEstimate est;
  est.estimate = 1.0 - mean_var / denom;
  est.clipped = std::clamp(est.estimate, 0.0, 1.0);

  const Eigen::VectorXd zp = Z * phat / dd;
  Eigen::VectorXd phi(M);
  for (Index i = 0; i < M; ++i) {
    phi(i) = (zp(i) - k(i) * kbar / (dd * dd) +
              0.5 * est.estimate * (2.0 * k(i) * kbar / (dd * dd) - k(i) / dd - kbar / dd + 1.0)) /
             denom;
  }
  est.variance = 4.0 / (Md * Md) * (phi.array() - phi.mean()).square().sum();
  const double zq = normal_quantile(0.5 + 0.5 * conf);
  const double half = zq * std::sqrt(est.variance);
  est.lo = est.estimate - half;
  est.hi = est.estimate + half;
  return est;
}

void write_metric_table(const std::vector<MetricRow>& rows, std::ostream& out) {
  out << "scenario,method,filtered,metric,estimate,se_or_ci_lo,ci_hi\n" << std::setprecision(10);
  for (const MetricRow& r : rows)
  {
    out << r.scenario << ',' << r.method << ',' << (r.filtered ? 1 : 0) << ',' << r.metric;
    for (double v : {r.estimate, r.se_or_ci_lo, r.ci_hi}) {
      out << ',';
      if (std::isfinite(v)) out << v;
    }
    out << '\n';
  }
}

}  // namespace refsel
