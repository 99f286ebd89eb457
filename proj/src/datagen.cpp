#include "refsel/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "refsel/errors.hpp"
#include "refsel/rng.hpp"

namespace refsel {

void Dataset::validate() const {
  if (y.size() != X.rows())
    throw InputError("target length " + std::to_string(y.size()) +
                     " does not match row count " + std::to_string(X.rows()));
  if (!column_names.empty() && static_cast<Index>(column_names.size()) != X.cols())
    throw InputError("column_names has " + std::to_string(column_names.size()) +
                     " labels for " + std::to_string(X.cols()) + " columns");
  if (relevant && static_cast<Index>(relevant->size()) != X.cols())
    throw InputError("relevance mask length does not match column count");
  if (latent_f && latent_f->size() != X.rows())
    throw InputError("latent_f length does not match row count");
  if (!X.allFinite()) throw InputError("design matrix contains non-finite values");
  if (!y.allFinite()) throw InputError("target contains non-finite values");
}

Dataset Dataset::rows(std::span<const Index> idx) const {
  Dataset out;
  out.X = select_rows(X, idx);
  out.y = select_rows(y, idx);
  if (latent_f) out.latent_f = select_rows(*latent_f, idx);
  out.relevant = relevant;
  out.column_names = column_names;
  return out;
}

Dataset Dataset::with_target(Eigen::VectorXd target) const {
  if (target.size() != X.rows()) throw InputError("replacement target has wrong length");
  Dataset out = *this;
  out.y = std::move(target);
  return out;
}

Index Dataset::column_index(const std::string& name) const {
  auto it = std::find(column_names.begin(), column_names.end(), name);
  return it == column_names.end() ? -1 : static_cast<Index>(it - column_names.begin());
}

IndexList sorted_unique(IndexList v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

IndexList set_difference(const IndexList& a, const IndexList& b) {
  std::unordered_set<Index> drop(b.begin(), b.end());
  IndexList out;
  for (Index i : a)
    if (!drop.count(i)) out.push_back(i);
  return out;
}

IndexList iota_indices(Index count) {
  IndexList v(static_cast<std::size_t>(std::max<Index>(count, 0)));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, std::span<const Index> cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = X.col(cols[j]);
  return out;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& X, std::span<const Index> rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = X.row(rows[i]);
  return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const Index> rows) {
  Eigen::VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

void GenConfig::validate() const {
  if (n < 1) throw ConfigError("n must be >= 1 (got " + std::to_string(n) + ")");
  if (p < 0) throw ConfigError("p must be >= 0 (got " + std::to_string(p) + ")");
  if (k < 0 || k > p)
    throw ConfigError("k must satisfy 0 <= k <= p (got k=" + std::to_string(k) +
                      ", p=" + std::to_string(p) + ")");
  if (!(rho >= 0.0 && rho < 1.0))
    throw ConfigError("rho must satisfy 0 <= rho < 1 (got " + std::to_string(rho) + ")");
}

Dataset gen_latent_regression(const GenConfig& cfg) {
  cfg.validate();
  Engine eng = make_stream(cfg.seed);
  const double a = std::sqrt(cfg.rho);
  const double b = std::sqrt(1.0 - cfg.rho);

  Dataset d;
  d.latent_f = Eigen::VectorXd(cfg.n);
  d.y.resize(cfg.n);
  d.X.resize(cfg.n, cfg.p);
  for (Index i = 0; i < cfg.n; ++i) {
    const double f = sample_normal(eng);
    (*d.latent_f)(i) = f;
    d.y(i) = f + sample_normal(eng);
    for (Index j = 0; j < cfg.k; ++j) d.X(i, j) = a * f + b * sample_normal(eng);
    for (Index j = cfg.k; j < cfg.p; ++j) d.X(i, j) = sample_normal(eng);
  }
  d.relevant = std::vector<bool>(static_cast<std::size_t>(cfg.p), false);
  for (Index j = 0; j < cfg.k; ++j) (*d.relevant)[static_cast<std::size_t>(j)] = true;
  d.column_names.reserve(static_cast<std::size_t>(cfg.p));
  for (Index j = 0; j < cfg.p; ++j) d.column_names.push_back("x" + std::to_string(j + 1));
  return d;
}

Dataset augment_with_noise(const Dataset& d, Index total_p, std::uint64_t seed) {
  if (total_p <= d.p())
    throw ConfigError("total_p (" + std::to_string(total_p) +
                      ") must exceed the current column count (" + std::to_string(d.p()) + ")");
  Engine eng = make_stream(seed);
  const Index extra = total_p - d.p();
  Dataset out = d;
  out.X.conservativeResize(d.n(), total_p);
  for (Index j = d.p(); j < total_p; ++j)
    for (Index i = 0; i < d.n(); ++i) out.X(i, j) = sample_normal(eng);

  std::vector<bool> mask = d.relevant ? *d.relevant : std::vector<bool>(d.p(), true);
  mask.resize(static_cast<std::size_t>(total_p), false);
  out.relevant = std::move(mask);

  if (out.column_names.empty())
    for (Index j = 0; j < d.p(); ++j) out.column_names.push_back("x" + std::to_string(j + 1));
  for (Index j = 0; j < extra; ++j) out.column_names.push_back("noise" + std::to_string(j + 1));
  return out;
}

BootstrapSplit bootstrap_sample(const Dataset& d, std::uint64_t seed) {
  if (d.n() < 1) throw ConfigError("bootstrap requires at least one row");
  Engine eng = make_stream(seed);
  std::uniform_int_distribution<Index> pick(0, d.n() - 1);
  BootstrapSplit s;
  std::vector<bool> drawn(static_cast<std::size_t>(d.n()), false);
  s.train_rows.resize(static_cast<std::size_t>(d.n()));
  for (auto& r : s.train_rows) {
    r = pick(eng);
    drawn[static_cast<std::size_t>(r)] = true;
  }
  for (Index i = 0; i < d.n(); ++i)
    if (!drawn[static_cast<std::size_t>(i)]) s.oob_rows.push_back(i);
  s.train = d.rows(s.train_rows);
  s.oob = d.rows(s.oob_rows);
  return s;
}

Dataset subsample(const Dataset& d, Index m, std::uint64_t seed) {
  if (m < 1) throw ConfigError("subsample size must be >= 1");
  if (d.n() < 1) throw ConfigError("cannot subsample an empty dataset");
  Engine eng = make_stream(seed);
  std::uniform_int_distribution<Index> pick(0, d.n() - 1);
  IndexList rows(static_cast<std::size_t>(m));
  for (auto& r : rows) r = pick(eng);
  return d.rows(rows);
}

std::vector<int> make_folds(Index n, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("number of folds must be >= 2");
  if (static_cast<Index>(k) > n)
    throw ConfigError(std::to_string(k) + " folds leave some fold empty with n=" +
                      std::to_string(n));
  const Index largest = (n + k - 1) / k;
  if (n - largest < 2)
    throw ConfigError("folds leave fewer than 2 training rows (n=" + std::to_string(n) +
                      ", K=" + std::to_string(k) + ")");
  IndexList perm = iota_indices(n);
  Engine eng = make_stream(seed);
  std::shuffle(perm.begin(), perm.end(), eng);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) fold[static_cast<std::size_t>(perm[i])] = static_cast<int>(i % k);
  return fold;
}

}  // namespace refsel
