#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "refsel/datagen.hpp"
#include "refsel/errors.hpp"
#include "refsel/refmodel.hpp"
#include "refsel/rng.hpp"
#include "test_util.hpp"

using namespace refsel;
using testutil::corr;

namespace {

Eigen::MatrixXd standardize(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd Z = X;
  for (Index j = 0; j < X.cols(); ++j) {
    const double m = X.col(j).mean();
    const double s = std::sqrt((X.col(j).array() - m).square().mean());
    Z.col(j) = (X.col(j).array() - m) / s;
  }
  return Z;
}

McmcConfig mcmc(int warmup, int draws, int keep, std::uint64_t seed) {
  McmcConfig m;
  m.warmup = warmup;
  m.draws = draws;
  m.keep = keep;
  m.seed = seed;
  return m;
}

}  // namespace

TEST(Spc, ThresholdZeroIsPlainPca) {
  const Dataset d = gen_latent_regression({60, 12, 4, 0.5, 1});
  const SPCBasis b = screen_and_spc(d.X, d.y, 3, 0.0);
  EXPECT_EQ(b.screened_idx().size(), 12u);
  EXPECT_EQ(b.n_components(), 3);
}

TEST(Spc, ThresholdOneKeepsTheMaximiser) {
  const Dataset d = gen_latent_regression({60, 12, 4, 0.5, 2});
  const SPCBasis b = screen_and_spc(d.X, d.y, 3, 1.0);
  ASSERT_EQ(b.screened_idx().size(), 1u);
  Index best = 0;
  double best_r = -1;
  for (Index j = 0; j < d.p(); ++j) {
    const double r = std::abs(corr(d.X.col(j), d.y));
    if (r > best_r) {
      best_r = r;
      best = j;
    }
  }
  EXPECT_EQ(b.screened_idx()[0], best);
  EXPECT_EQ(b.n_components(), 1);
}

TEST(Spc, LeadingDirectionMatchesPowerIteration) {
  const Dataset d = gen_latent_regression({80, 30, 10, 0.4, 3});
  const SPCBasis b = screen_and_spc(d.X, d.y, 5, 0.3);
  const Eigen::MatrixXd Z = standardize(select_columns(d.X, b.screened_idx()));
  const Eigen::MatrixXd C = Z.transpose() * Z;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(C.rows()).normalized();
  for (int it = 0; it < 5000; ++it) v = (C * v).normalized();
  EXPECT_GT(std::abs(v.dot(b.loadings().col(0))), 1.0 - 1e-8);
}

TEST(Spc, OrthogonalScoresReproducibleFromLoadings) {
  const Dataset d = gen_latent_regression({70, 200, 20, 0.3, 4});
  const SPCBasis b = screen_and_spc(d.X, d.y, 5, 0.6);
  EXPECT_LE(b.n_components(), std::min<Index>(70, static_cast<Index>(b.screened_idx().size())));
  const Eigen::MatrixXd G = b.scores.transpose() * b.scores;
  for (Index i = 0; i < G.rows(); ++i)
    for (Index j = 0; j < G.cols(); ++j)
      if (i != j) {
        EXPECT_LT(std::abs(G(i, j)) / std::sqrt(G(i, i) * G(j, j)), 1e-8);
      }
  EXPECT_LT((b.map.apply(d.X) - b.scores).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(b.s_max, testutil::sd(std::vector<double>(b.scores.col(0).data(),
                                                        b.scores.col(0).data() + 70)), 1e-12);
}

TEST(Spc, Errors) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Constant(10, 3, 2.0);
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(10, 0, 1);
  EXPECT_THROW(screen_and_spc(X, y, 2, 0.5), InputError);
  EXPECT_THROW(screen_and_spc(Eigen::MatrixXd::Random(10, 3), y, 0, 0.5), ConfigError);
  EXPECT_THROW(screen_and_spc(Eigen::MatrixXd::Random(10, 3), y, 2, 1.5), ConfigError);
}

TEST(SpcGibbs, ConjugateMomentsWithinMonteCarloError) {
  const Dataset d = gen_latent_regression({50, 8, 4, 0.5, 5});
  const SPCBasis b = screen_and_spc(d.X, d.y, 3, 0.0);
  PriorConfig prior;
  prior.fixed_tau = 0.4;
  prior.fixed_sigma = 1.3;
  const int S = 6000;
  const ReferenceFit fit = fit_spc_reference(b, d.y, prior, mcmc(200, S, S, 9));

  const double s2 = 1.3 * 1.3, t2 = 0.4 * 0.4;
  const Eigen::MatrixXd& U = b.scores;
  const Eigen::MatrixXd Q = U.transpose() * U / s2 + Eigen::MatrixXd::Identity(3, 3) / t2;
  const Eigen::MatrixXd cov = Q.inverse();
  const Eigen::VectorXd mean = cov * (U.transpose() * (d.y.array() - d.y.mean()).matrix()) / s2;

  for (Index j = 0; j < 3; ++j) {
    const Eigen::VectorXd col = fit.beta_draws.col(j);
    const double m = col.mean();
    const double v = (col.array() - m).square().sum() / (S - 1);
    EXPECT_NEAR(m, mean(j), 3.0 * std::sqrt(cov(j, j) / S)) << "mean of beta " << j;
    EXPECT_NEAR(v, cov(j, j), 3.0 * cov(j, j) * std::sqrt(2.0 / (S - 1))) << "variance of beta " << j;
  }
  const double im = fit.intercept_draws.mean();
  EXPECT_NEAR(im, d.y.mean(), 3.0 * std::sqrt(s2 / 50.0 / S));
  const double iv = (fit.intercept_draws.array() - im).square().sum() / (S - 1);
  EXPECT_NEAR(iv, s2 / 50.0, 3.0 * (s2 / 50.0) * std::sqrt(2.0 / (S - 1)));
  for (Index s = 0; s < S; ++s) EXPECT_DOUBLE_EQ(fit.sigma_draws(s), 1.3);
}

TEST(SpcGibbs, ZeroTargetCentredCoefficients) {
  const Dataset d = gen_latent_regression({40, 6, 3, 0.5, 6});
  const SPCBasis b = screen_and_spc(d.X, d.y, 2, 0.0);
  const ReferenceFit fit = fit_spc_reference(b, Eigen::VectorXd::Zero(40), PriorConfig{},
                                             mcmc(500, 2000, 2000, 2));
  for (Index j = 0; j < 2; ++j) {
    const Eigen::VectorXd c = fit.beta_draws.col(j);
    const double se = std::sqrt((c.array() - c.mean()).square().sum() / 1999.0 / 2000.0);
    EXPECT_LT(std::abs(c.mean()), 3.0 * se + 1e-12);
  }
}

TEST(SpcGibbs, DescribesLatentBetterThanTarget) {
  double gain = 0.0;
  for (int r = 0; r < 20; ++r) {
    const Dataset d = gen_latent_regression({100, 70, 20, 0.5, static_cast<std::uint64_t>(100 + r)});
    const ReferenceFit fit = make_reference_builder(ReferenceSpec{})(d.X, d.y, static_cast<std::uint64_t>(r));
    gain += corr(fit.yhat, *d.latent_f) - corr(d.y, *d.latent_f);
  }
  EXPECT_GT(gain / 20.0, 0.0);
}

TEST(SpcGibbs, DrawInvariants) {
  const Dataset d = gen_latent_regression({60, 20, 5, 0.5, 7});
  const ReferenceFit fit = make_reference_builder(ReferenceSpec{})(d.X, d.y, 1);
  EXPECT_EQ(fit.n_draws(), 400);
  EXPECT_LT((fit.yhat - fit.mean_draws.colwise().mean().transpose()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GT(fit.sigma_draws.minCoeff(), 0.0);
  EXPECT_LT((predictive_means(fit, d.X) - fit.yhat).cwiseAbs().maxCoeff(), 1e-10);

  // Dense recomputation of U beta-bar.
  const Eigen::MatrixXd Xs = select_columns(d.X, fit.basis.columns);
  Eigen::MatrixXd Z(Xs.rows(), Xs.cols());
  for (Index j = 0; j < Xs.cols(); ++j)
    Z.col(j) = (Xs.col(j).array() - fit.basis.center(j)) / fit.basis.scale(j);
  const Eigen::VectorXd direct = (Z * *fit.basis.loadings * fit.beta_draws.colwise().mean().transpose()).array() +
                                 fit.intercept_draws.mean();
  const Dataset t = gen_latent_regression({30, 20, 5, 0.5, 8});
  EXPECT_LT((predictive_means(fit, d.X) - direct).cwiseAbs().maxCoeff(), 1e-10);

  const ReferenceFit one = fit.thinned(1);
  ASSERT_EQ(one.n_draws(), 1);
  EXPECT_LT((predictive_means(one, t.X) - predictive_mean_draws(one, t.X).row(0).transpose())
                .cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(predictive_means(fit, Eigen::MatrixXd::Zero(3, 19)), InputError);
}

TEST(SpcGibbs, InputChecks) {
  const Dataset d = gen_latent_regression({30, 6, 3, 0.5, 9});
  const SPCBasis b = screen_and_spc(d.X, d.y, 2, 0.0);
  Eigen::VectorXd y = d.y;
  y(3) = std::nan("");
  EXPECT_THROW(fit_spc_reference(b, y, PriorConfig{}, McmcConfig{}), InputError);
  EXPECT_THROW(fit_spc_reference(b, d.y, PriorConfig{}, mcmc(10, 50, 50, 1)), ConfigError);
}

TEST(Rhs, StrongSignalIntervalExcludesZero) {
  Engine eng = make_stream(3);
  Eigen::MatrixXd X(100, 10);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = sample_normal(eng);
  Eigen::VectorXd y = 4.0 * X.col(2);
  for (Index i = 0; i < 100; ++i) y(i) += sample_normal(eng);
  const ReferenceFit fit = fit_rhs_regression(X, y, PriorConfig{}, mcmc(1000, 1000, 1000, 4));
  std::vector<double> b(fit.beta_draws.col(2).data(), fit.beta_draws.col(2).data() + 1000);
  std::sort(b.begin(), b.end());
  EXPECT_GT(b[50], 0.0);
  EXPECT_NEAR(fit.beta_draws.col(2).mean() / fit.basis.scale(2), 4.0, 0.3);
}

TEST(Rhs, NullCoverage) {
  double excl = 0.0;
  const int reps = 5;
  for (int r = 0; r < reps; ++r) {
    Engine eng = make_stream(20, {static_cast<std::uint64_t>(r)});
    Eigen::MatrixXd X(100, 50);
    for (Index i = 0; i < X.size(); ++i) X.data()[i] = sample_normal(eng);
    Eigen::VectorXd y(100);
    for (Index i = 0; i < 100; ++i) y(i) = sample_normal(eng);
    const ReferenceFit fit = fit_rhs_regression(X, y, PriorConfig{}, mcmc(500, 1000, 1000, 5 + r));
    for (Index j = 0; j < 50; ++j) {
      std::vector<double> b(fit.beta_draws.col(j).data(), fit.beta_draws.col(j).data() + 1000);
      std::sort(b.begin(), b.end());
      excl += (b[50] > 0 || b[949] < 0) ? 1.0 : 0.0;
    }
  }
  EXPECT_LE(excl / (50.0 * reps), 0.1);
}

TEST(Rhs, ScalarShrinkage) {
  Engine eng = make_stream(8);
  Eigen::MatrixXd X(40, 1);
  Eigen::VectorXd y(40);
  for (Index i = 0; i < 40; ++i) {
    X(i, 0) = sample_normal(eng);
    y(i) = 0.3 * X(i, 0) + sample_normal(eng);
  }
  const ReferenceFit fit = fit_rhs_regression(X, y, PriorConfig{}, mcmc(1000, 2000, 2000, 3));
  const Eigen::ArrayXd xc = X.col(0).array() - X.col(0).mean();
  const double ols = (xc * (y.array() - y.mean())).sum() / (xc * xc).sum();
  const double post = fit.beta_draws.col(0).mean() / fit.basis.scale(0);
  EXPECT_GT(post * ols, 0.0);
  EXPECT_LT(std::abs(post), std::abs(ols));
}

TEST(Rhs, WideDesign) {
  const Dataset d = gen_latent_regression({40, 120, 10, 0.5, 12});
  const ReferenceFit fit = fit_rhs_regression(d.X, d.y, PriorConfig{}, mcmc(300, 300, 100, 1));
  EXPECT_EQ(fit.beta_draws.cols(), 120);
  EXPECT_TRUE(fit.mean_draws.allFinite());
}

TEST(Filtering, SeparatesRelevantColumnsBetter) {
  const Dataset d = gen_latent_regression({70, 1000, 100, 0.3, 13});
  const ReferenceFit fit = make_reference_builder(ReferenceSpec{})(d.X, d.y, 2);
  auto separation = [&](const Eigen::VectorXd& t) {
    double rel = 0, irr = 0;
    for (Index j = 0; j < 1000; ++j) (j < 100 ? rel : irr) += std::abs(corr(d.X.col(j), t));
    return rel / 100.0 - irr / 900.0;
  };
  EXPECT_GT(separation(fit.yhat), separation(d.y));
}

TEST(Draws, CsvExport) {
  const Dataset d = gen_latent_regression({30, 6, 3, 0.5, 9});
  const ReferenceFit fit = fit_spc_reference(screen_and_spc(d.X, d.y, 2, 0.0), d.y, PriorConfig{},
                                             mcmc(100, 100, 10, 1));
  std::ostringstream os;
  write_draws_csv(fit, os);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "draw,parameter,value");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1 + 10 * 4);
}
