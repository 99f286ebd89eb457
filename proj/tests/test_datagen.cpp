#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "refsel/datagen.hpp"
#include "refsel/errors.hpp"
#include "test_util.hpp"

using namespace refsel;
using testutil::corr;

TEST(Generator, DimensionsAndTruth) {
  const Dataset d = gen_latent_regression({70, 1000, 100, 0.3, 11});
  EXPECT_EQ(d.n(), 70);
  EXPECT_EQ(d.p(), 1000);
  ASSERT_TRUE(d.relevant.has_value());
  ASSERT_TRUE(d.latent_f.has_value());
  EXPECT_EQ(std::count(d.relevant->begin(), d.relevant->end(), true), 100);
  for (Index j = 0; j < 100; ++j) EXPECT_TRUE((*d.relevant)[static_cast<std::size_t>(j)]);
  EXPECT_EQ(d.column_names.size(), 1000u);
  EXPECT_NO_THROW(d.validate());
}

TEST(Generator, IndependentWhenRhoZero) {
  const Dataset d = gen_latent_regression({100000, 2, 2, 0.0, 3});
  EXPECT_LT(std::abs(corr(d.X.col(0), d.X.col(1))), 0.02);
}

TEST(Generator, PopulationMoments) {
  const double rho = 0.5;
  const Dataset d = gen_latent_regression({100000, 4, 2, rho, 5});
  EXPECT_NEAR(corr(d.X.col(0), d.X.col(1)), rho, 0.02);
  EXPECT_NEAR(corr(d.X.col(0), *d.latent_f), std::sqrt(rho), 0.02);
  EXPECT_NEAR(corr(d.X.col(1), d.y), std::sqrt(rho / 2.0), 0.02);
  EXPECT_NEAR(corr(d.X.col(2), d.y), 0.0, 0.02);
  EXPECT_NEAR(corr(*d.latent_f, d.y), std::sqrt(0.5), 0.02);
}

TEST(Generator, RejectsInvalidConfig) {
  EXPECT_THROW(gen_latent_regression({0, 5, 2, 0.3, 1}), ConfigError);
  EXPECT_THROW(gen_latent_regression({10, 5, 6, 0.3, 1}), ConfigError);
  EXPECT_THROW(gen_latent_regression({10, 5, 2, 1.0, 1}), ConfigError);
  EXPECT_THROW(gen_latent_regression({10, 5, 2, -0.1, 1}), ConfigError);
  try {
    gen_latent_regression({10, 5, 2, 1.2, 1});
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("rho"), std::string::npos);
  }
}

TEST(Generator, Deterministic) {
  const Dataset a = gen_latent_regression({50, 20, 5, 0.4, 99});
  const Dataset b = gen_latent_regression({50, 20, 5, 0.4, 99});
  const Dataset c = gen_latent_regression({50, 20, 5, 0.4, 100});
  EXPECT_TRUE(a.X == b.X);
  EXPECT_TRUE(a.y == b.y);
  EXPECT_FALSE(a.X == c.X);
}

TEST(Noise, AppendsIrrelevantColumns) {
  Dataset d = gen_latent_regression({251, 13, 13, 0.3, 1});
  d.column_names = {"age", "weight", "height", "neck", "chest", "abdomen", "hip",
                    "thigh", "knee", "ankle", "biceps", "forearm", "wrist"};
  const Dataset a = augment_with_noise(d, 100, 7);
  EXPECT_EQ(a.p(), 100);
  EXPECT_EQ(a.p() - d.p(), 87);
  EXPECT_EQ(a.column_names[5], "abdomen");
  EXPECT_EQ(a.column_names[13], "noise1");
  ASSERT_TRUE(a.relevant.has_value());
  for (Index j = 13; j < 100; ++j) EXPECT_FALSE((*a.relevant)[static_cast<std::size_t>(j)]);
  EXPECT_TRUE(a.X.leftCols(13) == d.X);
  EXPECT_THROW(augment_with_noise(d, 13, 7), ConfigError);
  EXPECT_THROW(augment_with_noise(d, 5, 7), ConfigError);
}

TEST(Noise, NullCorrelationBound) {
  const Dataset d = gen_latent_regression({200, 1, 1, 0.3, 2});
  const Dataset a = augment_with_noise(d, 2001, 8);
  int inside = 0;
  for (Index j = 1; j < a.p(); ++j)
    inside += std::abs(corr(a.X.col(j), a.y)) < 3.0 / std::sqrt(200.0) ? 1 : 0;
  EXPECT_GE(inside / 2000.0, 0.99);
}

TEST(Bootstrap, SingleRow) {
  Dataset d;
  d.X = Eigen::MatrixXd::Constant(1, 2, 1.0);
  d.y = Eigen::VectorXd::Constant(1, 3.0);
  d.column_names = {"a", "b"};
  const BootstrapSplit s = bootstrap_sample(d, 1);
  EXPECT_EQ(s.train.n(), 1);
  EXPECT_EQ(s.oob.n(), 0);
}

TEST(Bootstrap, OutOfBagFraction) {
  const Dataset d = gen_latent_regression({251, 3, 1, 0.3, 1});
  double total = 0.0;
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) {
    const BootstrapSplit s = bootstrap_sample(d, static_cast<std::uint64_t>(r));
    ASSERT_EQ(s.train.n(), 251);
    std::set<Index> tr(s.train_rows.begin(), s.train_rows.end());
    for (Index i : s.oob_rows) ASSERT_EQ(tr.count(i), 0u);
    ASSERT_EQ(tr.size() + s.oob_rows.size(), 251u);
    total += static_cast<double>(s.oob.n()) / 251.0;
  }
  EXPECT_NEAR(total / reps, std::pow(1.0 - 1.0 / 251.0, 251.0), 0.01);
}

TEST(Bootstrap, Deterministic) {
  const Dataset d = gen_latent_regression({40, 3, 1, 0.3, 1});
  const BootstrapSplit a = bootstrap_sample(d, 17);
  const BootstrapSplit b = bootstrap_sample(d, 17);
  EXPECT_EQ(a.train_rows, b.train_rows);
  EXPECT_EQ(a.oob_rows, b.oob_rows);
}

TEST(Subsample, ShapeAndUnbiasedMean) {
  const Dataset d = gen_latent_regression({251, 13, 13, 0.3, 4});
  EXPECT_EQ(subsample(d, 50, 1).n(), 50);
  EXPECT_EQ(subsample(d, 50, 1).p(), 13);
  std::vector<double> means;
  for (int r = 0; r < 2000; ++r) means.push_back(subsample(d, 50, static_cast<std::uint64_t>(r)).X.col(0).mean());
  const double se = testutil::sd(means) / std::sqrt(2000.0);
  EXPECT_NEAR(testutil::mean(means), d.X.col(0).mean(), 4.0 * se);
  EXPECT_THROW(subsample(d, 0, 1), ConfigError);
}

TEST(Folds, BalancedAndSeeded) {
  const std::vector<int> f = make_folds(23, 5, 3);
  std::vector<int> count(5, 0);
  for (int k : f) ++count[static_cast<std::size_t>(k)];
  for (int c : count) EXPECT_TRUE(c == 4 || c == 5);
  EXPECT_EQ(f, make_folds(23, 5, 3));
  EXPECT_THROW(make_folds(3, 5, 1), ConfigError);
  EXPECT_THROW(make_folds(10, 1, 1), ConfigError);
}

TEST(Csv, ReadsTargetAndExclusions) {
  const auto path = std::filesystem::temp_directory_path() / "refsel_csv_test.csv";
  {
    std::ofstream out(path);
    out << "density,siri,age,weight\n1.07,12.3,23,154.25\n1.08,6.1,22,173.25\n1.04,25.3,22,154.0\n";
  }
  const Dataset d = read_csv_dataset(path.string(), {"siri", {"density"}});
  EXPECT_EQ(d.n(), 3);
  EXPECT_EQ(d.p(), 2);
  EXPECT_EQ(d.column_names, (std::vector<std::string>{"age", "weight"}));
  EXPECT_DOUBLE_EQ(d.y(1), 6.1);
  EXPECT_THROW(read_csv_dataset(path.string(), {"brozek", {}}), DataError);
  EXPECT_THROW(read_csv_dataset("/nonexistent/file.csv", {"siri", {}}), DataError);
  {
    std::ofstream out(path);
    out << "siri,age\n1,abc\n";
  }
  EXPECT_THROW(read_csv_dataset(path.string(), {"siri", {}}), DataError);
  std::filesystem::remove(path);
}
