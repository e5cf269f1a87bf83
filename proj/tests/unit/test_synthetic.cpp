#include <cmath>

#include <gtest/gtest.h>

#include "ccdd/error.hpp"
#include "ccdd/synthetic.hpp"

using namespace ccdd;

TEST(Synthetic, IidUniformEntropy) {
  const SyntheticSource s = SyntheticSource::iid_uniform(8);
  EXPECT_NEAR(s.entropy_rate(), std::log(8.0), 1e-14);
}

TEST(Synthetic, BigramRowsAndStationarity) {
  const SyntheticSource s = SyntheticSource::random_bigram(6, 2.0, 5);
  const Matrix& p = s.transition();
  for (int r = 0; r < 6; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
  Eigen::RowVectorXd pi(6);
  for (int i = 0; i < 6; ++i) pi(i) = s.stationary()[static_cast<std::size_t>(i)];
  EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
  EXPECT_LT((pi * p - pi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Synthetic, TwoStateEntropyRateClosedForm) {
  const double a = 0.2, b = 0.6;
  Matrix p(2, 2);
  p << 1 - a, a, b, 1 - b;
  const SyntheticSource s = SyntheticSource::bigram(p);
  auto h2 = [](double q) { return -q * std::log(q) - (1 - q) * std::log(1 - q); };
  const double pi0 = b / (a + b);
  EXPECT_NEAR(s.stationary()[0], pi0, 1e-12);
  EXPECT_NEAR(s.entropy_rate(), pi0 * h2(a) + (1 - pi0) * h2(b), 1e-12);
}

TEST(Synthetic, EmpiricalTransitionsMatch) {
  const SyntheticSource s = SyntheticSource::random_bigram(3, 1.0, 2);
  const TokenBatch x = s.sample(200, 200, 9);
  Matrix counts = Matrix::Zero(3, 3);
  for (int b = 0; b < x.batch(); ++b) {
    for (int j = 1; j < x.length(); ++j) counts(x.at(b, j - 1), x.at(b, j)) += 1;
  }
  for (int r = 0; r < 3; ++r) {
    const double n = counts.row(r).sum();
    for (int c = 0; c < 3; ++c) {
      const double p = s.transition()(r, c);
      EXPECT_NEAR(counts(r, c) / n, p, 5 * std::sqrt(p * (1 - p) / n));
    }
  }
  EXPECT_EQ(x, s.sample(200, 200, 9));
}

TEST(Synthetic, PeriodicPattern) {
  const SyntheticSource s = SyntheticSource::periodic({0, 2, 1}, 3);
  EXPECT_EQ(s.entropy_rate(), 0.0);
  const TokenBatch x = s.sample(5, 9, 1);
  for (int b = 0; b < 5; ++b) {
    for (int j = 3; j < 9; ++j) EXPECT_EQ(x.at(b, j), x.at(b, j - 3));
  }
  EXPECT_THROW(SyntheticSource::periodic({0, 4}, 3), ConfigError);
}

TEST(Synthetic, RejectsImproperRows) {
  Matrix p(2, 2);
  p << 0.5, 0.6, 0.5, 0.5;
  EXPECT_THROW(SyntheticSource::bigram(p), ConfigError);
}
