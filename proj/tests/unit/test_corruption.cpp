#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ccdd/corruption.hpp"
#include "ccdd/error.hpp"
#include "oracles.hpp"

using namespace ccdd;

namespace {

constexpr int kVocab = 5;

}  // namespace

TEST(CorruptDiscrete, MaskedFractionIsBinomial) {
  const TokenBatch x0 = oracle::random_tokens(100, 1000, kVocab, 1);
  const auto sched = DiscreteSchedule::masked_linear();
  for (double t : {0.1, 0.5, 0.9}) {
    const std::vector<double> ts(100, t);
    const TokenBatch xt = corrupt_discrete(x0, ts, sched, kVocab, RngStream(7));
    double masked = 0;
    for (std::size_t i = 0; i < xt.size(); ++i) {
      if (xt.ids()[i] == kVocab) {
        ++masked;
      } else {
        ASSERT_EQ(xt.ids()[i], x0.ids()[i]);
      }
    }
    const double n = static_cast<double>(xt.size());
    const double se = std::sqrt(t * (1 - t) / n);
    EXPECT_NEAR(masked / n, t, 5 * se) << "t=" << t;
  }
}

TEST(CorruptDiscrete, UniformKeepsTokenWithExpectedRate) {
  const TokenBatch x0 = oracle::random_tokens(100, 1000, kVocab, 2);
  const auto sched = DiscreteSchedule::uniform(3.0);
  const double t = 0.4;
  const std::vector<double> ts(100, t);
  const TokenBatch xt = corrupt_discrete(x0, ts, sched, kVocab, RngStream(8));
  double same = 0;
  for (std::size_t i = 0; i < xt.size(); ++i) {
    ASSERT_GE(xt.ids()[i], 0);
    ASSERT_LT(xt.ids()[i], kVocab);
    same += xt.ids()[i] == x0.ids()[i];
  }
  const double eta = sched.eval(t);
  const double p = eta + (1 - eta) / kVocab;
  const double n = static_cast<double>(xt.size());
  EXPECT_NEAR(same / n, p, 5 * std::sqrt(p * (1 - p) / n));
}

TEST(CorruptDiscrete, EndpointsAndErrors) {
  const TokenBatch x0 = oracle::random_tokens(2, 16, kVocab, 3);
  const auto sched = DiscreteSchedule::masked_linear();
  const std::vector<double> zero(2, 0.0), one(2, 1.0);
  EXPECT_EQ(corrupt_discrete(x0, zero, sched, kVocab, RngStream(1)), x0);
  const TokenBatch all = corrupt_discrete(x0, one, sched, kVocab, RngStream(1));
  for (Token id : all.ids()) EXPECT_EQ(id, kVocab);
  const std::vector<double> bad{0.5, 1.5};
  EXPECT_THROW(corrupt_discrete(x0, bad, sched, kVocab, RngStream(1)), DomainError);
  TokenBatch masked_input = x0;
  masked_input.at(0, 0) = kVocab;
  EXPECT_THROW(corrupt_discrete(masked_input, zero, sched, kVocab, RngStream(1)), InputError);
}

TEST(CorruptContinuous, MarginalMeanAndVariance) {
  const auto sched = ContinuousSchedule::concave_sqrt();
  const int n_seq = 100, len = 100, dim = 10;
  const LatentBatch z0(n_seq, len, dim, 1.0);
  for (double t : {0.1, 0.5, 0.9}) {
    const std::vector<double> ts(n_seq, t);
    const GaussianCorruption g = corrupt_continuous(z0, ts, sched, RngStream(11));
    const double a = std::sqrt(1 - t), s = std::sqrt(t);
    const double n = static_cast<double>(g.z_t.size());
    const double m = oracle::mean(g.z_t.data());
    const double v = oracle::variance(g.z_t.data());
    EXPECT_NEAR(m, a, 5 * s / std::sqrt(n));
    EXPECT_NEAR(v, s * s, 5 * s * s * std::sqrt(2.0 / (n - 1)));
    for (std::size_t i = 0; i < g.z_t.size(); ++i) {
      ASSERT_NEAR(g.z_t.data()[i], a + s * g.eps.data()[i], 1e-14);
    }
  }
}

TEST(CorruptContinuous, DrawsDependOnlyOnSequenceIndex) {
  const auto sched = ContinuousSchedule::concave_sqrt();
  const LatentBatch z0 = oracle::random_latents(8, 6, 3, 4);
  const std::vector<double> t8(8, 0.3);
  const GaussianCorruption full = corrupt_continuous(z0, t8, sched, RngStream(5));
  const std::vector<double> t4(4, 0.3);
  const GaussianCorruption part = corrupt_continuous(z0.slice(0, 4), t4, sched, RngStream(5));
  EXPECT_EQ(part.eps, full.eps.slice(0, 4));
}

TEST(MaskRepresentation, ZeroesFlaggedPositions) {
  const LatentBatch z0 = oracle::random_latents(1, 4, 3, 6);
  const MaskGrid mask{0, 1, 0, 1};
  const LatentBatch masked = mask_representation(z0, mask, true);
  for (int j = 0; j < 4; ++j) {
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(masked.at(0, j, c), mask[static_cast<std::size_t>(j)] ? 0.0 : z0.at(0, j, c));
    }
  }
  EXPECT_EQ(mask_representation(z0, mask, false), z0);
}

TEST(CorruptJoint, RepresentationMaskingFollowsTokenMask) {
  const auto pair = SchedulePair::defaults();
  const TokenBatch x0 = oracle::random_tokens(6, 20, kVocab, 9);
  const Codebook cb = Codebook::random_orthonormal(kVocab, 8, 1);
  const LatentBatch z0 = cb.encode(x0);
  const std::vector<double> t(6, 0.5);
  const std::vector<double> always(6, 1.0), never(6, 0.0);

  const JointCorruptedBatch on = corrupt_joint(x0, z0, t, pair, kVocab, always, RngStream(3));
  const JointCorruptedBatch off = corrupt_joint(x0, z0, t, pair, kVocab, never, RngStream(3));
  EXPECT_EQ(on.x_t, off.x_t);
  EXPECT_EQ(off.z0_effective, z0);
  const double a = std::sqrt(0.5), s = std::sqrt(0.5);
  for (int b = 0; b < 6; ++b) {
    EXPECT_EQ(on.representation_masked[static_cast<std::size_t>(b)], 1);
    for (int j = 0; j < 20; ++j) {
      const bool masked = on.x_t.at(b, j) == kVocab;
      EXPECT_EQ(on.mask_indicator[static_cast<std::size_t>(b * 20 + j)], masked ? 1 : 0);
      for (int c = 0; c < 8; ++c) {
        EXPECT_EQ(on.z0_effective.at(b, j, c), masked ? 0.0 : z0.at(b, j, c));
        EXPECT_NEAR(on.z_t.at(b, j, c), a * on.z0_effective.at(b, j, c) + s * on.eps.at(b, j, c),
                    1e-14);
      }
    }
  }
}

TEST(CorruptJoint, ReembedUsesCodebookOnVisibleTokens) {
  const auto pair = SchedulePair::defaults();
  const TokenBatch x0 = oracle::random_tokens(3, 10, kVocab, 10);
  const Codebook cb = Codebook::random_orthonormal(kVocab, 8, 2);
  const LatentBatch z0 = cb.encode(x0);
  const std::vector<double> t(3, 0.6), always(3, 1.0);
  JointCorruptionOptions opt;
  opt.masking = RepresentationMasking::kReembed;
  opt.codebook = &cb;
  const JointCorruptedBatch r = corrupt_joint(x0, z0, t, pair, kVocab, always, RngStream(4), opt);
  EXPECT_EQ(r.z0_effective, cb.encode_partial(r.x_t));
  opt.codebook = nullptr;
  EXPECT_THROW(corrupt_joint(x0, z0, t, pair, kVocab, always, RngStream(4), opt), ConfigError);
}
