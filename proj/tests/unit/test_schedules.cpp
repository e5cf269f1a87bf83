#include <cmath>

#include <gtest/gtest.h>

#include "ccdd/error.hpp"
#include "ccdd/schedules.hpp"

using namespace ccdd;

TEST(ContinuousSchedule, ConcaveSqrtMatchesClosedForm) {
  const auto s = ContinuousSchedule::concave_sqrt();
  for (double t : {0.0, 0.1, 0.25, 0.5, 0.9, 1.0}) {
    EXPECT_NEAR(s.alpha(t), std::sqrt(1.0 - t), 1e-15);
    EXPECT_NEAR(s.sigma(t), std::sqrt(t), 1e-15);
  }
}

TEST(ContinuousSchedule, ConstantBetaDefaultHitsTerminalAlpha) {
  const double beta = -2.0 * std::log(1e-4);
  EXPECT_NEAR(ContinuousSchedule::default_beta(), beta, 1e-12);
  const auto s = ContinuousSchedule::vp_constant_beta();
  EXPECT_NEAR(s.alpha(1.0), 1e-4, 1e-15);
  EXPECT_NEAR(s.alpha(0.3), std::exp(-0.5 * beta * 0.3), 1e-15);
}

TEST(ContinuousSchedule, LinearBetaQuadratureMatchesAnalyticIntegral) {
  const double b0 = 0.1;
  const double b1 = 20.0;
  const auto s = ContinuousSchedule::vp_linear_beta(b0, b1);
  for (int i = 0; i <= 50; ++i) {
    const double t = i / 50.0;
    const double integral = b0 * t + 0.5 * (b1 - b0) * t * t;
    EXPECT_NEAR(s.alpha(t), std::exp(-0.5 * integral), 1e-6) << "t=" << t;
  }
}

TEST(ContinuousSchedule, VariancePreservingEverywhere) {
  const ContinuousSchedule all[] = {ContinuousSchedule::concave_sqrt(),
                                    ContinuousSchedule::vp_constant_beta(),
                                    ContinuousSchedule::linear_alpha(),
                                    ContinuousSchedule::vp_linear_beta(0.1, 20.0)};
  for (const auto& s : all) {
    for (int i = 0; i <= 200; ++i) {
      const auto [a, sg] = s.eval(i / 200.0);
      EXPECT_NEAR(a * a + sg * sg, 1.0, 1e-12) << s.name();
    }
  }
}

TEST(ContinuousSchedule, RejectsTimeOutsideUnitInterval) {
  const auto s = ContinuousSchedule::concave_sqrt();
  EXPECT_THROW(s.eval(-1e-9), DomainError);
  EXPECT_THROW(s.eval(1.0 + 1e-9), DomainError);
}

TEST(DiscreteSchedule, MaskedLinear) {
  const auto d = DiscreteSchedule::masked_linear();
  EXPECT_DOUBLE_EQ(d.eval(0.0), 1.0);
  EXPECT_DOUBLE_EQ(d.eval(1.0), 0.0);
  EXPECT_NEAR(d.eval(0.3), 0.7, 1e-15);
  EXPECT_NEAR(d.nelbo_weight(0.25), 4.0, 1e-12);
  EXPECT_DOUBLE_EQ(d.noise_prob(4, 4), 1.0);
  EXPECT_DOUBLE_EQ(d.noise_prob(2, 4), 0.0);
  EXPECT_TRUE(d.is_masked());
}

TEST(DiscreteSchedule, UniformRateFormula) {
  const double r = 3.0;
  const auto d = DiscreteSchedule::uniform(r);
  for (double t : {0.0, 0.2, 0.6, 1.0}) {
    const double expected = (std::exp(-r * t) - std::exp(-r)) / (1.0 - std::exp(-r));
    EXPECT_NEAR(d.eval(t), expected, 1e-14);
  }
  EXPECT_NEAR(d.noise_prob(1, 5), 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(d.noise_prob(5, 5), 0.0);
  const double t = 0.4;
  const double deta = -r * std::exp(-r * t) / (1.0 - std::exp(-r));
  EXPECT_NEAR(d.nelbo_weight(t), -deta / (1.0 - d.eval(t)), 1e-6);
}

TEST(DiscreteSchedule, CustomEndpointsAreChecked) {
  EXPECT_THROW(DiscreteSchedule::masked_custom([](double t) { return 0.9 - t; }, "bad"),
               DomainError);
  const auto ok = DiscreteSchedule::masked_custom([](double t) { return 1.0 - t * t; }, "quad");
  EXPECT_NEAR(ok.nelbo_weight(0.5), 2 * 0.5 / (0.25), 1e-5);
}

TEST(SchedulePair, LogSnrSlopesMatchForDefaultPairing) {
  const auto pair = SchedulePair::defaults();
  for (int i = 1; i <= 9; ++i) {
    const double t = i / 10.0;
    const double expected = -1.0 / (t * (1.0 - t));
    EXPECT_NEAR(log_snr_slope(pair, t, Modality::kContinuous), expected, 1e-3 * std::abs(expected));
    EXPECT_NEAR(log_snr_slope(pair, t, Modality::kContinuous),
                log_snr_slope(pair, t, Modality::kDiscrete), 1e-3);
  }
  EXPECT_THROW(log_snr_slope(pair, 0.0, Modality::kDiscrete), DomainError);
}

TEST(SchedulePair, ContinuousAheadRejectsLaggingSchedule) {
  EXPECT_THROW(SchedulePair(ContinuousSchedule::linear_alpha(), DiscreteSchedule::masked_linear(),
                            SchedulePair::Pairing::kContinuousAhead),
               ConfigError);
  EXPECT_NO_THROW(SchedulePair(ContinuousSchedule::linear_alpha(),
                               DiscreteSchedule::masked_linear(),
                               SchedulePair::Pairing::kSynchronous));
}

TEST(Simpson, ExactForCubics) {
  EXPECT_NEAR(simpson([](double x) { return x * x * x - 2 * x; }, 0.0, 2.0, 4), 0.0, 1e-13);
  EXPECT_NEAR(simpson([](double x) { return std::sin(x); }, 0.0, M_PI), 2.0, 1e-10);
}
