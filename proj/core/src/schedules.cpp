#include "ccdd/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccdd/error.hpp"

namespace ccdd {
namespace {

void check_unit_interval(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError(std::string(what) + ": t=" + std::to_string(t) +
                      " outside [0, 1]");
  }
}

AlphaSigma from_alpha(double alpha) {
  alpha = std::clamp(alpha, 0.0, 1.0);
  return {alpha, std::sqrt(std::max(0.0, 1.0 - alpha * alpha))};
}

constexpr double kSlopeStep = 1e-5;

}  // namespace

double simpson(const std::function<double(double)>& f, double a, double b,
               int panels) {
  if (panels <= 0 || panels % 2 != 0) {
    throw DomainError("simpson: panel count must be positive and even");
  }
  if (a == b) return 0.0;
  const double h = (b - a) / panels;
  double odd = 0.0;
  double even = 0.0;
  for (int i = 1; i < panels; ++i) {
    (i % 2 == 1 ? odd : even) += f(a + i * h);
  }
  return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

// ---- ContinuousSchedule ---------------------------------------------------

double ContinuousSchedule::default_beta() { return -2.0 * std::log(1e-4); }

ContinuousSchedule ContinuousSchedule::vp_constant_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw DomainError("vp_constant_beta: beta must be positive");
  }
  ContinuousSchedule s(Kind::kVpConstantBeta, "vp_constant_beta");
  s.beta_ = beta;
  return s;
}

ContinuousSchedule ContinuousSchedule::vp_integrated(
    std::function<double(double)> beta, std::string label) {
  if (!beta) throw DomainError("vp_integrated: empty beta function");
  ContinuousSchedule s(Kind::kVpIntegrated, std::move(label));
  s.beta_fn_ = std::move(beta);
  return s;
}

ContinuousSchedule ContinuousSchedule::vp_linear_beta(double beta_min,
                                                      double beta_max) {
  if (!(beta_min >= 0.0) || !(beta_max >= beta_min) || beta_max <= 0.0) {
    throw DomainError("vp_linear_beta: need 0 <= beta_min <= beta_max, beta_max > 0");
  }
  auto s = vp_integrated(
      [beta_min, beta_max](double t) { return beta_min + t * (beta_max - beta_min); },
      "vp_linear_beta");
  s.beta_ = beta_max;
  return s;
}

ContinuousSchedule ContinuousSchedule::concave_sqrt() {
  return ContinuousSchedule(Kind::kConcaveSqrt, "concave_sqrt");
}

ContinuousSchedule ContinuousSchedule::linear_alpha() {
  return ContinuousSchedule(Kind::kLinearAlpha, "linear_alpha");
}

AlphaSigma ContinuousSchedule::eval(double t) const {
  check_unit_interval(t, "ContinuousSchedule::eval");
  switch (kind_) {
    case Kind::kVpConstantBeta:
      return from_alpha(std::exp(-0.5 * beta_ * t));
    case Kind::kVpIntegrated: {
      const double integral = simpson(beta_fn_, 0.0, t);
      return from_alpha(std::exp(-0.5 * integral));
    }
    case Kind::kConcaveSqrt:
      // Both computed directly so sigma is exact near t = 0 and alpha(1) = 0.
      return {std::sqrt(1.0 - t), std::sqrt(t)};
    case Kind::kLinearAlpha:
      return {1.0 - t, std::sqrt(t * (2.0 - t))};
  }
  throw DomainError("ContinuousSchedule::eval: unknown kind");
}

// ---- DiscreteSchedule -----------------------------------------------------

DiscreteSchedule DiscreteSchedule::masked_linear() {
  return DiscreteSchedule(Kind::kMaskedLinear, "masked_linear");
}

DiscreteSchedule DiscreteSchedule::masked_custom(
    std::function<double(double)> eta, std::string label) {
  if (!eta) throw DomainError("masked_custom: empty eta function");
  if (std::abs(eta(0.0) - 1.0) > 1e-12 || std::abs(eta(1.0)) > 1e-12) {
    throw DomainError("masked_custom: eta must satisfy eta(0)=1 and eta(1)=0");
  }
  DiscreteSchedule s(Kind::kMaskedCustom, std::move(label));
  s.eta_fn_ = std::move(eta);
  return s;
}

DiscreteSchedule DiscreteSchedule::uniform(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw DomainError("uniform: rate must be positive");
  }
  DiscreteSchedule s(Kind::kUniform, "uniform");
  s.rate_ = rate;
  return s;
}

double DiscreteSchedule::eval(double t) const {
  check_unit_interval(t, "DiscreteSchedule::eval");
  switch (kind_) {
    case Kind::kMaskedLinear:
      return 1.0 - t;
    case Kind::kMaskedCustom:
      return std::clamp(eta_fn_(t), 0.0, 1.0);
    case Kind::kUniform: {
      const double tail = std::exp(-rate_);
      return std::clamp((std::exp(-rate_ * t) - tail) / (1.0 - tail), 0.0, 1.0);
    }
  }
  throw DomainError("DiscreteSchedule::eval: unknown kind");
}

double DiscreteSchedule::nelbo_weight(double t) const {
  check_unit_interval(t, "DiscreteSchedule::nelbo_weight");
  if (t <= 0.0) throw DomainError("nelbo_weight: undefined at t = 0");
  switch (kind_) {
    case Kind::kMaskedLinear:
      return 1.0 / t;
    case Kind::kUniform: {
      const double tail = std::exp(-rate_);
      const double deta = -rate_ * std::exp(-rate_ * t) / (1.0 - tail);
      return -deta / (1.0 - eval(t));
    }
    case Kind::kMaskedCustom: {
      const double h = std::min({kSlopeStep, t / 2.0, (1.0 - t) / 2.0});
      // One-sided at t = 1.
      const double deta = h > 0.0 ? (eval(t + h) - eval(t - h)) / (2.0 * h)
                                  : (eval(t) - eval(t - kSlopeStep)) / kSlopeStep;
      return -deta / (1.0 - eval(t));
    }
  }
  throw DomainError("nelbo_weight: unknown kind");
}

double DiscreteSchedule::noise_prob(int token, int vocab_size) const {
  if (is_masked()) return token == vocab_size ? 1.0 : 0.0;
  return token < vocab_size ? 1.0 / vocab_size : 0.0;
}

// ---- SchedulePair ---------------------------------------------------------

SchedulePair::SchedulePair(ContinuousSchedule continuous,
                           DiscreteSchedule discrete, Pairing pairing)
    : continuous_(std::move(continuous)),
      discrete_(std::move(discrete)),
      pairing_(pairing) {
  if (pairing_ == Pairing::kContinuousAhead) {
    constexpr int kChecks = 999;
    for (int i = 1; i <= kChecks; ++i) {
      const double t = static_cast<double>(i) / (kChecks + 1);
      const double a = continuous_.alpha(t);
      if (a * a < discrete_.eval(t) - 1e-12) {
        throw ConfigError("pairing=continuous_ahead requires alpha_t^2 >= eta_t; violated at t=" +
                          std::to_string(t));
      }
    }
  }
}

SchedulePair SchedulePair::defaults() {
  return SchedulePair(ContinuousSchedule::concave_sqrt(),
                      DiscreteSchedule::masked_linear(),
                      Pairing::kContinuousAhead);
}

double log_snr_slope(const SchedulePair& pair, double t, Modality which) {
  if (!(t > 0.0 && t < 1.0)) {
    throw DomainError("log_snr_slope: t must lie strictly inside (0, 1)");
  }
  const double h = std::min({kSlopeStep, t / 2.0, (1.0 - t) / 2.0});
  auto log_odds = [&](double s) {
    if (which == Modality::kContinuous) {
      const auto [alpha, sigma] = pair.continuous().eval(s);
      return 2.0 * (std::log(alpha) - std::log(sigma));
    }
    const double eta = pair.discrete().eval(s);
    return std::log(eta) - std::log1p(-eta);
  };
  const double slope = (log_odds(t + h) - log_odds(t - h)) / (2.0 * h);
  if (!std::isfinite(slope)) {
    throw DomainError("log_snr_slope: SNR diverges near t=" + std::to_string(t));
  }
  return slope;
}

}  // namespace ccdd
