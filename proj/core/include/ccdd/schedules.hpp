#pragma once

#include <functional>
#include <string>
#include <utility>

namespace ccdd {

/// Signal/noise coefficients of the variance-preserving Gaussian corruption.
struct AlphaSigma {
  double alpha;
  double sigma;
};

/// Continuous (Gaussian) forward schedule z_t = alpha_t z_0 + sigma_t eps.
///
/// All kinds are variance preserving: sigma_t = sqrt(1 - alpha_t^2).
class ContinuousSchedule {
 public:
  enum class Kind {
    kVpConstantBeta,  // alpha = exp(-beta t / 2)
    kVpIntegrated,    // alpha = exp(-1/2 int_0^t beta), Simpson quadrature
    kConcaveSqrt,     // alpha = sqrt(1 - t)
    kLinearAlpha,     // alpha = 1 - t
  };

  /// beta such that alpha(1) = 1e-4.
  static double default_beta();

  static ContinuousSchedule vp_constant_beta(double beta = default_beta());
  /// Arbitrary positive rate function beta(t), integrated numerically.
  static ContinuousSchedule vp_integrated(std::function<double(double)> beta,
                                          std::string label);
  /// beta(t) = beta_min + t (beta_max - beta_min).
  static ContinuousSchedule vp_linear_beta(double beta_min, double beta_max);
  static ContinuousSchedule concave_sqrt();
  static ContinuousSchedule linear_alpha();

  /// Throws DomainError for t outside [0, 1].
  AlphaSigma eval(double t) const;
  double alpha(double t) const { return eval(t).alpha; }
  double sigma(double t) const { return eval(t).sigma; }

  Kind kind() const { return kind_; }
  double beta() const { return beta_; }
  const std::string& name() const { return name_; }
  /// True when alpha is obtained by quadrature (looser VP tolerance applies).
  bool uses_quadrature() const { return kind_ == Kind::kVpIntegrated; }

 private:
  ContinuousSchedule(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
  double beta_ = 0.0;
  std::function<double(double)> beta_fn_;
};

/// Discrete (categorical) forward schedule
/// q_t(x_t | x_0) = Cat(eta_t onehot(x_0) + (1 - eta_t) pi_t).
class DiscreteSchedule {
 public:
  enum class Kind {
    kMaskedLinear,  // eta = 1 - t, pi = mask point mass
    kMaskedCustom,  // user eta(t), pi = mask point mass
    kUniform,       // eta = (e^{-rt} - e^{-r}) / (1 - e^{-r}), pi uniform
  };

  static DiscreteSchedule masked_linear();
  /// `eta` must satisfy eta(0) = 1, eta(1) = 0 and be non-increasing;
  /// the endpoints are checked at construction.
  static DiscreteSchedule masked_custom(std::function<double(double)> eta,
                                        std::string label);
  static DiscreteSchedule uniform(double rate);

  /// Keep probability eta_t. Throws DomainError outside [0, 1].
  double eval(double t) const;

  /// -eta'(t) / (1 - eta(t)): the weight that turns masked cross entropy into
  /// a negative ELBO. Equals 1/t for masked_linear.
  double nelbo_weight(double t) const;

  bool is_masked() const { return kind_ != Kind::kUniform; }
  Kind kind() const { return kind_; }
  double rate() const { return rate_; }
  const std::string& name() const { return name_; }

  /// Noise distribution pi_t over the augmented vocabulary {0..V-1, mask=V}.
  double noise_prob(int token, int vocab_size) const;

 private:
  DiscreteSchedule(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
  double rate_ = 0.0;
  std::function<double(double)> eta_fn_;
};

class SchedulePair {
 public:
  enum class Pairing { kSynchronous, kContinuousAhead };

  /// Throws ConfigError if pairing is continuous_ahead and alpha_t^2 < eta_t
  /// somewhere on an interior check grid.
  SchedulePair(ContinuousSchedule continuous, DiscreteSchedule discrete,
               Pairing pairing);

  /// (concave_sqrt, masked_linear, continuous_ahead).
  static SchedulePair defaults();

  const ContinuousSchedule& continuous() const { return continuous_; }
  const DiscreteSchedule& discrete() const { return discrete_; }
  Pairing pairing() const { return pairing_; }

 private:
  ContinuousSchedule continuous_;
  DiscreteSchedule discrete_;
  Pairing pairing_;
};

enum class Modality { kContinuous, kDiscrete };

/// d/dt log SNR_z(t) (continuous) or d/dt log(eta/(1-eta)) (discrete) by a
/// central difference with step 1e-5, shrunk near the boundary so both
/// evaluation points stay inside (0, 1). Throws DomainError unless 0 < t < 1.
double log_snr_slope(const SchedulePair& pair, double t, Modality which);

/// Composite Simpson rule with an even number of panels.
double simpson(const std::function<double(double)>& f, double a, double b,
               int panels = 1024);

}  // namespace ccdd
