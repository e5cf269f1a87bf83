#pragma once

#include <span>
#include <vector>

#include "ccdd/batch.hpp"
#include "ccdd/denoiser.hpp"
#include "ccdd/embedder.hpp"
#include "ccdd/rng.hpp"
#include "ccdd/schedules.hpp"

namespace ccdd {

/// Noise level of the stochastic continuous step.
enum class VarianceMode {
  kAlg2Literal,     // forward-kernel std sqrt(sigma_t^2 - (alpha_t/alpha_s)^2 sigma_s^2)
  kExactPosterior,  // conjugate Gaussian posterior std sigma_s sigma_{t|s} / sigma_t
};

enum class DecodeSource { kDiscreteTokens, kNearestNeighbor };

enum class TimeGrid {
  kUniform,  // t_k = 1 - k/K
  kAngle,    // uniform in arccos(alpha_t)
};

struct SamplerConfig {
  int n_steps = 128;
  double eta_ddpm = 1.0;
  double cfg_w = 1.0;
  VarianceMode variance_mode = VarianceMode::kExactPosterior;
  double temperature = 1.0;
  DecodeSource decode_source = DecodeSource::kDiscreteTokens;
  /// Take the most likely token when a position unmasks instead of drawing.
  bool argmax = false;
  double t_floor = 1e-4;
  TimeGrid grid = TimeGrid::kUniform;

  void validate() const;
};

/// Largest t handed to continuous coefficient formulas (alpha_1 may be 0).
inline constexpr double kContinuousTMax = 1.0 - 1e-6;

/// t_k = 1 - k/K for k < K and t_K = t_floor. Throws ConfigError unless the
/// grid is strictly decreasing.
std::vector<double> time_grid(int n_steps, double t_floor);

/// t_0 = 1, t_K = t_floor, equal steps in arccos(alpha_t) in between.
/// Solved by bisection; `schedule` must have alpha decreasing in t.
std::vector<double> angle_time_grid(int n_steps, double t_floor, const ContinuousSchedule& schedule);

/// z0_hat = (z_t - sigma_t eps_hat) / alpha_t with a per-sequence t.
LatentBatch predict_z0(const LatentBatch& z_t, const LatentBatch& eps_hat,
                       std::span<const double> t, const ContinuousSchedule& schedule);

struct ContinuousStepOptions {
  double eta_ddpm = 0.0;
  VarianceMode variance_mode = VarianceMode::kExactPosterior;
};

/// One reverse step t -> s shared by the whole batch. The noise draw for
/// (b, j) comes from rng.split(b).split(j).
LatentBatch step_continuous(const LatentBatch& z_t, const LatentBatch& eps_hat, double t,
                            double s, const ContinuousSchedule& schedule,
                            const ContinuousStepOptions& options, const RngStream& rng);

/// Std of the stochastic part of the step for the given mode.
double posterior_std(double t, double s, const ContinuousSchedule& schedule, VarianceMode mode);

/// Reverse kernel p(x_s | x_t) over {0..V-1, mask=V} given the model's
/// clean-token distribution. Masked schedules use the closed form; others
/// fall back to `posterior_enumerate`.
std::vector<double> posterior_discrete(Token x_t, std::span<const double> probs_hat, double t,
                                       double s, const DiscreteSchedule& schedule);

/// Brute-force sum over x0 of q(x_s | x_t, x0) p(x0 | x_t).
std::vector<double> posterior_enumerate(Token x_t, std::span<const double> probs_hat,
                                        double t, double s, const DiscreteSchedule& schedule);

/// w logits_c + (1 - w) logits_u.
Tensor3 cfg_logits(const Tensor3& logits_c, const Tensor3& logits_u, double w);

/// Softmax over the first V channels (the mask slot is ignored) at temperature tau.
std::vector<double> token_probs(std::span<const double> logits, int vocab_size,
                                double temperature = 1.0);

struct SampleResult {
  TokenBatch tokens;
  LatentBatch latents;
  /// Positions that were still masked after the last step and had to be
  /// drawn from the final prediction.
  int forced_unmasks = 0;
  int forward_calls = 0;
};

/// Joint reverse sampler. Starts from all-mask tokens (uniform draws for a
/// uniform schedule) and standard normal latents. `codebook` is required
/// only for DecodeSource::kNearestNeighbor.
SampleResult sample(const JointDenoiser& model, const ContinuousSchedule& continuous,
                    const DiscreteSchedule& discrete, const SamplerConfig& config, int length,
                    int batch, const RngStream& rng, const Codebook* codebook = nullptr);

}  // namespace ccdd
