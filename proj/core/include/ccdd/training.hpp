#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccdd/batch.hpp"
#include "ccdd/corruption.hpp"
#include "ccdd/denoiser.hpp"
#include "ccdd/embedder.hpp"
#include "ccdd/schedules.hpp"

namespace ccdd {

/// Time weighting of the discrete cross entropy.
enum class LambdaSpec {
  kUnit,   // plain cross entropy
  kNelbo,  // -eta'/(1 - eta), 1/t for masked_linear
};

struct LossWeights {
  double gamma_cont = 1.0;
  double gamma_disc = 1.0;
  /// Constant weight on the epsilon MSE.
  double lambda_cont = 1.0;
  LambdaSpec lambda_disc = LambdaSpec::kNelbo;

  /// Throws ConfigError naming the negative weight.
  void validate() const;
};

struct LossBreakdown {
  double l_cont = 0.0;
  double l_disc = 0.0;
  double total = 0.0;
  LossWeights weights;
};

/// Mean over included sequences of lambda_cont * |eps - eps_hat|^2 / (L d).
/// `include` selects sequences (empty = all); with none included the loss is
/// zero. When `grad` is non-null it receives d loss / d eps_hat.
double loss_continuous(const LatentBatch& eps, const LatentBatch& eps_hat,
                       std::span<const std::uint8_t> include = {},
                       double lambda_cont = 1.0, LatentBatch* grad = nullptr);

/// -(1/(B L)) sum over flagged positions of lambda(t) log softmax(logits)[x0].
/// The softmax runs over the V ordinary tokens; the mask channel is excluded.
/// When `grad` is non-null it receives d loss / d logits (zero on the mask
/// channel).
double loss_discrete(const Tensor3& logits, const TokenBatch& x0, const MaskGrid& positions,
                     std::span<const double> t, const DiscreteSchedule& schedule,
                     LambdaSpec lambda, Tensor3* grad = nullptr);

/// Per-sequence discrete weight lambda(t).
double discrete_weight(const DiscreteSchedule& schedule, LambdaSpec lambda, double t);

LossBreakdown total_loss(double l_cont, double l_disc, const LossWeights& weights);

/// AdamW with linear warmup to a constant rate and global-norm clipping.
struct OptimizerConfig {
  double lr = 3e-4;
  int warmup_steps = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.02;
  double grad_clip = 1.0;

  void validate() const;
  double rate_at(std::int64_t step) const;
};

struct OptimizerState {
  OptimizerConfig config;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;

  static OptimizerState init(const ParameterSet& params, const OptimizerConfig& config);
};

/// Global L2 norm over all gradient blocks.
double global_norm(const Gradients& grads);

/// Rescales `grads` so its global norm is at most `clip`; returns the norm
/// before clipping.
double clip_global_norm(Gradients& grads, double clip);

/// One AdamW update (clipping already applied). Returns the learning rate used.
double adamw_update(ParameterSet& params, const Gradients& grads, OptimizerState& state);

struct TrainingConfig {
  LossWeights weights;
  OptimizerConfig optimizer;
  double t_floor = 1e-4;
  double p_drop = 0.15;
  double p_r_min = 0.0;
  double p_r_max = 0.9;
  RepresentationMasking masking = RepresentationMasking::kZero;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepStats {
  std::int64_t step = 0;  // 1-based index of the completed update
  double t_mean = 0.0;
  LossBreakdown loss;
  double grad_norm = 0.0;  // before clipping
  double lr = 0.0;
};

/// Everything sampled for one training step; exposed so tests can replay a
/// step by hand.
struct StepDraws {
  std::vector<double> t;
  std::vector<double> p_r;
  std::vector<std::uint8_t> drop;
  RngStream corruption;
};

StepDraws draw_step(const TrainingConfig& config, std::int64_t step, int batch);

/// Loss and parameter gradients of one batch under fixed draws.
struct LossAndGrad {
  LossBreakdown loss;
  Gradients grads;
};

LossAndGrad loss_and_grad(const Denoiser& model, const Codebook& codebook,
                          const SchedulePair& pair, const TrainingConfig& config,
                          const TokenBatch& x0, const StepDraws& draws);

/// Owns the optimizer state for one model. The step counter doubles as the
/// RNG counter, so a run resumed from (params, optimizer state) reproduces
/// the uninterrupted run.
class Trainer {
 public:
  Trainer(Denoiser& model, const Codebook& codebook, SchedulePair pair, TrainingConfig config);

  /// Throws NumericError (with step, times and loss parts) on a non-finite loss.
  StepStats step(const TokenBatch& x0);

  OptimizerState& optimizer() { return optimizer_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  const TrainingConfig& config() const { return config_; }
  Denoiser& model() { return model_; }

 private:
  Denoiser& model_;
  const Codebook& codebook_;
  SchedulePair pair_;
  TrainingConfig config_;
  OptimizerState optimizer_;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const StepStats& stats);

}  // namespace ccdd
