#include "ccdd/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ccdd/error.hpp"
#include "ccdd/rng.hpp"

namespace ccdd {

void LossWeights::validate() const {
  auto nonneg = [](double v, const char* key) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string(key) + " must be a finite non-negative number");
    }
  };
  nonneg(gamma_cont, "gamma_cont");
  nonneg(gamma_disc, "gamma_disc");
  nonneg(lambda_cont, "lambda_cont");
}

double loss_continuous(const LatentBatch& eps, const LatentBatch& eps_hat,
                       std::span<const std::uint8_t> include, double lambda_cont,
                       LatentBatch* grad) {
  if (!eps.same_shape(eps_hat)) throw InputError("loss_continuous: shape mismatch");
  if (!include.empty() && include.size() != static_cast<std::size_t>(eps.batch())) {
    throw InputError("loss_continuous: need one include flag per sequence");
  }
  if (grad != nullptr) *grad = LatentBatch(eps.batch(), eps.length(), eps.channels());
  int count = 0;
  for (int b = 0; b < eps.batch(); ++b) {
    if (include.empty() || include[static_cast<std::size_t>(b)]) ++count;
  }
  if (count == 0 || eps.size() == 0) return 0.0;

  const double per_element = 1.0 / (static_cast<double>(eps.length()) * eps.channels());
  const double scale = lambda_cont * per_element / count;
  double total = 0.0;
  for (int b = 0; b < eps.batch(); ++b) {
    if (!include.empty() && !include[static_cast<std::size_t>(b)]) continue;
    const auto diff = (eps_hat.sequence(b) - eps.sequence(b)).eval();
    total += diff.squaredNorm();
    if (grad != nullptr) grad->sequence(b) = 2.0 * scale * diff;
  }
  return scale * total;
}

double discrete_weight(const DiscreteSchedule& schedule, LambdaSpec lambda, double t) {
  return lambda == LambdaSpec::kNelbo ? schedule.nelbo_weight(t) : 1.0;
}

double loss_discrete(const Tensor3& logits, const TokenBatch& x0, const MaskGrid& positions,
                     std::span<const double> t, const DiscreteSchedule& schedule,
                     LambdaSpec lambda, Tensor3* grad) {
  const int batch = x0.batch();
  const int length = x0.length();
  const int vocab = logits.channels() - 1;
  if (logits.batch() != batch || logits.length() != length || vocab < 1) {
    throw InputError("loss_discrete: logits do not cover the token batch");
  }
  if (positions.size() != x0.size() || t.size() != static_cast<std::size_t>(batch)) {
    throw InputError("loss_discrete: mask grid or time vector has the wrong size");
  }
  if (grad != nullptr) *grad = Tensor3(batch, length, logits.channels());
  if (x0.size() == 0) return 0.0;

  const double norm = 1.0 / (static_cast<double>(batch) * length);
  double total = 0.0;
  Eigen::VectorXd p(vocab);
  for (int b = 0; b < batch; ++b) {
    double weight = -1.0;
    for (int j = 0; j < length; ++j) {
      if (!positions[static_cast<std::size_t>(b) * length + j]) continue;
      const Token target = x0.at(b, j);
      if (target < 0 || target >= vocab) {
        throw InputError("loss_discrete: clean token at a scored position is not an ordinary token");
      }
      if (weight < 0.0) weight = discrete_weight(schedule, lambda, t[static_cast<std::size_t>(b)]);
      const auto row = logits.position(b, j);
      double m = row[0];
      for (int v = 1; v < vocab; ++v) m = std::max(m, row[static_cast<std::size_t>(v)]);
      double z = 0.0;
      for (int v = 0; v < vocab; ++v) {
        p(v) = std::exp(row[static_cast<std::size_t>(v)] - m);
        z += p(v);
      }
      const double log_p = row[static_cast<std::size_t>(target)] - m - std::log(z);
      total -= weight * log_p;
      if (grad != nullptr) {
        const double c = weight * norm;
        auto g = grad->position(b, j);
        for (int v = 0; v < vocab; ++v) g[static_cast<std::size_t>(v)] = c * p(v) / z;
        g[static_cast<std::size_t>(target)] -= c;
      }
    }
  }
  return norm * total;
}

LossBreakdown total_loss(double l_cont, double l_disc, const LossWeights& weights) {
  weights.validate();
  LossBreakdown out;
  out.l_cont = l_cont;
  out.l_disc = l_disc;
  out.total = weights.gamma_cont * l_cont + weights.gamma_disc * l_disc;
  out.weights = weights;
  return out;
}

// ---- optimizer ------------------------------------------------------------------

void OptimizerConfig::validate() const {
  auto fail = [](const char* key, const char* why) {
    throw ConfigError(std::string(key) + " " + why);
  };
  if (!(lr > 0.0)) fail("lr", "must be positive");
  if (warmup_steps < 0) fail("warmup_steps", "must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("adam_beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("adam_beta2", "must be in [0, 1)");
  if (!(eps > 0.0)) fail("adam_eps", "must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay", "must be non-negative");
  if (!(grad_clip > 0.0)) fail("grad_clip", "must be positive");
}

double OptimizerConfig::rate_at(std::int64_t step) const {
  if (warmup_steps <= 0) return lr;
  return lr * std::min(1.0, static_cast<double>(step + 1) / warmup_steps);
}

OptimizerState OptimizerState::init(const ParameterSet& params, const OptimizerConfig& config) {
  config.validate();
  OptimizerState s;
  s.config = config;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  return s;
}

double global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

double clip_global_norm(Gradients& grads, double clip) {
  const double norm = global_norm(grads);
  if (norm > clip) {
    const double f = clip / norm;
    for (Matrix& g : grads) g *= f;
  }
  return norm;
}

double adamw_update(ParameterSet& params, const Gradients& grads, OptimizerState& state) {
  if (grads.size() != static_cast<std::size_t>(params.size()) ||
      state.m.size() != grads.size() || state.v.size() != grads.size()) {
    throw InputError("adamw_update: gradient/moment count does not match parameters");
  }
  const OptimizerConfig& c = state.config;
  const double lr = c.rate_at(state.step);
  ++state.step;
  const double k = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, k);
  const double bc2 = 1.0 - std::pow(c.beta2, k);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Matrix& p = params[static_cast<int>(i)];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    const Matrix& g = grads[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    p *= 1.0 - lr * c.weight_decay;
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  }
  return lr;
}

// ---- training step ------------------------------------------------------------------

void TrainingConfig::validate() const {
  weights.validate();
  optimizer.validate();
  if (!(t_floor > 0.0 && t_floor < 1.0)) throw ConfigError("t_floor must be in (0, 1)");
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) throw ConfigError("p_drop must be in [0, 1]");
  if (!(p_r_min >= 0.0 && p_r_min <= p_r_max && p_r_max <= 1.0)) {
    throw ConfigError("p_r_min/p_r_max must satisfy 0 <= p_r_min <= p_r_max <= 1");
  }
}

StepDraws draw_step(const TrainingConfig& config, std::int64_t step, int batch) {
  const auto counter = static_cast<std::uint64_t>(step);
  RngStream time_rng = derive_stream(config.seed, StreamTag::kTime, counter);
  RngStream pr_rng = derive_stream(config.seed, StreamTag::kRepresentation, counter);
  RngStream drop_rng = derive_stream(config.seed, StreamTag::kDrop, counter);
  StepDraws d{{}, {}, {}, derive_stream(config.seed, StreamTag::kCorrupt, counter)};
  for (int b = 0; b < batch; ++b) {
    d.t.push_back(config.t_floor + (1.0 - config.t_floor) * time_rng.uniform());
    d.p_r.push_back(config.p_r_min + (config.p_r_max - config.p_r_min) * pr_rng.uniform());
    d.drop.push_back(drop_rng.bernoulli(config.p_drop) ? 1 : 0);
  }
  return d;
}

LossAndGrad loss_and_grad(const Denoiser& model, const Codebook& codebook,
                          const SchedulePair& pair, const TrainingConfig& config,
                          const TokenBatch& x0, const StepDraws& draws) {
  const int vocab = model.vocab_size();
  if (codebook.vocab_size() != vocab || codebook.dim() != model.latent_dim()) {
    throw ConfigError("codebook shape does not match the denoiser (V, d_latent)");
  }
  const LatentBatch z0 = codebook.encode(x0);
  const JointCorruptedBatch jc =
      corrupt_joint(x0, z0, draws.t, pair, vocab, draws.p_r, draws.corruption,
                    {config.masking, &codebook});
  const ForwardPass pass = model.forward_with_tape(jc.x_t, jc.z_t, draws.t, draws.drop);

  std::vector<std::uint8_t> include(draws.drop.size());
  for (std::size_t b = 0; b < include.size(); ++b) include[b] = draws.drop[b] ? 0 : 1;

  const LossWeights& w = config.weights;
  LatentBatch g_eps;
  const double l_cont = loss_continuous(jc.eps, pass.output().eps_hat, include,
                                        w.lambda_cont, &g_eps);
  const MaskGrid positions =
      pair.discrete().is_masked() ? jc.mask_indicator : MaskGrid(x0.size(), 1);
  Tensor3 g_logits;
  const double l_disc = loss_discrete(pass.output().logits, x0, positions, draws.t,
                                      pair.discrete(), w.lambda_disc, &g_logits);

  for (double& g : g_eps.data()) g *= w.gamma_cont;
  for (double& g : g_logits.data()) g *= w.gamma_disc;
  return {total_loss(l_cont, l_disc, w), model.backward(pass, g_eps, g_logits)};
}

Trainer::Trainer(Denoiser& model, const Codebook& codebook, SchedulePair pair,
                 TrainingConfig config)
    : model_(model), codebook_(codebook), pair_(std::move(pair)), config_(std::move(config)) {
  config_.validate();
  optimizer_ = OptimizerState::init(model_.params(), config_.optimizer);
}

StepStats Trainer::step(const TokenBatch& x0) {
  const StepDraws draws = draw_step(config_, optimizer_.step, x0.batch());
  LossAndGrad lg = loss_and_grad(model_, codebook_, pair_, config_, x0, draws);

  StepStats stats;
  stats.loss = lg.loss;
  for (double t : draws.t) stats.t_mean += t;
  if (!draws.t.empty()) stats.t_mean /= static_cast<double>(draws.t.size());

  const double norm = clip_global_norm(lg.grads, config_.optimizer.grad_clip);
  if (!std::isfinite(lg.loss.total) || !std::isfinite(norm)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "non-finite loss at step " << optimizer_.step + 1 << " (l_cont=" << lg.loss.l_cont
        << ", l_disc=" << lg.loss.l_disc << ", grad_norm=" << norm << ", t=[";
    for (std::size_t i = 0; i < draws.t.size(); ++i) msg << (i ? " " : "") << draws.t[i];
    msg << "])";
    throw NumericError(msg.str());
  }
  stats.grad_norm = norm;
  stats.lr = adamw_update(model_.params(), lg.grads, optimizer_);
  stats.step = optimizer_.step;
  return stats;
}

std::string metrics_csv_header() { return "step,t_mean,l_cont,l_disc,total,grad_norm,lr"; }

std::string metrics_csv_row(const StepStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                static_cast<long long>(s.step), s.t_mean, s.loss.l_cont, s.loss.l_disc,
                s.loss.total, s.grad_norm, s.lr);
  return buf;
}

}  // namespace ccdd
