#include "ccdd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccdd/error.hpp"

namespace ccdd {
namespace {

AlphaSigma coefficients(const ContinuousSchedule& schedule, double t) {
  return schedule.eval(std::min(t, kContinuousTMax));
}

Token draw_categorical(std::span<const double> p, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  Token last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last = static_cast<Token>(i);
    if (u < acc) return last;
  }
  return last;
}

Token argmax_token(std::span<const double> p) {
  return static_cast<Token>(std::max_element(p.begin(), p.end()) - p.begin());
}

void check_probs(std::span<const double> probs, const char* what) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw InputError(std::string(what) + ": negative or NaN probability");
    total += p;
  }
  if (probs.empty() || std::abs(total - 1.0) > 1e-9) {
    throw InputError(std::string(what) + ": probabilities must sum to 1");
  }
}

// q(x_t = b | x_s = a) for the interpolation family, with eta_{t|s} = eta_t / eta_s.
double forward_kernel(Token a, Token b, double keep, const DiscreteSchedule& schedule,
                      int vocab) {
  return keep * (a == b ? 1.0 : 0.0) + (1.0 - keep) * schedule.noise_prob(b, vocab);
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_steps < 1) throw ConfigError("n_steps must be at least 1");
  if (!(eta_ddpm >= 0.0 && eta_ddpm <= 1.0)) throw ConfigError("eta_ddpm must be in [0, 1]");
  if (!std::isfinite(cfg_w)) throw ConfigError("cfg_w must be finite");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be positive");
  }
  if (!(t_floor > 0.0 && t_floor < 1.0)) throw ConfigError("t_floor must be in (0, 1)");
  time_grid(n_steps, t_floor);
}

std::vector<double> time_grid(int n_steps, double t_floor) {
  if (n_steps < 1) throw ConfigError("n_steps must be at least 1");
  std::vector<double> grid(static_cast<std::size_t>(n_steps) + 1);
  for (int k = 0; k < n_steps; ++k) {
    grid[static_cast<std::size_t>(k)] = 1.0 - static_cast<double>(k) / n_steps;
  }
  grid.back() = t_floor;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] < grid[k - 1])) {
      throw ConfigError("time grid not strictly decreasing: n_steps too large for t_floor");
    }
  }
  return grid;
}

std::vector<double> angle_time_grid(int n_steps, double t_floor, const ContinuousSchedule& schedule) {
  std::vector<double> grid = time_grid(n_steps, t_floor);
  const double theta_hi = std::acos(std::clamp(schedule.alpha(1.0), 0.0, 1.0));
  const double theta_lo = std::acos(std::clamp(schedule.alpha(t_floor), 0.0, 1.0));
  for (int k = 1; k < n_steps; ++k) {
    const double theta = theta_hi + (theta_lo - theta_hi) * k / n_steps;
    double lo = t_floor;
    double hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (std::acos(std::clamp(schedule.alpha(mid), 0.0, 1.0)) < theta ? lo : hi) = mid;
    }
    grid[static_cast<std::size_t>(k)] = 0.5 * (lo + hi);
  }
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] < grid[k - 1])) {
      throw ConfigError("angle time grid not strictly decreasing: n_steps too large for the schedule");
    }
  }
  return grid;
}

LatentBatch predict_z0(const LatentBatch& z_t, const LatentBatch& eps_hat,
                       std::span<const double> t, const ContinuousSchedule& schedule) {
  if (!z_t.same_shape(eps_hat)) throw InputError("predict_z0: shape mismatch");
  if (t.size() != static_cast<std::size_t>(z_t.batch())) {
    throw InputError("predict_z0: need one t per sequence");
  }
  LatentBatch out(z_t.batch(), z_t.length(), z_t.channels());
  for (int b = 0; b < z_t.batch(); ++b) {
    const auto [alpha, sigma] = schedule.eval(t[static_cast<std::size_t>(b)]);
    if (!(alpha > 0.0)) throw DomainError("predict_z0: alpha_t = 0");
    out.sequence(b) = (z_t.sequence(b) - sigma * eps_hat.sequence(b)) / alpha;
  }
  return out;
}

double posterior_std(double t, double s, const ContinuousSchedule& schedule,
                     VarianceMode mode) {
  const auto [a_t, s_t] = coefficients(schedule, t);
  const auto [a_s, s_s] = coefficients(schedule, s);
  const double a_ts = a_t / a_s;
  const double fwd = std::sqrt(std::max(0.0, s_t * s_t - a_ts * a_ts * s_s * s_s));
  if (mode == VarianceMode::kAlg2Literal) return fwd;
  return s_t > 0.0 ? s_s * fwd / s_t : 0.0;
}

LatentBatch step_continuous(const LatentBatch& z_t, const LatentBatch& eps_hat, double t,
                            double s, const ContinuousSchedule& schedule,
                            const ContinuousStepOptions& options, const RngStream& rng) {
  if (!z_t.same_shape(eps_hat)) throw InputError("step_continuous: shape mismatch");
  if (!(s < t)) throw InputError("step_continuous: need s < t");
  const auto [a_t, s_t] = coefficients(schedule, t);
  const auto [a_s, s_s] = coefficients(schedule, s);
  if (!(a_t > 0.0)) throw DomainError("step_continuous: alpha_t = 0");

  double noise_std = 0.0;
  double eps_coef = s_s;
  if (options.eta_ddpm > 0.0) {
    noise_std = options.eta_ddpm * posterior_std(t, s, schedule, options.variance_mode);
    if (options.variance_mode == VarianceMode::kExactPosterior) {
      eps_coef = std::sqrt(std::max(0.0, s_s * s_s - noise_std * noise_std));
    }
  }

  LatentBatch out(z_t.batch(), z_t.length(), z_t.channels());
  for (int b = 0; b < z_t.batch(); ++b) {
    const RngStream seq = rng.split(static_cast<std::uint64_t>(b));
    for (int j = 0; j < z_t.length(); ++j) {
      RngStream noise = seq.split(static_cast<std::uint64_t>(j));
      for (int c = 0; c < z_t.channels(); ++c) {
        const double eps = eps_hat.at(b, j, c);
        const double z0 = (z_t.at(b, j, c) - s_t * eps) / a_t;
        double z = a_s * z0 + eps_coef * eps;
        if (noise_std > 0.0) z += noise_std * noise.normal();
        out.at(b, j, c) = z;
      }
    }
  }
  return out;
}

std::vector<double> posterior_discrete(Token x_t, std::span<const double> probs_hat,
                                       double t, double s, const DiscreteSchedule& schedule) {
  if (!schedule.is_masked()) return posterior_enumerate(x_t, probs_hat, t, s, schedule);
  const int vocab = static_cast<int>(probs_hat.size());
  check_probs(probs_hat, "posterior_discrete");
  if (!(s < t)) throw InputError("posterior_discrete: need s < t");
  if (x_t < 0 || x_t > vocab) throw InputError("posterior_discrete: token out of range");

  std::vector<double> out(static_cast<std::size_t>(vocab) + 1, 0.0);
  if (x_t != vocab) {
    out[static_cast<std::size_t>(x_t)] = 1.0;
    return out;
  }
  const double eta_t = schedule.eval(t);
  const double eta_s = schedule.eval(s);
  if (!(eta_t < 1.0)) throw InputError("posterior_discrete: masked token where eta_t = 1");
  const double unmask = (eta_s - eta_t) / (1.0 - eta_t);
  out[static_cast<std::size_t>(vocab)] = (1.0 - eta_s) / (1.0 - eta_t);
  for (int v = 0; v < vocab; ++v) {
    out[static_cast<std::size_t>(v)] = unmask * probs_hat[static_cast<std::size_t>(v)];
  }
  return out;
}

std::vector<double> posterior_enumerate(Token x_t, std::span<const double> probs_hat,
                                        double t, double s, const DiscreteSchedule& schedule) {
  const int vocab = static_cast<int>(probs_hat.size());
  check_probs(probs_hat, "posterior_enumerate");
  if (!(s < t)) throw InputError("posterior_enumerate: need s < t");
  if (x_t < 0 || x_t > vocab) throw InputError("posterior_enumerate: token out of range");
  const double eta_t = schedule.eval(t);
  const double eta_s = schedule.eval(s);
  if (!(eta_s > 0.0)) throw InputError("posterior_enumerate: eta_s = 0");
  const double keep_ts = eta_t / eta_s;
  const int augmented = vocab + 1;

  // p(x0 | x_t) is the model's distribution restricted to clean tokens that
  // can reach x_t.
  std::vector<double> weight(static_cast<std::size_t>(vocab), 0.0);
  double weight_total = 0.0;
  for (int x0 = 0; x0 < vocab; ++x0) {
    if (forward_kernel(x0, x_t, eta_t, schedule, vocab) > 0.0) {
      weight[static_cast<std::size_t>(x0)] = probs_hat[static_cast<std::size_t>(x0)];
      weight_total += weight[static_cast<std::size_t>(x0)];
    }
  }
  if (!(weight_total > 0.0)) {
    throw InputError("posterior_enumerate: x_t is unreachable under the model's distribution");
  }

  std::vector<double> out(static_cast<std::size_t>(augmented), 0.0);
  for (int x0 = 0; x0 < vocab; ++x0) {
    const double w = weight[static_cast<std::size_t>(x0)] / weight_total;
    if (w == 0.0) continue;
    const double evidence = forward_kernel(x0, x_t, eta_t, schedule, vocab);
    for (int xs = 0; xs < augmented; ++xs) {
      const double joint = forward_kernel(xs, x_t, keep_ts, schedule, vocab) *
                           forward_kernel(x0, xs, eta_s, schedule, vocab);
      out[static_cast<std::size_t>(xs)] += w * joint / evidence;
    }
  }
  return out;
}

Tensor3 cfg_logits(const Tensor3& logits_c, const Tensor3& logits_u, double w) {
  if (!logits_c.same_shape(logits_u)) throw InputError("cfg_logits: shape mismatch");
  Tensor3 out = logits_c;
  auto& d = out.data();
  const auto& u = logits_u.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = w * d[i] + (1.0 - w) * u[i];
  return out;
}

std::vector<double> token_probs(std::span<const double> logits, int vocab_size,
                                double temperature) {
  if (vocab_size < 1 || static_cast<int>(logits.size()) < vocab_size) {
    throw InputError("token_probs: logits shorter than the vocabulary");
  }
  std::vector<double> p(static_cast<std::size_t>(vocab_size));
  double m = -INFINITY;
  for (int v = 0; v < vocab_size; ++v) m = std::max(m, logits[static_cast<std::size_t>(v)] / temperature);
  double z = 0.0;
  for (int v = 0; v < vocab_size; ++v) {
    p[static_cast<std::size_t>(v)] = std::exp(logits[static_cast<std::size_t>(v)] / temperature - m);
    z += p[static_cast<std::size_t>(v)];
  }
  for (double& x : p) x /= z;
  return p;
}

SampleResult sample(const JointDenoiser& model, const ContinuousSchedule& continuous,
                    const DiscreteSchedule& discrete, const SamplerConfig& config, int length,
                    int batch, const RngStream& rng, const Codebook* codebook) {
  config.validate();
  if (length < 1 || batch < 1) throw InputError("sample: length and batch must be positive");
  if (config.decode_source == DecodeSource::kNearestNeighbor && codebook == nullptr) {
    throw ConfigError("sample: nearest-neighbor decoding needs a codebook");
  }
  const int vocab = model.vocab_size();
  const int mask = vocab;
  const int dim = model.latent_dim();
  const std::vector<double> grid = config.grid == TimeGrid::kAngle
                                       ? angle_time_grid(config.n_steps, config.t_floor, continuous)
                                       : time_grid(config.n_steps, config.t_floor);

  SampleResult res;
  res.tokens = TokenBatch(batch, length, mask);
  res.latents = LatentBatch(batch, length, dim);
  const RngStream init = rng.split(0);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < length; ++j) {
      RngStream r = init.split(static_cast<std::uint64_t>(b)).split(static_cast<std::uint64_t>(j));
      if (!discrete.is_masked()) {
        res.tokens.at(b, j) = static_cast<Token>(std::min<double>(vocab - 1, std::floor(r.uniform() * vocab)));
      }
      for (int c = 0; c < dim; ++c) res.latents.at(b, j, c) = r.normal();
    }
  }

  auto predict_logits = [&](const std::vector<double>& t, DenoiserOutput& cond) {
    cond = model.predict(res.tokens, res.latents, t, false);
    ++res.forward_calls;
    if (config.cfg_w == 1.0) return cond.logits;
    const DenoiserOutput uncond = model.predict(res.tokens, res.latents, t, true);
    ++res.forward_calls;
    return cfg_logits(cond.logits, uncond.logits, config.cfg_w);
  };

  const ContinuousStepOptions cont_opts{config.eta_ddpm, config.variance_mode};
  for (int k = 0; k < config.n_steps; ++k) {
    const double t = grid[static_cast<std::size_t>(k)];
    const double s = grid[static_cast<std::size_t>(k) + 1];
    const std::vector<double> t_vec(static_cast<std::size_t>(batch), t);
    DenoiserOutput cond;
    const Tensor3 logits = predict_logits(t_vec, cond);
    const RngStream step_rng = rng.split(static_cast<std::uint64_t>(k) + 1);
    const RngStream token_rng = step_rng.split(0);

    TokenBatch next = res.tokens;
    for (int b = 0; b < batch; ++b) {
      for (int j = 0; j < length; ++j) {
        const Token x = res.tokens.at(b, j);
        if (discrete.is_masked() && x != mask) continue;
        const std::vector<double> probs = token_probs(logits.position(b, j), vocab, config.temperature);
        RngStream r = token_rng.split(static_cast<std::uint64_t>(b)).split(static_cast<std::uint64_t>(j));
        std::vector<double> post = posterior_discrete(x, probs, t, s, discrete);
        if (config.argmax && discrete.is_masked()) {
          // Unmasking stays stochastic; the revealed token is the mode.
          if (r.uniform() >= post[static_cast<std::size_t>(mask)]) next.at(b, j) = argmax_token(probs);
        } else if (config.argmax) {
          next.at(b, j) = argmax_token(post);
        } else {
          next.at(b, j) = draw_categorical(post, r);
        }
      }
    }
    res.latents = step_continuous(res.latents, cond.eps_hat, t, s, continuous, cont_opts,
                                  step_rng.split(1));
    res.tokens = std::move(next);
  }

  if (discrete.is_masked()) {
    bool any_masked = false;
    for (Token x : res.tokens.ids()) any_masked = any_masked || x == mask;
    if (any_masked) {
      const std::vector<double> t_vec(static_cast<std::size_t>(batch), grid.back());
      DenoiserOutput cond;
      const Tensor3 logits = predict_logits(t_vec, cond);
      const RngStream final_rng = rng.split(static_cast<std::uint64_t>(config.n_steps) + 1);
      for (int b = 0; b < batch; ++b) {
        for (int j = 0; j < length; ++j) {
          if (res.tokens.at(b, j) != mask) continue;
          const std::vector<double> probs = token_probs(logits.position(b, j), vocab, config.temperature);
          RngStream r = final_rng.split(static_cast<std::uint64_t>(b)).split(static_cast<std::uint64_t>(j));
          res.tokens.at(b, j) = config.argmax ? argmax_token(probs) : draw_categorical(probs, r);
          ++res.forced_unmasks;
        }
      }
    }
  }

  if (config.decode_source == DecodeSource::kNearestNeighbor) {
    res.tokens = codebook->decode_nn(res.latents);
  }
  return res;
}

}  // namespace ccdd
