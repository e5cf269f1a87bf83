#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ccdd/error.hpp"
#include "ccdd/sampler.hpp"
#include "oracles.hpp"

using namespace ccdd;

TEST(Sampler, TimeGrid) {
  const std::vector<double> g = time_grid(4, 1e-4);
  const std::vector<double> expected{1.0, 0.75, 0.5, 0.25, 1e-4};
  ASSERT_EQ(g.size(), expected.size());
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(g[i], expected[i]);
  EXPECT_THROW(time_grid(0, 1e-4), ConfigError);
  EXPECT_THROW(time_grid(4, 0.3), ConfigError);
}

TEST(Sampler, PredictZ0InvertsForwardProcess) {
  const auto sched = ContinuousSchedule::concave_sqrt();
  const LatentBatch z0 = oracle::random_latents(2, 3, 4, 1);
  const LatentBatch eps = oracle::random_latents(2, 3, 4, 2);
  const std::vector<double> t{0.2, 0.9};
  LatentBatch zt(2, 3, 4);
  for (int b = 0; b < 2; ++b) {
    const double a = std::sqrt(1 - t[static_cast<std::size_t>(b)]);
    const double s = std::sqrt(t[static_cast<std::size_t>(b)]);
    zt.sequence(b) = a * z0.sequence(b) + s * eps.sequence(b);
  }
  const LatentBatch back = predict_z0(zt, eps, t, sched);
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_NEAR(back.data()[i], z0.data()[i], 1e-13);
}

TEST(Sampler, MaskedPosteriorMatchesEnumeration) {
  RngStream rng(3);
  const auto sched = DiscreteSchedule::masked_linear();
  for (int trial = 0; trial < 500; ++trial) {
    const int vocab = 2 + static_cast<int>(rng() % 10);
    std::vector<double> p(static_cast<std::size_t>(vocab));
    double z = 0.0;
    for (double& v : p) z += (v = rng.uniform() + 1e-3);
    for (double& v : p) v /= z;
    const double t = 0.05 + 0.95 * rng.uniform();
    const double s = t * rng.uniform();
    const Token xt = rng.uniform() < 0.7 ? vocab : static_cast<Token>(rng() % static_cast<std::uint64_t>(vocab));
    const std::vector<double> closed = posterior_discrete(xt, p, t, s, sched);
    const std::vector<double> brute = posterior_enumerate(xt, p, t, s, sched);
    ASSERT_EQ(closed.size(), static_cast<std::size_t>(vocab + 1));
    double total = 0.0;
    for (std::size_t i = 0; i < closed.size(); ++i) {
      EXPECT_NEAR(closed[i], brute[i], 1e-12);
      total += closed[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    if (xt != vocab) EXPECT_EQ(closed[static_cast<std::size_t>(xt)], 1.0);
  }
}

TEST(Sampler, MaskedPosteriorKeepsMaskWithRatio) {
  const std::vector<double> p{0.5, 0.25, 0.25};
  const std::vector<double> post = posterior_discrete(3, p, 0.8, 0.2, DiscreteSchedule::masked_linear());
  EXPECT_NEAR(post[3], 0.25, 1e-15);
  EXPECT_NEAR(post[0], 0.75 * 0.5, 1e-15);
}

TEST(Sampler, UniformPosteriorIsDistribution) {
  const std::vector<double> p{0.1, 0.6, 0.3};
  const std::vector<double> post = posterior_discrete(1, p, 0.7, 0.4, DiscreteSchedule::uniform(3.0));
  double total = 0;
  for (double v : post) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(post[3], 0.0);
}

TEST(Sampler, CfgIdentities) {
  const Tensor3 c = oracle::random_latents(2, 3, 5, 4);
  const Tensor3 u = oracle::random_latents(2, 3, 5, 5);
  EXPECT_EQ(cfg_logits(c, u, 1.0), c);
  EXPECT_EQ(cfg_logits(c, u, 0.0), u);
  const Tensor3 w2 = cfg_logits(c, u, 2.0);
  EXPECT_NEAR(w2.at(1, 2, 3), 2 * c.at(1, 2, 3) - u.at(1, 2, 3), 1e-14);
}

TEST(Sampler, TokenProbsIgnoreMaskChannel) {
  const std::vector<double> logits{0.0, std::log(3.0), 50.0};
  const std::vector<double> p = token_probs(logits, 2);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
  const std::vector<double> hot = token_probs(logits, 2, 0.5);
  EXPECT_NEAR(hot[1], 0.9, 1e-14);
}

namespace {

/// Deterministic DDIM with the Gaussian oracle is affine in z, so the
/// terminal law of z_1 ~ N(0, 1) follows from a scalar recursion.
std::pair<double, double> ddim_affine_law(double mu, double s, const std::vector<double>& grid) {
  double m = 0.0;
  double v = 1.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = std::min(grid[k], 1.0 - 1e-6);
    const double a = std::sqrt(1.0 - t), sg = std::sqrt(t);
    const double as = std::sqrt(1.0 - grid[k + 1]), ss = std::sqrt(grid[k + 1]);
    const double g = sg / (a * a * s * s + sg * sg);
    // eps = g (z - a mu); z0 = (z - sg eps) / a; z_s = as z0 + ss eps.
    const double slope = as * (1.0 - sg * g) / a + ss * g;
    const double offset = (as * sg - ss * a) * g * mu;
    m = slope * m + offset;
    v = slope * slope * v;
  }
  return {m, v};
}

}  // namespace

TEST(Sampler, DdimMatchesAffineOracle) {
  const double mu = 2.0, s = 0.5;
  const oracle::GaussianEps model(mu, s, 8, 3);
  const auto pair = SchedulePair::defaults();
  for (TimeGrid kind : {TimeGrid::kUniform, TimeGrid::kAngle}) {
    SamplerConfig cfg;
    cfg.n_steps = 64;
    cfg.eta_ddpm = 0.0;
    cfg.grid = kind;
    const std::vector<double> grid = kind == TimeGrid::kAngle
                                         ? angle_time_grid(64, cfg.t_floor, pair.continuous())
                                         : time_grid(64, cfg.t_floor);
    const auto [m, v] = ddim_affine_law(mu, s, grid);
    const SampleResult r = sample(model, pair.continuous(), pair.discrete(), cfg, 10, 200, RngStream(7));
    const double n = static_cast<double>(r.latents.size());
    EXPECT_NEAR(oracle::mean(r.latents.data()), m, 5 * std::sqrt(v / n));
    EXPECT_NEAR(oracle::variance(r.latents.data()), v, 5 * v * std::sqrt(2.0 / (n - 1)));
    EXPECT_NEAR(m, mu, 0.01 * mu);
    if (kind == TimeGrid::kAngle) EXPECT_NEAR(v, s * s, 0.05 * s * s);
  }
}

TEST(Sampler, AngleGridIsUniformInArccosAlpha) {
  const auto sched = ContinuousSchedule::concave_sqrt();
  const std::vector<double> g = angle_time_grid(16, 1e-4, sched);
  ASSERT_EQ(g.size(), 17u);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_EQ(g.back(), 1e-4);
  const double lo = std::acos(std::sqrt(1 - 1e-4));
  for (int k = 0; k <= 16; ++k) {
    const double theta = std::acos(std::sqrt(1.0 - g[static_cast<std::size_t>(k)]));
    EXPECT_NEAR(theta, M_PI / 2 + (lo - M_PI / 2) * k / 16.0, 1e-9);
  }
  EXPECT_THROW(angle_time_grid(100000, 1e-4, sched), ConfigError);
}

TEST(Sampler, ExactPosteriorStepMatchesConjugateGaussian) {
  const auto sched = ContinuousSchedule::concave_sqrt();
  const double z0 = 0.7, t = 0.6, s = 0.3, zt_value = -0.4;
  const oracle::PointEps model(z0, 10, 2);
  const int batch = 1000, length = 10;
  const LatentBatch zt(batch, length, 10, zt_value);
  const std::vector<double> tv(batch, t);
  const DenoiserOutput out = model.predict(TokenBatch(batch, length), zt, tv, false);
  const ContinuousStepOptions opts{1.0, VarianceMode::kExactPosterior};
  const LatentBatch zs = step_continuous(zt, out.eps_hat, t, s, sched, opts, RngStream(9));

  const double at = std::sqrt(1 - t), as = std::sqrt(1 - s);
  const double vt = t, vs = s;
  const double ats = at / as;
  const double vts = vt - ats * ats * vs;
  const double mean = as * vts / vt * z0 + ats * vs / vt * zt_value;
  const double var = vts * vs / vt;
  const double n = static_cast<double>(zs.size());
  EXPECT_NEAR(oracle::mean(zs.data()), mean, 5 * std::sqrt(var / n));
  EXPECT_NEAR(oracle::variance(zs.data()), var, 5 * var * std::sqrt(2.0 / (n - 1)));
  EXPECT_NEAR(posterior_std(t, s, sched, VarianceMode::kExactPosterior), std::sqrt(var), 1e-14);
  EXPECT_NEAR(posterior_std(t, s, sched, VarianceMode::kAlg2Literal), std::sqrt(vts), 1e-14);
}

TEST(Sampler, DeterministicStepWithoutNoise) {
  const auto sched = ContinuousSchedule::concave_sqrt();
  const LatentBatch zt = oracle::random_latents(1, 2, 3, 1);
  const LatentBatch eps = oracle::random_latents(1, 2, 3, 2);
  const ContinuousStepOptions opts{0.0, VarianceMode::kExactPosterior};
  const LatentBatch a = step_continuous(zt, eps, 0.5, 0.25, sched, opts, RngStream(1));
  const LatentBatch b = step_continuous(zt, eps, 0.5, 0.25, sched, opts, RngStream(2));
  EXPECT_EQ(a, b);
  const double z0 = (zt.at(0, 1, 2) - std::sqrt(0.5) * eps.at(0, 1, 2)) / std::sqrt(0.5);
  EXPECT_NEAR(a.at(0, 1, 2), std::sqrt(0.75) * z0 + 0.5 * eps.at(0, 1, 2), 1e-14);
  EXPECT_THROW(step_continuous(zt, eps, 0.25, 0.5, sched, opts, RngStream(1)), InputError);
}

TEST(Sampler, FullRunProducesCleanTokens) {
  const oracle::UniformLogits model(4, 3);
  const auto pair = SchedulePair::defaults();
  SamplerConfig cfg;
  cfg.n_steps = 16;
  const SampleResult a = sample(model, pair.continuous(), pair.discrete(), cfg, 12, 5, RngStream(1));
  const SampleResult b = sample(model, pair.continuous(), pair.discrete(), cfg, 12, 5, RngStream(1));
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.latents, b.latents);
  for (Token x : a.tokens.ids()) {
    EXPECT_GE(x, 0);
    EXPECT_LT(x, 4);
  }
  EXPECT_GE(a.forward_calls, 16);
  EXPECT_LE(a.forward_calls, 17);
  cfg.cfg_w = 1.5;
  const SampleResult guided = sample(model, pair.continuous(), pair.discrete(), cfg, 12, 5, RngStream(1));
  EXPECT_GE(guided.forward_calls, 32);
}

TEST(Sampler, ArgmaxRevealsTheMode) {
  const oracle::FixedLogits model({0.0, 1.0, 0.5, 0.0}, 2);
  const auto pair = SchedulePair::defaults();
  SamplerConfig cfg;
  cfg.n_steps = 8;
  cfg.argmax = true;
  const SampleResult r = sample(model, pair.continuous(), pair.discrete(), cfg, 6, 3, RngStream(2));
  for (Token x : r.tokens.ids()) EXPECT_EQ(x, 1);
}

TEST(Sampler, UniformScheduleAndNearestNeighbourDecode) {
  const oracle::UniformLogits model(3, 3);
  const ContinuousSchedule cont = ContinuousSchedule::concave_sqrt();
  const DiscreteSchedule disc = DiscreteSchedule::uniform(3.0);
  SamplerConfig cfg;
  cfg.n_steps = 8;
  const SampleResult r = sample(model, cont, disc, cfg, 5, 2, RngStream(3));
  EXPECT_EQ(r.forced_unmasks, 0);
  for (Token x : r.tokens.ids()) EXPECT_LT(x, 3);
  cfg.decode_source = DecodeSource::kNearestNeighbor;
  EXPECT_THROW(sample(model, cont, disc, cfg, 5, 2, RngStream(3)), ConfigError);
  const Codebook cb = Codebook::random_orthonormal(3, 3, 1);
  const SampleResult nn = sample(model, cont, disc, cfg, 5, 2, RngStream(3), &cb);
  EXPECT_EQ(nn.tokens, cb.decode_nn(nn.latents));
}
