#include <cmath>

#include <gtest/gtest.h>

#include "ccdd/denoiser.hpp"
#include "ccdd/error.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace ccdd;

namespace {

DenoiserConfig small(Architecture arch) {
  DenoiserConfig c = oracle::gradcheck_config(arch);
  c.d_model = 32;
  c.n_heads = 4;
  return c;
}

class EveryArchitecture : public ::testing::TestWithParam<Architecture> {};

}  // namespace

TEST_P(EveryArchitecture, OutputShapes) {
  const Denoiser model(small(GetParam()), 1);
  const TokenBatch x = oracle::random_tokens(3, 7, 5, 2);
  const LatentBatch z = oracle::random_latents(3, 7, 4, 3);
  const std::vector<double> t{0.1, 0.5, 0.9};
  const DenoiserOutput out = model.predict(x, z, t, false);
  EXPECT_EQ(out.eps_hat.batch(), 3);
  EXPECT_EQ(out.eps_hat.length(), 7);
  EXPECT_EQ(out.eps_hat.channels(), 4);
  EXPECT_EQ(out.logits.channels(), 6);
  EXPECT_TRUE(out.eps_hat.all_finite());
  EXPECT_TRUE(out.logits.all_finite());
}

TEST_P(EveryArchitecture, GradientMatchesFiniteDifferences) {
  for (const oracle::BlockError& e : oracle::denoiser_gradcheck(oracle::gradcheck_config(GetParam()), 7)) {
    EXPECT_LT(e.rel_error, 1e-4) << e.name;
  }
}

TEST_P(EveryArchitecture, DropMakesOutputIndependentOfLatents) {
  Denoiser model(small(GetParam()), 4);
  RngStream rng(9);
  for (Matrix& p : model.params().values()) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] += 0.05 * rng.normal();
  }
  const TokenBatch x = oracle::random_tokens(2, 5, 5, 10);
  const std::vector<double> t{0.2, 0.7};
  const DenoiserOutput ref = model.predict(x, oracle::random_latents(2, 5, 4, 11), t, true);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const DenoiserOutput o = model.predict(x, oracle::random_latents(2, 5, 4, 100 + s), t, true);
    EXPECT_EQ(o.logits, ref.logits);
    for (double v : o.eps_hat.data()) EXPECT_EQ(v, 0.0);
  }
  const DenoiserOutput a = model.predict(x, oracle::random_latents(2, 5, 4, 1), t, false);
  const DenoiserOutput b = model.predict(x, oracle::random_latents(2, 5, 4, 2), t, false);
  EXPECT_NE(a.logits, b.logits);
}

TEST_P(EveryArchitecture, ThreadCountDoesNotChangeResults) {
  Denoiser model(small(GetParam()), 5);
  const TokenBatch x = oracle::random_tokens(4, 6, 5, 12);
  const LatentBatch z = oracle::random_latents(4, 6, 4, 13);
  const std::vector<double> t{0.1, 0.4, 0.6, 0.9};
  const std::vector<std::uint8_t> drop{0, 1, 0, 0};
  const ForwardPass p1 = model.forward_with_tape(x, z, t, drop);
  const Gradients g1 = model.backward(p1, z, p1.output().logits);
  model.set_num_threads(3);
  const ForwardPass p3 = model.forward_with_tape(x, z, t, drop);
  const Gradients g3 = model.backward(p3, z, p3.output().logits);
  EXPECT_EQ(p1.output().logits, p3.output().logits);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g3[i]);
}

TEST_P(EveryArchitecture, ParametersRoundTripThroughConstructor) {
  const Denoiser a(small(GetParam()), 6);
  const Denoiser b(small(GetParam()), a.params());
  const TokenBatch x = oracle::random_tokens(1, 4, 5, 14);
  const LatentBatch z = oracle::random_latents(1, 4, 4, 15);
  const std::vector<double> t{0.5};
  EXPECT_EQ(a.predict(x, z, t, false).logits, b.predict(x, z, t, false).logits);
  ParameterSet wrong = a.params();
  wrong[0] = Matrix::Zero(wrong[0].rows() + 1, wrong[0].cols());
  EXPECT_THROW(Denoiser(small(GetParam()), wrong), ConfigError);
}

INSTANTIATE_TEST_SUITE_P(Denoiser, EveryArchitecture,
                         ::testing::Values(Architecture::kMdit, Architecture::kMmdit,
                                           Architecture::kMoedit),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Denoiser, AddFusionGradients) {
  DenoiserConfig c = oracle::gradcheck_config(Architecture::kMdit);
  c.fuse = Fusion::kAdd;
  for (const oracle::BlockError& e : oracle::denoiser_gradcheck(c, 8)) {
    EXPECT_LT(e.rel_error, 1e-4) << e.name;
  }
}

TEST(Denoiser, MoeGatesAreDistributions) {
  const Denoiser model(small(Architecture::kMoedit), 3);
  const TokenBatch x = oracle::random_tokens(1, 5, 5, 1);
  const LatentBatch z = oracle::random_latents(1, 5, 4, 2);
  const std::vector<Matrix> gates = model.gate_weights(x, z, 0.4, false);
  ASSERT_EQ(gates.size(), 2u);
  for (const Matrix& g : gates) {
    EXPECT_EQ(g.rows(), 10);
    EXPECT_EQ(g.cols(), 2);
    for (Eigen::Index r = 0; r < g.rows(); ++r) EXPECT_NEAR(g.row(r).sum(), 1.0, 1e-12);
  }
  EXPECT_TRUE(Denoiser(small(Architecture::kMdit), 3).gate_weights(x, z, 0.4, false).empty());
}

TEST(Denoiser, ValidatesConfigAndInputs) {
  DenoiserConfig c = small(Architecture::kMoedit);
  c.n_experts = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small(Architecture::kMdit);
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  const Denoiser model(small(Architecture::kMdit), 1);
  const LatentBatch z = oracle::random_latents(1, 4, 4, 2);
  TokenBatch bad(1, 4);
  bad.at(0, 2) = 6;
  const std::vector<double> t{0.5};
  EXPECT_THROW(model.predict(bad, z, t, false), InputError);
  const std::vector<double> bad_t{1.5};
  EXPECT_THROW(model.predict(TokenBatch(1, 4), z, bad_t, false), DomainError);
}

TEST(Denoiser, TimestepEmbeddingLayout) {
  const Matrix e = timestep_embedding(0.25, 8);
  ASSERT_EQ(e.cols(), 8);
  for (int i = 0; i < 4; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / 4.0);
    EXPECT_NEAR(e(0, i), std::cos(250.0 * freq), 1e-12);
    EXPECT_NEAR(e(0, i + 4), std::sin(250.0 * freq), 1e-12);
  }
}
