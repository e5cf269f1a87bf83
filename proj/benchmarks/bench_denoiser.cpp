#include <vector>

#include <benchmark/benchmark.h>

#include "ccdd/corruption.hpp"
#include "ccdd/denoiser.hpp"
#include "ccdd/embedder.hpp"
#include "ccdd/rng.hpp"
#include "ccdd/sampler.hpp"
#include "ccdd/schedules.hpp"
#include "ccdd/training.hpp"

namespace {

using namespace ccdd;

constexpr int kVocab = 8;
constexpr int kLength = 32;

DenoiserConfig tiny(Architecture arch) {
  DenoiserConfig c;
  c.arch = arch;
  c.vocab_augmented = kVocab + 1;
  c.d_latent = 16;
  return c;
}

TokenBatch random_tokens(int batch, std::uint64_t seed) {
  TokenBatch x(batch, kLength);
  RngStream rng(seed);
  for (Token& t : x.ids()) t = static_cast<Token>(rng() % kVocab);
  return x;
}

void BM_Forward(benchmark::State& state) {
  const auto arch = static_cast<Architecture>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  const Denoiser model(tiny(arch), 1);
  const TokenBatch x = random_tokens(batch, 2);
  LatentBatch z(batch, kLength, 16);
  RngStream rng(3);
  for (double& v : z.data()) v = rng.normal();
  const std::vector<double> t(static_cast<std::size_t>(batch), 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict(x, z, t, false));
  }
  state.SetItemsProcessed(state.iterations() * batch * kLength);
}
BENCHMARK(BM_Forward)->ArgsProduct({{0, 1, 2}, {1, 16}})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto arch = static_cast<Architecture>(state.range(0));
  Denoiser model(tiny(arch), 1);
  const Codebook codebook = Codebook::random_orthonormal(kVocab, 16, 4);
  TrainingConfig cfg;
  Trainer trainer(model, codebook, SchedulePair::defaults(), cfg);
  const TokenBatch x = random_tokens(16, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.step(x));
  }
  state.SetItemsProcessed(state.iterations() * 16 * kLength);
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_SampleStep(benchmark::State& state) {
  const Denoiser model(tiny(Architecture::kMdit), 1);
  const SchedulePair pair = SchedulePair::defaults();
  SamplerConfig cfg;
  cfg.n_steps = 8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sample(model, pair.continuous(), pair.discrete(), cfg, kLength, 4, RngStream(6)));
  }
}
BENCHMARK(BM_SampleStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
