#include "ccdd/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccdd/error.hpp"

namespace ccdd {
namespace {

// Substream ids below a position stream.
constexpr std::uint64_t kTokenStream = 0;
constexpr std::uint64_t kGaussStream = 1;
// Per-sequence stream for the representation-masking coin.
constexpr std::uint64_t kRepresentationStream = 1ULL << 62;

void check_times(std::span<const double> t, int batch, const char* what) {
  if (static_cast<int>(t.size()) != batch) {
    throw InputError(std::string(what) + ": expected " + std::to_string(batch) +
                     " times, got " + std::to_string(t.size()));
  }
  for (double v : t) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError(std::string(what) + ": t outside [0, 1]");
    }
  }
}

}  // namespace

GaussianCorruption corrupt_continuous(const LatentBatch& z0,
                                      std::span<const double> t,
                                      const ContinuousSchedule& schedule,
                                      const RngStream& rng) {
  check_times(t, z0.batch(), "corrupt_continuous");
  if (!z0.all_finite()) throw InputError("corrupt_continuous: non-finite z0");

  GaussianCorruption out{LatentBatch(z0.batch(), z0.length(), z0.channels()),
                         LatentBatch(z0.batch(), z0.length(), z0.channels())};
  for (int b = 0; b < z0.batch(); ++b) {
    const auto [alpha, sigma] = schedule.eval(t[b]);
    const RngStream seq = rng.split(b);
    for (int j = 0; j < z0.length(); ++j) {
      RngStream gauss = seq.split(j).split(kGaussStream);
      for (int c = 0; c < z0.channels(); ++c) {
        const double e = gauss.normal();
        out.eps.at(b, j, c) = e;
        out.z_t.at(b, j, c) = alpha * z0.at(b, j, c) + sigma * e;
      }
    }
  }
  return out;
}

TokenBatch corrupt_discrete(const TokenBatch& x0, std::span<const double> t,
                            const DiscreteSchedule& schedule, int vocab_size,
                            const RngStream& rng) {
  check_times(t, x0.batch(), "corrupt_discrete");
  for (Token id : x0.ids()) {
    if (id == vocab_size) {
      throw InputError("corrupt_discrete: clean data contains the mask symbol");
    }
    if (id < 0 || id > vocab_size) {
      throw InputError("corrupt_discrete: token id " + std::to_string(id) + " out of range");
    }
  }

  TokenBatch x_t = x0;
  for (int b = 0; b < x0.batch(); ++b) {
    const double eta = schedule.eval(t[b]);
    const RngStream seq = rng.split(b);
    for (int j = 0; j < x0.length(); ++j) {
      RngStream coin = seq.split(j).split(kTokenStream);
      if (coin.uniform() < eta) continue;
      if (schedule.is_masked()) {
        x_t.at(b, j) = vocab_size;
      } else {
        x_t.at(b, j) = static_cast<Token>(
            std::min<double>(vocab_size - 1, std::floor(coin.uniform() * vocab_size)));
      }
    }
  }
  return x_t;
}

MaskGrid mask_indicator(const TokenBatch& x_t, int vocab_size) {
  MaskGrid mask(x_t.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = x_t.ids()[i] == vocab_size ? 1 : 0;
  }
  return mask;
}

LatentBatch mask_representation(const LatentBatch& z0, const MaskGrid& mask,
                                bool apply) {
  if (mask.size() != static_cast<std::size_t>(z0.batch()) * z0.length()) {
    throw InputError("mask_representation: mask grid does not match latent shape");
  }
  if (!apply) return z0;
  LatentBatch out = z0;
  for (int b = 0; b < z0.batch(); ++b) {
    for (int j = 0; j < z0.length(); ++j) {
      if (mask[static_cast<std::size_t>(b) * z0.length() + j]) {
        auto pos = out.position(b, j);
        std::fill(pos.begin(), pos.end(), 0.0);
      }
    }
  }
  return out;
}

JointCorruptedBatch corrupt_joint(const TokenBatch& x0, const LatentBatch& z0,
                                  std::span<const double> t,
                                  const SchedulePair& pair, int vocab_size,
                                  std::span<const double> p_r,
                                  const RngStream& rng,
                                  const JointCorruptionOptions& options) {
  if (x0.batch() != z0.batch() || x0.length() != z0.length()) {
    throw InputError("corrupt_joint: token and latent batches disagree in shape");
  }
  if (static_cast<int>(p_r.size()) != x0.batch()) {
    throw InputError("corrupt_joint: need one p_r per sequence");
  }
  for (double p : p_r) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("corrupt_joint: p_r outside [0, 1]");
  }
  if (options.masking == RepresentationMasking::kReembed && options.codebook == nullptr) {
    throw ConfigError("corrupt_joint: re-embedding requires a codebook");
  }

  JointCorruptedBatch out;
  out.t.assign(t.begin(), t.end());
  out.x_t = corrupt_discrete(x0, t, pair.discrete(), vocab_size, rng);
  out.mask_indicator = mask_indicator(out.x_t, vocab_size);
  out.representation_masked.assign(x0.batch(), 0);

  const LatentBatch reembedded =
      options.masking == RepresentationMasking::kReembed
          ? options.codebook->encode_partial(out.x_t)
          : LatentBatch();
  out.z0_effective = z0;
  for (int b = 0; b < x0.batch(); ++b) {
    RngStream coin = rng.split(kRepresentationStream).split(b);
    if (!coin.bernoulli(p_r[b])) continue;
    out.representation_masked[b] = 1;
    auto dst = out.z0_effective.sequence(b);
    if (options.masking == RepresentationMasking::kReembed) {
      dst = reembedded.sequence(b);
      continue;
    }
    for (int j = 0; j < x0.length(); ++j) {
      if (out.mask_indicator[static_cast<std::size_t>(b) * x0.length() + j]) {
        dst.row(j).setZero();
      }
    }
  }

  auto gauss = corrupt_continuous(out.z0_effective, t, pair.continuous(), rng);
  out.z_t = std::move(gauss.z_t);
  out.eps = std::move(gauss.eps);
  return out;
}

}  // namespace ccdd
