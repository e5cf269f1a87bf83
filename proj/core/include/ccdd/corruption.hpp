#pragma once

#include <span>
#include <vector>

#include "ccdd/batch.hpp"
#include "ccdd/embedder.hpp"
#include "ccdd/rng.hpp"
#include "ccdd/schedules.hpp"

namespace ccdd {

/// How the continuous branch hides discretely masked positions.
enum class RepresentationMasking {
  kZero,     // zero the clean embedding at masked positions
  kReembed,  // re-encode x_t, masked positions contributing nothing
};

struct GaussianCorruption {
  LatentBatch z_t;
  LatentBatch eps;
};

/// Output of the factored joint forward process.
struct JointCorruptedBatch {
  TokenBatch x_t;
  LatentBatch z_t;
  LatentBatch eps;
  /// Clean latents actually fed to the Gaussian branch (after optional
  /// representation masking); z_t = alpha z0_effective + sigma eps.
  LatentBatch z0_effective;
  std::vector<double> t;
  MaskGrid mask_indicator;
  /// Per sequence: whether representation masking was applied.
  std::vector<std::uint8_t> representation_masked;
};

/// z_t = alpha_t z0 + sigma_t eps with eps ~ N(0, I). The draw for (b, j)
/// comes from rng.split(b).split(j).split(1), so it is independent of the
/// token corruption stream and of batch order.
GaussianCorruption corrupt_continuous(const LatentBatch& z0,
                                      std::span<const double> t,
                                      const ContinuousSchedule& schedule,
                                      const RngStream& rng);

/// Keeps x0 with probability eta_t per position, otherwise draws from pi_t.
/// `vocab_size` is V; the mask symbol is V.
TokenBatch corrupt_discrete(const TokenBatch& x0, std::span<const double> t,
                            const DiscreteSchedule& schedule, int vocab_size,
                            const RngStream& rng);

MaskGrid mask_indicator(const TokenBatch& x_t, int vocab_size);

/// Zeroes every channel at flagged positions when `apply` is set.
LatentBatch mask_representation(const LatentBatch& z0, const MaskGrid& mask,
                                bool apply);

struct JointCorruptionOptions {
  RepresentationMasking masking = RepresentationMasking::kZero;
  /// Needed only for RepresentationMasking::kReembed.
  const Codebook* codebook = nullptr;
};

/// Draws x_t, then for each sequence applies representation masking with
/// probability p_r[b] (from x_t's mask), then corrupts the latents.
JointCorruptedBatch corrupt_joint(const TokenBatch& x0, const LatentBatch& z0,
                                  std::span<const double> t,
                                  const SchedulePair& pair, int vocab_size,
                                  std::span<const double> p_r,
                                  const RngStream& rng,
                                  const JointCorruptionOptions& options = {});

}  // namespace ccdd
