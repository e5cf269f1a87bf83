#pragma once

#include <cstdint>

#include "ccdd/batch.hpp"

namespace ccdd {

/// Fixed token encoder E: tokens -> unit-norm embeddings in R^d.
///
/// Three generation spaces are available:
///  - onehot_simplex: d = V, rows are the standard basis;
///  - random_orthonormal: a seeded codebook (orthonormal when V <= d,
///    otherwise unit rows with pairwise |cos| < 0.5);
///  - contextual: the random codebook mixed over a symmetric window,
///    z_j = normalize(sum_{|k-j| <= r} w^{|k-j|} e_{x_k}).
class Codebook {
 public:
  enum class Mode { kOnehotSimplex, kRandomOrthonormal, kContextual };

  static Codebook onehot_simplex(int vocab_size);
  static Codebook random_orthonormal(int vocab_size, int dim, std::uint64_t seed);
  static Codebook contextual(int vocab_size, int dim, std::uint64_t seed,
                             double window_weight, int radius);
  /// Rebuilds a codebook from stored vectors (checkpoint load).
  static Codebook from_vectors(Mode mode, Matrix vectors, std::uint64_t seed,
                               double window_weight, int radius);

  /// Throws InputError for ids outside [0, V) (the mask symbol included).
  LatentBatch encode(const TokenBatch& x0) const;

  /// Like `encode` but accepts the mask symbol V, which contributes a zero
  /// vector. Used to re-embed partially masked sequences.
  LatentBatch encode_partial(const TokenBatch& x) const;

  /// Nearest codeword by inner product; ties go to the lowest id.
  TokenBatch decode_nn(const LatentBatch& z) const;

  Mode mode() const { return mode_; }
  int vocab_size() const { return static_cast<int>(vectors_.rows()); }
  int dim() const { return static_cast<int>(vectors_.cols()); }
  const Matrix& vectors() const { return vectors_; }
  std::uint64_t seed() const { return seed_; }
  double window_weight() const { return window_weight_; }
  int radius() const { return radius_; }

 private:
  Codebook(Mode mode, Matrix vectors) : mode_(mode), vectors_(std::move(vectors)) {}

  LatentBatch encode_impl(const TokenBatch& x, bool allow_mask) const;

  Mode mode_;
  Matrix vectors_;  // V x d
  std::uint64_t seed_ = 0;
  double window_weight_ = 0.0;
  int radius_ = 0;
};

/// Deterministic seeded codebook rows. Exposed for tests.
Matrix make_random_codebook(int vocab_size, int dim, std::uint64_t seed);

}  // namespace ccdd
