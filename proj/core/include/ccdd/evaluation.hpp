#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccdd/batch.hpp"
#include "ccdd/corruption.hpp"
#include "ccdd/denoiser.hpp"
#include "ccdd/embedder.hpp"
#include "ccdd/schedules.hpp"
#include "ccdd/training.hpp"

namespace ccdd {

struct EvalConfig {
  /// Stratified time draws per sequence.
  int n_mc_times = 16;
  /// Probability of representation masking; 1 is the reporting setting.
  double p_r = 1.0;
  double t_floor = 1e-4;
  double gamma_cont = 1.0;
  double gamma_disc = 1.0;
  /// Report exp(discrete term) as the headline perplexity.
  bool discrete_ppl_only = false;
  RepresentationMasking masking = RepresentationMasking::kZero;
  std::uint64_t seed = 0;
  /// Sequences per forward call.
  int chunk_size = 32;

  void validate() const;
};

struct EvalReport {
  /// Headline estimate in nats per token (all tokens, not only masked ones).
  double elbo_nats_per_token = 0.0;
  double ppl = 0.0;
  int n_mc_times = 0;
  double p_r = 0.0;
  /// Discrete NELBO term (1/t weighting) and the unit-weight epsilon MSE proxy.
  double elbo_disc = 0.0;
  double elbo_cont = 0.0;
  /// 95% normal half-widths over the per-(sequence, draw) estimates.
  double half_width = 0.0;
  double disc_half_width = 0.0;
  std::int64_t n_sequences = 0;
};

/// Monte-Carlo ELBO under the joint corruption. Draw i of sequence b uses
/// t = t_floor + (1 - t_floor)(i + u)/n. Runs with the same seed share every
/// draw, so reports at different p_r are paired.
EvalReport elbo(const JointDenoiser& model, const Codebook& codebook, const SchedulePair& pair,
                const TokenBatch& data, const EvalConfig& config);

/// Smoothed n-gram model (order 2 or 3) over a fixed vocabulary.
class NGramReference {
 public:
  /// Counts transitions inside each sequence of `corpus` (contexts never
  /// cross sequence boundaries). Throws ConfigError if some conditional would
  /// not be a proper distribution (zero total mass without smoothing).
  static NGramReference fit(const TokenBatch& corpus, int order, int vocab_size,
                            double smoothing);
  /// Builds a reference from explicit conditional tables, one row per
  /// context (context id = sum_k c_k V^(order-2-k)).
  static NGramReference from_table(int order, int vocab_size, Matrix conditionals);

  double log_prob(std::span<const Token> context, Token next) const;
  /// p(. | context) as a row of length V.
  std::span<const double> conditional(std::span<const Token> context) const;

  int order() const { return order_; }
  int vocab_size() const { return vocab_; }
  const Matrix& table() const { return table_; }

 private:
  NGramReference(int order, int vocab, Matrix table);
  std::size_t context_id(std::span<const Token> context) const;

  int order_;
  int vocab_;
  Matrix table_;  // V^(order-1) x V
};

/// Mean negative log-probability per scored token: positions j >= order-1
/// of every sample, each conditioned on its preceding order-1 tokens.
double generative_nll(const NGramReference& reference, const TokenBatch& samples);

}  // namespace ccdd
