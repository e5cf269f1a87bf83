#pragma once

#include <cstdint>
#include <vector>

#include "ccdd/batch.hpp"

namespace ccdd {

/// Stationary Markov source over V tokens with a known entropy rate.
class SyntheticSource {
 public:
  enum class Kind { kIidUniform, kBigram, kPeriodic };

  static SyntheticSource iid_uniform(int vocab_size);
  /// Rows must be probability distributions.
  static SyntheticSource bigram(Matrix transition);
  /// Rows are softmax(sharpness * g) with g standard normal, seeded.
  static SyntheticSource random_bigram(int vocab_size, double sharpness, std::uint64_t seed);
  static SyntheticSource periodic(std::vector<int> pattern, int vocab_size);

  Kind kind() const { return kind_; }
  int vocab_size() const { return static_cast<int>(transition_.rows()); }
  const Matrix& transition() const { return transition_; }
  const std::vector<double>& stationary() const { return stationary_; }
  const std::vector<int>& pattern() const { return pattern_; }

  /// Nats per token.
  double entropy_rate() const;

  /// First token from the stationary law (a random phase for periodic).
  TokenBatch sample(int count, int length, std::uint64_t seed) const;

  /// One long stream of `n` tokens.
  std::vector<Token> sample_stream(std::size_t n, std::uint64_t seed) const;

 private:
  SyntheticSource(Kind kind, Matrix transition);

  Kind kind_;
  Matrix transition_;
  std::vector<double> stationary_;
  std::vector<int> pattern_;
};

/// Stationary distribution by power iteration on a lazy chain.
std::vector<double> stationary_distribution(const Matrix& transition);

}  // namespace ccdd
