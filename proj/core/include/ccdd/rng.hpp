#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace ccdd {

/// Counter-keyed random stream.
///
/// Every stream is identified by a 64-bit key; `split(id)` derives an
/// independent child stream from (key, id) without touching the parent's
/// state. Batch code splits per sequence and per position so that results do
/// not depend on iteration order or thread count.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key = 0) : key_(key), state_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  /// splitmix64 step.
  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  RngStream split(std::uint64_t id) const {
    return RngStream(mix(key_ ^ mix(id + 0x632be59bd9b4e019ULL)));
  }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(*this); }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t state_;
};

/// Purpose tags for top-level stream derivation.
enum class StreamTag : std::uint64_t {
  kTime = 1,
  kCorrupt = 2,
  kDrop = 3,
  kRepresentation = 4,
  kBatch = 5,
  kSampler = 6,
  kEval = 7,
  kInit = 8,
  kCodebook = 9,
  kData = 10,
};

inline RngStream derive_stream(std::uint64_t seed, StreamTag tag,
                               std::uint64_t counter) {
  return RngStream(seed).split(static_cast<std::uint64_t>(tag)).split(counter);
}

}  // namespace ccdd
