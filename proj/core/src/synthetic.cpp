#include "ccdd/synthetic.hpp"

#include <cmath>
#include <string>

#include "ccdd/error.hpp"
#include "ccdd/rng.hpp"

namespace ccdd {

namespace {

int draw_categorical(RngStream& rng, const double* p, int n) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  for (int i = n - 1; i >= 0; --i) {
    if (p[i] > 0.0) return i;
  }
  return n - 1;
}

}  // namespace

SyntheticSource::SyntheticSource(Kind kind, Matrix transition)
    : kind_(kind), transition_(std::move(transition)) {}

SyntheticSource SyntheticSource::iid_uniform(int vocab_size) {
  if (vocab_size < 1) throw ConfigError("synthetic_vocab: must be positive");
  Matrix t = Matrix::Constant(vocab_size, vocab_size, 1.0 / vocab_size);
  SyntheticSource s(Kind::kIidUniform, std::move(t));
  s.stationary_.assign(static_cast<std::size_t>(vocab_size), 1.0 / vocab_size);
  return s;
}

SyntheticSource SyntheticSource::bigram(Matrix transition) {
  if (transition.rows() < 1 || transition.rows() != transition.cols()) {
    throw ConfigError("bigram: transition matrix must be square and non-empty");
  }
  for (Eigen::Index r = 0; r < transition.rows(); ++r) {
    if ((transition.row(r).array() < 0.0).any() || !transition.row(r).allFinite() ||
        std::abs(transition.row(r).sum() - 1.0) > 1e-9) {
      throw ConfigError("bigram: row " + std::to_string(r) + " is not a distribution");
    }
  }
  std::vector<double> pi = stationary_distribution(transition);
  SyntheticSource s(Kind::kBigram, std::move(transition));
  s.stationary_ = std::move(pi);
  return s;
}

SyntheticSource SyntheticSource::random_bigram(int vocab_size, double sharpness,
                                               std::uint64_t seed) {
  if (vocab_size < 1) throw ConfigError("synthetic_vocab: must be positive");
  if (!(sharpness >= 0.0) || !std::isfinite(sharpness)) {
    throw ConfigError("synthetic_sharpness: must be finite and non-negative");
  }
  RngStream rng = derive_stream(seed, StreamTag::kData, 0xb1);
  Matrix t(vocab_size, vocab_size);
  for (int r = 0; r < vocab_size; ++r) {
    RngStream row = rng.split(static_cast<std::uint64_t>(r));
    for (int c = 0; c < vocab_size; ++c) t(r, c) = sharpness * row.normal();
    const double m = t.row(r).maxCoeff();
    t.row(r) = (t.row(r).array() - m).exp().matrix();
    t.row(r) /= t.row(r).sum();
  }
  return bigram(std::move(t));
}

SyntheticSource SyntheticSource::periodic(std::vector<int> pattern, int vocab_size) {
  if (pattern.empty()) throw ConfigError("synthetic_pattern: empty");
  if (vocab_size < 1) throw ConfigError("synthetic_vocab: must be positive");
  for (int p : pattern) {
    if (p < 0 || p >= vocab_size) {
      throw ConfigError("synthetic_pattern: token " + std::to_string(p) + " outside vocabulary");
    }
  }
  // Successor frequencies over one period.
  Matrix t = Matrix::Zero(vocab_size, vocab_size);
  const std::size_t n = pattern.size();
  for (std::size_t i = 0; i < n; ++i) t(pattern[i], pattern[(i + 1) % n]) += 1.0;
  for (int r = 0; r < vocab_size; ++r) {
    const double s = t.row(r).sum();
    if (s > 0.0) {
      t.row(r) /= s;
    } else {
      t.row(r).setConstant(1.0 / vocab_size);
    }
  }
  SyntheticSource s(Kind::kPeriodic, std::move(t));
  s.stationary_.assign(static_cast<std::size_t>(vocab_size), 0.0);
  for (int p : pattern) s.stationary_[static_cast<std::size_t>(p)] += 1.0 / static_cast<double>(n);
  s.pattern_ = std::move(pattern);
  return s;
}

double SyntheticSource::entropy_rate() const {
  if (kind_ == Kind::kPeriodic) return 0.0;
  double h = 0.0;
  for (Eigen::Index r = 0; r < transition_.rows(); ++r) {
    double row = 0.0;
    for (Eigen::Index c = 0; c < transition_.cols(); ++c) {
      const double p = transition_(r, c);
      if (p > 0.0) row -= p * std::log(p);
    }
    h += stationary_[static_cast<std::size_t>(r)] * row;
  }
  return h;
}

TokenBatch SyntheticSource::sample(int count, int length, std::uint64_t seed) const {
  if (count < 0 || length < 1) throw ConfigError("synthetic sample: bad shape");
  TokenBatch out(count, length);
  const RngStream base = derive_stream(seed, StreamTag::kData, 0x5a);
  const int v = vocab_size();
  for (int b = 0; b < count; ++b) {
    RngStream rng = base.split(static_cast<std::uint64_t>(b));
    auto row = out.row(b);
    if (kind_ == Kind::kPeriodic) {
      const auto n = pattern_.size();
      const auto phase = static_cast<std::size_t>(rng() % n);
      for (int j = 0; j < length; ++j) row[static_cast<std::size_t>(j)] = pattern_[(phase + static_cast<std::size_t>(j)) % n];
      continue;
    }
    int prev = draw_categorical(rng, stationary_.data(), v);
    row[0] = prev;
    for (int j = 1; j < length; ++j) {
      const Eigen::RowVectorXd p = transition_.row(prev);
      prev = draw_categorical(rng, p.data(), v);
      row[static_cast<std::size_t>(j)] = prev;
    }
  }
  return out;
}

std::vector<Token> SyntheticSource::sample_stream(std::size_t n, std::uint64_t seed) const {
  if (n == 0) return {};
  const TokenBatch one = sample(1, static_cast<int>(n), seed);
  return one.ids();
}

std::vector<double> stationary_distribution(const Matrix& transition) {
  const auto v = transition.rows();
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(v, 1.0 / static_cast<double>(v));
  for (int it = 0; it < 100000; ++it) {
    Eigen::RowVectorXd next = 0.5 * pi + 0.5 * (pi * transition);
    next /= next.sum();
    const double diff = (next - pi).cwiseAbs().sum();
    pi = next;
    if (diff < 1e-15) break;
  }
  return {pi.data(), pi.data() + v};
}

}  // namespace ccdd
