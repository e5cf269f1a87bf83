#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ccdd/batch.hpp"
#include "ccdd/denoiser.hpp"
#include "ccdd/rng.hpp"
#include "ccdd/schedules.hpp"

namespace oracle {

/// Exact epsilon for data N(mu, s^2 I) under alpha = sqrt(1 - t): the
/// posterior mean of the noise.
class GaussianEps : public ccdd::JointDenoiser {
 public:
  GaussianEps(double mu, double s, int dim, int vocab) : mu_(mu), s_(s), dim_(dim), vocab_(vocab) {}

  ccdd::DenoiserOutput predict(const ccdd::TokenBatch& x_t, const ccdd::LatentBatch& z_t,
                               std::span<const double> t, bool drop) const override {
    ccdd::DenoiserOutput out{ccdd::LatentBatch(z_t.batch(), z_t.length(), z_t.channels()),
                             ccdd::Tensor3(x_t.batch(), x_t.length(), vocab_ + 1)};
    if (drop) return out;
    for (int b = 0; b < z_t.batch(); ++b) {
      const double tb = std::min(t[static_cast<std::size_t>(b)], 1.0 - 1e-6);
      const double a = std::sqrt(1.0 - tb);
      const double sg = std::sqrt(tb);
      const double denom = a * a * s_ * s_ + sg * sg;
      for (int j = 0; j < z_t.length(); ++j) {
        for (int c = 0; c < z_t.channels(); ++c) {
          out.eps_hat.at(b, j, c) = (z_t.at(b, j, c) - a * mu_) * sg / denom;
        }
      }
    }
    return out;
  }
  int vocab_size() const override { return vocab_; }
  int latent_dim() const override { return dim_; }

 private:
  double mu_;
  double s_;
  int dim_;
  int vocab_;
};

/// Epsilon consistent with one known clean point z0 (alpha = sqrt(1 - t)).
class PointEps : public ccdd::JointDenoiser {
 public:
  PointEps(double z0, int dim, int vocab) : z0_(z0), dim_(dim), vocab_(vocab) {}
  ccdd::DenoiserOutput predict(const ccdd::TokenBatch& x_t, const ccdd::LatentBatch& z_t,
                               std::span<const double> t, bool) const override {
    ccdd::DenoiserOutput out{ccdd::LatentBatch(z_t.batch(), z_t.length(), z_t.channels()),
                             ccdd::Tensor3(x_t.batch(), x_t.length(), vocab_ + 1)};
    for (int b = 0; b < z_t.batch(); ++b) {
      const double tb = std::min(t[static_cast<std::size_t>(b)], 1.0 - 1e-6);
      const double a = std::sqrt(1.0 - tb);
      const double sg = std::sqrt(tb);
      for (int j = 0; j < z_t.length(); ++j) {
        for (int c = 0; c < z_t.channels(); ++c) {
          out.eps_hat.at(b, j, c) = (z_t.at(b, j, c) - a * z0_) / sg;
        }
      }
    }
    return out;
  }
  int vocab_size() const override { return vocab_; }
  int latent_dim() const override { return dim_; }

 private:
  double z0_;
  int dim_;
  int vocab_;
};

/// Fixed logits row at every position; epsilon zero.
class FixedLogits : public ccdd::JointDenoiser {
 public:
  FixedLogits(std::vector<double> row, int dim) : row_(std::move(row)), dim_(dim) {}
  ccdd::DenoiserOutput predict(const ccdd::TokenBatch& x_t, const ccdd::LatentBatch& z_t,
                               std::span<const double>, bool) const override {
    ccdd::DenoiserOutput out{ccdd::LatentBatch(z_t.batch(), z_t.length(), z_t.channels()),
                             ccdd::Tensor3(x_t.batch(), x_t.length(), static_cast<int>(row_.size()))};
    for (int b = 0; b < x_t.batch(); ++b) {
      for (int j = 0; j < x_t.length(); ++j) {
        auto p = out.logits.position(b, j);
        std::copy(row_.begin(), row_.end(), p.begin());
      }
    }
    return out;
  }
  int vocab_size() const override { return static_cast<int>(row_.size()) - 1; }
  int latent_dim() const override { return dim_; }

 private:
  std::vector<double> row_;
  int dim_;
};

/// Uniform logits and a zero epsilon.
class UniformLogits : public ccdd::JointDenoiser {
 public:
  UniformLogits(int vocab, int dim) : vocab_(vocab), dim_(dim) {}
  ccdd::DenoiserOutput predict(const ccdd::TokenBatch& x_t, const ccdd::LatentBatch& z_t,
                               std::span<const double>, bool) const override {
    return {ccdd::LatentBatch(z_t.batch(), z_t.length(), z_t.channels()),
            ccdd::Tensor3(x_t.batch(), x_t.length(), vocab_ + 1)};
  }
  int vocab_size() const override { return vocab_; }
  int latent_dim() const override { return dim_; }

 private:
  int vocab_;
  int dim_;
};

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline ccdd::TokenBatch random_tokens(int batch, int length, int vocab, std::uint64_t seed) {
  ccdd::TokenBatch x(batch, length);
  ccdd::RngStream rng(seed);
  for (ccdd::Token& t : x.ids()) t = static_cast<ccdd::Token>(rng() % static_cast<std::uint64_t>(vocab));
  return x;
}

inline ccdd::LatentBatch random_latents(int batch, int length, int dim, std::uint64_t seed) {
  ccdd::LatentBatch z(batch, length, dim);
  ccdd::RngStream rng(seed);
  for (double& v : z.data()) v = rng.normal();
  return z;
}

/// Fresh directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("ccdd_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace oracle
