#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ccdd {

using Token = std::int32_t;

/// Row-major dense matrix used for per-sequence activations (rows = positions).
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Integer token grid, batch x length. The mask symbol is `vocab_size` (one
/// past the last ordinary token) and is never stored in clean data.
class TokenBatch {
 public:
  TokenBatch() = default;
  TokenBatch(int batch, int length, Token fill = 0)
      : batch_(batch), length_(length),
        ids_(static_cast<std::size_t>(batch) * length, fill) {}

  int batch() const { return batch_; }
  int length() const { return length_; }
  std::size_t size() const { return ids_.size(); }

  Token& at(int b, int j) { return ids_[index(b, j)]; }
  Token at(int b, int j) const { return ids_[index(b, j)]; }

  std::span<Token> row(int b) {
    return {ids_.data() + static_cast<std::size_t>(b) * length_,
            static_cast<std::size_t>(length_)};
  }
  std::span<const Token> row(int b) const {
    return {ids_.data() + static_cast<std::size_t>(b) * length_,
            static_cast<std::size_t>(length_)};
  }

  std::vector<Token>& ids() { return ids_; }
  const std::vector<Token>& ids() const { return ids_; }

  /// Sub-batch of `count` sequences starting at `first`.
  TokenBatch slice(int first, int count) const;

  bool operator==(const TokenBatch&) const = default;

 private:
  std::size_t index(int b, int j) const {
    return static_cast<std::size_t>(b) * length_ + j;
  }

  int batch_ = 0;
  int length_ = 0;
  std::vector<Token> ids_;
};

/// Dense real tensor of shape batch x length x channels. Used for latents
/// (channels = d), noise draws, and logits (channels = augmented vocab).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int batch, int length, int channels, double fill = 0.0)
      : batch_(batch), length_(length), channels_(channels),
        data_(static_cast<std::size_t>(batch) * length * channels, fill) {}

  int batch() const { return batch_; }
  int length() const { return length_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  double& at(int b, int j, int c) { return data_[index(b, j, c)]; }
  double at(int b, int j, int c) const { return data_[index(b, j, c)]; }

  /// length x channels view of one sequence.
  MatrixMap sequence(int b) {
    return MatrixMap(data_.data() + index(b, 0, 0), length_, channels_);
  }
  ConstMatrixMap sequence(int b) const {
    return ConstMatrixMap(data_.data() + index(b, 0, 0), length_, channels_);
  }

  std::span<double> position(int b, int j) {
    return {data_.data() + index(b, j, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<const double> position(int b, int j) const {
    return {data_.data() + index(b, j, 0), static_cast<std::size_t>(channels_)};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor3& other) const {
    return batch_ == other.batch_ && length_ == other.length_ &&
           channels_ == other.channels_;
  }

  bool all_finite() const;

  Tensor3 slice(int first, int count) const;

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t index(int b, int j, int c) const {
    return (static_cast<std::size_t>(b) * length_ + j) * channels_ + c;
  }

  int batch_ = 0;
  int length_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

using LatentBatch = Tensor3;

/// Boolean grid batch x length (stored as bytes to keep it addressable).
using MaskGrid = std::vector<std::uint8_t>;

}  // namespace ccdd
