#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ccdd/batch.hpp"

/// Minimal reverse-mode differentiation over dense row-major matrices.
///
/// A `Tape` records every operation of one forward evaluation together with
/// its pullback. Values live on the tape until it is destroyed, which is what
/// lets `backward` run after the forward output has been consumed.
namespace ccdd::ad {

struct Var {
  std::uint32_t id = 0;
};

class Tape {
 public:
  using Pullback = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() { nodes_.reserve(512); }

  Var constant(Matrix value);
  /// Leaf bound to an external parameter matrix (not copied; must outlive the
  /// tape). `index` identifies the parameter when collecting gradients.
  /// With `trainable` false the leaf is an inference-only constant.
  Var parameter(const Matrix& value, int index, bool trainable = true);

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  /// Id the next recorded node will get; lets a pullback refer to its own output.
  Var next_var() const { return Var{static_cast<std::uint32_t>(nodes_.size())}; }

  /// Records the result of an operation. `pullback` receives d(out) and must
  /// accumulate into the inputs via `accumulate`.
  Var record(Matrix value, bool requires_grad, Pullback pullback);

  /// Adds `grad` to the stored gradient of `v` (no-op for constants).
  void accumulate(Var v, const Matrix& grad);
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& grad) {
    if (!nodes_[v.id].requires_grad) return;
    grad_ref(v) += grad;
  }

  /// Reverse sweep from all seeded nodes.
  void backward();
  /// Drops accumulated gradients so the tape can be swept again.
  void clear_gradients();

  /// Calls f(parameter_index, gradient) for every parameter leaf that
  /// received a gradient.
  void for_each_parameter_grad(
      const std::function<void(int, const Matrix&)>& f) const;

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    int param_index = -1;
    Pullback pullback;
  };

  Matrix& grad_ref(Var v);

  std::vector<Node> nodes_;
};

// ---- operations ------------------------------------------------------------
// Row vectors are 1 x n matrices and broadcast over rows where noted.

Var matmul(Tape& tape, Var a, Var b);
/// x W + b (b broadcast over rows).
Var linear(Tape& tape, Var x, Var weight, Var bias);
Var add(Tape& tape, Var a, Var b);
Var add_row(Tape& tape, Var x, Var row);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
/// x * (1 + scale) + shift, both rows broadcast.
Var scale_shift(Tape& tape, Var x, Var scale_row, Var shift_row);
/// x * g with g a broadcast row (adaLN gate).
Var mul_row(Tape& tape, Var x, Var gate_row);
/// x scaled row-wise by column `col` of p.
Var mul_col(Tape& tape, Var x, Var p, int col);
/// Per-row normalization without affine parameters.
Var layer_norm(Tape& tape, Var x, double eps = 1e-6);
Var silu(Tape& tape, Var x);
/// tanh approximation.
Var gelu(Tape& tape, Var x);
Var tanh(Tape& tape, Var x);
Var softmax_rows(Tape& tape, Var x);
/// Rotary position embedding applied per head; row i uses positions[i].
Var rotary(Tape& tape, Var x, int heads, std::span<const int> positions);
/// Bidirectional multi-head scaled dot-product attention on n x D inputs.
Var attention(Tape& tape, Var q, Var k, Var v, int heads);
Var embedding(Tape& tape, Var table, std::span<const Token> ids);
Var concat_cols(Tape& tape, Var a, Var b);
Var concat_rows(Tape& tape, Var a, Var b);
Var slice_rows(Tape& tape, Var x, int first, int count);
Var slice_cols(Tape& tape, Var x, int first, int count);

}  // namespace ccdd::ad
