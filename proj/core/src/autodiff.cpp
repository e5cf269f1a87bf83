#include "ccdd/autodiff.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "ccdd/error.hpp"

namespace ccdd::ad {
namespace {

void require(bool ok, const char* op, const char* what) {
  if (!ok) throw InputError(std::string("autodiff ") + op + ": " + what);
}

bool any_grad(const Tape& tape, std::initializer_list<Var> vars) {
  for (Var v : vars) {
    if (tape.requires_grad(v)) return true;
  }
  return false;
}

constexpr double kRotaryBase = 10000.0;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

// ---- Tape -------------------------------------------------------------------

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(const Matrix& value, int index, bool trainable) {
  Node n;
  n.external = &value;
  n.requires_grad = trainable;
  n.param_index = index;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Matrix value, bool requires_grad, Pullback pullback) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.pullback = std::move(pullback);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Matrix& Tape::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  if (!n.has_grad) {
    const Matrix& val = n.external != nullptr ? *n.external : n.value;
    n.grad = Matrix::Zero(val.rows(), val.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& grad) {
  if (!nodes_[v.id].requires_grad) return;
  Matrix& g = grad_ref(v);
  require(g.rows() == grad.rows() && g.cols() == grad.cols(), "accumulate",
          "gradient shape mismatch");
  g += grad;
}

void Tape::backward() {
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.pullback) continue;
    // Pullbacks only touch gradients of earlier nodes, so `n` stays put.
    n.pullback(*this, n.grad);
  }
}

void Tape::clear_gradients() {
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
}

void Tape::for_each_parameter_grad(
    const std::function<void(int, const Matrix&)>& f) const {
  for (const Node& n : nodes_) {
    if (n.param_index >= 0 && n.has_grad) f(n.param_index, n.grad);
  }
}

// ---- linear algebra ----------------------------------------------------------

Var matmul(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  require(av.cols() == bv.rows(), "matmul", "inner dimensions differ");
  Matrix out = av * bv;
  return tape.record(std::move(out), any_grad(tape, {a, b}),
                     [a, b](Tape& t, const Matrix& g) {
                       if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
                       if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
                     });
}

Var linear(Tape& tape, Var x, Var weight, Var bias) {
  const Matrix& xv = tape.value(x);
  const Matrix& wv = tape.value(weight);
  const Matrix& bv = tape.value(bias);
  require(xv.cols() == wv.rows(), "linear", "input width != weight rows");
  require(bv.rows() == 1 && bv.cols() == wv.cols(), "linear", "bias shape");
  Matrix out = xv * wv;
  out.rowwise() += bv.row(0);
  return tape.record(std::move(out), any_grad(tape, {x, weight, bias}),
                     [x, weight, bias](Tape& t, const Matrix& g) {
                       if (t.requires_grad(x)) t.accumulate(x, g * t.value(weight).transpose());
                       if (t.requires_grad(weight)) t.accumulate(weight, t.value(x).transpose() * g);
                       if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
                     });
}

Var add(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "add", "shape mismatch");
  Matrix out = av + bv;
  return tape.record(std::move(out), any_grad(tape, {a, b}),
                     [a, b](Tape& t, const Matrix& g) {
                       t.accumulate(a, g);
                       t.accumulate(b, g);
                     });
}

Var add_row(Tape& tape, Var x, Var row) {
  const Matrix& xv = tape.value(x);
  const Matrix& rv = tape.value(row);
  require(rv.rows() == 1 && rv.cols() == xv.cols(), "add_row", "row shape");
  Matrix out = xv;
  out.rowwise() += rv.row(0);
  return tape.record(std::move(out), any_grad(tape, {x, row}),
                     [x, row](Tape& t, const Matrix& g) {
                       t.accumulate(x, g);
                       if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
                     });
}

Var mul(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  require(av.rows() == bv.rows() && av.cols() == bv.cols(), "mul", "shape mismatch");
  Matrix out = av.cwiseProduct(bv);
  return tape.record(std::move(out), any_grad(tape, {a, b}),
                     [a, b](Tape& t, const Matrix& g) {
                       if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
                       if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
                     });
}

Var scale(Tape& tape, Var a, double factor) {
  Matrix out = tape.value(a) * factor;
  return tape.record(std::move(out), tape.requires_grad(a),
                     [a, factor](Tape& t, const Matrix& g) { t.accumulate(a, g * factor); });
}

Var scale_shift(Tape& tape, Var x, Var scale_row, Var shift_row) {
  const Matrix& xv = tape.value(x);
  const Matrix& sv = tape.value(scale_row);
  const Matrix& hv = tape.value(shift_row);
  require(sv.rows() == 1 && sv.cols() == xv.cols() && hv.rows() == 1 &&
              hv.cols() == xv.cols(),
          "scale_shift", "row shapes");
  Matrix out = xv.array().rowwise() * (sv.row(0).array() + 1.0);
  out.rowwise() += hv.row(0);
  return tape.record(
      std::move(out), any_grad(tape, {x, scale_row, shift_row}),
      [x, scale_row, shift_row](Tape& t, const Matrix& g) {
        if (t.requires_grad(x)) {
          Matrix gx = g.array().rowwise() * (t.value(scale_row).row(0).array() + 1.0);
          t.accumulate(x, gx);
        }
        if (t.requires_grad(scale_row)) {
          t.accumulate(scale_row, g.cwiseProduct(t.value(x)).colwise().sum());
        }
        if (t.requires_grad(shift_row)) t.accumulate(shift_row, g.colwise().sum());
      });
}

Var mul_row(Tape& tape, Var x, Var gate_row) {
  const Matrix& xv = tape.value(x);
  const Matrix& gv = tape.value(gate_row);
  require(gv.rows() == 1 && gv.cols() == xv.cols(), "mul_row", "row shape");
  Matrix out = xv.array().rowwise() * gv.row(0).array();
  return tape.record(std::move(out), any_grad(tape, {x, gate_row}),
                     [x, gate_row](Tape& t, const Matrix& g) {
                       if (t.requires_grad(x)) {
                         Matrix gx = g.array().rowwise() * t.value(gate_row).row(0).array();
                         t.accumulate(x, gx);
                       }
                       if (t.requires_grad(gate_row)) {
                         t.accumulate(gate_row, g.cwiseProduct(t.value(x)).colwise().sum());
                       }
                     });
}

Var mul_col(Tape& tape, Var x, Var p, int col) {
  const Matrix& xv = tape.value(x);
  const Matrix& pv = tape.value(p);
  require(pv.rows() == xv.rows() && col >= 0 && col < pv.cols(), "mul_col", "shape");
  Matrix out = xv.array().colwise() * pv.col(col).array();
  return tape.record(std::move(out), any_grad(tape, {x, p}),
                     [x, p, col](Tape& t, const Matrix& g) {
                       if (t.requires_grad(x)) {
                         Matrix gx = g.array().colwise() * t.value(p).col(col).array();
                         t.accumulate(x, gx);
                       }
                       if (t.requires_grad(p)) {
                         const Matrix& pv2 = t.value(p);
                         Matrix gp = Matrix::Zero(pv2.rows(), pv2.cols());
                         gp.col(col) = g.cwiseProduct(t.value(x)).rowwise().sum();
                         t.accumulate(p, gp);
                       }
                     });
}

// ---- nonlinearities ------------------------------------------------------------

Var layer_norm(Tape& tape, Var x, double eps) {
  const Matrix& xv = tape.value(x);
  const auto n = xv.cols();
  Matrix out(xv.rows(), n);
  auto inv_std = std::make_shared<Eigen::VectorXd>(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double mean = xv.row(i).mean();
    const double var = (xv.row(i).array() - mean).square().mean();
    (*inv_std)(i) = 1.0 / std::sqrt(var + eps);
    out.row(i) = (xv.row(i).array() - mean) * (*inv_std)(i);
  }
  const Var y = tape.next_var();
  return tape.record(std::move(out), tape.requires_grad(x), [x, y, inv_std](Tape& t, const Matrix& g) {
    const Matrix& yv = t.value(y);
    const double inv_n = 1.0 / static_cast<double>(yv.cols());
    Matrix gx(yv.rows(), yv.cols());
    for (Eigen::Index i = 0; i < yv.rows(); ++i) {
      const double mean_g = g.row(i).sum() * inv_n;
      const double mean_gy = g.row(i).dot(yv.row(i)) * inv_n;
      gx.row(i) = (*inv_std)(i) *
                  (g.row(i).array() - mean_g - yv.row(i).array() * mean_gy).matrix();
    }
    t.accumulate(x, gx);
  });
}

Var silu(Tape& tape, Var x) {
  const Matrix& xv = tape.value(x);
  Matrix out = xv.array() / (1.0 + (-xv.array()).exp());
  return tape.record(std::move(out), tape.requires_grad(x), [x](Tape& t, const Matrix& g) {
    const auto xa = t.value(x).array();
    const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-xa).exp());
    Matrix gx = g.array() * (sig * (1.0 + xa * (1.0 - sig)));
    t.accumulate(x, gx);
  });
}

Var gelu(Tape& tape, Var x) {
  const Matrix& xv = tape.value(x);
  const Eigen::ArrayXXd xa = xv.array();
  const Eigen::ArrayXXd th = (kGeluC * (xa + kGeluA * xa.cube())).tanh();
  Matrix out = 0.5 * xa * (1.0 + th);
  return tape.record(std::move(out), tape.requires_grad(x), [x](Tape& t, const Matrix& g) {
    const Eigen::ArrayXXd xa2 = t.value(x).array();
    const Eigen::ArrayXXd th2 = (kGeluC * (xa2 + kGeluA * xa2.cube())).tanh();
    const Eigen::ArrayXXd d = 0.5 * (1.0 + th2) +
                              0.5 * xa2 * (1.0 - th2.square()) * kGeluC *
                                  (1.0 + 3.0 * kGeluA * xa2.square());
    Matrix gx = g.array() * d;
    t.accumulate(x, gx);
  });
}

Var tanh(Tape& tape, Var x) {
  Matrix out = tape.value(x).array().tanh();
  const Var y = tape.next_var();
  return tape.record(std::move(out), tape.requires_grad(x), [x, y](Tape& t, const Matrix& g) {
    Matrix gx = g.array() * (1.0 - t.value(y).array().square());
    t.accumulate(x, gx);
  });
}

Var softmax_rows(Tape& tape, Var x) {
  const Matrix& xv = tape.value(x);
  Matrix out(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double m = xv.row(i).maxCoeff();
    out.row(i) = (xv.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  const Var y = tape.next_var();
  return tape.record(std::move(out), tape.requires_grad(x), [x, y](Tape& t, const Matrix& g) {
    const Matrix& yv = t.value(y);
    Matrix gx(yv.rows(), yv.cols());
    for (Eigen::Index i = 0; i < yv.rows(); ++i) {
      const double dot = g.row(i).dot(yv.row(i));
      gx.row(i) = yv.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
    }
    t.accumulate(x, gx);
  });
}

// ---- attention ----------------------------------------------------------------

namespace {

void rotate(const Matrix& in, Matrix& out, int heads, std::span<const int> positions,
            double sign) {
  const auto width = in.cols();
  const auto head_dim = width / heads;
  for (Eigen::Index i = 0; i < in.rows(); ++i) {
    const double pos = positions[static_cast<std::size_t>(i)];
    for (int h = 0; h < heads; ++h) {
      for (Eigen::Index k = 0; k < head_dim / 2; ++k) {
        const double freq = std::pow(kRotaryBase, -2.0 * static_cast<double>(k) / head_dim);
        const double angle = pos * freq;
        const double c = std::cos(angle);
        const double s = sign * std::sin(angle);
        const Eigen::Index a = h * head_dim + 2 * k;
        const double x0 = in(i, a);
        const double x1 = in(i, a + 1);
        out(i, a) = x0 * c - x1 * s;
        out(i, a + 1) = x0 * s + x1 * c;
      }
    }
  }
}

}  // namespace

Var rotary(Tape& tape, Var x, int heads, std::span<const int> positions) {
  const Matrix& xv = tape.value(x);
  require(heads > 0 && xv.cols() % heads == 0, "rotary", "width not divisible by heads");
  require((xv.cols() / heads) % 2 == 0, "rotary", "head dim must be even");
  require(static_cast<Eigen::Index>(positions.size()) == xv.rows(), "rotary",
          "one position per row required");
  Matrix out(xv.rows(), xv.cols());
  rotate(xv, out, heads, positions, 1.0);
  std::vector<int> pos(positions.begin(), positions.end());
  return tape.record(std::move(out), tape.requires_grad(x),
                     [x, heads, pos = std::move(pos)](Tape& t, const Matrix& g) {
                       Matrix gx(g.rows(), g.cols());
                       rotate(g, gx, heads, pos, -1.0);
                       t.accumulate(x, gx);
                     });
}

Var attention(Tape& tape, Var q, Var k, Var v, int heads) {
  const Matrix& qv = tape.value(q);
  const Matrix& kv = tape.value(k);
  const Matrix& vv = tape.value(v);
  require(qv.rows() == kv.rows() && kv.rows() == vv.rows(), "attention", "row counts");
  require(qv.cols() == kv.cols() && kv.cols() == vv.cols(), "attention", "widths");
  require(heads > 0 && qv.cols() % heads == 0, "attention", "width not divisible by heads");
  const auto n = qv.rows();
  const auto hd = qv.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  auto probs = std::make_shared<std::vector<Matrix>>(heads);
  Matrix out(n, qv.cols());
  for (int h = 0; h < heads; ++h) {
    Matrix scores = (qv.middleCols(h * hd, hd) * kv.middleCols(h * hd, hd).transpose()) * inv_sqrt;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = scores.row(i).maxCoeff();
      scores.row(i) = (scores.row(i).array() - m).exp();
      scores.row(i) /= scores.row(i).sum();
    }
    out.middleCols(h * hd, hd) = scores * vv.middleCols(h * hd, hd);
    (*probs)[h] = std::move(scores);
  }
  return tape.record(
      std::move(out), any_grad(tape, {q, k, v}),
      [q, k, v, heads, hd, inv_sqrt, probs](Tape& t, const Matrix& g) {
        const Matrix& qv2 = t.value(q);
        const Matrix& kv2 = t.value(k);
        const Matrix& vv2 = t.value(v);
        Matrix gq = Matrix::Zero(qv2.rows(), qv2.cols());
        Matrix gk = Matrix::Zero(kv2.rows(), kv2.cols());
        Matrix gv = Matrix::Zero(vv2.rows(), vv2.cols());
        for (int h = 0; h < heads; ++h) {
          const Matrix& p = (*probs)[h];
          const auto go = g.middleCols(h * hd, hd);
          gv.middleCols(h * hd, hd) = p.transpose() * go;
          const Matrix gp = go * vv2.middleCols(h * hd, hd).transpose();
          Matrix gs(p.rows(), p.cols());
          for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double dot = gp.row(i).dot(p.row(i));
            gs.row(i) = p.row(i).cwiseProduct((gp.row(i).array() - dot).matrix());
          }
          gs *= inv_sqrt;
          gq.middleCols(h * hd, hd) = gs * kv2.middleCols(h * hd, hd);
          gk.middleCols(h * hd, hd) = gs.transpose() * qv2.middleCols(h * hd, hd);
        }
        t.accumulate(q, gq);
        t.accumulate(k, gk);
        t.accumulate(v, gv);
      });
}

// ---- indexing -----------------------------------------------------------------

Var embedding(Tape& tape, Var table, std::span<const Token> ids) {
  const Matrix& tv = tape.value(table);
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < tv.rows(), "embedding", "id out of range");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  std::vector<Token> saved(ids.begin(), ids.end());
  return tape.record(std::move(out), tape.requires_grad(table),
                     [table, saved = std::move(saved)](Tape& t, const Matrix& g) {
                       const Matrix& tv2 = t.value(table);
                       Matrix gt = Matrix::Zero(tv2.rows(), tv2.cols());
                       for (std::size_t i = 0; i < saved.size(); ++i) {
                         gt.row(saved[i]) += g.row(static_cast<Eigen::Index>(i));
                       }
                       t.accumulate(table, gt);
                     });
}

Var concat_cols(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  require(av.rows() == bv.rows(), "concat_cols", "row counts differ");
  Matrix out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const auto split = av.cols();
  return tape.record(std::move(out), any_grad(tape, {a, b}),
                     [a, b, split](Tape& t, const Matrix& g) {
                       if (t.requires_grad(a)) t.accumulate(a, Matrix(g.leftCols(split)));
                       if (t.requires_grad(b)) t.accumulate(b, Matrix(g.rightCols(g.cols() - split)));
                     });
}

Var concat_rows(Tape& tape, Var a, Var b) {
  const Matrix& av = tape.value(a);
  const Matrix& bv = tape.value(b);
  require(av.cols() == bv.cols(), "concat_rows", "widths differ");
  Matrix out(av.rows() + bv.rows(), av.cols());
  out << av, bv;
  const auto split = av.rows();
  return tape.record(std::move(out), any_grad(tape, {a, b}),
                     [a, b, split](Tape& t, const Matrix& g) {
                       if (t.requires_grad(a)) t.accumulate(a, Matrix(g.topRows(split)));
                       if (t.requires_grad(b)) t.accumulate(b, Matrix(g.bottomRows(g.rows() - split)));
                     });
}

Var slice_rows(Tape& tape, Var x, int first, int count) {
  const Matrix& xv = tape.value(x);
  require(first >= 0 && count >= 0 && first + count <= xv.rows(), "slice_rows", "range");
  Matrix out = xv.middleRows(first, count);
  return tape.record(std::move(out), tape.requires_grad(x),
                     [x, first, count](Tape& t, const Matrix& g) {
                       const Matrix& xv2 = t.value(x);
                       Matrix gx = Matrix::Zero(xv2.rows(), xv2.cols());
                       gx.middleRows(first, count) = g;
                       t.accumulate(x, gx);
                     });
}

Var slice_cols(Tape& tape, Var x, int first, int count) {
  const Matrix& xv = tape.value(x);
  require(first >= 0 && count >= 0 && first + count <= xv.cols(), "slice_cols", "range");
  Matrix out = xv.middleCols(first, count);
  return tape.record(std::move(out), tape.requires_grad(x),
                     [x, first, count](Tape& t, const Matrix& g) {
                       const Matrix& xv2 = t.value(x);
                       Matrix gx = Matrix::Zero(xv2.rows(), xv2.cols());
                       gx.middleCols(first, count) = g;
                       t.accumulate(x, gx);
                     });
}

}  // namespace ccdd::ad
