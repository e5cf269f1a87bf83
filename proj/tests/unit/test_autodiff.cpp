#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "ccdd/autodiff.hpp"
#include "ccdd/rng.hpp"

using namespace ccdd;
namespace ad = ccdd::ad;

namespace {

using Builder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

Matrix random_matrix(int r, int c, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double weighted_output(const Builder& build, const std::vector<Matrix>& params, const Matrix& w) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars.push_back(tape.parameter(params[i], static_cast<int>(i), false));
  }
  return tape.value(build(tape, vars)).cwiseProduct(w).sum();
}

/// Max relative error between the tape gradient of sum(w * f) and central
/// differences, over every parameter entry.
double gradient_error(const Builder& build, std::vector<Matrix> params, std::uint64_t seed) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars.push_back(tape.parameter(params[i], static_cast<int>(i)));
  }
  const ad::Var out = build(tape, vars);
  const Matrix w = random_matrix(static_cast<int>(tape.value(out).rows()),
                                 static_cast<int>(tape.value(out).cols()), seed);
  tape.accumulate(out, w);
  tape.backward();
  std::vector<Matrix> grads;
  for (const Matrix& p : params) grads.push_back(Matrix::Zero(p.rows(), p.cols()));
  tape.for_each_parameter_grad([&](int i, const Matrix& g) { grads[static_cast<std::size_t>(i)] += g; });

  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (Eigen::Index k = 0; k < params[i].size(); ++k) {
      const double keep = params[i].data()[k];
      params[i].data()[k] = keep + h;
      const double up = weighted_output(build, params, w);
      params[i].data()[k] = keep - h;
      const double down = weighted_output(build, params, w);
      params[i].data()[k] = keep;
      const double fd = (up - down) / (2 * h);
      const double an = grads[i].data()[k];
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-2, std::abs(fd) + std::abs(an)));
    }
  }
  return worst;
}

}  // namespace

TEST(Autodiff, LinearAlgebraOps) {
  EXPECT_LT(gradient_error([](ad::Tape& t, const auto& v) { return ad::matmul(t, v[0], v[1]); },
                           {random_matrix(3, 4, 1), random_matrix(4, 2, 2)}, 3),
            1e-7);
  EXPECT_LT(gradient_error([](ad::Tape& t, const auto& v) { return ad::linear(t, v[0], v[1], v[2]); },
                           {random_matrix(3, 4, 1), random_matrix(4, 2, 2), random_matrix(1, 2, 4)}, 5),
            1e-7);
  EXPECT_LT(gradient_error([](ad::Tape& t, const auto& v) { return ad::mul(t, v[0], ad::add(t, v[0], v[1])); },
                           {random_matrix(3, 4, 6), random_matrix(3, 4, 7)}, 8),
            1e-7);
  EXPECT_LT(gradient_error([](ad::Tape& t, const auto& v) { return ad::scale_shift(t, v[0], v[1], v[2]); },
                           {random_matrix(3, 4, 9), random_matrix(1, 4, 10), random_matrix(1, 4, 11)}, 12),
            1e-7);
  EXPECT_LT(gradient_error([](ad::Tape& t, const auto& v) { return ad::mul_col(t, v[0], v[1], 1); },
                           {random_matrix(3, 4, 13), random_matrix(3, 2, 14)}, 15),
            1e-7);
}

TEST(Autodiff, PointwiseAndNormalization) {
  for (auto op : {ad::silu, ad::gelu, ad::tanh, ad::softmax_rows}) {
    EXPECT_LT(gradient_error([op](ad::Tape& t, const auto& v) { return op(t, v[0]); },
                             {random_matrix(3, 5, 16)}, 17),
              1e-7);
  }
  EXPECT_LT(gradient_error([](ad::Tape& t, const auto& v) { return ad::layer_norm(t, v[0]); },
                           {random_matrix(3, 6, 18)}, 19),
            1e-6);
}

TEST(Autodiff, AttentionAndRotary) {
  const std::vector<int> pos{0, 1, 2, 3};
  EXPECT_LT(gradient_error([&](ad::Tape& t, const auto& v) {
              const ad::Var q = ad::rotary(t, v[0], 2, pos);
              const ad::Var k = ad::rotary(t, v[1], 2, pos);
              return ad::attention(t, q, k, v[2], 2);
            },
                           {random_matrix(4, 8, 20), random_matrix(4, 8, 21), random_matrix(4, 8, 22)}, 23),
            1e-6);
}

TEST(Autodiff, StructuralOps) {
  const std::vector<Token> ids{2, 0, 2};
  EXPECT_LT(gradient_error([&](ad::Tape& t, const auto& v) { return ad::embedding(t, v[0], ids); },
                           {random_matrix(3, 4, 24)}, 25),
            1e-7);
  EXPECT_LT(gradient_error([](ad::Tape& t, const auto& v) {
              const ad::Var c = ad::concat_cols(t, v[0], v[1]);
              const ad::Var r = ad::concat_rows(t, c, c);
              return ad::slice_cols(t, ad::slice_rows(t, r, 1, 3), 1, 4);
            },
                           {random_matrix(2, 3, 26), random_matrix(2, 2, 27)}, 28),
            1e-7);
}

TEST(Autodiff, ClearGradientsAllowsASecondSweep) {
  const Matrix a = random_matrix(2, 2, 30);
  ad::Tape tape;
  const ad::Var x = tape.parameter(a, 0);
  const ad::Var y = ad::mul(tape, x, x);
  Matrix first, second;
  tape.accumulate(y, Matrix::Ones(2, 2));
  tape.backward();
  tape.for_each_parameter_grad([&](int, const Matrix& g) { first = g; });
  tape.clear_gradients();
  tape.accumulate(y, Matrix::Ones(2, 2));
  tape.backward();
  tape.for_each_parameter_grad([&](int, const Matrix& g) { second = g; });
  EXPECT_EQ(first, second);
  EXPECT_TRUE(first.isApprox(2.0 * a));
}
