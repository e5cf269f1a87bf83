#include "ccdd/embedder.hpp"

#include <cmath>
#include <string>

#include <Eigen/QR>

#include "ccdd/error.hpp"
#include "ccdd/rng.hpp"

namespace ccdd {
namespace {

constexpr double kMaxCoherence = 0.5;

// Pushes unit rows apart until every pairwise |cos| is below kMaxCoherence.
void spread_rows(Matrix& rows) {
  const auto n = rows.rows();
  for (int iter = 0; iter < 5000; ++iter) {
    rows.rowwise().normalize();
    Matrix gram = rows * rows.transpose();
    gram.diagonal().setZero();
    if (gram.cwiseAbs().maxCoeff() < kMaxCoherence - 0.02) return;
    const Matrix push = gram.array().cube().matrix();
    rows -= (0.5 / static_cast<double>(n)) * 8.0 * push * rows;
  }
  rows.rowwise().normalize();
  Matrix gram = rows * rows.transpose();
  gram.diagonal().setZero();
  if (gram.cwiseAbs().maxCoeff() >= kMaxCoherence) {
    throw ConfigError("codebook: cannot place " + std::to_string(n) +
                      " unit vectors in dimension " + std::to_string(rows.cols()) +
                      " with pairwise |cos| < 0.5; increase latent_dim");
  }
}

void check_sizes(int vocab_size, int dim) {
  if (vocab_size < 1) throw ConfigError("codebook: vocab_size must be >= 1");
  if (dim < 1) throw ConfigError("codebook: latent_dim must be >= 1");
}

}  // namespace

Matrix make_random_codebook(int vocab_size, int dim, std::uint64_t seed) {
  check_sizes(vocab_size, dim);
  RngStream rng = derive_stream(seed, StreamTag::kCodebook, 0);
  Matrix gauss(vocab_size, dim);
  for (Eigen::Index i = 0; i < gauss.size(); ++i) gauss.data()[i] = rng.normal();

  if (vocab_size <= dim) {
    // Orthonormalize the columns of the d x V transpose; rows of Q^T are the codes.
    Eigen::MatrixXd cols = gauss.transpose();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(cols);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, vocab_size);
    Matrix rows = q.transpose();
    return rows;
  }
  spread_rows(gauss);
  return gauss;
}

Codebook Codebook::onehot_simplex(int vocab_size) {
  check_sizes(vocab_size, vocab_size);
  return Codebook(Mode::kOnehotSimplex, Matrix::Identity(vocab_size, vocab_size));
}

Codebook Codebook::random_orthonormal(int vocab_size, int dim, std::uint64_t seed) {
  Codebook cb(Mode::kRandomOrthonormal, make_random_codebook(vocab_size, dim, seed));
  cb.seed_ = seed;
  return cb;
}

Codebook Codebook::contextual(int vocab_size, int dim, std::uint64_t seed,
                              double window_weight, int radius) {
  if (!(window_weight >= 0.0 && window_weight < 1.0)) {
    throw ConfigError("codebook: context_weight must lie in [0, 1)");
  }
  if (radius < 0) throw ConfigError("codebook: context_radius must be >= 0");
  Codebook cb(Mode::kContextual, make_random_codebook(vocab_size, dim, seed));
  cb.seed_ = seed;
  cb.window_weight_ = window_weight;
  cb.radius_ = radius;
  return cb;
}

Codebook Codebook::from_vectors(Mode mode, Matrix vectors, std::uint64_t seed,
                                double window_weight, int radius) {
  check_sizes(static_cast<int>(vectors.rows()), static_cast<int>(vectors.cols()));
  Codebook cb(mode, std::move(vectors));
  cb.seed_ = seed;
  cb.window_weight_ = window_weight;
  cb.radius_ = radius;
  return cb;
}

LatentBatch Codebook::encode(const TokenBatch& x0) const {
  return encode_impl(x0, /*allow_mask=*/false);
}

LatentBatch Codebook::encode_partial(const TokenBatch& x) const {
  return encode_impl(x, /*allow_mask=*/true);
}

LatentBatch Codebook::encode_impl(const TokenBatch& x, bool allow_mask) const {
  const int vocab = vocab_size();
  for (Token id : x.ids()) {
    const bool ok = (id >= 0 && id < vocab) || (allow_mask && id == vocab);
    if (!ok) {
      throw InputError("encode: token id " + std::to_string(id) +
                       " out of range for vocabulary of size " + std::to_string(vocab));
    }
  }
  const int d = dim();
  LatentBatch z(x.batch(), x.length(), d);
  auto code = [&](Token id) -> Eigen::Ref<const Eigen::RowVectorXd> {
    return vectors_.row(id);
  };

  for (int b = 0; b < x.batch(); ++b) {
    auto out = z.sequence(b);
    for (int j = 0; j < x.length(); ++j) {
      if (mode_ != Mode::kContextual) {
        if (x.at(b, j) != vocab) out.row(j) = code(x.at(b, j));
        continue;
      }
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
      const int lo = std::max(0, j - radius_);
      const int hi = std::min(x.length() - 1, j + radius_);
      for (int k = lo; k <= hi; ++k) {
        if (x.at(b, k) == vocab) continue;
        const int offset = std::abs(k - j);
        const double w = offset == 0 ? 1.0 : std::pow(window_weight_, offset);
        if (w != 0.0) acc += w * code(x.at(b, k));
      }
      const double norm = acc.norm();
      if (norm > 0.0) out.row(j) = acc / norm;
    }
  }
  return z;
}

TokenBatch Codebook::decode_nn(const LatentBatch& z) const {
  if (z.channels() != dim()) {
    throw InputError("decode_nn: latent dim " + std::to_string(z.channels()) +
                     " != codebook dim " + std::to_string(dim()));
  }
  TokenBatch out(z.batch(), z.length());
  for (int b = 0; b < z.batch(); ++b) {
    const Matrix scores = z.sequence(b) * vectors_.transpose();  // L x V
    for (int j = 0; j < z.length(); ++j) {
      Token best = 0;
      double best_score = scores(j, 0);
      for (int v = 1; v < vocab_size(); ++v) {
        if (scores(j, v) > best_score) {
          best_score = scores(j, v);
          best = v;
        }
      }
      out.at(b, j) = best;
    }
  }
  return out;
}

}  // namespace ccdd
