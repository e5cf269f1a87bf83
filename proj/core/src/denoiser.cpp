#include "ccdd/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "ccdd/error.hpp"
#include "ccdd/rng.hpp"

namespace ccdd {
namespace {

constexpr double kInitStd = 0.02;

Matrix trunc_normal(int rows, int cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v = rng.normal();
    while (std::abs(v) > 2.0) v = rng.normal();
    m.data()[i] = kInitStd * v;
  }
  return m;
}

std::string block_name(int layer, const std::string& leaf) {
  return "blocks." + std::to_string(layer) + "." + leaf;
}

// Parameter leaves of one forward graph, looked up by name.
class Leaves {
 public:
  Leaves(ad::Tape& tape, const ParameterSet& params, bool with_grad)
      : tape_(tape), params_(params), with_grad_(with_grad),
        vars_(static_cast<std::size_t>(params.size())), bound_(vars_.size(), 0) {}

  ad::Var operator()(const std::string& name) {
    const int i = params_.index(name);
    if (!bound_[static_cast<std::size_t>(i)]) {
      vars_[static_cast<std::size_t>(i)] = tape_.parameter(params_[i], i, with_grad_);
      bound_[static_cast<std::size_t>(i)] = 1;
    }
    return vars_[static_cast<std::size_t>(i)];
  }

 private:
  ad::Tape& tape_;
  const ParameterSet& params_;
  bool with_grad_;
  std::vector<ad::Var> vars_;
  std::vector<std::uint8_t> bound_;
};

struct Modulation {
  ad::Var shift_attn, scale_attn, gate_attn, shift_mlp, scale_mlp, gate_mlp;
};

Modulation modulation(ad::Tape& tape, Leaves& p, ad::Var cond, const std::string& prefix,
                      int d) {
  const ad::Var mod = ad::linear(tape, cond, p(prefix + "mod.w"), p(prefix + "mod.b"));
  return {ad::slice_cols(tape, mod, 0, d),     ad::slice_cols(tape, mod, d, d),
          ad::slice_cols(tape, mod, 2 * d, d), ad::slice_cols(tape, mod, 3 * d, d),
          ad::slice_cols(tape, mod, 4 * d, d), ad::slice_cols(tape, mod, 5 * d, d)};
}

struct Qkv {
  ad::Var q, k, v;
};

Qkv project_qkv(ad::Tape& tape, Leaves& p, ad::Var x, const std::string& prefix, int d,
                int heads, const std::vector<int>* positions) {
  const ad::Var qkv = ad::linear(tape, x, p(prefix + "attn.qkv.w"), p(prefix + "attn.qkv.b"));
  Qkv out{ad::slice_cols(tape, qkv, 0, d), ad::slice_cols(tape, qkv, d, d),
          ad::slice_cols(tape, qkv, 2 * d, d)};
  if (positions != nullptr) {
    out.q = ad::rotary(tape, out.q, heads, *positions);
    out.k = ad::rotary(tape, out.k, heads, *positions);
  }
  return out;
}

ad::Var mlp(ad::Tape& tape, Leaves& p, ad::Var x, const std::string& prefix) {
  const ad::Var h = ad::gelu(tape, ad::linear(tape, x, p(prefix + "fc1.w"), p(prefix + "fc1.b")));
  return ad::linear(tape, h, p(prefix + "fc2.w"), p(prefix + "fc2.b"));
}

void check_finite(const ad::Tape& tape, ad::Var v, int layer) {
  if (!tape.value(v).allFinite()) {
    throw NumericError("denoiser: non-finite activation in layer " + std::to_string(layer));
  }
}

}  // namespace

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kMdit: return "mdit";
    case Architecture::kMmdit: return "mmdit";
    case Architecture::kMoedit: return "moedit";
  }
  return "unknown";
}

std::string_view to_string(Fusion fuse) {
  return fuse == Fusion::kAdd ? "add" : "concat";
}

void DenoiserConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("denoiser." + field + ": " + why);
  };
  if (n_layers < 1) fail("n_layers", "must be at least 1");
  if (d_model < 2) fail("d_model", "must be at least 2");
  if (n_heads < 1) fail("n_heads", "must be at least 1");
  if (d_model % n_heads != 0) fail("n_heads", "must divide d_model");
  if ((d_model / n_heads) % 2 != 0) fail("n_heads", "head dimension must be even");
  if (d_model % 2 != 0) fail("d_model", "must be even");
  if (d_latent < 1) fail("d_latent", "must be at least 1");
  if (vocab_augmented < 2) fail("vocab_augmented", "must be at least 2");
  if (n_experts < 1) fail("n_experts", "must be at least 1");
  if (arch == Architecture::kMoedit && n_experts < 2) fail("n_experts", "moedit needs at least 2");
  if (mlp_ratio < 1) fail("mlp_ratio", "must be at least 1");
}

// ---- ParameterSet -------------------------------------------------------------

int ParameterSet::add(std::string name, Matrix value) {
  if (lookup_.count(name) != 0) throw ConfigError("duplicate parameter " + name);
  const int i = static_cast<int>(values_.size());
  lookup_.emplace(name, i);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return i;
}

int ParameterSet::index(std::string_view name) const {
  const auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) throw InputError("unknown parameter " + std::string(name));
  return it->second;
}

bool ParameterSet::contains(std::string_view name) const {
  return lookup_.count(std::string(name)) != 0;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Matrix& m : values_) n += static_cast<std::size_t>(m.size());
  return n;
}

Gradients zeros_like(const ParameterSet& params) {
  Gradients g;
  g.reserve(static_cast<std::size_t>(params.size()));
  for (const Matrix& m : params.values()) g.push_back(Matrix::Zero(m.rows(), m.cols()));
  return g;
}

// ---- helpers -----------------------------------------------------------------

Matrix timestep_embedding(double t, int dim) {
  Matrix e(1, dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    const double arg = 1000.0 * t * freq;
    e(0, k) = std::cos(arg);
    e(0, half + k) = std::sin(arg);
  }
  if (dim % 2 == 1) e(0, dim - 1) = 0.0;
  return e;
}

void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  const int workers = std::min(threads, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---- Denoiser ------------------------------------------------------------------

Denoiser::Denoiser(DenoiserConfig config, std::uint64_t init_seed)
    : config_(std::move(config)) {
  config_.validate();
  build_parameters(init_seed);
}

Denoiser::Denoiser(DenoiserConfig config, ParameterSet params) : config_(std::move(config)) {
  config_.validate();
  build_parameters(0);
  if (params.size() != params_.size()) {
    throw ConfigError("denoiser: parameter count " + std::to_string(params.size()) +
                      " does not match architecture (" + std::to_string(params_.size()) + ")");
  }
  for (int i = 0; i < params_.size(); ++i) {
    const int j = params.index(params_.name(i));
    if (params[j].rows() != params_[i].rows() || params[j].cols() != params_[i].cols()) {
      throw ConfigError("denoiser: shape mismatch for parameter " + params_.name(i));
    }
    params_[i] = params[j];
  }
}

void Denoiser::build_parameters(std::uint64_t init_seed) {
  RngStream rng = derive_stream(init_seed, StreamTag::kInit, 0);
  const int d = config_.d_model;
  const int dl = config_.d_latent;
  const int va = config_.vocab_augmented;
  const int hidden = config_.mlp_ratio * d;
  auto dense = [&](const std::string& name, int in, int out) {
    params_.add(name + ".w", trunc_normal(in, out, rng));
    params_.add(name + ".b", Matrix::Zero(1, out));
  };
  auto zero_dense = [&](const std::string& name, int in, int out) {
    params_.add(name + ".w", Matrix::Zero(in, out));
    params_.add(name + ".b", Matrix::Zero(1, out));
  };
  auto attention_block = [&](const std::string& prefix) {
    dense(prefix + "attn.qkv", d, 3 * d);
    dense(prefix + "attn.out", d, d);
  };

  dense("time.fc1", d, d);
  dense("time.fc2", d, d);
  params_.add("tok_emb", trunc_normal(va, d, rng));

  switch (config_.arch) {
    case Architecture::kMdit:
      if (config_.fuse == Fusion::kConcat) {
        dense("in.fuse", d + dl, d);
      } else {
        dense("in.latent", dl, d);
      }
      for (int l = 0; l < config_.n_layers; ++l) {
        const std::string p = block_name(l, "");
        zero_dense(p + "mod", d, 6 * d);
        attention_block(p);
        dense(p + "mlp.fc1", d, hidden);
        dense(p + "mlp.fc2", hidden, d);
      }
      zero_dense("final.mod", d, 2 * d);
      break;
    case Architecture::kMmdit:
      dense("in.latent", dl, d);
      for (int l = 0; l < config_.n_layers; ++l) {
        for (const char* s : {"x.", "z."}) {
          const std::string p = block_name(l, s);
          zero_dense(p + "mod", d, 6 * d);
          attention_block(p);
          dense(p + "mlp.fc1", d, hidden);
          dense(p + "mlp.fc2", hidden, d);
        }
      }
      zero_dense("final.x.mod", d, 2 * d);
      zero_dense("final.z.mod", d, 2 * d);
      break;
    case Architecture::kMoedit:
      dense("in.latent", dl, d);
      params_.add("modality_emb", trunc_normal(2, d, rng));
      for (int l = 0; l < config_.n_layers; ++l) {
        const std::string p = block_name(l, "");
        zero_dense(p + "mod", d, 6 * d);
        attention_block(p);
        dense(p + "moe.gate", d, config_.n_experts);
        for (int e = 0; e < config_.n_experts; ++e) {
          const std::string ep = p + "moe.expert" + std::to_string(e) + ".";
          dense(ep + "fc1", d, hidden);
          dense(ep + "fc2", hidden, d);
        }
      }
      zero_dense("final.mod", d, 2 * d);
      break;
  }
  dense("head.eps", d, dl);
  dense("head.logits", d, va);
}

void Denoiser::check_inputs(const TokenBatch& x_t, const LatentBatch& z_t,
                            std::span<const double> t, std::size_t drop_count) const {
  if (x_t.batch() != z_t.batch() || x_t.length() != z_t.length()) {
    throw InputError("denoiser: token and latent batches disagree in shape");
  }
  if (z_t.channels() != config_.d_latent) {
    throw InputError("denoiser: latent width " + std::to_string(z_t.channels()) +
                     " != d_latent " + std::to_string(config_.d_latent));
  }
  if (t.size() != static_cast<std::size_t>(x_t.batch()) ||
      drop_count != static_cast<std::size_t>(x_t.batch())) {
    throw InputError("denoiser: need one t and one drop flag per sequence");
  }
  for (double v : t) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("denoiser: t outside [0, 1]");
  }
  for (Token id : x_t.ids()) {
    if (id < 0 || id >= config_.vocab_augmented) {
      throw InputError("denoiser: token id " + std::to_string(id) + " out of range");
    }
  }
  if (!z_t.all_finite()) throw InputError("denoiser: non-finite latent input");
}

Denoiser::SequenceGraph Denoiser::build_graph(ad::Tape& tape, bool with_grad,
                                              const TokenBatch& x_t, const LatentBatch& z_t,
                                              int b, double t, bool drop) const {
  Leaves p(tape, params_, with_grad);
  const int d = config_.d_model;
  const int heads = config_.n_heads;
  const int length = x_t.length();

  const ad::Var temb = tape.constant(timestep_embedding(t, d));
  const ad::Var c = ad::linear(
      tape, ad::silu(tape, ad::linear(tape, temb, p("time.fc1.w"), p("time.fc1.b"))),
      p("time.fc2.w"), p("time.fc2.b"));
  const ad::Var cond = ad::silu(tape, c);

  const ad::Var tokens = ad::embedding(tape, p("tok_emb"), x_t.row(b));
  Matrix z_in = drop ? Matrix::Zero(length, config_.d_latent) : Matrix(z_t.sequence(b));
  const ad::Var z = tape.constant(std::move(z_in));

  std::vector<int> positions(static_cast<std::size_t>(length));
  std::iota(positions.begin(), positions.end(), 0);
  std::vector<int> joint_positions = positions;
  joint_positions.insert(joint_positions.end(), positions.begin(), positions.end());
  const std::vector<int>* pos = config_.use_rotary ? &positions : nullptr;
  const std::vector<int>* joint_pos = config_.use_rotary ? &joint_positions : nullptr;

  SequenceGraph out;
  auto heads_from = [&](ad::Var h, const std::string& mod_prefix, bool eps_head,
                        bool logit_head) {
    const ad::Var mod = ad::linear(tape, cond, p(mod_prefix + "mod.w"), p(mod_prefix + "mod.b"));
    const ad::Var shift = ad::slice_cols(tape, mod, 0, d);
    const ad::Var scl = ad::slice_cols(tape, mod, d, d);
    const ad::Var y = ad::scale_shift(tape, ad::layer_norm(tape, h), scl, shift);
    if (eps_head) out.eps = ad::linear(tape, y, p("head.eps.w"), p("head.eps.b"));
    if (logit_head) out.logits = ad::linear(tape, y, p("head.logits.w"), p("head.logits.b"));
  };

  switch (config_.arch) {
    case Architecture::kMdit: {
      ad::Var h = config_.fuse == Fusion::kConcat
                      ? ad::linear(tape, ad::concat_cols(tape, tokens, z), p("in.fuse.w"),
                                   p("in.fuse.b"))
                      : ad::add(tape, tokens,
                                ad::linear(tape, z, p("in.latent.w"), p("in.latent.b")));
      for (int l = 0; l < config_.n_layers; ++l) {
        const std::string pre = block_name(l, "");
        const Modulation m = modulation(tape, p, cond, pre, d);
        const ad::Var a =
            ad::scale_shift(tape, ad::layer_norm(tape, h), m.scale_attn, m.shift_attn);
        const Qkv qkv = project_qkv(tape, p, a, pre, d, heads, pos);
        const ad::Var o = ad::linear(tape, ad::attention(tape, qkv.q, qkv.k, qkv.v, heads),
                                     p(pre + "attn.out.w"), p(pre + "attn.out.b"));
        h = ad::add(tape, h, ad::mul_row(tape, o, m.gate_attn));
        const ad::Var f =
            ad::scale_shift(tape, ad::layer_norm(tape, h), m.scale_mlp, m.shift_mlp);
        h = ad::add(tape, h, ad::mul_row(tape, mlp(tape, p, f, pre + "mlp."), m.gate_mlp));
        check_finite(tape, h, l);
      }
      heads_from(h, "final.", true, true);
      break;
    }
    case Architecture::kMmdit: {
      ad::Var hx = tokens;
      ad::Var hz = ad::linear(tape, z, p("in.latent.w"), p("in.latent.b"));
      for (int l = 0; l < config_.n_layers; ++l) {
        const std::string px = block_name(l, "x.");
        const std::string pz = block_name(l, "z.");
        const Modulation mx = modulation(tape, p, cond, px, d);
        const Modulation mz = modulation(tape, p, cond, pz, d);
        const ad::Var ax =
            ad::scale_shift(tape, ad::layer_norm(tape, hx), mx.scale_attn, mx.shift_attn);
        const ad::Var az =
            ad::scale_shift(tape, ad::layer_norm(tape, hz), mz.scale_attn, mz.shift_attn);
        const Qkv qx = project_qkv(tape, p, ax, px, d, heads, pos);
        const Qkv qz = project_qkv(tape, p, az, pz, d, heads, pos);
        const ad::Var o = ad::attention(tape, ad::concat_rows(tape, qx.q, qz.q),
                                        ad::concat_rows(tape, qx.k, qz.k),
                                        ad::concat_rows(tape, qx.v, qz.v), heads);
        const ad::Var ox = ad::linear(tape, ad::slice_rows(tape, o, 0, length),
                                      p(px + "attn.out.w"), p(px + "attn.out.b"));
        const ad::Var oz = ad::linear(tape, ad::slice_rows(tape, o, length, length),
                                      p(pz + "attn.out.w"), p(pz + "attn.out.b"));
        hx = ad::add(tape, hx, ad::mul_row(tape, ox, mx.gate_attn));
        hz = ad::add(tape, hz, ad::mul_row(tape, oz, mz.gate_attn));
        const ad::Var fx =
            ad::scale_shift(tape, ad::layer_norm(tape, hx), mx.scale_mlp, mx.shift_mlp);
        const ad::Var fz =
            ad::scale_shift(tape, ad::layer_norm(tape, hz), mz.scale_mlp, mz.shift_mlp);
        hx = ad::add(tape, hx, ad::mul_row(tape, mlp(tape, p, fx, px + "mlp."), mx.gate_mlp));
        hz = ad::add(tape, hz, ad::mul_row(tape, mlp(tape, p, fz, pz + "mlp."), mz.gate_mlp));
        check_finite(tape, hx, l);
        check_finite(tape, hz, l);
      }
      heads_from(hx, "final.x.", false, true);
      heads_from(hz, "final.z.", true, false);
      break;
    }
    case Architecture::kMoedit: {
      const ad::Var modality = p("modality_emb");
      const ad::Var hx = ad::add_row(tape, tokens, ad::slice_rows(tape, modality, 0, 1));
      const ad::Var hz = ad::add_row(
          tape, ad::linear(tape, z, p("in.latent.w"), p("in.latent.b")),
          ad::slice_rows(tape, modality, 1, 1));
      ad::Var h = ad::concat_rows(tape, hx, hz);
      for (int l = 0; l < config_.n_layers; ++l) {
        const std::string pre = block_name(l, "");
        const Modulation m = modulation(tape, p, cond, pre, d);
        const ad::Var a =
            ad::scale_shift(tape, ad::layer_norm(tape, h), m.scale_attn, m.shift_attn);
        const Qkv qkv = project_qkv(tape, p, a, pre, d, heads, joint_pos);
        const ad::Var o = ad::linear(tape, ad::attention(tape, qkv.q, qkv.k, qkv.v, heads),
                                     p(pre + "attn.out.w"), p(pre + "attn.out.b"));
        h = ad::add(tape, h, ad::mul_row(tape, o, m.gate_attn));
        const ad::Var f =
            ad::scale_shift(tape, ad::layer_norm(tape, h), m.scale_mlp, m.shift_mlp);
        const ad::Var gate = ad::softmax_rows(
            tape, ad::linear(tape, f, p(pre + "moe.gate.w"), p(pre + "moe.gate.b")));
        out.gates.push_back(gate);
        ad::Var mix{};
        for (int e = 0; e < config_.n_experts; ++e) {
          const ad::Var y = ad::mul_col(
              tape, mlp(tape, p, f, pre + "moe.expert" + std::to_string(e) + "."), gate, e);
          mix = e == 0 ? y : ad::add(tape, mix, y);
        }
        h = ad::add(tape, h, ad::mul_row(tape, mix, m.gate_mlp));
        check_finite(tape, h, l);
      }
      // Shared final modulation; each head reads its own half of the stream.
      const ad::Var mod = ad::linear(tape, cond, p("final.mod.w"), p("final.mod.b"));
      const ad::Var y = ad::scale_shift(tape, ad::layer_norm(tape, h),
                                        ad::slice_cols(tape, mod, d, d),
                                        ad::slice_cols(tape, mod, 0, d));
      out.logits = ad::linear(tape, ad::slice_rows(tape, y, 0, length), p("head.logits.w"),
                              p("head.logits.b"));
      out.eps = ad::linear(tape, ad::slice_rows(tape, y, length, length), p("head.eps.w"),
                           p("head.eps.b"));
      break;
    }
  }

  if (drop) out.eps = ad::scale(tape, out.eps, 0.0);
  if (!tape.value(out.eps).allFinite() || !tape.value(out.logits).allFinite()) {
    throw NumericError("denoiser: non-finite output head");
  }
  return out;
}

DenoiserOutput Denoiser::predict(const TokenBatch& x_t, const LatentBatch& z_t,
                                 std::span<const double> t, bool drop_continuous) const {
  const std::vector<std::uint8_t> drop(static_cast<std::size_t>(x_t.batch()),
                                       drop_continuous ? 1 : 0);
  return forward(x_t, z_t, t, drop);
}

DenoiserOutput Denoiser::forward(const TokenBatch& x_t, const LatentBatch& z_t,
                                 std::span<const double> t,
                                 std::span<const std::uint8_t> drop_continuous) const {
  check_inputs(x_t, z_t, t, drop_continuous.size());
  DenoiserOutput out{LatentBatch(x_t.batch(), x_t.length(), config_.d_latent),
                     Tensor3(x_t.batch(), x_t.length(), config_.vocab_augmented)};
  parallel_for(x_t.batch(), num_threads_, [&](int b) {
    ad::Tape tape;
    const SequenceGraph g = build_graph(tape, false, x_t, z_t, b, t[static_cast<std::size_t>(b)],
                                        drop_continuous[static_cast<std::size_t>(b)] != 0);
    out.eps_hat.sequence(b) = tape.value(g.eps);
    out.logits.sequence(b) = tape.value(g.logits);
  });
  return out;
}

ForwardPass Denoiser::forward_with_tape(const TokenBatch& x_t, const LatentBatch& z_t,
                                        std::span<const double> t,
                                        std::span<const std::uint8_t> drop_continuous) const {
  check_inputs(x_t, z_t, t, drop_continuous.size());
  ForwardPass pass;
  const auto batch = static_cast<std::size_t>(x_t.batch());
  pass.output_ = {LatentBatch(x_t.batch(), x_t.length(), config_.d_latent),
                  Tensor3(x_t.batch(), x_t.length(), config_.vocab_augmented)};
  pass.tapes_.resize(batch);
  pass.eps_vars_.resize(batch);
  pass.logit_vars_.resize(batch);
  parallel_for(x_t.batch(), num_threads_, [&](int b) {
    const auto i = static_cast<std::size_t>(b);
    pass.tapes_[i] = std::make_unique<ad::Tape>();
    const SequenceGraph g =
        build_graph(*pass.tapes_[i], true, x_t, z_t, b, t[i], drop_continuous[i] != 0);
    pass.eps_vars_[i] = g.eps;
    pass.logit_vars_[i] = g.logits;
    pass.output_.eps_hat.sequence(b) = pass.tapes_[i]->value(g.eps);
    pass.output_.logits.sequence(b) = pass.tapes_[i]->value(g.logits);
  });
  return pass;
}

Gradients Denoiser::backward(const ForwardPass& pass, const LatentBatch& d_eps,
                             const Tensor3& d_logits) const {
  if (pass.tapes_.empty() && pass.output_.eps_hat.batch() != 0) {
    throw InputError("denoiser backward: forward pass holds no tape");
  }
  if (!d_eps.same_shape(pass.output_.eps_hat) || !d_logits.same_shape(pass.output_.logits)) {
    throw InputError("denoiser backward: cotangent shape does not match forward output");
  }
  const int batch = static_cast<int>(pass.tapes_.size());
  std::vector<Gradients> per_sequence(static_cast<std::size_t>(batch));
  parallel_for(batch, num_threads_, [&](int b) {
    const auto i = static_cast<std::size_t>(b);
    ad::Tape& work = *pass.tapes_[i];
    work.clear_gradients();
    work.accumulate(pass.eps_vars_[i], Matrix(d_eps.sequence(b)));
    work.accumulate(pass.logit_vars_[i], Matrix(d_logits.sequence(b)));
    work.backward();
    Gradients g = zeros_like(params_);
    work.for_each_parameter_grad([&](int idx, const Matrix& grad) {
      g[static_cast<std::size_t>(idx)] += grad;
    });
    work.clear_gradients();
    per_sequence[i] = std::move(g);
  });
  Gradients total = zeros_like(params_);
  for (const Gradients& g : per_sequence) {
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += g[k];
  }
  return total;
}

std::vector<Matrix> Denoiser::gate_weights(const TokenBatch& x_t, const LatentBatch& z_t,
                                           double t, bool drop_continuous, int sequence) const {
  const std::vector<double> times(static_cast<std::size_t>(x_t.batch()), t);
  const std::vector<std::uint8_t> drop(static_cast<std::size_t>(x_t.batch()), 0);
  check_inputs(x_t, z_t, times, drop.size());
  if (sequence < 0 || sequence >= x_t.batch()) throw InputError("gate_weights: bad sequence");
  ad::Tape tape;
  const SequenceGraph g = build_graph(tape, false, x_t, z_t, sequence, t, drop_continuous);
  std::vector<Matrix> out;
  for (ad::Var v : g.gates) out.push_back(tape.value(v));
  return out;
}

}  // namespace ccdd
