#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ccdd/autodiff.hpp"
#include "ccdd/batch.hpp"

namespace ccdd {

/// Paired heads of the joint denoiser.
struct DenoiserOutput {
  LatentBatch eps_hat;  // batch x length x d_latent
  Tensor3 logits;       // batch x length x (V + 1); the last channel is the mask slot
};

/// Anything that maps (x_t, z_t, t) to an epsilon prediction and token
/// logits. The trained network implements it, and so do analytic oracles in
/// tests.
class JointDenoiser {
 public:
  virtual ~JointDenoiser() = default;

  /// With `drop_continuous` the latent input is zeroed and eps_hat is zero,
  /// so the logits depend on (x_t, t) only.
  virtual DenoiserOutput predict(const TokenBatch& x_t, const LatentBatch& z_t,
                                 std::span<const double> t,
                                 bool drop_continuous) const = 0;

  /// Number of ordinary tokens V (the mask symbol is V).
  virtual int vocab_size() const = 0;
  virtual int latent_dim() const = 0;
};

enum class Architecture { kMdit, kMmdit, kMoedit };
enum class Fusion { kAdd, kConcat };

std::string_view to_string(Architecture arch);
std::string_view to_string(Fusion fuse);

struct DenoiserConfig {
  Architecture arch = Architecture::kMdit;
  int n_layers = 2;
  int d_model = 64;
  int n_heads = 4;
  int d_latent = 32;
  /// V + 1, including the mask symbol.
  int vocab_augmented = 0;
  int n_experts = 4;
  Fusion fuse = Fusion::kConcat;
  int mlp_ratio = 4;
  /// Rotary position encoding on queries and keys. Disabling it makes the
  /// network permutation equivariant (diagnostic only).
  bool use_rotary = true;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Ordered, named parameter tensors.
class ParameterSet {
 public:
  int add(std::string name, Matrix value);
  int index(std::string_view name) const;
  bool contains(std::string_view name) const;

  Matrix& operator[](int i) { return values_[static_cast<std::size_t>(i)]; }
  const Matrix& operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(values_.size()); }
  const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }
  std::size_t scalar_count() const;

  std::vector<Matrix>& values() { return values_; }
  const std::vector<Matrix>& values() const { return values_; }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::unordered_map<std::string, int> lookup_;
};

/// Gradients aligned with a ParameterSet.
using Gradients = std::vector<Matrix>;

Gradients zeros_like(const ParameterSet& params);

/// Activations retained by `Denoiser::forward_with_tape` for `backward`.
class ForwardPass {
 public:
  const DenoiserOutput& output() const { return output_; }

 private:
  friend class Denoiser;
  DenoiserOutput output_;
  std::vector<std::unique_ptr<ad::Tape>> tapes_;
  std::vector<ad::Var> eps_vars_;
  std::vector<ad::Var> logit_vars_;
};

/// Time-conditioned transformer f(x_t, z_t, t) with an epsilon head and a
/// token-logit head. Timesteps enter through a sinusoidal embedding and MLP
/// that drive adaLN shift/scale/gate on every block.
///
///  - mdit: token embedding and latents are fused into one stream of L tokens.
///  - mmdit: a token stream and a latent stream with separate weights, joined
///    by attention over all 2L tokens in every layer.
///  - moedit: both streams share the attention weights over 2L tokens; the
///    feed-forward is a softly routed mixture of experts.
class Denoiser : public JointDenoiser {
 public:
  Denoiser(DenoiserConfig config, std::uint64_t init_seed);
  /// Adopts existing parameters (checkpoint load). Names and shapes must
  /// match what `config` builds.
  Denoiser(DenoiserConfig config, ParameterSet params);

  DenoiserOutput predict(const TokenBatch& x_t, const LatentBatch& z_t,
                         std::span<const double> t,
                         bool drop_continuous) const override;

  /// Per-sequence drop flags.
  DenoiserOutput forward(const TokenBatch& x_t, const LatentBatch& z_t,
                         std::span<const double> t,
                         std::span<const std::uint8_t> drop_continuous) const;

  ForwardPass forward_with_tape(const TokenBatch& x_t, const LatentBatch& z_t,
                                std::span<const double> t,
                                std::span<const std::uint8_t> drop_continuous) const;

  /// Reverse-mode gradients of <d_eps, eps_hat> + <d_logits, logits>,
  /// summed over sequences in batch order.
  Gradients backward(const ForwardPass& pass, const LatentBatch& d_eps,
                     const Tensor3& d_logits) const;

  /// Soft-routing weights (2L x n_experts) of every MoE layer for one
  /// sequence. Empty for other architectures.
  std::vector<Matrix> gate_weights(const TokenBatch& x_t, const LatentBatch& z_t,
                                   double t, bool drop_continuous, int sequence = 0) const;

  int vocab_size() const override { return config_.vocab_augmented - 1; }
  int latent_dim() const override { return config_.d_latent; }

  const DenoiserConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  void set_num_threads(int n) { num_threads_ = n < 1 ? 1 : n; }
  int num_threads() const { return num_threads_; }

 private:
  struct SequenceGraph {
    ad::Var eps;
    ad::Var logits;
    std::vector<ad::Var> gates;
  };

  void build_parameters(std::uint64_t init_seed);
  void check_inputs(const TokenBatch& x_t, const LatentBatch& z_t,
                    std::span<const double> t, std::size_t drop_count) const;
  SequenceGraph build_graph(ad::Tape& tape, bool with_grad, const TokenBatch& x_t,
                            const LatentBatch& z_t, int b, double t, bool drop) const;

  DenoiserConfig config_;
  ParameterSet params_;
  int num_threads_ = 1;
};

/// Sinusoidal timestep features (1 x dim), t scaled by 1000.
Matrix timestep_embedding(double t, int dim);

/// Runs f(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& f);

}  // namespace ccdd
