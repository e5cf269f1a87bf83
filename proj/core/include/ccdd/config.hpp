#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ccdd/corruption.hpp"
#include "ccdd/denoiser.hpp"
#include "ccdd/embedder.hpp"
#include "ccdd/evaluation.hpp"
#include "ccdd/sampler.hpp"
#include "ccdd/schedules.hpp"
#include "ccdd/training.hpp"

namespace ccdd {

/// Every setting of a run. Serialized as flat `key = value` lines; see
/// `RunConfig::keys()` for the full list.
struct RunConfig {
  // data
  std::string corpus;
  std::string tokenizer = "byte";   // byte | char
  std::string synthetic = "none";   // none | iid_uniform | bigram | periodic
  int synthetic_vocab = 8;
  std::string synthetic_pattern = "0,1";
  double synthetic_sharpness = 2.0;
  int synthetic_sequences = 512;    // held-out sequences drawn for eval/reference
  double holdout_fraction = 0.1;
  int seq_len = 32;
  int batch_size = 16;

  // run
  std::int64_t steps = 1000;
  int log_every = 50;
  std::int64_t checkpoint_every = 0;
  std::uint64_t seed = 0;
  std::string output_dir = "ccdd_out";
  std::string checkpoint;
  int num_threads = 1;

  // schedules
  std::string schedule_continuous = "concave_sqrt";
  double beta = ContinuousSchedule::default_beta();
  double beta_min = 0.1;
  double beta_max = 20.0;
  std::string schedule_discrete = "masked_linear";
  double uniform_rate = 3.0;
  std::string pairing = "continuous_ahead";

  // embedder
  std::string embedder = "random_orthonormal";
  int latent_dim = 32;
  double context_weight = 0.3;
  int context_radius = 1;

  // denoiser
  std::string arch = "mdit";
  int n_layers = 2;
  int d_model = 64;
  int n_heads = 4;
  int n_experts = 4;
  std::string fuse = "concat";
  int mlp_ratio = 4;

  // training
  double gamma_cont = 1.0;
  double gamma_disc = 1.0;
  double lambda_cont = 1.0;
  std::string lambda_disc = "nelbo";  // nelbo | unit
  double p_drop = 0.15;
  double p_r_min = 0.0;
  double p_r_max = 0.9;
  double t_floor = 1e-4;
  std::string representation_masking = "zero";  // zero | reembed
  double lr = 3e-4;
  int warmup_steps = 100;
  double weight_decay = 0.02;
  double grad_clip = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  // sampling
  int sample_steps = 128;
  double cfg_w = 1.0;
  double eta_ddpm = 1.0;
  std::string variance_mode = "exact_posterior";
  std::string time_grid = "uniform";  // uniform | angle
  double temperature = 1.0;
  std::string decode_source = "discrete_tokens";
  bool argmax = false;
  int sample_count = 16;
  int sample_length = 0;  // 0: seq_len
  std::string samples_out;
  std::string latents_out;

  // evaluation
  int eval_n_mc = 16;
  double eval_p_r = 1.0;
  bool discrete_ppl_only = false;
  int eval_sequences = 0;  // 0: every held-out window
  int reference_order = 2;
  double reference_smoothing = 0.5;

  /// Names of all keys in serialization order.
  static const std::vector<std::string>& keys();

  /// Assigns one key from text. Throws ConfigError on unknown key or bad value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  /// Throws ConfigError listing every offending key.
  void validate() const;

  std::string to_text() const;
  /// Parses `key = value` lines ('#' starts a comment). Unknown keys and
  /// malformed values are all reported in one ConfigError.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  /// Applies overrides; reports every bad key at once.
  void apply(const std::map<std::string, std::string>& overrides);

  /// FNV-1a hash over the keys that fix model shape, vocabulary and schedules.
  std::uint64_t structural_hash() const;

  bool operator==(const RunConfig&) const = default;

  // Typed views for the library modules.
  SchedulePair schedule_pair() const;
  DenoiserConfig denoiser_config(int vocab_size) const;
  TrainingConfig training_config() const;
  SamplerConfig sampler_config() const;
  EvalConfig eval_config() const;
  Codebook make_codebook(int vocab_size) const;
};

}  // namespace ccdd
