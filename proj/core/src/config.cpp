#include "ccdd/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <variant>

#include "ccdd/error.hpp"
#include "ccdd/rng.hpp"

namespace ccdd {
namespace {

using Member = std::variant<std::string RunConfig::*, int RunConfig::*, double RunConfig::*,
                            bool RunConfig::*, std::int64_t RunConfig::*,
                            std::uint64_t RunConfig::*>;

struct Field {
  const char* name;
  Member member;
  bool structural;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"corpus", &RunConfig::corpus, false},
      {"tokenizer", &RunConfig::tokenizer, true},
      {"synthetic", &RunConfig::synthetic, true},
      {"synthetic_vocab", &RunConfig::synthetic_vocab, true},
      {"synthetic_pattern", &RunConfig::synthetic_pattern, false},
      {"synthetic_sharpness", &RunConfig::synthetic_sharpness, false},
      {"synthetic_sequences", &RunConfig::synthetic_sequences, false},
      {"holdout_fraction", &RunConfig::holdout_fraction, false},
      {"seq_len", &RunConfig::seq_len, false},
      {"batch_size", &RunConfig::batch_size, false},
      {"steps", &RunConfig::steps, false},
      {"log_every", &RunConfig::log_every, false},
      {"checkpoint_every", &RunConfig::checkpoint_every, false},
      {"seed", &RunConfig::seed, false},
      {"output_dir", &RunConfig::output_dir, false},
      {"checkpoint", &RunConfig::checkpoint, false},
      {"num_threads", &RunConfig::num_threads, false},
      {"schedule_continuous", &RunConfig::schedule_continuous, true},
      {"beta", &RunConfig::beta, true},
      {"beta_min", &RunConfig::beta_min, true},
      {"beta_max", &RunConfig::beta_max, true},
      {"schedule_discrete", &RunConfig::schedule_discrete, true},
      {"uniform_rate", &RunConfig::uniform_rate, true},
      {"pairing", &RunConfig::pairing, true},
      {"embedder", &RunConfig::embedder, true},
      {"latent_dim", &RunConfig::latent_dim, true},
      {"context_weight", &RunConfig::context_weight, true},
      {"context_radius", &RunConfig::context_radius, true},
      {"arch", &RunConfig::arch, true},
      {"n_layers", &RunConfig::n_layers, true},
      {"d_model", &RunConfig::d_model, true},
      {"n_heads", &RunConfig::n_heads, true},
      {"n_experts", &RunConfig::n_experts, true},
      {"fuse", &RunConfig::fuse, true},
      {"mlp_ratio", &RunConfig::mlp_ratio, true},
      {"gamma_cont", &RunConfig::gamma_cont, false},
      {"gamma_disc", &RunConfig::gamma_disc, false},
      {"lambda_cont", &RunConfig::lambda_cont, false},
      {"lambda_disc", &RunConfig::lambda_disc, false},
      {"p_drop", &RunConfig::p_drop, false},
      {"p_r_min", &RunConfig::p_r_min, false},
      {"p_r_max", &RunConfig::p_r_max, false},
      {"t_floor", &RunConfig::t_floor, false},
      {"representation_masking", &RunConfig::representation_masking, false},
      {"lr", &RunConfig::lr, false},
      {"warmup_steps", &RunConfig::warmup_steps, false},
      {"weight_decay", &RunConfig::weight_decay, false},
      {"grad_clip", &RunConfig::grad_clip, false},
      {"adam_beta1", &RunConfig::adam_beta1, false},
      {"adam_beta2", &RunConfig::adam_beta2, false},
      {"adam_eps", &RunConfig::adam_eps, false},
      {"sample_steps", &RunConfig::sample_steps, false},
      {"cfg_w", &RunConfig::cfg_w, false},
      {"eta_ddpm", &RunConfig::eta_ddpm, false},
      {"variance_mode", &RunConfig::variance_mode, false},
      {"time_grid", &RunConfig::time_grid, false},
      {"temperature", &RunConfig::temperature, false},
      {"decode_source", &RunConfig::decode_source, false},
      {"argmax", &RunConfig::argmax, false},
      {"sample_count", &RunConfig::sample_count, false},
      {"sample_length", &RunConfig::sample_length, false},
      {"samples_out", &RunConfig::samples_out, false},
      {"latents_out", &RunConfig::latents_out, false},
      {"eval_n_mc", &RunConfig::eval_n_mc, false},
      {"eval_p_r", &RunConfig::eval_p_r, false},
      {"discrete_ppl_only", &RunConfig::discrete_ppl_only, false},
      {"eval_sequences", &RunConfig::eval_sequences, false},
      {"reference_order", &RunConfig::reference_order, false},
      {"reference_smoothing", &RunConfig::reference_smoothing, false},
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (key == f.name) return &f;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_choice(std::vector<std::string>& errors, const char* key, const std::string& value,
                  std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  std::string msg = std::string(key) + ": '" + value + "' is not one of {";
  bool first = true;
  for (const char* a : allowed) {
    msg += (first ? "" : ", ") + std::string(a);
    first = false;
  }
  errors.push_back(msg + "}");
}

[[noreturn]] void throw_all(const std::vector<std::string>& errors) {
  std::string msg = "invalid configuration (" + std::to_string(errors.size()) + " key" +
                    (errors.size() == 1 ? "" : "s") + "):";
  for (const std::string& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const Field& f : fields()) v.emplace_back(f.name);
    return v;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError(key + ": unknown key");
  const std::string value = trim(raw);
  const bool ok = std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(this->*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          this->*member = value;
          return true;
        } else if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") {
            this->*member = true;
          } else if (value == "false" || value == "0") {
            this->*member = false;
          } else {
            return false;
          }
          return true;
        } else {
          T parsed{};
          if (!parse_number(value, parsed)) return false;
          this->*member = parsed;
          return true;
        }
      },
      f->member);
  if (!ok) throw ConfigError(key + ": cannot parse '" + value + "'");
}

std::string RunConfig::get(const std::string& key) const {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError(key + ": unknown key");
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cv_t<std::remove_reference_t<decltype(this->*member)>>;
        const T& v = this->*member;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(v);
        } else {
          return std::to_string(v);
        }
      },
      f->member);
}

void RunConfig::validate() const {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const char* key, const char* why) {
    if (!ok) errors.push_back(std::string(key) + ": " + why);
  };
  check_choice(errors, "tokenizer", tokenizer, {"byte", "char"});
  check_choice(errors, "synthetic", synthetic, {"none", "iid_uniform", "bigram", "periodic"});
  check_choice(errors, "schedule_continuous", schedule_continuous,
               {"vp_constant_beta", "vp_linear_beta", "concave_sqrt", "linear_alpha"});
  check_choice(errors, "schedule_discrete", schedule_discrete, {"masked_linear", "uniform"});
  check_choice(errors, "pairing", pairing, {"continuous_ahead", "synchronous"});
  check_choice(errors, "embedder", embedder, {"onehot_simplex", "random_orthonormal", "contextual"});
  check_choice(errors, "arch", arch, {"mdit", "mmdit", "moedit"});
  check_choice(errors, "fuse", fuse, {"add", "concat"});
  check_choice(errors, "lambda_disc", lambda_disc, {"nelbo", "unit"});
  check_choice(errors, "representation_masking", representation_masking, {"zero", "reembed"});
  check_choice(errors, "variance_mode", variance_mode, {"alg2_literal", "exact_posterior"});
  check_choice(errors, "time_grid", time_grid, {"uniform", "angle"});
  check_choice(errors, "decode_source", decode_source, {"discrete_tokens", "nn_from_latent"});

  require(synthetic_vocab >= 1, "synthetic_vocab", "must be at least 1");
  require(synthetic_sharpness >= 0.0, "synthetic_sharpness", "must be non-negative");
  require(synthetic_sequences >= 1, "synthetic_sequences", "must be at least 1");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, "holdout_fraction", "must be in [0, 1)");
  require(seq_len >= 1, "seq_len", "must be at least 1");
  require(batch_size >= 1, "batch_size", "must be at least 1");
  require(steps >= 0, "steps", "must be non-negative");
  require(log_every >= 1, "log_every", "must be at least 1");
  require(checkpoint_every >= 0, "checkpoint_every", "must be non-negative");
  require(num_threads >= 1, "num_threads", "must be at least 1");
  require(beta > 0.0, "beta", "must be positive");
  require(beta_min >= 0.0 && beta_max >= beta_min && beta_max > 0.0, "beta_max",
          "need 0 <= beta_min <= beta_max, beta_max > 0");
  require(uniform_rate > 0.0, "uniform_rate", "must be positive");
  require(latent_dim >= 1, "latent_dim", "must be at least 1");
  require(context_weight >= 0.0 && context_weight < 1.0, "context_weight", "must be in [0, 1)");
  require(context_radius >= 0, "context_radius", "must be non-negative");
  require(n_layers >= 1, "n_layers", "must be at least 1");
  require(d_model >= 2 && d_model % 2 == 0, "d_model", "must be even and at least 2");
  require(n_heads >= 1 && d_model % n_heads == 0 && (d_model / n_heads) % 2 == 0, "n_heads",
          "must divide d_model into even head dimensions");
  require(n_experts >= (arch == "moedit" ? 2 : 1), "n_experts", "moedit needs at least 2");
  require(mlp_ratio >= 1, "mlp_ratio", "must be at least 1");
  require(gamma_cont >= 0.0, "gamma_cont", "must be non-negative");
  require(gamma_disc >= 0.0, "gamma_disc", "must be non-negative");
  require(lambda_cont >= 0.0, "lambda_cont", "must be non-negative");
  require(p_drop >= 0.0 && p_drop <= 1.0, "p_drop", "must be in [0, 1]");
  require(p_r_min >= 0.0 && p_r_min <= 1.0, "p_r_min", "must be in [0, 1]");
  require(p_r_max >= p_r_min && p_r_max <= 1.0, "p_r_max", "must be in [p_r_min, 1]");
  require(t_floor > 0.0 && t_floor < 1.0, "t_floor", "must be in (0, 1)");
  require(lr > 0.0, "lr", "must be positive");
  require(warmup_steps >= 0, "warmup_steps", "must be non-negative");
  require(weight_decay >= 0.0, "weight_decay", "must be non-negative");
  require(grad_clip > 0.0, "grad_clip", "must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1", "must be in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2", "must be in [0, 1)");
  require(adam_eps > 0.0, "adam_eps", "must be positive");
  require(sample_steps >= 1 && 1.0 / sample_steps > t_floor, "sample_steps",
          "must be at least 1 and keep the time grid above t_floor");
  require(eta_ddpm >= 0.0 && eta_ddpm <= 1.0, "eta_ddpm", "must be in [0, 1]");
  require(temperature > 0.0, "temperature", "must be positive");
  require(sample_count >= 1, "sample_count", "must be at least 1");
  require(sample_length >= 0, "sample_length", "must be non-negative");
  require(eval_n_mc >= 1, "eval_n_mc", "must be at least 1");
  require(eval_p_r >= 0.0 && eval_p_r <= 1.0, "eval_p_r", "must be in [0, 1]");
  require(eval_sequences >= 0, "eval_sequences", "must be non-negative");
  require(reference_order == 2 || reference_order == 3, "reference_order", "must be 2 or 3");
  require(reference_smoothing > 0.0, "reference_smoothing", "must be positive");
  if (!errors.empty()) throw_all(errors);
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.name) + " = " + get(f.name) + "\n";
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::vector<std::string> errors;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) {
      errors.push_back(key + ": set more than once");
      continue;
    }
    try {
      cfg.set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      errors.emplace_back(e.what());
    }
  }
  if (!errors.empty()) throw_all(errors);
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config file " + path);
  out << to_text();
  if (!out) throw IoError("failed writing config file " + path);
}

void RunConfig::apply(const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> errors;
  for (const auto& [key, value] : overrides) {
    try {
      set(key, value);
    } catch (const ConfigError& e) {
      errors.emplace_back(e.what());
    }
  }
  if (!errors.empty()) throw_all(errors);
}

std::uint64_t RunConfig::structural_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Field& f : fields()) {
    if (!f.structural) continue;
    const std::string line = std::string(f.name) + "=" + get(f.name) + "\n";
    for (unsigned char c : line) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

SchedulePair RunConfig::schedule_pair() const {
  ContinuousSchedule cont = ContinuousSchedule::concave_sqrt();
  if (schedule_continuous == "vp_constant_beta") {
    cont = ContinuousSchedule::vp_constant_beta(beta);
  } else if (schedule_continuous == "vp_linear_beta") {
    cont = ContinuousSchedule::vp_linear_beta(beta_min, beta_max);
  } else if (schedule_continuous == "linear_alpha") {
    cont = ContinuousSchedule::linear_alpha();
  }
  DiscreteSchedule disc = schedule_discrete == "uniform" ? DiscreteSchedule::uniform(uniform_rate)
                                                         : DiscreteSchedule::masked_linear();
  const auto mode = pairing == "synchronous" ? SchedulePair::Pairing::kSynchronous
                                             : SchedulePair::Pairing::kContinuousAhead;
  return SchedulePair(std::move(cont), std::move(disc), mode);
}

DenoiserConfig RunConfig::denoiser_config(int vocab_size) const {
  DenoiserConfig c;
  c.arch = arch == "mmdit" ? Architecture::kMmdit
           : arch == "moedit" ? Architecture::kMoedit
                              : Architecture::kMdit;
  c.n_layers = n_layers;
  c.d_model = d_model;
  c.n_heads = n_heads;
  c.d_latent = embedder == "onehot_simplex" ? vocab_size : latent_dim;
  c.vocab_augmented = vocab_size + 1;
  c.n_experts = n_experts;
  c.fuse = fuse == "add" ? Fusion::kAdd : Fusion::kConcat;
  c.mlp_ratio = mlp_ratio;
  return c;
}

TrainingConfig RunConfig::training_config() const {
  TrainingConfig c;
  c.weights.gamma_cont = gamma_cont;
  c.weights.gamma_disc = gamma_disc;
  c.weights.lambda_cont = lambda_cont;
  c.weights.lambda_disc = lambda_disc == "unit" ? LambdaSpec::kUnit : LambdaSpec::kNelbo;
  c.optimizer.lr = lr;
  c.optimizer.warmup_steps = warmup_steps;
  c.optimizer.beta1 = adam_beta1;
  c.optimizer.beta2 = adam_beta2;
  c.optimizer.eps = adam_eps;
  c.optimizer.weight_decay = weight_decay;
  c.optimizer.grad_clip = grad_clip;
  c.t_floor = t_floor;
  c.p_drop = p_drop;
  c.p_r_min = p_r_min;
  c.p_r_max = p_r_max;
  c.masking = representation_masking == "reembed" ? RepresentationMasking::kReembed
                                                  : RepresentationMasking::kZero;
  c.seed = seed;
  return c;
}

SamplerConfig RunConfig::sampler_config() const {
  SamplerConfig c;
  c.n_steps = sample_steps;
  c.eta_ddpm = eta_ddpm;
  c.cfg_w = cfg_w;
  c.variance_mode = variance_mode == "alg2_literal" ? VarianceMode::kAlg2Literal
                                                    : VarianceMode::kExactPosterior;
  c.temperature = temperature;
  c.decode_source = decode_source == "nn_from_latent" ? DecodeSource::kNearestNeighbor
                                                      : DecodeSource::kDiscreteTokens;
  c.argmax = argmax;
  c.t_floor = t_floor;
  c.grid = time_grid == "angle" ? TimeGrid::kAngle : TimeGrid::kUniform;
  return c;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig c;
  c.n_mc_times = eval_n_mc;
  c.p_r = eval_p_r;
  c.t_floor = t_floor;
  c.gamma_cont = gamma_cont;
  c.gamma_disc = gamma_disc;
  c.discrete_ppl_only = discrete_ppl_only;
  c.masking = representation_masking == "reembed" ? RepresentationMasking::kReembed
                                                  : RepresentationMasking::kZero;
  c.seed = seed;
  return c;
}

Codebook RunConfig::make_codebook(int vocab_size) const {
  const std::uint64_t cb_seed = derive_stream(seed, StreamTag::kCodebook, 0).key();
  if (embedder == "onehot_simplex") return Codebook::onehot_simplex(vocab_size);
  if (embedder == "contextual") {
    return Codebook::contextual(vocab_size, latent_dim, cb_seed, context_weight, context_radius);
  }
  return Codebook::random_orthonormal(vocab_size, latent_dim, cb_seed);
}

}  // namespace ccdd
