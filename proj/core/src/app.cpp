#include "ccdd/app.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ccdd/error.hpp"
#include "ccdd/evaluation.hpp"
#include "ccdd/rng.hpp"
#include "ccdd/sampler.hpp"
#include "ccdd/theoria.hpp"

namespace ccdd {

namespace {

namespace fs = std::filesystem;

std::vector<int> parse_pattern(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("synthetic_pattern: '" + item + "' is not an integer");
    }
  }
  return out;
}

SyntheticSource make_source(const RunConfig& c) {
  if (c.synthetic == "iid_uniform") return SyntheticSource::iid_uniform(c.synthetic_vocab);
  if (c.synthetic == "periodic") {
    return SyntheticSource::periodic(parse_pattern(c.synthetic_pattern), c.synthetic_vocab);
  }
  return SyntheticSource::random_bigram(c.synthetic_vocab, c.synthetic_sharpness, c.seed);
}

Codebook::Mode codebook_mode(const std::string& name) {
  if (name == "onehot_simplex") return Codebook::Mode::kOnehotSimplex;
  if (name == "contextual") return Codebook::Mode::kContextual;
  return Codebook::Mode::kRandomOrthonormal;
}

/// Replaces invalid UTF-8 with U+FFFD and escapes line breaks.
std::string printable_line(const std::string& raw) {
  std::string out;
  std::size_t i = 0;
  while (i < raw.size()) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c == '\n') {
      out += "\\n";
      ++i;
      continue;
    }
    if (c == '\r') {
      out += "\\r";
      ++i;
      continue;
    }
    std::size_t len = c < 0x80 ? 1 : (c & 0xE0) == 0xC0 ? 2 : (c & 0xF0) == 0xE0 ? 3 : (c & 0xF8) == 0xF0 ? 4 : 0;
    if (len > 0 && i + len <= raw.size()) {
      try {
        utf8_symbols(raw.substr(i, len));
        out += raw.substr(i, len);
        i += len;
        continue;
      } catch (const InputError&) {
      }
    }
    out += "\xEF\xBF\xBD";
    ++i;
  }
  return out;
}

std::string output_path(const RunConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

void ensure_output_dir(const RunConfig& c) {
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + c.output_dir + ": " + ec.message());
}

std::string default_checkpoint_path(const RunConfig& c) {
  return c.checkpoint.empty() ? output_path(c, "checkpoint.ccdd") : c.checkpoint;
}

TokenBatch eval_data(const RunConfig& c, const Dataset& data) {
  if (c.eval_sequences > 0 && c.eval_sequences < data.holdout.batch()) {
    return data.holdout.slice(0, c.eval_sequences);
  }
  return data.holdout;
}

void run_train(const RunConfig& c, std::ostream& log) {
  ensure_output_dir(c);
  const Dataset data = load_dataset(c);
  if (data.vocab.kind() == Tokenizer::kChar) {
    write_file(output_path(c, "vocab.txt"), data.vocab.to_file_text());
  }

  TrainState state = fresh_state(c, data.vocab_size());
  const std::string ckpt_path = default_checkpoint_path(c);
  bool resumed = false;
  if (!c.checkpoint.empty() && fs::exists(c.checkpoint)) {
    state = restore_state(c, load_checkpoint(c.checkpoint));
    resumed = true;
    log << "resumed from " << c.checkpoint << " at step " << state.optimizer.step << "\n";
  }
  state.model->set_num_threads(c.num_threads);

  const std::string metrics = output_path(c, "metrics.csv");
  const bool append = resumed && fs::exists(metrics);
  std::ofstream csv(metrics, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw IoError("cannot write " + metrics);
  if (!append) csv << metrics_csv_header() << "\n";

  const TrainingConfig tc = c.training_config();
  Trainer trainer(*state.model, state.codebook, c.schedule_pair(), tc);
  trainer.optimizer() = state.optimizer;
  trainer.optimizer().config = tc.optimizer;

  while (trainer.optimizer().step < c.steps) {
    const std::int64_t s = trainer.optimizer().step;
    const TokenBatch x0 = data.batch(s, c.batch_size, c.seq_len, c.seed);
    const StepStats stats = trainer.step(x0);
    csv << metrics_csv_row(stats) << "\n";
    if (c.log_every > 0 && (stats.step % c.log_every == 0 || stats.step == 1)) {
      char line[160];
      std::snprintf(line, sizeof line, "step %lld  l_cont %.4f  l_disc %.4f  total %.4f  lr %.2e\n",
                    static_cast<long long>(stats.step), stats.loss.l_cont, stats.loss.l_disc,
                    stats.loss.total, stats.lr);
      log << line;
    }
    if (c.checkpoint_every > 0 && stats.step % c.checkpoint_every == 0) {
      csv.flush();
      state.optimizer = trainer.optimizer();
      save_checkpoint(ckpt_path, make_checkpoint(c, data.vocab, state));
    }
  }
  csv.flush();
  state.optimizer = trainer.optimizer();
  save_checkpoint(ckpt_path, make_checkpoint(c, data.vocab, state));
  log << "checkpoint written to " << ckpt_path << "\n";
}

struct LoadedRun {
  Checkpoint ckpt;
  TrainState state;
  Vocabulary vocab;
};

LoadedRun load_for_inference(const RunConfig& c, const char* command) {
  if (c.checkpoint.empty()) throw ConfigError(std::string(command) + ": checkpoint required");
  Checkpoint ckpt = load_checkpoint(c.checkpoint);
  TrainState state = restore_state(c, ckpt);
  state.model->set_num_threads(c.num_threads);
  Vocabulary vocab = ckpt.vocab_text.empty() ? Vocabulary::bytes()
                                             : Vocabulary::from_file_text(ckpt.vocab_text);
  return {std::move(ckpt), std::move(state), std::move(vocab)};
}

void run_sample(const RunConfig& c, std::ostream& log) {
  if (c.checkpoint.empty()) throw ConfigError("sample: checkpoint required");
  ensure_output_dir(c);
  LoadedRun run = load_for_inference(c, "sample");
  const SchedulePair pair = c.schedule_pair();
  const int length = c.sample_length > 0 ? c.sample_length : c.seq_len;
  const SampleResult result =
      sample(*run.state.model, pair.continuous(), pair.discrete(), c.sampler_config(), length,
             c.sample_count, derive_stream(c.seed, StreamTag::kSampler, 0), &run.state.codebook);

  std::string text;
  for (int b = 0; b < result.tokens.batch(); ++b) {
    text += printable_line(run.vocab.decode(result.tokens.row(b))) + "\n";
  }
  const std::string out = c.samples_out.empty() ? output_path(c, "samples.txt") : c.samples_out;
  write_file(out, text);
  log << "wrote " << result.tokens.batch() << " samples to " << out << "\n";
  if (result.forced_unmasks > 0) {
    log << "forced unmasks: " << result.forced_unmasks << "\n";
  }
  if (!c.latents_out.empty()) {
    NamedTensor t;
    t.name = "latents";
    t.dims = {static_cast<std::uint64_t>(result.latents.batch()),
              static_cast<std::uint64_t>(result.latents.length()),
              static_cast<std::uint64_t>(result.latents.channels())};
    t.data = result.latents.data();
    save_tensor_file(c.latents_out, {t});
  }

  if (c.synthetic != "none" && length >= c.reference_order) {
    const Dataset data = load_dataset(c);
    const NGramReference ref = NGramReference::fit(data.holdout, c.reference_order,
                                                   data.vocab_size(), c.reference_smoothing);
    const double nll = generative_nll(ref, result.tokens);
    log << "reference NLL " << nll << " nats/token (source entropy rate "
        << data.source->entropy_rate() << ")\n";
  }
}

void run_eval(const RunConfig& c, std::ostream& log) {
  ensure_output_dir(c);
  LoadedRun run = load_for_inference(c, "eval");
  const Dataset data = load_dataset(c);
  const TokenBatch held = eval_data(c, data);
  const EvalReport r = elbo(*run.state.model, run.state.codebook, c.schedule_pair(), held,
                            c.eval_config());
  std::ostringstream csv;
  csv.precision(17);
  csv << "elbo_nats_per_token,ppl,elbo_disc,elbo_cont,half_width,disc_half_width,n_mc_times,p_r,"
         "n_sequences,entropy_rate\n";
  csv << r.elbo_nats_per_token << "," << r.ppl << "," << r.elbo_disc << "," << r.elbo_cont << ","
      << r.half_width << "," << r.disc_half_width << "," << r.n_mc_times << "," << r.p_r << ","
      << r.n_sequences << ",";
  if (data.source) csv << data.source->entropy_rate();
  csv << "\n";
  write_file(output_path(c, "eval.csv"), csv.str());
  log << "elbo " << r.elbo_nats_per_token << " +- " << r.half_width << " nats/token, ppl "
      << r.ppl << " (p_r " << r.p_r << ", " << r.n_sequences << " sequences)\n";
}

void run_verify(const RunConfig& c, std::ostream& log) {
  ensure_output_dir(c);
  const theoria::VerifyReport report = theoria::run_verify_suite(c.seed);
  std::ostringstream csv;
  csv.precision(17);
  csv << "check,value,criterion,result\n";
  for (const theoria::CheckRow& row : report.rows) {
    csv << row.name << "," << row.value << ",\"" << row.criterion << "\","
        << (row.pass ? "pass" : "fail") << "\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-34s %14.6g  %-28s %s\n", row.name.c_str(), row.value,
                  row.criterion.c_str(), row.pass ? "pass" : "FAIL");
    log << line;
  }
  write_file(output_path(c, "verify.csv"), csv.str());
  std::string series = "series,x,y\n";
  for (const std::string& s : report.series) series += s + "\n";
  write_file(output_path(c, "verify_series.csv"), series);
  if (!report.all_pass()) throw VerificationError("verify: one or more checks failed");
}

}  // namespace

TokenBatch Dataset::batch(std::int64_t step, int batch_size, int length, std::uint64_t seed) const {
  if (source) {
    return source->sample(batch_size, length, derive_stream(seed, StreamTag::kBatch, static_cast<std::uint64_t>(step)).key());
  }
  return select_batch(train, step, batch_size, seed);
}

Vocabulary synthetic_vocabulary(int vocab_size) {
  std::vector<std::string> symbols;
  for (int i = 0; i < vocab_size; ++i) {
    symbols.push_back(vocab_size <= 26 ? std::string(1, static_cast<char>('a' + i))
                                       : "<" + std::to_string(i) + ">");
  }
  return Vocabulary::from_symbols(std::move(symbols));
}

Dataset load_dataset(const RunConfig& c) {
  if (c.synthetic != "none") {
    SyntheticSource src = make_source(c);
    const int n = std::max(c.synthetic_sequences, 1);
    TokenBatch held = src.sample(n, c.seq_len, derive_stream(c.seed, StreamTag::kEval, 0x401d).key());
    return {synthetic_vocabulary(src.vocab_size()), std::move(src), TokenBatch(), std::move(held)};
  }
  if (c.corpus.empty()) throw ConfigError("corpus: required unless synthetic is set");
  Corpus corpus = load_corpus_file(c.corpus, parse_tokenizer(c.tokenizer));
  const TokenBatch windows = shuffle_windows(pack_windows(corpus.tokens, c.seq_len), c.seed);
  auto [train, held] = split_holdout(windows, c.holdout_fraction);
  if (held.batch() == 0) held = train;
  return {std::move(corpus.vocab), std::nullopt, std::move(train), std::move(held)};
}

TrainState fresh_state(const RunConfig& c, int vocab_size) {
  auto model = std::make_unique<Denoiser>(c.denoiser_config(vocab_size),
                                          derive_stream(c.seed, StreamTag::kInit, 0).key());
  OptimizerState opt = OptimizerState::init(model->params(), c.training_config().optimizer);
  return {std::move(model), c.make_codebook(vocab_size), std::move(opt)};
}

Checkpoint make_checkpoint(const RunConfig& c, const Vocabulary& vocab, const TrainState& s) {
  Checkpoint ckpt;
  ckpt.config_text = c.to_text();
  ckpt.vocab_text = vocab.kind() == Tokenizer::kChar ? vocab.to_file_text() : std::string();
  ckpt.config_hash = c.structural_hash();
  ckpt.step = s.optimizer.step;
  ckpt.rng_seed = c.seed;
  ckpt.rng_counter = static_cast<std::uint64_t>(s.optimizer.step);
  const ParameterSet& p = s.model->params();
  for (int i = 0; i < p.size(); ++i) ckpt.tensors.push_back(NamedTensor::from_matrix(p.name(i), p[i]));
  ckpt.tensors.push_back(NamedTensor::from_matrix("codebook.vectors", s.codebook.vectors()));
  for (int i = 0; i < p.size(); ++i) {
    ckpt.tensors.push_back(NamedTensor::from_matrix("opt.m." + p.name(i), s.optimizer.m[static_cast<std::size_t>(i)]));
    ckpt.tensors.push_back(NamedTensor::from_matrix("opt.v." + p.name(i), s.optimizer.v[static_cast<std::size_t>(i)]));
  }
  return ckpt;
}

TrainState restore_state(const RunConfig& c, const Checkpoint& ckpt) {
  if (ckpt.config_hash != c.structural_hash()) {
    throw CheckpointError(CheckpointError::Code::kConfigMismatch,
                          "checkpoint: config mismatch (model shape, vocabulary or schedule "
                          "settings differ from the checkpoint)");
  }
  const NamedTensor& cb = ckpt.at("codebook.vectors");
  const Matrix vectors = cb.to_matrix();
  const int vocab_size = static_cast<int>(vectors.rows());
  const DenoiserConfig dc = c.denoiser_config(vocab_size);

  // Names and order come from a freshly built model.
  const Denoiser layout(dc, 0);
  ParameterSet params;
  OptimizerState opt;
  opt.config = c.training_config().optimizer;
  opt.step = ckpt.step;
  for (int i = 0; i < layout.params().size(); ++i) {
    const std::string& name = layout.params().name(i);
    params.add(name, ckpt.at(name).to_matrix());
    opt.m.push_back(ckpt.at("opt.m." + name).to_matrix());
    opt.v.push_back(ckpt.at("opt.v." + name).to_matrix());
  }
  auto model = std::make_unique<Denoiser>(dc, std::move(params));
  for (std::size_t i = 0; i < opt.m.size(); ++i) {
    const Matrix& w = model->params()[static_cast<int>(i)];
    if (opt.m[i].rows() != w.rows() || opt.m[i].cols() != w.cols() || opt.v[i].rows() != w.rows() ||
        opt.v[i].cols() != w.cols()) {
      throw CheckpointError(CheckpointError::Code::kMalformed,
                            "checkpoint: optimizer state shape mismatch for " + model->params().name(static_cast<int>(i)));
    }
  }
  const Codebook fresh = c.make_codebook(vocab_size);
  Codebook codebook = Codebook::from_vectors(codebook_mode(c.embedder), vectors, fresh.seed(),
                                             fresh.window_weight(), fresh.radius());
  return {std::move(model), std::move(codebook), std::move(opt)};
}

RunConfig resolve_config(const std::string& command, const std::string& config_path,
                         const std::map<std::string, std::string>& overrides) {
  RunConfig c;
  if (!config_path.empty()) {
    c = RunConfig::load(config_path);
  } else if (command == "sample" || command == "eval") {
    const auto it = overrides.find("checkpoint");
    if (it != overrides.end() && fs::exists(it->second)) {
      c = RunConfig::parse(load_checkpoint(it->second).config_text);
    }
  }
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
    c.output_dir = env;
  }
  c.apply(overrides);
  return c;
}

void execute(const std::string& command, const RunConfig& c, std::ostream& log) {
  if (command != "train" && command != "sample" && command != "eval" && command != "verify") {
    throw ConfigError("unknown command '" + command + "' (expected train, sample, eval or verify)");
  }
  c.validate();
  if (command == "train") {
    run_train(c, log);
  } else if (command == "sample") {
    run_sample(c, log);
  } else if (command == "eval") {
    run_eval(c, log);
  } else {
    run_verify(c, log);
  }
}

std::string error_category(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kInput: return "input error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kCheckpoint: return "checkpoint error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kVerification: return "verification failed";
  }
  return "error";
}

int run(const std::string& command, const RunConfig& config, std::ostream& log,
        std::ostream& err) {
  try {
    execute(command, config, log);
    return 0;
  } catch (const Error& e) {
    err << "ccdd: " << error_category(e.kind()) << ": " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    err << "ccdd: internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ccdd
