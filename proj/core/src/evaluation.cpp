#include "ccdd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccdd/error.hpp"
#include "ccdd/rng.hpp"

namespace ccdd {
namespace {

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  double mean() const { return count > 0 ? sum / static_cast<double>(count) : 0.0; }
  double half_width() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    return 1.96 * std::sqrt(var / n);
  }
};

}  // namespace

void EvalConfig::validate() const {
  if (n_mc_times < 1) throw ConfigError("eval_n_mc must be at least 1");
  if (!(p_r >= 0.0 && p_r <= 1.0)) throw ConfigError("eval_p_r must be in [0, 1]");
  if (!(t_floor > 0.0 && t_floor < 1.0)) throw ConfigError("t_floor must be in (0, 1)");
  if (!(gamma_cont >= 0.0) || !(gamma_disc >= 0.0)) {
    throw ConfigError("gamma_cont and gamma_disc must be non-negative");
  }
  if (chunk_size < 1) throw ConfigError("eval chunk size must be positive");
}

EvalReport elbo(const JointDenoiser& model, const Codebook& codebook, const SchedulePair& pair,
                const TokenBatch& data, const EvalConfig& config) {
  config.validate();
  if (data.batch() == 0 || data.length() == 0) throw InputError("elbo: empty dataset");
  const int vocab = model.vocab_size();
  if (codebook.vocab_size() != vocab || codebook.dim() != model.latent_dim()) {
    throw ConfigError("elbo: codebook shape does not match the model");
  }
  const DiscreteSchedule& disc = pair.discrete();
  const int length = data.length();
  const int n = config.n_mc_times;

  Moments headline;
  Moments disc_m;
  Moments cont_m;
  for (int first = 0; first < data.batch(); first += config.chunk_size) {
    const int count = std::min(config.chunk_size, data.batch() - first);
    const TokenBatch x0 = data.slice(first, count);
    const LatentBatch z0 = codebook.encode(x0);
    const std::vector<double> p_r(static_cast<std::size_t>(count), config.p_r);
    for (int i = 0; i < n; ++i) {
      const RngStream round = derive_stream(config.seed, StreamTag::kEval, static_cast<std::uint64_t>(i));
      std::vector<double> t(static_cast<std::size_t>(count));
      JointCorruptedBatch jc{TokenBatch(count, length), LatentBatch(count, length, z0.channels()),
                             LatentBatch(count, length, z0.channels()), {}, {}, {}, {}};
      jc.mask_indicator.reserve(x0.size());
      for (int b = 0; b < count; ++b) {
        const RngStream draw = round.split(static_cast<std::uint64_t>(first + b));
        RngStream time_rng = draw.split(0);
        double& tb = t[static_cast<std::size_t>(b)];
        tb = std::min(1.0, config.t_floor + (1.0 - config.t_floor) * (i + time_rng.uniform()) / n);
        const JointCorruptedBatch one =
            corrupt_joint(x0.slice(b, 1), z0.slice(b, 1), std::span<const double>(&tb, 1), pair,
                          vocab, std::span<const double>(p_r.data() + b, 1), draw.split(1),
                          {config.masking, &codebook});
        std::copy(one.x_t.ids().begin(), one.x_t.ids().end(), jc.x_t.row(b).begin());
        jc.z_t.sequence(b) = one.z_t.sequence(0);
        jc.eps.sequence(b) = one.eps.sequence(0);
        jc.mask_indicator.insert(jc.mask_indicator.end(), one.mask_indicator.begin(),
                                 one.mask_indicator.end());
      }
      const DenoiserOutput out = model.predict(jc.x_t, jc.z_t, t, false);
      const MaskGrid positions = disc.is_masked() ? jc.mask_indicator : MaskGrid(x0.size(), 1);
      const LambdaSpec lambda = disc.is_masked() ? LambdaSpec::kNelbo : LambdaSpec::kUnit;

      for (int b = 0; b < count; ++b) {
        const auto offset = static_cast<std::ptrdiff_t>(b) * length;
        const MaskGrid seq_pos(positions.begin() + offset, positions.begin() + offset + length);
        const std::span<const double> tb(t.data() + b, 1);
        const double l_disc =
            loss_discrete(out.logits.slice(b, 1), x0.slice(b, 1), seq_pos, tb, disc, lambda);
        const double l_cont = loss_continuous(jc.eps.slice(b, 1), out.eps_hat.slice(b, 1));
        disc_m.add(l_disc);
        cont_m.add(l_cont);
        headline.add(config.discrete_ppl_only
                         ? l_disc
                         : config.gamma_disc * l_disc + config.gamma_cont * l_cont);
      }
    }
  }

  EvalReport r;
  r.n_mc_times = n;
  r.p_r = config.p_r;
  r.elbo_disc = disc_m.mean();
  r.elbo_cont = cont_m.mean();
  r.elbo_nats_per_token = headline.mean();
  r.ppl = std::exp(r.elbo_nats_per_token);
  r.half_width = headline.half_width();
  r.disc_half_width = disc_m.half_width();
  r.n_sequences = data.batch();
  return r;
}

// ---- NGramReference -------------------------------------------------------------

NGramReference::NGramReference(int order, int vocab, Matrix table)
    : order_(order), vocab_(vocab), table_(std::move(table)) {
  if (order_ < 2 || order_ > 3) throw ConfigError("n-gram order must be 2 or 3");
  if (vocab_ < 1) throw ConfigError("n-gram vocabulary must be non-empty");
  const auto contexts = static_cast<Eigen::Index>(std::pow(vocab_, order_ - 1));
  if (table_.rows() != contexts || table_.cols() != vocab_) {
    throw ConfigError("n-gram table has the wrong shape");
  }
  for (Eigen::Index r = 0; r < table_.rows(); ++r) {
    const double total = table_.row(r).sum();
    if (!(table_.row(r).minCoeff() >= 0.0) || std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("n-gram conditional for context " + std::to_string(r) +
                        " is not a proper distribution");
    }
  }
}

NGramReference NGramReference::fit(const TokenBatch& corpus, int order, int vocab_size,
                                   double smoothing) {
  if (order < 2 || order > 3) throw ConfigError("n-gram order must be 2 or 3");
  if (!(smoothing >= 0.0)) throw ConfigError("n-gram smoothing must be non-negative");
  const auto contexts = static_cast<Eigen::Index>(std::pow(vocab_size, order - 1));
  Matrix counts = Matrix::Constant(contexts, vocab_size, smoothing);
  for (int b = 0; b < corpus.batch(); ++b) {
    const auto row = corpus.row(b);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] < 0 || row[j] >= vocab_size) {
        throw InputError("n-gram fit: token " + std::to_string(row[j]) + " outside vocabulary");
      }
      if (j + 1 < static_cast<std::size_t>(order)) continue;
      std::size_t ctx = 0;
      for (std::size_t k = j + 1 - static_cast<std::size_t>(order); k < j; ++k) {
        ctx = ctx * static_cast<std::size_t>(vocab_size) + static_cast<std::size_t>(row[k]);
      }
      counts(static_cast<Eigen::Index>(ctx), row[j]) += 1.0;
    }
  }
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    const double total = counts.row(r).sum();
    if (!(total > 0.0)) {
      throw ConfigError("n-gram context " + std::to_string(r) +
                        " has no mass; use positive smoothing");
    }
    counts.row(r) /= total;
  }
  return NGramReference(order, vocab_size, std::move(counts));
}

NGramReference NGramReference::from_table(int order, int vocab_size, Matrix conditionals) {
  return NGramReference(order, vocab_size, std::move(conditionals));
}

std::size_t NGramReference::context_id(std::span<const Token> context) const {
  if (context.size() != static_cast<std::size_t>(order_ - 1)) {
    throw InputError("n-gram context must have order-1 tokens");
  }
  std::size_t ctx = 0;
  for (Token c : context) {
    if (c < 0 || c >= vocab_) {
      throw InputError("n-gram: token " + std::to_string(c) + " outside vocabulary");
    }
    ctx = ctx * static_cast<std::size_t>(vocab_) + static_cast<std::size_t>(c);
  }
  return ctx;
}

std::span<const double> NGramReference::conditional(std::span<const Token> context) const {
  const std::size_t ctx = context_id(context);
  return {table_.data() + ctx * static_cast<std::size_t>(vocab_),
          static_cast<std::size_t>(vocab_)};
}

double NGramReference::log_prob(std::span<const Token> context, Token next) const {
  if (next < 0 || next >= vocab_) {
    throw InputError("n-gram: token " + std::to_string(next) + " outside vocabulary");
  }
  return std::log(conditional(context)[static_cast<std::size_t>(next)]);
}

double generative_nll(const NGramReference& reference, const TokenBatch& samples) {
  const int k = reference.order() - 1;
  if (samples.length() <= k || samples.batch() == 0) {
    throw InputError("generative_nll: samples shorter than the n-gram context");
  }
  double total = 0.0;
  std::int64_t count = 0;
  for (int b = 0; b < samples.batch(); ++b) {
    const auto row = samples.row(b);
    for (int j = k; j < samples.length(); ++j) {
      total -= reference.log_prob(row.subspan(static_cast<std::size_t>(j - k), static_cast<std::size_t>(k)),
                                  row[static_cast<std::size_t>(j)]);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace ccdd
