#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "ccdd/checkpoint.hpp"
#include "ccdd/config.hpp"
#include "ccdd/corpus.hpp"
#include "ccdd/denoiser.hpp"
#include "ccdd/embedder.hpp"
#include "ccdd/error.hpp"
#include "ccdd/synthetic.hpp"
#include "ccdd/training.hpp"

namespace ccdd {

inline constexpr const char* kOutputDirEnv = "CCDD_OUTPUT_DIR";

/// Training and held-out data for a config: either a tokenized corpus file
/// or a synthetic source.
struct Dataset {
  Vocabulary vocab;
  std::optional<SyntheticSource> source;
  TokenBatch train;    // empty for synthetic sources (batches are drawn fresh)
  TokenBatch holdout;

  int vocab_size() const { return vocab.size(); }
  /// Training batch for a 0-based step.
  TokenBatch batch(std::int64_t step, int batch_size, int length, std::uint64_t seed) const;
};

Dataset load_dataset(const RunConfig& config);

/// Symbols used to print synthetic tokens.
Vocabulary synthetic_vocabulary(int vocab_size);

/// Model, codebook and optimizer state of a run.
struct TrainState {
  std::unique_ptr<Denoiser> model;
  Codebook codebook;
  OptimizerState optimizer;
};

TrainState fresh_state(const RunConfig& config, int vocab_size);

Checkpoint make_checkpoint(const RunConfig& config, const Vocabulary& vocab,
                           const TrainState& state);
/// Throws CheckpointError(kConfigMismatch) when the structural hash of
/// `config` differs from the one stored.
TrainState restore_state(const RunConfig& config, const Checkpoint& ckpt);

/// Config for a command: defaults, then the config file (or the stored
/// config of `--checkpoint` for sample/eval when no file is given), then the
/// output-directory environment variable, then flag overrides.
RunConfig resolve_config(const std::string& command, const std::string& config_path,
                         const std::map<std::string, std::string>& overrides);

/// Runs train | sample | eval | verify. Throws ccdd::Error on failure.
void execute(const std::string& command, const RunConfig& config, std::ostream& log);

/// `execute` with errors reported on `err`; returns the process exit code.
int run(const std::string& command, const RunConfig& config, std::ostream& log,
        std::ostream& err);

std::string error_category(ErrorKind kind);

}  // namespace ccdd
