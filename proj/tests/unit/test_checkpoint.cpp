#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "ccdd/app.hpp"
#include "ccdd/checkpoint.hpp"
#include "ccdd/corpus.hpp"
#include "ccdd/error.hpp"
#include "oracles.hpp"

using namespace ccdd;

namespace {

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.config_text = "steps = 3\n";
  c.vocab_text = "a\nb\n";
  c.config_hash = 0x1234;
  c.step = 42;
  c.rng_seed = 7;
  c.rng_counter = 42;
  Matrix m(2, 3);
  m << 1.0 / 3.0, -2.5, 1e-300, 4.0, 5.0, 6.0;
  c.tensors.push_back(NamedTensor::from_matrix("w", m));
  c.tensors.push_back(NamedTensor::from_matrix("half", m, DType::kF32));
  return c;
}

CheckpointError::Code code_of(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return CheckpointError::Code::kMalformed;
}

RunConfig tiny_run(const std::string& dir) {
  RunConfig c;
  c.synthetic = "bigram";
  c.synthetic_vocab = 4;
  c.synthetic_sequences = 8;
  c.seq_len = 6;
  c.batch_size = 3;
  c.n_layers = 1;
  c.d_model = 16;
  c.n_heads = 2;
  c.latent_dim = 8;
  c.mlp_ratio = 2;
  c.warmup_steps = 2;
  c.lr = 1e-2;
  c.output_dir = dir;
  c.checkpoint = dir + "/ck.ccdd";
  return c;
}

}  // namespace

TEST(Checkpoint, BitExactRoundTrip) {
  const Checkpoint c = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(c);
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(bytes.substr(0, 4), "CCDD");
  EXPECT_EQ(back.at("w").data[2], 1e-300);
  EXPECT_EQ(back.at("half").data[0], static_cast<double>(1.0f / 3.0f));
}

TEST(Checkpoint, LittleEndianHeader) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), Checkpoint::kVersion);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 10u);  // config text length
}

TEST(Checkpoint, DistinctErrorCodes) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  EXPECT_EQ(code_of(bytes.substr(0, bytes.size() - 1)), CheckpointError::Code::kTruncatedPayload);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(code_of(magic), CheckpointError::Code::kBadMagic);
  std::string version = bytes;
  version[4] = 9;
  EXPECT_EQ(code_of(version), CheckpointError::Code::kVersionMismatch);
  EXPECT_EQ(code_of(bytes + "x"), CheckpointError::Code::kMalformed);
  for (std::size_t cut : {std::size_t{2}, std::size_t{7}, bytes.size() / 2}) {
    EXPECT_EQ(code_of(bytes.substr(0, cut)), CheckpointError::Code::kTruncatedPayload) << cut;
  }
}

TEST(Checkpoint, FileTruncatedByOneByte) {
  const std::string dir = oracle::scratch_dir("truncate");
  save_checkpoint(dir + "/c.ccdd", sample_checkpoint());
  std::filesystem::resize_file(dir + "/c.ccdd", std::filesystem::file_size(dir + "/c.ccdd") - 1);
  try {
    load_checkpoint(dir + "/c.ccdd");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.code(), CheckpointError::Code::kTruncatedPayload);
    EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos);
  }
}

TEST(Checkpoint, ModelStateRoundTrip) {
  const RunConfig c = tiny_run(oracle::scratch_dir("state"));
  const TrainState s = fresh_state(c, 4);
  const Checkpoint ck = make_checkpoint(c, synthetic_vocabulary(4), s);
  const TrainState back = restore_state(c, deserialize_checkpoint(serialize_checkpoint(ck)));
  for (int i = 0; i < s.model->params().size(); ++i) {
    EXPECT_EQ(back.model->params()[i], s.model->params()[i]);
  }
  EXPECT_EQ(back.codebook.vectors(), s.codebook.vectors());
  RunConfig other = c;
  other.d_model = 32;
  try {
    restore_state(other, ck);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.code(), CheckpointError::Code::kConfigMismatch);
  }
}

TEST(Checkpoint, ResumeReproducesUninterruptedRun) {
  const std::string straight = oracle::scratch_dir("straight");
  const std::string resumed = oracle::scratch_dir("resumed");
  std::ostringstream log;
  RunConfig a = tiny_run(straight);
  a.steps = 8;
  execute("train", a, log);
  RunConfig b = tiny_run(resumed);
  b.steps = 4;
  execute("train", b, log);
  b.steps = 8;
  execute("train", b, log);

  EXPECT_EQ(read_file(straight + "/metrics.csv"), read_file(resumed + "/metrics.csv"));
  const Checkpoint ca = load_checkpoint(a.checkpoint);
  const Checkpoint cb = load_checkpoint(b.checkpoint);
  EXPECT_EQ(ca.step, 8);
  EXPECT_EQ(ca.tensors, cb.tensors);
}
