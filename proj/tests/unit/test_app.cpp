#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ccdd/app.hpp"
#include "ccdd/checkpoint.hpp"
#include "ccdd/corpus.hpp"
#include "ccdd/error.hpp"
#include "oracles.hpp"

using namespace ccdd;

namespace {

RunConfig tiny(const std::string& dir) {
  RunConfig c;
  c.n_layers = 1;
  c.d_model = 16;
  c.n_heads = 2;
  c.latent_dim = 8;
  c.mlp_ratio = 2;
  c.seq_len = 8;
  c.batch_size = 4;
  c.steps = 5;
  c.warmup_steps = 2;
  c.sample_steps = 8;
  c.sample_count = 3;
  c.eval_n_mc = 2;
  c.eval_sequences = 4;
  c.output_dir = dir;
  return c;
}

}  // namespace

TEST(App, UnknownCommandIsConfigError) {
  std::ostringstream log;
  std::ostringstream err;
  EXPECT_EQ(run("fly", RunConfig{}, log, err), static_cast<int>(ErrorKind::kConfig));
  EXPECT_NE(err.str().find("ccdd: config error"), std::string::npos);
}

TEST(App, SampleWithoutCheckpointFails) {
  std::ostringstream log;
  std::ostringstream err;
  RunConfig c = tiny(oracle::scratch_dir("nockpt"));
  EXPECT_NE(run("sample", c, log, err), 0);
  EXPECT_NE(err.str().find("checkpoint required"), std::string::npos);
}

TEST(App, CorpusTrainSampleEval) {
  const std::string dir = oracle::scratch_dir("corpus_run");
  std::string text;
  for (int i = 0; i < 40; ++i) text += "the cat sat on the mat. ";
  write_file(dir + "/corpus.txt", text);
  RunConfig c = tiny(dir);
  c.corpus = dir + "/corpus.txt";
  c.tokenizer = "char";
  std::ostringstream log;
  execute("train", c, log);
  EXPECT_TRUE(std::filesystem::exists(dir + "/checkpoint.ccdd"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/vocab.txt"));
  const std::string metrics = read_file(dir + "/metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 1 + c.steps);

  const Vocabulary vocab = Vocabulary::from_file_text(read_file(dir + "/vocab.txt"));
  EXPECT_EQ(vocab.size(), 11);  // " .acehmnost"

  RunConfig s = resolve_config("sample", "", {{"checkpoint", dir + "/checkpoint.ccdd"},
                                              {"output_dir", dir},
                                              {"samples_out", dir + "/samples.txt"},
                                              {"latents_out", dir + "/latents.ccdd"}});
  EXPECT_EQ(s.tokenizer, "char");
  EXPECT_EQ(s.corpus, c.corpus);
  execute("sample", s, log);
  const std::string samples = read_file(dir + "/samples.txt");
  EXPECT_EQ(std::count(samples.begin(), samples.end(), '\n'), s.sample_count);
  const Checkpoint latents = load_checkpoint(dir + "/latents.ccdd");
  ASSERT_EQ(latents.tensors.size(), 1u);
  EXPECT_EQ(latents.tensors[0].element_count(),
            static_cast<std::uint64_t>(s.sample_count * s.seq_len * s.latent_dim));

  execute("eval", s, log);
  const std::string eval = read_file(dir + "/eval.csv");
  EXPECT_EQ(eval.substr(0, eval.find(',')), "elbo_nats_per_token");
}

TEST(App, IdenticalRunsGiveIdenticalFiles) {
  const std::string a = oracle::scratch_dir("same_a");
  const std::string b = oracle::scratch_dir("same_b");
  std::ostringstream log;
  for (const std::string& dir : {a, b}) {
    RunConfig c = tiny(dir);
    c.synthetic = "periodic";
    c.synthetic_pattern = "0,1,2";
    c.synthetic_vocab = 3;
    execute("train", c, log);
    c.checkpoint = dir + "/checkpoint.ccdd";
    c.samples_out = dir + "/samples.txt";
    execute("sample", c, log);
    execute("eval", c, log);
  }
  for (const char* f : {"metrics.csv", "samples.txt", "eval.csv"}) {
    EXPECT_EQ(read_file(a + "/" + f), read_file(b + "/" + f)) << f;
  }
  EXPECT_EQ(load_checkpoint(a + "/checkpoint.ccdd").tensors,
            load_checkpoint(b + "/checkpoint.ccdd").tensors);
}

TEST(App, ResumeRejectsChangedStructure) {
  const std::string dir = oracle::scratch_dir("mismatch");
  std::ostringstream log;
  RunConfig c = tiny(dir);
  c.synthetic = "iid_uniform";
  c.checkpoint = dir + "/checkpoint.ccdd";
  c.steps = 2;
  execute("train", c, log);
  c.d_model = 32;
  c.steps = 4;
  std::ostringstream err;
  EXPECT_EQ(run("train", c, log, err), static_cast<int>(ErrorKind::kCheckpoint));
}

TEST(App, VerifyPasses) {
  const std::string dir = oracle::scratch_dir("verify");
  std::ostringstream log;
  std::ostringstream err;
  RunConfig c;
  c.output_dir = dir;
  EXPECT_EQ(run("verify", c, log, err), 0) << err.str() << log.str();
  EXPECT_TRUE(std::filesystem::exists(dir + "/verify.csv"));
}
