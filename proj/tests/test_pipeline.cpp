#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "awe/pipeline.hpp"
#include "test_util.hpp"

namespace awe {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json tiny_config() {
  return json::parse(R"({
    "seed": 3,
    "profile": "desk",
    "corpus": {"n_word_types": 30, "tokens_per_type": 6, "n_speakers": 6, "speakers_per_type": 3},
    "pairs": {"count": 60, "min_duration_ms": 250, "min_phones": 3},
    "model": {"layers": 1, "hidden": 8, "embedding_dim": 6, "ae_pretrain_epochs": 1, "cae_epochs": 1},
    "evaluation": {"max_triples": 200, "max_pairs_per_bin": 100}
  })");
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(AWE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc, std::nullopt, std::nullopt);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, MissingSeedIsNamed) {
  json doc = tiny_config();
  doc.erase("seed");
  EXPECT_NE(config_error(doc).find("seed"), std::string::npos);
}

TEST(Config, UnknownKeysAreRejected) {
  json doc = tiny_config();
  doc["model"]["hiden"] = 3;
  EXPECT_NE(config_error(doc).find("hiden"), std::string::npos);
  doc = tiny_config();
  doc["extra"] = 1;
  EXPECT_NE(config_error(doc).find("extra"), std::string::npos);
}

TEST(Config, WrongTypesAndInvalidValuesAreRejected) {
  json doc = tiny_config();
  doc["model"]["hidden"] = "wide";
  EXPECT_NE(config_error(doc).find("hidden"), std::string::npos);
  doc = tiny_config();
  doc["model"]["learning_rate"] = -1;
  EXPECT_NE(config_error(doc), "");
  doc = tiny_config();
  doc["evaluation"]["embedders"] = {"DS", "MFCC"};
  EXPECT_NE(config_error(doc).find("MFCC"), std::string::npos);
  doc = tiny_config();
  doc["profile"] = "laptop";
  EXPECT_NE(config_error(doc).find("laptop"), std::string::npos);
}

TEST(Config, ProfilesAndOverrides) {
  const ExperimentConfig desk = parse_config(json{{"seed", 9}}, std::string("desk"), std::nullopt);
  EXPECT_EQ(desk.synth.n_word_types, 600);
  EXPECT_EQ(desk.arch, Architecture::desk());
  EXPECT_EQ(desk.seed, 9u);
  const ExperimentConfig paper = parse_config(json{{"seed", 9}, {"profile", "desk"}}, std::string("paper"), 4);
  EXPECT_EQ(paper.profile, "paper");
  EXPECT_EQ(paper.arch, Architecture::paper());
  EXPECT_EQ(paper.train.ae_pretrain_epochs + paper.train.cae_epochs, 40);
  EXPECT_EQ(paper.seed, 4u);
}

TEST(Config, HashTracksEveryField) {
  const ExperimentConfig a = parse_config(tiny_config(), std::nullopt, std::nullopt);
  EXPECT_EQ(a.hash().size(), 16u);
  EXPECT_EQ(a.hash(), parse_config(tiny_config(), std::nullopt, std::nullopt).hash());
  json doc = tiny_config();
  doc["evaluation"]["max_triples"] = 201;
  EXPECT_NE(parse_config(doc, std::nullopt, std::nullopt).hash(), a.hash());
  // The canonical form parses back to the same configuration.
  EXPECT_EQ(parse_config(a.to_json(), std::nullopt, std::nullopt).hash(), a.hash());
}

TEST(Config, ProbeThreadCapFromEnvironment) {
  ::setenv("AWE_PROBE_THREADS", "3", 1);
  EXPECT_EQ(probe_thread_cap(), 3u);
  ::setenv("AWE_PROBE_THREADS", "0", 1);
  EXPECT_THROW(probe_thread_cap(), ConfigError);
  ::setenv("AWE_PROBE_THREADS", "two", 1);
  EXPECT_THROW(probe_thread_cap(), ConfigError);
  ::unsetenv("AWE_PROBE_THREADS");
  EXPECT_GE(probe_thread_cap(), 1u);
}

TEST(Pipeline, ZeroEpochsKeepTheInitialization) {
  json doc = tiny_config();
  doc["model"]["ae_pretrain_epochs"] = 0;
  doc["model"]["cae_epochs"] = 0;
  const ExperimentConfig cfg = parse_config(doc, std::nullopt, std::nullopt);
  const RunPaths paths{testing::scratch_dir("zero_epochs")};
  const Corpus corpus = run_synth(cfg, paths);
  const TrainResult r = run_train(cfg, paths);
  const auto pairs = build_train_pairs(corpus, cfg.n_pairs, cfg.pair_filter, derive_seed(cfg.seed, "pairs"));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train");
  EXPECT_TRUE(read_params(paths.params()) == initial_params(corpus, pairs, cfg.arch, tc));
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(read_file(paths.training_log()), "seed,config_hash,phase,epoch,mean_loss\n");
}

class CliRun : public ::testing::Test {
 protected:
  static fs::path run(const std::string& name) {
    const fs::path dir = testing::scratch_dir(name);
    write_file(dir / "config.json", tiny_config().dump());
    const std::string common = "--config " + (dir / "config.json").string() + " --out " + (dir / "run").string();
    for (const char* stage : {"synth", "train", "embed", "evaluate"})
      if (run_cli(std::string(stage) + " " + common) != 0) return {};
    return dir / "run";
  }
};

TEST_F(CliRun, EndToEndIsDeterministicAndComplete) {
  const fs::path a = run("cli_a"), b = run("cli_b");
  ASSERT_FALSE(a.empty());
  ASSERT_FALSE(b.empty());

  std::size_t csvs = 0;
  for (const auto& entry : fs::directory_iterator(a / "results")) {
    if (entry.path().extension() != ".csv") continue;
    ++csvs;
    EXPECT_EQ(read_file(entry.path()), read_file(b / "results" / entry.path().filename())) << entry.path();
  }
  EXPECT_GE(csvs, 6u);
  EXPECT_EQ(read_file(a / "model" / "params.awep"), read_file(b / "model" / "params.awep"));

  std::size_t svgs = 0;
  for (const auto& entry : fs::directory_iterator(a / "results" / "plots")) svgs += entry.path().extension() == ".svg";
  EXPECT_EQ(svgs, 6u);

  std::istringstream results(read_file(a / "results" / "results.csv"));
  std::string line;
  std::getline(results, line);
  EXPECT_EQ(line, "embedder_tag,seed,config_hash,task,metric,value,status");
  bool ds = false, cae = false;
  while (std::getline(results, line)) {
    ds = ds || line.rfind("DS,3,", 0) == 0;
    cae = cae || line.rfind("CAE,3,", 0) == 0;
  }
  EXPECT_TRUE(ds);
  EXPECT_TRUE(cae);

  // One log row per epoch.
  std::istringstream log(read_file(a / "model" / "training_log.csv"));
  int rows = -1;
  while (std::getline(log, line)) ++rows;
  EXPECT_EQ(rows, 2);

  // report re-renders identical plots from the CSVs.
  const std::string before = read_file(a / "results" / "plots" / "fig3_abx.svg");
  EXPECT_EQ(run_cli("report --out " + a.string()), 0);
  EXPECT_EQ(read_file(a / "results" / "plots" / "fig3_abx.svg"), before);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const fs::path dir = testing::scratch_dir("cli_errors");
  json doc = tiny_config();
  doc.erase("seed");
  write_file(dir / "no_seed.json", doc.dump());
  EXPECT_EQ(run_cli("synth --config " + (dir / "no_seed.json").string() + " --out " + (dir / "r").string()), 2);
  doc = tiny_config();
  doc["corpus"]["n_word_typez"] = 5;
  write_file(dir / "typo.json", doc.dump());
  EXPECT_EQ(run_cli("synth --config " + (dir / "typo.json").string() + " --out " + (dir / "r").string()), 2);
  EXPECT_EQ(run_cli("synth --profile laptop --out " + (dir / "r").string()), 2);
  EXPECT_EQ(run_cli("synth --config " + (dir / "missing.json").string() + " --out " + (dir / "r").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, EvaluationWithoutEmbeddingsFails) {
  const fs::path dir = testing::scratch_dir("cli_eval_fail");
  write_file(dir / "config.json", tiny_config().dump());
  const std::string common = "--config " + (dir / "config.json").string() + " --out " + (dir / "run").string();
  ASSERT_EQ(run_cli("synth " + common), 0);
  EXPECT_EQ(run_cli("evaluate " + common), 4);
}

TEST(Cli, BadThreadCapExitsTwo) {
  const fs::path dir = testing::scratch_dir("cli_threads");
  write_file(dir / "config.json", tiny_config().dump());
  const std::string common = "--config " + (dir / "config.json").string() + " --out " + (dir / "run").string();
  ASSERT_EQ(run_cli("synth " + common), 0);
  ASSERT_EQ(run_cli("embed --which DS " + common), 0);
  EXPECT_EQ(run_cli("evaluate --embedders DS " + common, "AWE_PROBE_THREADS=x"), 2);
  EXPECT_EQ(run_cli("evaluate --embedders DS " + common, "AWE_PROBE_THREADS=1"), 0);
}

}  // namespace
}  // namespace awe
