// awe: synthesize a corpus, train the correspondence autoencoder, embed
// test tokens and run the evaluation battery.
//
// Exit codes: 0 success, 1 I/O or other runtime error, 2 configuration
// error, 3 numerical failure, 4 evaluation failure.

#include <malloc.h>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "awe/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kConfig = 2, kNumerical = 3, kEvaluation = 4 };

struct Options {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  std::string which = "both";
  std::optional<std::filesystem::path> params;
  std::vector<std::string> embedders;
};

void add_common(CLI::App& cmd, Options& o, bool needs_config) {
  if (needs_config) {
    cmd.add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    cmd.add_option("--seed", o.seed, "overrides the config seed");
    cmd.add_option("--profile", o.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  }
  cmd.add_option("--out", o.out, "run directory")->required();
}

int run(int argc, char** argv) {
  CLI::App app{"Acoustic word embedding experiments"};
  app.require_subcommand(1);
  Options o;
  auto* synth = app.add_subcommand("synth", "synthesize (or ingest) the corpus");
  auto* train = app.add_subcommand("train", "train the CAE-RNN on the run's corpus");
  auto* embed = app.add_subcommand("embed", "embed the test-split tokens");
  auto* evaluate = app.add_subcommand("evaluate", "run probes, ABX and distance analyses");
  auto* report = app.add_subcommand("report", "re-render plots from the result CSVs");
  for (auto* cmd : {synth, train, embed, evaluate}) add_common(*cmd, o, true);
  add_common(*report, o, false);
  embed->add_option("--which", o.which, "DS, CAE or both")->check(CLI::IsMember({"DS", "CAE", "both"}));
  embed->add_option("--params", o.params, "parameter file (default: the run's)")->check(CLI::ExistingFile);
  evaluate->add_option("--embedders", o.embedders, "embedder tags (default: from config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const awe::RunPaths paths{o.out};
    if (report->parsed()) {
      awe::run_report(paths);
      return kOk;
    }
    const awe::ExperimentConfig config = awe::load_config(o.config, o.profile, o.seed);
    std::cerr << "config " << config.hash() << " (profile " << config.profile << ", seed " << config.seed << ")\n";
    if (synth->parsed()) {
      const awe::Corpus corpus = awe::run_synth(config, paths);
      std::cerr << "wrote " << corpus.tokens.size() << " tokens to " << paths.corpus_dir() << "\n";
    } else if (train->parsed()) {
      awe::run_train(config, paths, [](const awe::EpochLog& e) {
        std::cerr << e.phase << " epoch " << e.epoch << " loss " << e.mean_loss << "\n";
      });
      std::cerr << "wrote " << paths.params() << "\n";
    } else if (embed->parsed()) {
      std::vector<std::string> tags;
      if (o.which == "both")
        tags = {"DS", "CAE"};
      else
        tags = {o.which};
      for (const auto& set : awe::run_embed(config, paths, tags, o.params))
        std::cerr << "wrote " << set.size() << " " << set.embedder_tag << " embeddings\n";
    } else if (evaluate->parsed()) {
      const auto tags = o.embedders.empty() ? config.evaluation.embedders : o.embedders;
      const auto results = awe::run_evaluate(config, paths, tags);
      for (const auto& row : results.rows())
        if (row.status != "ok") std::cerr << row.embedder_tag << " " << row.task << ": " << row.status << "\n";
      std::cerr << "wrote " << paths.results_dir() << "\n";
    }
    return kOk;
  } catch (const awe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const awe::NonFiniteLoss& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const awe::EvaluationError& e) {
    std::cerr << "evaluation failure: " << e.what() << "\n";
    return kEvaluation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  // Training allocates many short-lived matrices; keep freed memory mapped.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return run(argc, argv);
}
