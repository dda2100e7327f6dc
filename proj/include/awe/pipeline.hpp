#ifndef AWE_PIPELINE_HPP_
#define AWE_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "awe/analysis.hpp"
#include "awe/cae_rnn.hpp"
#include "awe/corpus.hpp"
#include "awe/probes.hpp"
#include "awe/training.hpp"

namespace awe {

/// Invalid or incomplete experiment configuration; the message names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every sub-analysis of an evaluation failed.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvaluationConfig {
  std::vector<std::string> embedders{"DS", "CAE"};
  std::uint64_t probe_seed = 0;
  std::size_t max_triples = 5000;
  AnalysisOptions analysis;
  LogisticOptions logistic;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string profile = "paper";
  std::optional<std::filesystem::path> manifest;  // ingest instead of synthesizing
  SynthConfig synth;                              // synth.mfcc is the frontend section
  PairFilter pair_filter;
  std::size_t n_pairs = 100000;
  Architecture arch = Architecture::paper();
  TrainConfig train;
  EvaluationConfig evaluation;

  /// Canonical form: every field, keys sorted.
  nlohmann::json to_json() const;
  /// 16 hex digits of FNV-1a over the compact canonical JSON.
  std::string hash() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Defaults of a named profile ("desk" or "paper").
ExperimentConfig profile_defaults(const std::string& profile);

/// Profile defaults overlaid with `config`. Precedence for the profile and
/// the seed: override, then the config file, then the defaults. A config
/// file must set "seed"; unknown keys are errors.
ExperimentConfig parse_config(const nlohmann::json& config, const std::optional<std::string>& profile_override,
                              const std::optional<std::uint64_t>& seed_override);

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::optional<std::string>& profile_override,
                             const std::optional<std::uint64_t>& seed_override);

/// Output layout under the run directory.
struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path corpus_dir() const { return root / "corpus"; }
  std::filesystem::path manifest() const { return corpus_dir() / "manifest.json"; }
  std::filesystem::path params() const { return root / "model" / "params.awep"; }
  std::filesystem::path training_log() const { return root / "model" / "training_log.csv"; }
  std::filesystem::path embeddings(const std::string& tag) const { return root / "embeddings" / (tag + ".awee"); }
  std::filesystem::path results_dir() const { return root / "results"; }
  std::filesystem::path plots_dir() const { return results_dir() / "plots"; }
};

/// Synthesizes (or ingests) the corpus and saves it with the effective config.
Corpus run_synth(const ExperimentConfig& config, const RunPaths& paths);

/// Trains on the saved corpus; writes the parameters and the training log.
/// NonFiniteLoss propagates.
TrainResult run_train(const ExperimentConfig& config, const RunPaths& paths, const EpochCallback& on_epoch = {});

/// Embeds every test-split token with each requested embedder ("DS", "CAE").
/// CAE reads `params` (default: the run's parameter file).
std::vector<EmbeddingSet> run_embed(const ExperimentConfig& config, const RunPaths& paths,
                                    const std::vector<std::string>& embedders,
                                    const std::optional<std::filesystem::path>& params = std::nullopt);

/// One measurement, or one failed sub-analysis (status != "ok", value NaN).
struct ResultRow {
  std::string embedder_tag;
  std::string task;
  std::string metric;
  double value = 0.0;
  std::string status = "ok";
};

struct EmbedderEvaluation {
  std::string embedder_tag;
  std::optional<ProbeResult> speaker, duration, phone_count;
  std::optional<EditDistanceReport> edit_distance;
  std::optional<PositionReport> position;
  std::vector<ResultRow> rows;
};

struct EvaluationResults {
  std::vector<EmbedderEvaluation> embedders;
  std::vector<ResultRow> rows() const;
  /// Value of (tag, task, metric); throws std::out_of_range if absent or failed.
  double value(const std::string& tag, const std::string& task, const std::string& metric) const;
};

/// Worker cap from AWE_PROBE_THREADS (unset: hardware concurrency).
/// Throws ConfigError for a non-positive or malformed value.
unsigned probe_thread_cap();

/// Runs the full probe, ABX and distance battery on the saved embeddings and
/// writes the result tables, JSON and plots. Throws EvaluationError if every
/// sub-analysis failed.
EvaluationResults run_evaluate(const ExperimentConfig& config, const RunPaths& paths,
                               const std::vector<std::string>& embedders);

/// Re-renders the six plots from the result CSVs.
void run_report(const RunPaths& paths);

inline constexpr const char* kResultsHeader = "embedder_tag,seed,config_hash,task,metric,value,status";

}  // namespace awe

#endif  // AWE_PIPELINE_HPP_
