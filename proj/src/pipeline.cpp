#include "awe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <limits>
#include <thread>
#include <tuple>
#include <type_traits>

#include "awe/abx.hpp"
#include "awe/embedding.hpp"
#include "awe/format.hpp"
#include "awe/mathcore/rng.hpp"
#include "awe/svg.hpp"

namespace awe {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

ExperimentConfig profile_defaults(const std::string& profile) {
  ExperimentConfig c;
  c.profile = profile;
  if (profile == "paper") {
    c.arch = Architecture::paper();
    c.train.ae_pretrain_epochs = 15;
    c.train.cae_epochs = 25;
    c.n_pairs = 100000;
  } else if (profile == "desk") {
    c.arch = Architecture::desk();
    c.train.ae_pretrain_epochs = 5;
    c.train.cae_epochs = 15;
    c.n_pairs = 2000;
  } else {
    throw ConfigError("profile: expected \"desk\" or \"paper\", got \"" + profile + "\"");
  }
  return c;
}

namespace {

/// Typed, path-aware access to one JSON object; rejects unknown keys.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  /// Marks `key` known; nullptr when absent.
  const json* raw(const std::string& key) {
    used_.push_back(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.push_back(key);
    if (!obj_.contains(key)) return;
    const json& v = obj_.at(key);
    const std::string field = field_name(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field + ": expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0)
          out = v.get<T>();
        else
          throw ConfigError(field + ": expected a non-negative integer");
      } else {
        out = v.get<T>();
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(field + ": expected a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field + ": expected a string");
      out = v.get<std::string>();
    } else {
      static_assert(std::is_same_v<T, std::vector<std::string>>);
      if (!v.is_array()) throw ConfigError(field + ": expected an array of strings");
      out.clear();
      for (const json& e : v) {
        if (!e.is_string()) throw ConfigError(field + ": expected an array of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }

  template <typename T>
  void require(const std::string& key, T& out) {
    if (!obj_.contains(key)) throw ConfigError(field_name(key) + ": required field is missing");
    get(key, out);
  }

  /// Nested object, or an empty one when absent.
  Reader section(const std::string& key) {
    used_.push_back(key);
    static const json empty = json::object();
    return Reader(obj_.contains(key) ? obj_.at(key) : empty, field_name(key));
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (std::find(used_.begin(), used_.end(), key) == used_.end())
        throw ConfigError(field_name(key) + ": unknown field");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  std::string field_name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& obj_;
  std::string path_;
  std::vector<std::string> used_;
};

/// Reads or writes every configurable field through one visitor, so parsing
/// and canonical serialization cannot drift apart.
template <typename Corpus_, typename Frontend, typename Pairs, typename Model, typename Eval, typename C>
void visit_sections(C& c, Corpus_ corpus, Frontend frontend, Pairs pairs, Model model, Eval eval) {
  auto& s = c.synth;
  corpus("n_phones", s.n_phones);
  corpus("n_speakers", s.n_speakers);
  corpus("n_word_types", s.n_word_types);
  corpus("tokens_per_type", s.tokens_per_type);
  corpus("speakers_per_type", s.speakers_per_type);
  corpus("phones_per_word_mean", s.phones_per_word_mean);
  corpus("phones_per_word_sd", s.phones_per_word_sd);
  corpus("sample_rate_hz", s.sample_rate_hz);
  corpus("test_speaker_fraction", s.test_speaker_fraction);
  corpus("minimal_pair_fraction", s.minimal_pair_fraction);
  corpus("rate_jitter_min", s.rate_jitter_min);
  corpus("rate_jitter_max", s.rate_jitter_max);
  corpus("crossfade_ms", s.crossfade_ms);
  corpus("token_gain_db", s.token_gain_db);
  corpus("formant_jitter_sd", s.formant_jitter_sd);

  auto& m = s.mfcc;
  frontend("frame_length_ms", m.frame_length_ms);
  frontend("frame_hop_ms", m.frame_hop_ms);
  frontend("n_fft_bins", m.n_fft_bins);
  frontend("n_mel_filters", m.n_mel_filters);
  frontend("n_coefficients", m.n_coefficients);
  frontend("pre_emphasis", m.pre_emphasis);
  frontend("energy_floor", m.energy_floor);
  frontend("cepstral_mean_norm", m.cepstral_mean_norm);

  pairs("count", c.n_pairs);
  pairs("min_duration_ms", c.pair_filter.min_duration_ms);
  pairs("min_phones", c.pair_filter.min_phones);

  model("layers", c.arch.layers);
  model("hidden", c.arch.hidden);
  model("embedding_dim", c.arch.embedding_dim);
  model("ae_pretrain_epochs", c.train.ae_pretrain_epochs);
  model("cae_epochs", c.train.cae_epochs);
  model("batch_size", c.train.batch_size);
  model("learning_rate", c.train.learning_rate);
  model("gradient_clip_norm", c.train.gradient_clip_norm);

  auto& e = c.evaluation;
  eval("embedders", e.embedders);
  eval("probe_seed", e.probe_seed);
  eval("max_triples", e.max_triples);
  eval("max_edit_distance", e.analysis.max_edit_distance);
  eval("max_pairs_per_bin", e.analysis.max_pairs_per_bin);
  eval("same_speaker_only", e.analysis.same_speaker_only);
  eval("logistic_max_iters", e.logistic.max_iters);
  eval("logistic_tolerance", e.logistic.tolerance);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["profile"] = profile;
  const auto into = [](json& section) {
    return [&section](const char* key, const auto& value) { section[key] = value; };
  };
  json corpus = json::object(), frontend = json::object(), pairs = json::object(), model = json::object(),
       evaluation = json::object();
  corpus["manifest"] = manifest ? json(manifest->generic_string()) : json(nullptr);
  visit_sections(*this, into(corpus), into(frontend), into(pairs), into(model), into(evaluation));
  j["corpus"] = corpus;
  j["frontend"] = frontend;
  j["pairs"] = pairs;
  j["model"] = model;
  j["evaluation"] = evaluation;
  return j;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json().dump())));
  return buf;
}

void ExperimentConfig::validate() const {
  const auto wrap = [](const char* section, auto&& check) {
    try {
      check();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(section) + ": " + e.what());
    }
  };
  if (manifest) {
    if (!fs::exists(*manifest)) throw ConfigError("corpus.manifest: no such file " + manifest->string());
  } else {
    wrap("corpus", [&] { synth.validate(); });
  }
  wrap("frontend", [&] { synth.mfcc.validate(synth.sample_rate_hz); });
  wrap("model", [&] { arch.validate(); });
  wrap("model", [&] { train.validate(); });
  if (arch.input_dim != synth.mfcc.n_coefficients)
    throw ConfigError("model: input_dim must equal frontend.n_coefficients");
  if (n_pairs == 0) throw ConfigError("pairs.count: must be positive");
  if (!(pair_filter.min_duration_ms >= 0) || pair_filter.min_phones < 1)
    throw ConfigError("pairs: min_duration_ms must be >= 0 and min_phones >= 1");
  if (evaluation.embedders.empty()) throw ConfigError("evaluation.embedders: must not be empty");
  for (const auto& tag : evaluation.embedders)
    if (tag != "DS" && tag != "CAE") throw ConfigError("evaluation.embedders: unknown embedder \"" + tag + "\"");
  if (evaluation.max_triples == 0) throw ConfigError("evaluation.max_triples: must be positive");
  if (evaluation.analysis.max_edit_distance < 0) throw ConfigError("evaluation.max_edit_distance: must be >= 0");
  if (evaluation.analysis.max_pairs_per_bin < 1) throw ConfigError("evaluation.max_pairs_per_bin: must be >= 1");
  if (evaluation.logistic.max_iters < 1 || !(evaluation.logistic.tolerance > 0))
    throw ConfigError("evaluation: logistic_max_iters must be >= 1 and logistic_tolerance > 0");
}

ExperimentConfig parse_config(const json& config, const std::optional<std::string>& profile_override,
                              const std::optional<std::uint64_t>& seed_override) {
  Reader root(config, "");
  std::string profile = "paper";
  root.get("profile", profile);
  if (profile_override) profile = *profile_override;
  ExperimentConfig c = profile_defaults(profile);
  root.require("seed", c.seed);
  if (seed_override) c.seed = *seed_override;

  Reader corpus = root.section("corpus"), frontend = root.section("frontend"), pairs = root.section("pairs"),
         model = root.section("model"), evaluation = root.section("evaluation");
  if (const json* m = corpus.raw("manifest"); m != nullptr && !m->is_null()) {
    if (!m->is_string()) throw ConfigError("corpus.manifest: expected a string or null");
    c.manifest = m->get<std::string>();
  }
  const auto from = [](Reader& r) { return [&r](const char* key, auto& value) { r.get(key, value); }; };
  visit_sections(c, from(corpus), from(frontend), from(pairs), from(model), from(evaluation));
  for (const Reader* r : {&corpus, &frontend, &pairs, &model, &evaluation}) r->finish();
  root.finish();

  c.arch.input_dim = c.synth.mfcc.n_coefficients;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::optional<fs::path>& path, const std::optional<std::string>& profile_override,
                             const std::optional<std::uint64_t>& seed_override) {
  if (!path) {
    ExperimentConfig c = profile_defaults(profile_override.value_or("paper"));
    if (seed_override) c.seed = *seed_override;
    c.validate();
    return c;
  }
  std::ifstream is(*path);
  if (!is) throw ConfigError("config: cannot open " + path->string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path->string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, profile_override, seed_override);
}

// ---------------------------------------------------------------- stages

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Corpus load_run_corpus(const ExperimentConfig& config, const RunPaths& paths) {
  if (!fs::exists(paths.manifest()))
    throw std::runtime_error("no corpus at " + paths.manifest().string() + "; run synth first");
  return load_aligned_corpus(paths.manifest(), config.synth.mfcc);
}

}  // namespace

Corpus run_synth(const ExperimentConfig& config, const RunPaths& paths) {
  Corpus corpus = config.manifest ? load_aligned_corpus(*config.manifest, config.synth.mfcc)
                                  : synthesize_corpus(config.synth, config.seed);
  save_corpus(corpus, paths.corpus_dir());
  json effective = config.to_json();
  effective["config_hash"] = config.hash();
  write_text(paths.root / "config.json", effective.dump(2) + "\n");
  return corpus;
}

TrainResult run_train(const ExperimentConfig& config, const RunPaths& paths, const EpochCallback& on_epoch) {
  const Corpus corpus = load_run_corpus(config, paths);
  const auto pairs = build_train_pairs(corpus, config.n_pairs, config.pair_filter, derive_seed(config.seed, "pairs"));
  TrainConfig tc = config.train;
  tc.seed = derive_seed(config.seed, "train");

  fs::create_directories(paths.training_log().parent_path());
  std::ofstream log(paths.training_log(), std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + paths.training_log().string());
  log << "seed,config_hash,phase,epoch,mean_loss\n";
  const std::string prefix = std::to_string(config.seed) + "," + config.hash() + ",";
  TrainResult result = train(corpus, pairs, config.arch, tc, [&](const EpochLog& e) {
    log << prefix << e.phase << ',' << e.epoch << ',' << format_number(e.mean_loss) << '\n' << std::flush;
    if (on_epoch) on_epoch(e);
  });
  write_params(paths.params(), result.params);
  return result;
}

std::vector<EmbeddingSet> run_embed(const ExperimentConfig& config, const RunPaths& paths,
                                    const std::vector<std::string>& embedders,
                                    const std::optional<fs::path>& params_path) {
  const Corpus corpus = load_run_corpus(config, paths);
  const auto tests = corpus.indices(Split::kTest);
  std::vector<EmbeddingSet> out;
  for (const std::string& tag : embedders) {
    EmbeddingSet set;
    set.embedder_tag = tag;
    if (tag == "DS") {
      set.values.resize(static_cast<Eigen::Index>(tests.size()), 10 * config.synth.mfcc.n_coefficients);
      for (std::size_t i = 0; i < tests.size(); ++i) {
        const WordToken& t = corpus.tokens[tests[i]];
        set.token_ids.push_back(t.token_id);
        set.values.row(static_cast<Eigen::Index>(i)) = downsample_embed(t.frames).values.transpose();
      }
    } else if (tag == "CAE") {
      const CaeRnn params = read_params(params_path.value_or(paths.params()));
      set.values.resize(static_cast<Eigen::Index>(tests.size()), params.arch.embedding_dim);
      for (std::size_t i = 0; i < tests.size(); ++i) {
        const WordToken& t = corpus.tokens[tests[i]];
        set.token_ids.push_back(t.token_id);
        set.values.row(static_cast<Eigen::Index>(i)) = encode(params, t.frames.frames).transpose();
      }
      if (!set.values.allFinite()) throw NonFiniteLoss(0, 0, std::numeric_limits<double>::quiet_NaN());
    } else {
      throw ConfigError("embedder: unknown tag \"" + tag + "\" (expected DS or CAE)");
    }
    fs::create_directories(paths.embeddings(tag).parent_path());
    write_embeddings(paths.embeddings(tag), set);
    out.push_back(std::move(set));
  }
  return out;
}

// ---------------------------------------------------------------- evaluation

unsigned probe_thread_cap() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("AWE_PROBE_THREADS");
  if (env == nullptr || *env == '\0') return hw;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError(std::string("AWE_PROBE_THREADS: expected a positive integer, got \"") + env + "\"");
  return static_cast<unsigned>(v);
}

namespace {

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::string sanitize(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ch == ',' ? ';' : ' ';
  return s;
}

ResultRow failed(const std::string& tag, const std::string& task, const std::string& message) {
  return {tag, task, "*", std::numeric_limits<double>::quiet_NaN(), "error: " + sanitize(message)};
}

json probe_json(const ProbeResult& r) {
  json j;
  j["kind"] = to_string(r.kind);
  j["test_metric"] = r.test_metric;
  j["baseline_metric"] = r.baseline_metric;
  j["train_metric"] = r.train_metric;
  j["train_baseline_metric"] = r.train_baseline_metric;
  if (r.kind == ProbeKind::kRegression) {
    j["r_squared"] = r.r_squared;
    j["baseline_r_squared"] = r.baseline_r_squared;
    j["condition_number"] = r.condition_number;
  } else {
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
  }
  json weights = json::array();
  for (Eigen::Index i = 0; i < r.weights.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < r.weights.cols(); ++k) row.push_back(r.weights(i, k));
    weights.push_back(row);
  }
  j["weights"] = weights;
  j["intercepts"] = std::vector<double>(r.intercepts.data(), r.intercepts.data() + r.intercepts.size());
  j["warnings"] = r.warnings;
  return j;
}

struct Triples {
  std::vector<Triple> triples;
  std::string error;  // non-empty when construction failed
};

Triples try_build(const std::function<std::vector<Triple>()>& build) {
  try {
    return {build(), {}};
  } catch (const std::exception& e) {
    return {{}, e.what()};
  }
}

EmbedderEvaluation evaluate_embedder(const ExperimentConfig& config, const Corpus& corpus, const EmbeddingSet& set,
                                     const Triples& dur_spk, const Triples& onset, std::uint64_t seed,
                                     unsigned workers) {
  EmbedderEvaluation ev;
  ev.embedder_tag = set.embedder_tag;
  const std::string& tag = set.embedder_tag;
  const auto& ec = config.evaluation;
  constexpr std::size_t kTasks = 8;
  std::vector<std::vector<ResultRow>> rows(kTasks);

  const auto regression_rows = [&](const std::string& task, const ProbeResult& r) {
    return std::vector<ResultRow>{{tag, task, "mse", r.test_metric},
                                  {tag, task, "r_squared", r.r_squared},
                                  {tag, task, "intercept_mse", r.baseline_metric},
                                  {tag, task, "intercept_r_squared", r.baseline_r_squared}};
  };
  const auto abx_rows = [&](const std::string& task, const Triples& t) {
    if (!t.error.empty()) return std::vector<ResultRow>{failed(tag, task, t.error)};
    return std::vector<ResultRow>{{tag, task, "score", abx_score(t.triples, set)},
                                  {tag, task, "triples", static_cast<double>(t.triples.size())}};
  };

  const std::function<void(std::size_t)> tasks[kTasks] = {
      [&](std::size_t i) {
        ev.speaker = fit_logistic_regression(split_80_20(speaker_dataset(corpus, set), derive_seed(seed, "speaker")),
                                             ec.logistic);
        rows[i] = {{tag, "probe_speaker", "accuracy", ev.speaker->test_metric},
                   {tag, "probe_speaker", "majority_accuracy", ev.speaker->baseline_metric},
                   {tag, "probe_speaker", "train_accuracy", ev.speaker->train_metric},
                   {tag, "probe_speaker", "converged", ev.speaker->converged ? 1.0 : 0.0}};
      },
      [&](std::size_t i) {
        ev.duration = probe_duration(corpus, set, derive_seed(seed, "duration"));
        rows[i] = regression_rows("probe_duration", *ev.duration);
      },
      [&](std::size_t i) {
        ev.phone_count = probe_phone_count(corpus, set, derive_seed(seed, "phone_count"));
        rows[i] = regression_rows("probe_phone_count", *ev.phone_count);
      },
      [&](std::size_t i) { rows[i] = abx_rows("abx_dur_spk", dur_spk); },
      [&](std::size_t i) { rows[i] = abx_rows("abx_onset", onset); },
      [&](std::size_t i) {
        ev.edit_distance = distance_vs_edit_distance(corpus, set, ec.analysis, derive_seed(seed, "edit_distance"));
        for (const auto& b : ev.edit_distance->bins)
          rows[i].push_back({tag, "edit_distance", "mean_cosine_" + std::to_string(b.edit_distance), b.mean_cosine});
      },
      [&](std::size_t i) {
        ev.position = distance_by_position(corpus, set, ec.analysis, derive_seed(seed, "position"));
        for (const auto& s : ev.position->classes)
          rows[i].push_back({tag, "position", std::string("mean_cosine_") + to_string(s.position_class), s.mean});
      },
      [&](std::size_t i) { rows[i] = {{tag, "same_different", "ap", same_different_ap(corpus, set)}}; },
  };
  static const char* const kTaskNames[kTasks] = {"probe_speaker", "probe_duration", "probe_phone_count",
                                                 "abx_dur_spk",   "abx_onset",      "edit_distance",
                                                 "position",      "same_different"};
  parallel_for(kTasks, workers, [&](std::size_t i) {
    try {
      tasks[i](i);
    } catch (const std::exception& e) {
      rows[i] = {failed(tag, kTaskNames[i], e.what())};
    }
  });
  for (auto& r : rows) ev.rows.insert(ev.rows.end(), r.begin(), r.end());
  return ev;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("CSV has no column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::istringstream is(read_text(path));
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV " + path.string());
  t.header = split_csv_line(line);
  while (std::getline(is, line))
    if (!line.empty()) t.rows.push_back(split_csv_line(line));
  return t;
}

double to_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

void write_svg(const fs::path& path, const std::string& svg) { write_text(path, svg); }

}  // namespace

std::vector<ResultRow> EvaluationResults::rows() const {
  std::vector<ResultRow> out;
  for (const auto& e : embedders) out.insert(out.end(), e.rows.begin(), e.rows.end());
  return out;
}

double EvaluationResults::value(const std::string& tag, const std::string& task, const std::string& metric) const {
  for (const auto& e : embedders)
    for (const auto& r : e.rows)
      if (r.embedder_tag == tag && r.task == task && r.metric == metric && r.status == "ok") return r.value;
  throw std::out_of_range("no result for " + tag + "/" + task + "/" + metric);
}

EvaluationResults run_evaluate(const ExperimentConfig& config, const RunPaths& paths,
                               const std::vector<std::string>& embedders) {
  const unsigned workers = probe_thread_cap();
  const Corpus corpus = load_run_corpus(config, paths);
  const std::uint64_t seed = derive_seed(derive_seed(config.seed, "evaluate"), config.evaluation.probe_seed);
  const std::size_t cap = config.evaluation.max_triples;
  const Triples dur_spk =
      try_build([&] { return build_duration_speaker_triples(corpus, cap, derive_seed(seed, "abx")); });
  const Triples onset = try_build([&] { return build_onset_triples(corpus, cap, derive_seed(seed, "abx")); });

  EvaluationResults results;
  for (const std::string& tag : embedders) {
    EmbeddingSet set;
    try {
      set = read_embeddings(paths.embeddings(tag), tag);
    } catch (const std::exception& e) {
      EmbedderEvaluation ev;
      ev.embedder_tag = tag;
      ev.rows.push_back(failed(tag, "load", e.what()));
      results.embedders.push_back(std::move(ev));
      continue;
    }
    results.embedders.push_back(evaluate_embedder(config, corpus, set, dur_spk, onset, seed, workers));
  }

  const std::string stamp = std::to_string(config.seed) + "," + config.hash() + ",";
  const fs::path dir = paths.results_dir();
  {
    std::ostringstream os;
    os << kResultsHeader << '\n';
    for (const auto& r : results.rows())
      os << r.embedder_tag << ',' << stamp << r.task << ',' << r.metric << ',' << format_number(r.value) << ','
         << r.status << '\n';
    write_text(dir / "results.csv", os.str());
  }
  {
    std::ostringstream ed, pos, ap;
    ed << "embedder_tag,seed,config_hash,edit_distance,count,mean,std\n";
    pos << "embedder_tag,seed,config_hash,position_class,count,mean,q1,median,q3\n";
    ap << "embedder_tag,seed,config_hash,ap\n";
    for (const auto& e : results.embedders) {
      if (e.edit_distance)
        for (const auto& b : e.edit_distance->bins)
          ed << e.embedder_tag << ',' << stamp << b.edit_distance << ',' << b.pair_count << ','
             << format_number(b.mean_cosine) << ',' << format_number(b.std_cosine) << '\n';
      if (e.position)
        for (const auto& s : e.position->classes)
          pos << e.embedder_tag << ',' << stamp << to_string(s.position_class) << ',' << s.count << ','
              << format_number(s.mean) << ',' << format_number(s.q1) << ',' << format_number(s.median) << ','
              << format_number(s.q3) << '\n';
      for (const auto& r : e.rows)
        if (r.task == "same_different" && r.status == "ok")
          ap << e.embedder_tag << ',' << stamp << format_number(r.value) << '\n';
    }
    write_text(dir / "edit_distance.csv", ed.str());
    write_text(dir / "position.csv", pos.str());
    write_text(dir / "same_different.csv", ap.str());
  }
  for (const auto& [name, t] : {std::pair{"triples_dur_spk.csv", &dur_spk}, std::pair{"triples_onset.csv", &onset}}) {
    std::ostringstream os;
    write_triples_csv(os, t->triples);
    write_text(dir / name, os.str());
  }
  {
    json j;
    j["seed"] = config.seed;
    j["config_hash"] = config.hash();
    j["config"] = config.to_json();
    j["embedders"] = json::object();
    for (const auto& e : results.embedders) {
      json je;
      if (e.speaker) je["probe_speaker"] = probe_json(*e.speaker);
      if (e.duration) je["probe_duration"] = probe_json(*e.duration);
      if (e.phone_count) je["probe_phone_count"] = probe_json(*e.phone_count);
      json warnings = json::array();
      if (e.edit_distance)
        for (const auto& w : e.edit_distance->warnings) warnings.push_back(w);
      if (e.position) {
        for (const auto& w : e.position->warnings) warnings.push_back(w);
        je["position_rejected_ambiguous"] = e.position->rejected_ambiguous;
      }
      je["warnings"] = warnings;
      json errors = json::array();
      for (const auto& r : e.rows)
        if (r.status != "ok") errors.push_back(r.task + ": " + r.status);
      je["errors"] = errors;
      j["embedders"][e.embedder_tag] = je;
    }
    write_text(dir / "results.json", j.dump(2) + "\n");
  }
  run_report(paths);

  const auto all = results.rows();
  if (std::none_of(all.begin(), all.end(), [](const ResultRow& r) { return r.status == "ok"; }))
    throw EvaluationError("every sub-analysis failed; see " + (dir / "results.csv").string());
  return results;
}

void run_report(const RunPaths& paths) {
  const fs::path dir = paths.results_dir();
  const CsvTable results = read_csv(dir / "results.csv");
  const std::size_t c_tag = results.column("embedder_tag"), c_task = results.column("task"),
                    c_metric = results.column("metric"), c_value = results.column("value"),
                    c_status = results.column("status");
  std::vector<std::string> tags;
  std::map<std::tuple<std::string, std::string, std::string>, double> value;
  for (const auto& row : results.rows) {
    if (row.size() != results.header.size() || row[c_status] != "ok") continue;
    if (std::find(tags.begin(), tags.end(), row[c_tag]) == tags.end()) tags.push_back(row[c_tag]);
    value[{row[c_tag], row[c_task], row[c_metric]}] = to_double(row[c_value]);
  }
  const auto lookup = [&](const std::string& tag, const std::string& task, const std::string& metric) {
    const auto it = value.find({tag, task, metric});
    return it == value.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
  };
  // Baselines depend only on the shared split; take the first available.
  const auto baseline = [&](const std::string& task, const std::string& metric) {
    for (const auto& tag : tags)
      if (const double v = lookup(tag, task, metric); std::isfinite(v)) return v;
    return std::numeric_limits<double>::quiet_NaN();
  };

  const fs::path plots = paths.plots_dir();
  {
    std::vector<svg::Bar> bars;
    for (const auto& tag : tags) bars.push_back({"synthetic", tag, lookup(tag, "probe_speaker", "accuracy")});
    bars.push_back({"synthetic", "majority", baseline("probe_speaker", "majority_accuracy")});
    write_svg(plots / "fig1_speaker_accuracy.svg",
              svg::bar_chart({"Speaker identity probe", "", "test accuracy"}, bars));
  }
  for (const auto& [file, task, title] :
       {std::tuple{"fig2_duration_mse.svg", "probe_duration", "Duration probe"},
        std::tuple{"fig4_phone_count_mse.svg", "probe_phone_count", "Phone count probe"}}) {
    std::vector<svg::Bar> bars;
    for (const auto& tag : tags) bars.push_back({"synthetic", tag, lookup(tag, task, "mse")});
    bars.push_back({"synthetic", "intercept", baseline(task, "intercept_mse")});
    write_svg(plots / file, svg::bar_chart({title, "", "test MSE"}, bars));
  }
  {
    std::vector<svg::Bar> bars;
    for (const auto& [task, label] : {std::pair{"abx_dur_spk", "duration vs speaker"}, std::pair{"abx_onset", "onset"}})
      for (const auto& tag : tags) bars.push_back({label, tag, lookup(tag, task, "score")});
    write_svg(plots / "fig3_abx.svg", svg::bar_chart({"ABX scores", "task", "score"}, bars, 0.5));
  }
  {
    const CsvTable ed = read_csv(dir / "edit_distance.csv");
    const std::size_t t = ed.column("embedder_tag"), d = ed.column("edit_distance"), m = ed.column("mean");
    std::vector<svg::Series> series;
    for (const auto& row : ed.rows) {
      auto it = std::find_if(series.begin(), series.end(), [&](const svg::Series& s) { return s.name == row[t]; });
      if (it == series.end()) it = series.insert(series.end(), svg::Series{row[t], {}});
      it->points.emplace_back(to_double(row[d]), to_double(row[m]));
    }
    write_svg(plots / "fig5_edit_distance.svg",
              svg::line_chart({"Cosine distance by phone edit distance", "phone edit distance", "mean cosine distance"},
                              series));
  }
  {
    const CsvTable pos = read_csv(dir / "position.csv");
    const std::size_t t = pos.column("embedder_tag"), c = pos.column("position_class"), m = pos.column("mean"),
                      q1 = pos.column("q1"), q2 = pos.column("median"), q3 = pos.column("q3");
    std::vector<svg::Box> boxes;
    for (const auto& row : pos.rows)
      boxes.push_back({row[c], row[t], to_double(row[q1]), to_double(row[q2]), to_double(row[q3]), to_double(row[m])});
    write_svg(plots / "fig6_position.svg",
              svg::box_chart({"Distance by position of the differing phone", "position", "cosine distance"}, boxes));
  }
}

}  // namespace awe
