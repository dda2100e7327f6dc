#ifndef AWE_CORPUS_HPP_
#define AWE_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "awe/frontend.hpp"

namespace awe {

struct Phone {
  std::string symbol;
  std::array<double, 3> formants_hz{};
  double base_duration_ms = 80.0;
  bool is_voiced = true;

  void validate(int sample_rate_hz) const;
  bool operator==(const Phone&) const = default;
};

struct SpeakerProfile {
  std::string speaker_id;
  double f0_hz = 120.0;
  double formant_scale = 1.0;
  double rate_scale = 1.0;
  double noise_gain = 0.0;

  bool operator==(const SpeakerProfile&) const = default;
};

enum class Split { kTrain, kTest };

const char* to_string(Split split);
Split parse_split(const std::string& text);

struct WordToken {
  std::string token_id;
  std::string word_type;
  std::vector<std::string> phones;
  std::string speaker_id;
  double duration_ms = 0.0;
  FrameSequence frames;
  Split split = Split::kTrain;
};

bool operator==(const WordToken& a, const WordToken& b);

/// Immutable-by-convention collection of tokens plus the phone and speaker
/// registries they refer to.
struct Corpus {
  int sample_rate_hz = 16000;
  std::vector<Phone> phones;
  std::vector<SpeakerProfile> speakers;
  std::vector<WordToken> tokens;

  const Phone& phone(const std::string& symbol) const;
  const SpeakerProfile& speaker(const std::string& speaker_id) const;
  /// Map from token id to position in `tokens`.
  std::unordered_map<std::string, std::size_t> token_index() const;
  /// Indices of all tokens with the given split, in corpus order.
  std::vector<std::size_t> indices(Split split) const;

  /// Checks registry membership, token invariants and split disjointness.
  /// Throws std::invalid_argument naming the offending record.
  void validate() const;

  bool operator==(const Corpus& other) const;
};

struct SynthConfig {
  int n_phones = 20;
  int n_speakers = 12;
  int n_word_types = 600;
  int tokens_per_type = 8;
  int speakers_per_type = 4;  // distinct speakers realizing each type
  double phones_per_word_mean = 4.2;
  double phones_per_word_sd = 1.8;
  int sample_rate_hz = 16000;
  double test_speaker_fraction = 0.25;
  double minimal_pair_fraction = 0.3;  // share of types derived from another type by one substitution
  double rate_jitter_min = 0.7;
  double rate_jitter_max = 1.45;  // per-token jitter is log-uniform in [min, max]
  double crossfade_ms = 5.0;
  double token_gain_db = 6.0;        // per-token level drawn uniformly in [-x, +x] dB
  double formant_jitter_sd = 0.04;   // per-token relative perturbation of each formant
  MfccConfig mfcc;

  void validate() const;
};

Corpus synthesize_corpus(const SynthConfig& config, std::uint64_t seed);

/// Phone inventory and speakers drawn exactly as synthesize_corpus draws them.
std::vector<Phone> make_phone_inventory(int n_phones, int sample_rate_hz, std::uint64_t seed);
std::vector<SpeakerProfile> make_speakers(int n_speakers, std::uint64_t seed);

struct RenderedToken {
  Waveform waveform;
  double duration_ms = 0.0;
};

/// Token-level realization knobs beyond speaker and rate. The defaults
/// render the word exactly as its phones and speaker specify.
struct RenderOptions {
  double crossfade_ms = 5.0;
  double gain = 1.0;
  /// Multiplies formant k of phone i by formant_factors[i][k] when non-empty.
  std::vector<std::array<double, 3>> formant_factors;
};

/// Formant-synthesizes one word token. Each phone lasts
/// base_duration_ms * rate_scale * rate_jitter; neighbouring phones are
/// joined by a linear cross-fade centred on their boundary.
RenderedToken render_token(std::span<const Phone> phones, const SpeakerProfile& speaker, double rate_jitter,
                           int sample_rate_hz, std::uint64_t seed, const RenderOptions& options = {});

/// Assigns every token the split of its speaker; round(fraction * speakers)
/// speakers are held out for test.
Corpus split_by_speaker(Corpus corpus, double test_speaker_fraction, std::uint64_t seed);

struct TrainPair {
  std::string token_id_a;
  std::string token_id_b;
  bool operator==(const TrainPair&) const = default;
};

struct PairFilter {
  double min_duration_ms = 500.0;
  int min_phones = 5;
};

/// Same-type train-split token pairs passing the filter. Without replacement
/// the eligible set is cycled through in shuffled passes until n_pairs are
/// drawn; with replacement each pair is an independent uniform draw.
std::vector<TrainPair> build_train_pairs(const Corpus& corpus, std::size_t n_pairs, const PairFilter& filter,
                                         std::uint64_t seed, bool with_replacement = false);

/// Every eligible unordered pair (a < b in corpus order), grouped by type.
std::vector<TrainPair> eligible_pairs(const Corpus& corpus, const PairFilter& filter);

/// Writes `<dir>/manifest.json` plus one AWEF file per token under `<dir>/frames`.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_aligned_corpus(const std::filesystem::path& manifest_path, const MfccConfig& mfcc = {});

}  // namespace awe

#endif  // AWE_CORPUS_HPP_
