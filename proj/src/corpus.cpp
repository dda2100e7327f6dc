#include "awe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "awe/mathcore/rng.hpp"
#include "json.hpp"

namespace awe {

using nlohmann::json;

void Phone::validate(int sample_rate_hz) const {
  const double nyquist = sample_rate_hz / 2.0;
  if (symbol.empty()) throw std::invalid_argument("phone has an empty symbol");
  for (std::size_t i = 0; i < formants_hz.size(); ++i) {
    if (!(formants_hz[i] > 100.0 && formants_hz[i] < nyquist))
      throw std::invalid_argument("phone " + symbol + ": formant outside (100, Nyquist)");
    if (i > 0 && !(formants_hz[i] > formants_hz[i - 1]))
      throw std::invalid_argument("phone " + symbol + ": formants not strictly increasing");
  }
  if (!(base_duration_ms >= 40.0 && base_duration_ms <= 200.0))
    throw std::invalid_argument("phone " + symbol + ": base duration outside [40, 200] ms");
}

const char* to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw std::invalid_argument("split must be \"train\" or \"test\", got \"" + text + "\"");
}

bool operator==(const WordToken& a, const WordToken& b) {
  return a.token_id == b.token_id && a.word_type == b.word_type && a.phones == b.phones &&
         a.speaker_id == b.speaker_id && a.duration_ms == b.duration_ms && a.split == b.split &&
         a.frames.frame_hop_ms == b.frames.frame_hop_ms &&
         a.frames.source_duration_ms == b.frames.source_duration_ms &&
         a.frames.frames.rows() == b.frames.frames.rows() && a.frames.frames.cols() == b.frames.frames.cols() &&
         a.frames.frames == b.frames.frames;
}

const Phone& Corpus::phone(const std::string& symbol) const {
  for (const auto& p : phones)
    if (p.symbol == symbol) return p;
  throw std::out_of_range("unknown phone: " + symbol);
}

const SpeakerProfile& Corpus::speaker(const std::string& speaker_id) const {
  for (const auto& s : speakers)
    if (s.speaker_id == speaker_id) return s;
  throw std::out_of_range("unknown speaker: " + speaker_id);
}

std::unordered_map<std::string, std::size_t> Corpus::token_index() const {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) index.emplace(tokens[i].token_id, i);
  return index;
}

std::vector<std::size_t> Corpus::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i].split == split) out.push_back(i);
  return out;
}

void Corpus::validate() const {
  std::set<std::string> phone_symbols, speaker_ids, token_ids;
  for (const auto& p : phones) {
    p.validate(sample_rate_hz);
    if (!phone_symbols.insert(p.symbol).second) throw std::invalid_argument("duplicate phone: " + p.symbol);
  }
  for (const auto& s : speakers) {
    if (!speaker_ids.insert(s.speaker_id).second) throw std::invalid_argument("duplicate speaker: " + s.speaker_id);
    for (const auto& p : phones)
      if (s.formant_scale * p.formants_hz[2] >= sample_rate_hz / 2.0)
        throw std::invalid_argument("speaker " + s.speaker_id + ": scaled formants of phone " + p.symbol +
                                    " exceed Nyquist");
  }
  std::map<std::string, Split> speaker_split;
  for (const auto& t : tokens) {
    const std::string where = "token " + t.token_id + ": ";
    if (!token_ids.insert(t.token_id).second) throw std::invalid_argument("duplicate token id: " + t.token_id);
    if (t.phones.empty()) throw std::invalid_argument(where + "empty phone sequence");
    for (const auto& sym : t.phones)
      if (!phone_symbols.count(sym)) throw std::invalid_argument(where + "unknown phone " + sym);
    if (!speaker_ids.count(t.speaker_id)) throw std::invalid_argument(where + "unknown speaker " + t.speaker_id);
    if (!(t.duration_ms > 0)) throw std::invalid_argument(where + "duration must be positive");
    if (t.duration_ms != t.frames.source_duration_ms)
      throw std::invalid_argument(where + "duration does not match frames.source_duration_ms");
    if (t.frames.frames.rows() < 1) throw std::invalid_argument(where + "no frames");
    if (!t.frames.frames.allFinite()) throw std::invalid_argument(where + "non-finite frame values");
    if (!tokens.empty() && t.frames.frames.cols() != tokens.front().frames.frames.cols())
      throw std::invalid_argument(where + "frame dimension differs from the rest of the corpus");
    auto [it, inserted] = speaker_split.emplace(t.speaker_id, t.split);
    if (!inserted && it->second != t.split)
      throw std::invalid_argument(where + "speaker " + t.speaker_id + " appears in both train and test splits");
  }
}

bool Corpus::operator==(const Corpus& other) const {
  return sample_rate_hz == other.sample_rate_hz && phones == other.phones && speakers == other.speakers &&
         tokens == other.tokens;
}

void SynthConfig::validate() const {
  if (n_phones < 2 || n_speakers < 1 || n_word_types < 1 || tokens_per_type < 1 || speakers_per_type < 1)
    throw std::invalid_argument("synth: counts must be positive (and at least 2 phones)");
  if (speakers_per_type > n_speakers) throw std::invalid_argument("synth: speakers_per_type exceeds n_speakers");
  if (!(phones_per_word_mean >= 1.0) || !(phones_per_word_sd >= 0.0))
    throw std::invalid_argument("synth: phones-per-word mean must be >= 1 and SD >= 0");
  if (!(rate_jitter_min > 0) || rate_jitter_max < rate_jitter_min)
    throw std::invalid_argument("synth: rate jitter range must be positive and ordered");
  if (!(minimal_pair_fraction >= 0 && minimal_pair_fraction < 1))
    throw std::invalid_argument("synth: minimal_pair_fraction must be in [0, 1)");
  if (!(crossfade_ms >= 0)) throw std::invalid_argument("synth: crossfade_ms must be >= 0");
  if (!(token_gain_db >= 0) || !(formant_jitter_sd >= 0))
    throw std::invalid_argument("synth: token_gain_db and formant_jitter_sd must be >= 0");
  mfcc.validate(sample_rate_hz);
}

namespace {

const std::vector<std::string> kVowels = {"a", "i", "u", "e", "o", "E", "O", "@", "I", "U"};
const std::vector<std::string> kVoicedConsonants = {"m", "n", "l", "r", "w", "j", "N", "b", "d", "g"};
const std::vector<std::string> kUnvoicedConsonants = {"s", "f", "S", "h", "x", "p", "t", "k", "T", "c"};

std::string pick_symbol(const std::vector<std::string>& table, int i) {
  if (static_cast<std::size_t>(i) < table.size()) return table[static_cast<std::size_t>(i)];
  return table[static_cast<std::size_t>(i) % table.size()] + std::to_string(i / static_cast<int>(table.size()));
}

}  // namespace

std::vector<Phone> make_phone_inventory(int n_phones, int sample_rate_hz, std::uint64_t seed) {
  Rng rng(seed);
  // Formant ranges are laid out for 16 kHz audio and compressed for lower rates.
  const double squeeze = std::min(1.0, sample_rate_hz / 16000.0);
  const int n_vowels = std::max(1, static_cast<int>(std::lround(0.35 * n_phones)));
  const int n_voiced = std::max(0, std::min(n_phones - n_vowels, static_cast<int>(std::lround(0.3 * n_phones))));
  const int n_unvoiced = n_phones - n_vowels - n_voiced;

  std::vector<Phone> phones;
  auto add = [&](const std::string& symbol, double f1_lo, double f1_hi, double gap, double f3_cap, double dur_lo,
                 double dur_hi, bool voiced) {
    Phone p;
    p.symbol = symbol;
    p.formants_hz[0] = squeeze * rng.uniform(f1_lo, f1_hi);
    p.formants_hz[1] = p.formants_hz[0] + squeeze * rng.uniform(gap, 2.5 * gap);
    p.formants_hz[2] = std::min(squeeze * f3_cap, p.formants_hz[1] + squeeze * rng.uniform(gap, 2.0 * gap));
    p.base_duration_ms = rng.uniform(dur_lo, dur_hi);
    p.is_voiced = voiced;
    phones.push_back(p);
  };
  for (int i = 0; i < n_vowels; ++i) add(pick_symbol(kVowels, i), 250, 850, 400, 3500, 90, 180, true);
  for (int i = 0; i < n_voiced; ++i) add(pick_symbol(kVoicedConsonants, i), 200, 500, 500, 3400, 50, 100, true);
  for (int i = 0; i < n_unvoiced; ++i)
    add(pick_symbol(kUnvoicedConsonants, i), 1200, 2500, 900, 6500, 60, 120, false);
  return phones;
}

std::vector<SpeakerProfile> make_speakers(int n_speakers, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SpeakerProfile> speakers;
  for (int i = 0; i < n_speakers; ++i) {
    SpeakerProfile s;
    std::ostringstream id;
    id << "spk" << (i < 10 ? "0" : "") << i;
    s.speaker_id = id.str();
    s.f0_hz = rng.uniform(90.0, 240.0);
    s.formant_scale = rng.uniform(0.85, 1.15);
    s.rate_scale = rng.uniform(0.8, 1.25);
    s.noise_gain = rng.uniform(0.002, 0.02);
    speakers.push_back(s);
  }
  return speakers;
}

RenderedToken render_token(std::span<const Phone> phones, const SpeakerProfile& speaker, double rate_jitter,
                           int sample_rate_hz, std::uint64_t seed, const RenderOptions& options) {
  if (phones.empty()) throw std::invalid_argument("render_token: empty phone sequence");
  if (!options.formant_factors.empty() && options.formant_factors.size() != phones.size())
    throw std::invalid_argument("render_token: need one formant factor triple per phone");
  const double crossfade_ms = options.crossfade_ms;
  Rng rng(seed);
  const double sr = sample_rate_hz;

  std::vector<long> bounds{0};
  double total_ms = 0.0;
  for (const auto& p : phones) {
    total_ms += p.base_duration_ms * speaker.rate_scale * rate_jitter;
    bounds.push_back(std::lround(total_ms * sr / 1000.0));
  }
  const long n = bounds.back();
  const long half_fade = std::lround(crossfade_ms * sr / 1000.0 / 2.0);

  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  constexpr std::array<double, 3> kFormantGain = {1.0, 0.6, 0.3};
  for (std::size_t i = 0; i < phones.size(); ++i) {
    const Phone& p = phones[i];
    const long seg_start = bounds[i], seg_end = bounds[i + 1];
    const long lo = i == 0 ? 0 : std::max(0L, seg_start - half_fade);
    const long hi = i + 1 == phones.size() ? n : std::min(n, seg_end + half_fade);
    std::array<double, 3> freq{};
    for (int k = 0; k < 3; ++k) {
      freq[k] = p.formants_hz[k] * speaker.formant_scale;
      if (!options.formant_factors.empty()) freq[k] *= options.formant_factors[i][static_cast<std::size_t>(k)];
      freq[k] = std::min(freq[k], 0.98 * sr / 2.0);
    }

    for (long s = lo; s < hi; ++s) {
      double w = 1.0;
      if (i > 0 && half_fade > 0 && s < seg_start + half_fade)
        w = std::min(w, (s - (seg_start - half_fade) + 0.5) / (2.0 * half_fade));
      if (i + 1 < phones.size() && half_fade > 0 && s >= seg_end - half_fade)
        w = std::min(w, 1.0 - (s - (seg_end - half_fade) + 0.5) / (2.0 * half_fade));
      const double t = s / sr;
      double tone = 0.0;
      for (int k = 0; k < 3; ++k) tone += kFormantGain[k] * std::sin(kTwoPi * freq[k] * t);
      double v;
      if (p.is_voiced)
        v = 0.25 * 0.5 * (1.0 + std::cos(kTwoPi * speaker.f0_hz * t)) * tone;
      else
        v = 0.08 * rng.normal() * tone;
      out[static_cast<std::size_t>(s)] += options.gain * w * v;
    }
  }
  if (speaker.noise_gain > 0)
    for (auto& v : out) v += speaker.noise_gain * rng.normal();
  for (auto& v : out) v = std::clamp(v, -1.0, 1.0);

  RenderedToken token;
  token.waveform.samples = std::move(out);
  token.waveform.sample_rate_hz = sample_rate_hz;
  token.duration_ms = total_ms;
  return token;
}

Corpus split_by_speaker(Corpus corpus, double test_speaker_fraction, std::uint64_t seed) {
  if (!(test_speaker_fraction > 0.0 && test_speaker_fraction < 1.0))
    throw std::invalid_argument("split_by_speaker: test fraction must be in (0, 1)");
  const std::size_t n = corpus.speakers.size();
  if (n < 2) throw std::invalid_argument("split_by_speaker: need at least 2 speakers to hold one out");
  const auto n_test = static_cast<std::size_t>(std::llround(test_speaker_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test == n)
    throw std::invalid_argument("split_by_speaker: fraction " + std::to_string(test_speaker_fraction) + " of " +
                                std::to_string(n) + " speakers leaves an empty split");
  std::vector<std::string> ids;
  for (const auto& s : corpus.speakers) ids.push_back(s.speaker_id);
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(ids));
  const std::set<std::string> test_ids(ids.begin(), ids.begin() + static_cast<long>(n_test));
  for (auto& t : corpus.tokens) t.split = test_ids.count(t.speaker_id) ? Split::kTest : Split::kTrain;
  return corpus;
}

Corpus synthesize_corpus(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Corpus corpus;
  corpus.sample_rate_hz = config.sample_rate_hz;
  corpus.phones = make_phone_inventory(config.n_phones, config.sample_rate_hz, derive_seed(seed, "phones"));
  corpus.speakers = make_speakers(config.n_speakers, derive_seed(seed, "speakers"));
  for (const auto& p : corpus.phones) p.validate(config.sample_rate_hz);
  if (config.test_speaker_fraction > 0 && config.n_speakers < 2)
    throw std::invalid_argument("synth: a held-out test split needs at least 2 speakers");

  // Word types: fixed phone sequences sampled once.
  Rng type_rng(derive_seed(seed, "types"));
  std::vector<std::vector<std::size_t>> types;
  std::set<std::vector<std::size_t>> seen;
  const std::size_t n_inventory = corpus.phones.size();
  auto base_ms = [&](const std::vector<std::size_t>& seq) {
    double ms = 0;
    for (auto i : seq) ms += corpus.phones[i].base_duration_ms;
    return ms;
  };
  const double min_base_ms = 60.0;  // keeps the fastest realization longer than one analysis frame
  int attempts = 0;
  while (types.size() < static_cast<std::size_t>(config.n_word_types)) {
    if (++attempts > 1000 * config.n_word_types)
      throw std::invalid_argument("synth: cannot draw enough distinct word types from the phone inventory");
    std::vector<std::size_t> seq;
    if (!types.empty() && type_rng.uniform() < config.minimal_pair_fraction) {
      seq = types[type_rng.uniform_index(types.size())];
      const std::size_t pos = type_rng.uniform_index(seq.size());
      const std::size_t shift = 1 + type_rng.uniform_index(n_inventory - 1);
      seq[pos] = (seq[pos] + shift) % n_inventory;
    } else {
      const long len = std::max(1L, std::lround(type_rng.normal(config.phones_per_word_mean, config.phones_per_word_sd)));
      for (long i = 0; i < len; ++i) seq.push_back(type_rng.uniform_index(n_inventory));
    }
    if (base_ms(seq) < min_base_ms || !seen.insert(seq).second) continue;
    types.push_back(std::move(seq));
  }

  // Token realizations.
  const std::uint64_t token_seed = derive_seed(seed, "tokens");
  Rng assign_rng(derive_seed(seed, "assign"));
  std::vector<std::size_t> speaker_order(corpus.speakers.size());
  std::size_t token_counter = 0;
  for (std::size_t ti = 0; ti < types.size(); ++ti) {
    for (std::size_t i = 0; i < speaker_order.size(); ++i) speaker_order[i] = i;
    assign_rng.shuffle(std::span<std::size_t>(speaker_order));

    std::ostringstream type_name;
    type_name << "w" << std::string(ti < 10 ? "000" : ti < 100 ? "00" : ti < 1000 ? "0" : "") << ti;
    std::vector<Phone> seq_phones;
    std::vector<std::string> symbols;
    for (auto pi : types[ti]) {
      seq_phones.push_back(corpus.phones[pi]);
      symbols.push_back(corpus.phones[pi].symbol);
    }
    for (int k = 0; k < config.tokens_per_type; ++k) {
      const SpeakerProfile& spk = corpus.speakers[speaker_order[static_cast<std::size_t>(k % config.speakers_per_type)]];
      const std::uint64_t tseed = derive_seed(token_seed, token_counter++);
      Rng jitter_rng(derive_seed(tseed, "jitter"));
      const double jitter = std::exp(jitter_rng.uniform(std::log(config.rate_jitter_min), std::log(config.rate_jitter_max)));
      RenderOptions opts;
      opts.crossfade_ms = config.crossfade_ms;
      opts.gain = std::pow(10.0, jitter_rng.uniform(-config.token_gain_db, config.token_gain_db) / 20.0);
      for (std::size_t pi = 0; pi < seq_phones.size(); ++pi) {
        std::array<double, 3> f{};
        for (auto& x : f) x = std::exp(config.formant_jitter_sd * jitter_rng.normal());
        opts.formant_factors.push_back(f);
      }
      RenderedToken r = render_token(seq_phones, spk, jitter, config.sample_rate_hz, tseed, opts);

      WordToken tok;
      tok.token_id = type_name.str() + "_" + spk.speaker_id + "_" + std::to_string(k);
      tok.word_type = type_name.str();
      tok.phones = symbols;
      tok.speaker_id = spk.speaker_id;
      tok.duration_ms = r.duration_ms;
      tok.frames = compute_mfcc(r.waveform, config.mfcc);
      tok.frames.source_duration_ms = r.duration_ms;
      corpus.tokens.push_back(std::move(tok));
    }
  }

  if (config.test_speaker_fraction > 0)
    corpus = split_by_speaker(std::move(corpus), config.test_speaker_fraction, derive_seed(seed, "split"));
  corpus.validate();
  return corpus;
}

namespace {

bool passes(const WordToken& t, const PairFilter& f) {
  return t.split == Split::kTrain && t.duration_ms >= f.min_duration_ms &&
         static_cast<int>(t.phones.size()) >= f.min_phones;
}

}  // namespace

std::vector<TrainPair> eligible_pairs(const Corpus& corpus, const PairFilter& filter) {
  std::map<std::string, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < corpus.tokens.size(); ++i)
    if (passes(corpus.tokens[i], filter)) by_type[corpus.tokens[i].word_type].push_back(i);
  std::vector<TrainPair> pairs;
  for (const auto& [type, idx] : by_type)
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = a + 1; b < idx.size(); ++b)
        pairs.push_back({corpus.tokens[idx[a]].token_id, corpus.tokens[idx[b]].token_id});
  return pairs;
}

std::vector<TrainPair> build_train_pairs(const Corpus& corpus, std::size_t n_pairs, const PairFilter& filter,
                                         std::uint64_t seed, bool with_replacement) {
  std::vector<TrainPair> pool = eligible_pairs(corpus, filter);
  if (pool.empty()) {
    std::size_t n_train = 0, n_dur = 0, n_phones = 0, n_both = 0;
    std::map<std::string, int> per_type;
    for (const auto& t : corpus.tokens) {
      if (t.split != Split::kTrain) continue;
      ++n_train;
      const bool d = t.duration_ms >= filter.min_duration_ms;
      const bool p = static_cast<int>(t.phones.size()) >= filter.min_phones;
      n_dur += d;
      n_phones += p;
      if (d && p) {
        ++n_both;
        ++per_type[t.word_type];
      }
    }
    std::ostringstream msg;
    msg << "build_train_pairs: zero eligible pairs (" << n_train << " train tokens; " << n_dur
        << " with duration >= " << filter.min_duration_ms << " ms; " << n_phones << " with >= " << filter.min_phones
        << " phones; " << n_both << " pass both, spread over " << per_type.size()
        << " types, none with two eligible tokens)";
    throw std::runtime_error(msg.str());
  }

  Rng rng(seed);
  std::vector<TrainPair> out;
  out.reserve(n_pairs);
  if (with_replacement) {
    while (out.size() < n_pairs) out.push_back(pool[rng.uniform_index(pool.size())]);
    return out;
  }
  while (out.size() < n_pairs) {
    rng.shuffle(std::span<TrainPair>(pool));
    for (std::size_t i = 0; i < pool.size() && out.size() < n_pairs; ++i) out.push_back(pool[i]);
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  json doc;
  doc["sample_rate_hz"] = corpus.sample_rate_hz;
  doc["phones"] = json::array();
  for (const auto& p : corpus.phones)
    doc["phones"].push_back({{"symbol", p.symbol},
                             {"formants_hz", p.formants_hz},
                             {"base_duration_ms", p.base_duration_ms},
                             {"is_voiced", p.is_voiced}});
  doc["speakers"] = json::array();
  for (const auto& s : corpus.speakers)
    doc["speakers"].push_back({{"speaker_id", s.speaker_id},
                               {"f0_hz", s.f0_hz},
                               {"formant_scale", s.formant_scale},
                               {"rate_scale", s.rate_scale},
                               {"noise_gain", s.noise_gain}});
  doc["tokens"] = json::array();
  for (const auto& t : corpus.tokens) {
    const std::string rel = "frames/" + t.token_id + ".awef";
    write_frames(dir / rel, t.frames.frames);
    doc["tokens"].push_back({{"token_id", t.token_id},
                             {"word_type", t.word_type},
                             {"phones", t.phones},
                             {"speaker_id", t.speaker_id},
                             {"frames_path", rel},
                             {"duration_ms", t.duration_ms},
                             {"frame_hop_ms", t.frames.frame_hop_ms},
                             {"split", to_string(t.split)}});
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
  os << doc.dump(1) << "\n";
}

namespace {

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw std::invalid_argument(where + ": missing field \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(where + ": field \"" + key + "\" has the wrong type");
  }
}

}  // namespace

Corpus load_aligned_corpus(const std::filesystem::path& manifest_path, const MfccConfig& mfcc) {
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }
  const auto base = manifest_path.parent_path();
  const std::string where = "manifest";

  Corpus corpus;
  corpus.sample_rate_hz = require<int>(doc, "sample_rate_hz", where);
  for (const auto& p : require<json>(doc, "phones", where)) {
    Phone ph;
    ph.symbol = require<std::string>(p, "symbol", "phone record");
    const std::string w = "phone " + ph.symbol;
    ph.formants_hz = require<std::array<double, 3>>(p, "formants_hz", w);
    ph.base_duration_ms = require<double>(p, "base_duration_ms", w);
    ph.is_voiced = require<bool>(p, "is_voiced", w);
    corpus.phones.push_back(ph);
  }
  for (const auto& s : require<json>(doc, "speakers", where)) {
    SpeakerProfile sp;
    sp.speaker_id = require<std::string>(s, "speaker_id", "speaker record");
    const std::string w = "speaker " + sp.speaker_id;
    sp.f0_hz = require<double>(s, "f0_hz", w);
    sp.formant_scale = require<double>(s, "formant_scale", w);
    sp.rate_scale = require<double>(s, "rate_scale", w);
    sp.noise_gain = require<double>(s, "noise_gain", w);
    corpus.speakers.push_back(sp);
  }

  std::set<std::string> speaker_ids, phone_symbols;
  for (const auto& s : corpus.speakers) speaker_ids.insert(s.speaker_id);
  for (const auto& p : corpus.phones) phone_symbols.insert(p.symbol);

  for (const auto& rec : require<json>(doc, "tokens", where)) {
    WordToken t;
    t.token_id = require<std::string>(rec, "token_id", "token record");
    const std::string w = "token " + t.token_id;
    t.word_type = require<std::string>(rec, "word_type", w);
    t.phones = require<std::vector<std::string>>(rec, "phones", w);
    t.speaker_id = require<std::string>(rec, "speaker_id", w);
    t.split = parse_split(require<std::string>(rec, "split", w));
    if (!speaker_ids.count(t.speaker_id)) throw std::invalid_argument(w + ": unknown speaker " + t.speaker_id);
    for (const auto& sym : t.phones)
      if (!phone_symbols.count(sym)) throw std::invalid_argument(w + ": unknown phone " + sym);

    if (rec.contains("audio_path")) {
      const auto path = base / require<std::string>(rec, "audio_path", w);
      if (!std::filesystem::exists(path)) throw std::invalid_argument(w + ": missing audio file " + path.string());
      const Waveform wav = read_wav(path);
      t.frames = compute_mfcc(wav, mfcc);
      t.duration_ms = rec.contains("duration_ms") ? require<double>(rec, "duration_ms", w) : wav.duration_ms();
    } else if (rec.contains("frames_path")) {
      const auto path = base / require<std::string>(rec, "frames_path", w);
      if (!std::filesystem::exists(path)) throw std::invalid_argument(w + ": missing frames file " + path.string());
      t.frames.frames = read_frames(path);
      t.frames.frame_hop_ms = rec.contains("frame_hop_ms") ? require<double>(rec, "frame_hop_ms", w) : mfcc.frame_hop_ms;
      t.duration_ms = rec.contains("duration_ms")
                          ? require<double>(rec, "duration_ms", w)
                          : mfcc.frame_length_ms + (t.frames.frames.rows() - 1) * t.frames.frame_hop_ms;
    } else {
      throw std::invalid_argument(w + ": needs \"audio_path\" or \"frames_path\"");
    }
    t.frames.source_duration_ms = t.duration_ms;
    corpus.tokens.push_back(std::move(t));
  }
  corpus.validate();
  return corpus;
}

}  // namespace awe
