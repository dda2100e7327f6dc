#ifndef AWE_TESTS_TEST_UTIL_HPP_
#define AWE_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "awe/corpus.hpp"
#include "awe/mathcore/rng.hpp"

namespace awe::testing {

struct TokenSpec {
  std::string id;
  std::string type;
  std::vector<std::string> phones;
  std::string speaker;
  double duration_ms = 300.0;
  Split split = Split::kTest;
};

/// Corpus with registries inferred from the tokens and random 13-d frames
/// (one per 10 ms, at least one).
inline Corpus make_corpus(const std::vector<TokenSpec>& specs, std::uint64_t seed = 0) {
  Corpus c;
  c.sample_rate_hz = 16000;
  std::set<std::string> phones, speakers;
  for (const auto& s : specs) {
    phones.insert(s.phones.begin(), s.phones.end());
    speakers.insert(s.speaker);
  }
  for (const auto& p : phones) c.phones.push_back(Phone{p, {500.0, 1500.0, 2500.0}, 80.0, true});
  for (const auto& s : speakers) c.speakers.push_back(SpeakerProfile{s, 120.0, 1.0, 1.0, 0.01});
  Rng rng(seed);
  for (const auto& s : specs) {
    WordToken t;
    t.token_id = s.id;
    t.word_type = s.type;
    t.phones = s.phones;
    t.speaker_id = s.speaker;
    t.duration_ms = s.duration_ms;
    t.split = s.split;
    const auto rows = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(s.duration_ms / 10.0));
    t.frames.frames.resize(rows, 13);
    for (Eigen::Index i = 0; i < t.frames.frames.size(); ++i) t.frames.frames.data()[i] = static_cast<float>(rng.normal());
    t.frames.frame_hop_ms = 10.0;
    t.frames.source_duration_ms = s.duration_ms;
    c.tokens.push_back(std::move(t));
  }
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("awe_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace awe::testing

#endif  // AWE_TESTS_TEST_UTIL_HPP_
