#ifndef AWE_ABX_HPP_
#define AWE_ABX_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "awe/corpus.hpp"
#include "awe/embedding.hpp"

namespace awe {

enum class AbxTask { kDurationSpeaker, kOnset };

/// "dur_spk" or "onset".
const char* to_string(AbxTask task);

struct Triple {
  AbxTask task = AbxTask::kDurationSpeaker;
  std::string a_id, b_id, x_id;
  // Metadata recorded at construction.
  std::string speaker_a, speaker_b, speaker_x;
  double duration_ratio_ax = 0.0;  // max/min of the two durations
  double duration_ratio_bx = 0.0;
  int edit_index_ax = -1;  // onset: index of the single edit in the longer word
  int edit_index_bx = -1;
};

struct DurationSpeakerConstraints {
  double max_ratio_ax = 1.1;
  double min_ratio_bx = 1.5;
};

/// Test-split (A, B, X) token triples of one word type: A and X from
/// different speakers with durations within max_ratio_ax, B and X from the
/// same speaker with durations at least min_ratio_bx apart. Up to
/// `max_triples` sampled uniformly from the full valid set. Throws
/// std::runtime_error naming the constraint that emptied the set.
std::vector<Triple> build_duration_speaker_triples(const Corpus& corpus, std::size_t max_triples, std::uint64_t seed,
                                                   const DurationSpeakerConstraints& constraints = {});

/// Test-split triples over three distinct word types: A is X with its first
/// phone substituted; B is X with a single edit at a later position. Edits
/// with ambiguous alignments are excluded.
std::vector<Triple> build_onset_triples(const Corpus& corpus, std::size_t max_triples, std::uint64_t seed);

/// Fraction of triples with d(X, A) < d(X, B) under cosine distance; ties
/// count one half. Throws on an empty list or a missing embedding.
double abx_score(const std::vector<Triple>& triples, const EmbeddingSet& embeddings);

/// Header plus one row per triple.
void write_triples_csv(std::ostream& out, const std::vector<Triple>& triples);

}  // namespace awe

#endif  // AWE_ABX_HPP_
