#ifndef AWE_ANALYSIS_HPP_
#define AWE_ANALYSIS_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "awe/corpus.hpp"
#include "awe/embedding.hpp"

namespace awe {

/// Levenshtein distance with unit insertion, deletion and substitution costs.
template <typename Sequence>
int phone_edit_distance(const Sequence& p, const Sequence& q) {
  const std::size_t n = p.size(), m = q.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (p[i - 1] == q[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[m];
}

/// 1 - cos(u, v). Throws std::domain_error for a zero vector.
double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v);

enum class EditPosition { kInitial, kMiddle, kFinal };

const char* to_string(EditPosition position);

/// Index (in the longer sequence) of the single edit separating p and q, if
/// they are at edit distance 1 and every optimal alignment puts the edit at
/// the same index. std::nullopt otherwise.
std::optional<std::size_t> unique_edit_index(const std::vector<std::string>& p, const std::vector<std::string>& q);

/// Position class of the single differing phone. Throws std::invalid_argument
/// when the pair is not at distance 1, the edit position is ambiguous, or the
/// longer word has a single phone.
EditPosition classify_edit_position(const std::vector<std::string>& p, const std::vector<std::string>& q);

struct EditDistanceBin {
  int edit_distance = 0;
  int pair_count = 0;
  double mean_cosine = 0.0;
  double std_cosine = 0.0;
};

struct AnalysisOptions {
  int max_edit_distance = 6;
  int max_pairs_per_bin = 2000;
  bool same_speaker_only = false;
};

struct SampledPair {
  std::size_t a = 0;  // corpus token indices
  std::size_t b = 0;
  int edit_distance = 0;
  double cosine = 0.0;
};

struct EditDistanceReport {
  std::vector<EditDistanceBin> bins;  // non-empty bins, ascending distance
  std::vector<std::string> warnings;  // one per omitted (empty) bin
  std::vector<SampledPair> pairs;     // every sampled pair, for audit
};

/// Test-split token pairs binned by phone edit distance (0..max), up to
/// max_pairs_per_bin sampled uniformly per bin; mean/std cosine per bin.
EditDistanceReport distance_vs_edit_distance(const Corpus& corpus, const EmbeddingSet& embeddings,
                                             const AnalysisOptions& options, std::uint64_t seed);

struct PositionStats {
  EditPosition position_class = EditPosition::kInitial;
  int count = 0;
  double mean = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

struct PositionReport {
  std::vector<PositionStats> classes;  // non-empty classes in initial, middle, final order
  std::vector<std::string> warnings;
  int rejected_ambiguous = 0;  // type pairs at distance 1 with no unique edit position
};

/// Cosine distances of test-split token pairs whose types differ by one
/// unambiguous edit, grouped by where that edit falls.
PositionReport distance_by_position(const Corpus& corpus, const EmbeddingSet& embeddings,
                                    const AnalysisOptions& options, std::uint64_t seed);

/// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

/// Average precision of same-type detection over all unordered token pairs
/// ranked by ascending distance. `distances` is the condensed upper triangle
/// (i < j, row-major) and `same` its labels. Ties are broken by pair order.
double average_precision(const std::vector<double>& distances, const std::vector<bool>& same);

/// Same-different average precision over all test-split tokens.
double same_different_ap(const Corpus& corpus, const EmbeddingSet& embeddings);

}  // namespace awe

#endif  // AWE_ANALYSIS_HPP_
