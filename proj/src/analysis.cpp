#include "awe/analysis.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "awe/mathcore/rng.hpp"

namespace awe {

double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine_distance: dimension mismatch");
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw std::domain_error("cosine_distance: zero vector");
  const double c = u.dot(v) / (nu * nv);
  return 1.0 - std::clamp(c, -1.0, 1.0);
}

const char* to_string(EditPosition position) {
  switch (position) {
    case EditPosition::kInitial:
      return "initial";
    case EditPosition::kMiddle:
      return "middle";
    case EditPosition::kFinal:
      return "final";
  }
  return "?";
}

std::optional<std::size_t> unique_edit_index(const std::vector<std::string>& p, const std::vector<std::string>& q) {
  if (p.size() == q.size()) {
    std::optional<std::size_t> at;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] == q[i]) continue;
      if (at) return std::nullopt;
      at = i;
    }
    return at;
  }
  const auto& longer = p.size() > q.size() ? p : q;
  const auto& shorter = p.size() > q.size() ? q : p;
  if (longer.size() != shorter.size() + 1) return std::nullopt;
  // Deleting longer[i] yields shorter iff the prefixes agree before i and
  // the suffixes agree after it.
  std::size_t prefix = 0;
  while (prefix < shorter.size() && longer[prefix] == shorter[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < shorter.size() && longer[longer.size() - 1 - suffix] == shorter[shorter.size() - 1 - suffix]) ++suffix;
  // Valid deletion indices are [longer.size() - 1 - suffix, prefix].
  const std::size_t lo = longer.size() - 1 - std::min(suffix, longer.size() - 1);
  const std::size_t hi = prefix;
  if (lo > hi) return std::nullopt;
  if (lo != hi) return std::nullopt;  // a run of identical phones: several optimal alignments
  return lo;
}

EditPosition classify_edit_position(const std::vector<std::string>& p, const std::vector<std::string>& q) {
  if (phone_edit_distance(p, q) != 1) throw std::invalid_argument("classify_edit_position: words are not at edit distance 1");
  const auto idx = unique_edit_index(p, q);
  if (!idx) throw std::invalid_argument("classify_edit_position: ambiguous edit position");
  const std::size_t len = std::max(p.size(), q.size());
  if (len < 2) throw std::invalid_argument("classify_edit_position: single-phone words have no position contrast");
  if (*idx == 0) return EditPosition::kInitial;
  if (*idx == len - 1) return EditPosition::kFinal;
  return EditPosition::kMiddle;
}

namespace {

/// Test-split tokens grouped with dense type ids.
struct TestView {
  std::vector<std::size_t> tokens;    // corpus indices
  std::vector<std::size_t> type_of;   // per entry of `tokens`
  std::vector<std::size_t> type_rep;  // a representative corpus index per type
  std::vector<Eigen::Index> rows;     // embedding row per entry of `tokens`
};

TestView test_view(const Corpus& corpus, const EmbeddingSet& embeddings) {
  TestView v;
  std::map<std::string, std::size_t> type_ids;
  const auto rows = embeddings.index();
  for (auto i : corpus.indices(Split::kTest)) {
    const auto& tok = corpus.tokens[i];
    const auto it = rows.find(tok.token_id);
    if (it == rows.end()) throw std::out_of_range("no " + embeddings.embedder_tag + " embedding for test token " + tok.token_id);
    auto [tit, inserted] = type_ids.emplace(tok.word_type, v.type_rep.size());
    if (inserted) v.type_rep.push_back(i);
    v.tokens.push_back(i);
    v.type_of.push_back(tit->second);
    v.rows.push_back(it->second);
  }
  return v;
}

template <typename T>
std::vector<T> sample_capped(std::vector<T> items, int cap, Rng& rng) {
  if (cap >= 0 && items.size() > static_cast<std::size_t>(cap)) {
    // Partial Fisher-Yates: the first `cap` slots become a uniform sample.
    for (std::size_t i = 0; i < static_cast<std::size_t>(cap); ++i) {
      const std::size_t j = i + rng.uniform_index(items.size() - i);
      std::swap(items[i], items[j]);
    }
    items.resize(static_cast<std::size_t>(cap));
    std::sort(items.begin(), items.end());
  }
  return items;
}

double row_cosine(const EmbeddingSet& e, Eigen::Index a, Eigen::Index b) {
  return cosine_distance(e.values.row(a).transpose(), e.values.row(b).transpose());
}

}  // namespace

EditDistanceReport distance_vs_edit_distance(const Corpus& corpus, const EmbeddingSet& embeddings,
                                             const AnalysisOptions& options, std::uint64_t seed) {
  const TestView v = test_view(corpus, embeddings);
  const std::size_t n_types = v.type_rep.size();
  std::vector<int> type_dist(n_types * n_types, 0);
  for (std::size_t a = 0; a < n_types; ++a)
    for (std::size_t b = a + 1; b < n_types; ++b) {
      const int d = phone_edit_distance(corpus.tokens[v.type_rep[a]].phones, corpus.tokens[v.type_rep[b]].phones);
      type_dist[a * n_types + b] = type_dist[b * n_types + a] = d;
    }

  const int n_bins = options.max_edit_distance + 1;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> members(static_cast<std::size_t>(n_bins));
  for (std::size_t i = 0; i < v.tokens.size(); ++i)
    for (std::size_t j = i + 1; j < v.tokens.size(); ++j) {
      if (options.same_speaker_only &&
          corpus.tokens[v.tokens[i]].speaker_id != corpus.tokens[v.tokens[j]].speaker_id)
        continue;
      const int d = type_dist[v.type_of[i] * n_types + v.type_of[j]];
      if (d < n_bins) members[static_cast<std::size_t>(d)].emplace_back(i, j);
    }

  EditDistanceReport report;
  Rng rng(seed);
  for (int d = 0; d < n_bins; ++d) {
    const auto chosen = sample_capped(std::move(members[static_cast<std::size_t>(d)]), options.max_pairs_per_bin, rng);
    if (chosen.empty()) {
      report.warnings.push_back("edit distance " + std::to_string(d) + ": no pairs, bin omitted");
      continue;
    }
    std::vector<double> dists;
    for (const auto& [i, j] : chosen) {
      const double c = row_cosine(embeddings, v.rows[i], v.rows[j]);
      dists.push_back(c);
      report.pairs.push_back({v.tokens[i], v.tokens[j], d, c});
    }
    const double mean = std::accumulate(dists.begin(), dists.end(), 0.0) / static_cast<double>(dists.size());
    double var = 0;
    for (double x : dists) var += (x - mean) * (x - mean);
    var = dists.size() > 1 ? var / static_cast<double>(dists.size() - 1) : 0.0;
    report.bins.push_back({d, static_cast<int>(dists.size()), mean, std::sqrt(var)});
  }
  return report;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PositionReport distance_by_position(const Corpus& corpus, const EmbeddingSet& embeddings,
                                    const AnalysisOptions& options, std::uint64_t seed) {
  const TestView v = test_view(corpus, embeddings);
  const std::size_t n_types = v.type_rep.size();
  PositionReport report;
  // -1: not a usable distance-1 pair, otherwise the EditPosition value.
  std::vector<int> type_class(n_types * n_types, -1);
  for (std::size_t a = 0; a < n_types; ++a)
    for (std::size_t b = a + 1; b < n_types; ++b) {
      const auto& p = corpus.tokens[v.type_rep[a]].phones;
      const auto& q = corpus.tokens[v.type_rep[b]].phones;
      if (phone_edit_distance(p, q) != 1 || std::max(p.size(), q.size()) < 2) continue;
      if (!unique_edit_index(p, q)) {
        ++report.rejected_ambiguous;
        continue;
      }
      type_class[a * n_types + b] = type_class[b * n_types + a] = static_cast<int>(classify_edit_position(p, q));
    }

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> members(3);
  for (std::size_t i = 0; i < v.tokens.size(); ++i)
    for (std::size_t j = i + 1; j < v.tokens.size(); ++j) {
      const int c = type_class[v.type_of[i] * n_types + v.type_of[j]];
      if (c < 0) continue;
      if (options.same_speaker_only &&
          corpus.tokens[v.tokens[i]].speaker_id != corpus.tokens[v.tokens[j]].speaker_id)
        continue;
      members[static_cast<std::size_t>(c)].emplace_back(i, j);
    }

  Rng rng(seed);
  for (int c = 0; c < 3; ++c) {
    const auto position = static_cast<EditPosition>(c);
    const auto chosen = sample_capped(std::move(members[static_cast<std::size_t>(c)]), options.max_pairs_per_bin, rng);
    if (chosen.empty()) {
      report.warnings.push_back(std::string("position ") + to_string(position) + ": no pairs, class omitted");
      continue;
    }
    std::vector<double> d;
    for (const auto& [i, j] : chosen) d.push_back(row_cosine(embeddings, v.rows[i], v.rows[j]));
    std::sort(d.begin(), d.end());
    PositionStats s;
    s.position_class = position;
    s.count = static_cast<int>(d.size());
    s.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    s.q1 = quantile_sorted(d, 0.25);
    s.median = quantile_sorted(d, 0.5);
    s.q3 = quantile_sorted(d, 0.75);
    report.classes.push_back(s);
  }
  return report;
}

double average_precision(const std::vector<double>& distances, const std::vector<bool>& same) {
  if (distances.size() != same.size()) throw std::invalid_argument("average_precision: size mismatch");
  std::vector<std::size_t> order(distances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return distances[a] < distances[b]; });
  double hits = 0, sum = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!same[order[k]]) continue;
    hits += 1;
    sum += hits / static_cast<double>(k + 1);
  }
  if (hits == 0) throw std::invalid_argument("average_precision: no same-type pairs");
  return sum / hits;
}

double same_different_ap(const Corpus& corpus, const EmbeddingSet& embeddings) {
  const TestView v = test_view(corpus, embeddings);
  const std::size_t n = v.tokens.size();
  std::vector<double> dist;
  std::vector<bool> same;
  dist.reserve(n * (n - 1) / 2);
  same.reserve(n * (n - 1) / 2);
  // Row-normalize once; cosine distance is then 1 - dot.
  Eigen::MatrixXd unit(n, embeddings.dim());
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = embeddings.values.row(v.rows[i]);
    const double norm = row.norm();
    if (norm == 0.0) throw std::domain_error("same_different_ap: zero embedding for " + corpus.tokens[v.tokens[i]].token_id);
    unit.row(static_cast<Eigen::Index>(i)) = row / norm;
  }
  const Eigen::MatrixXd gram = unit * unit.transpose();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      dist.push_back(1.0 - std::clamp(gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), -1.0, 1.0));
      same.push_back(v.type_of[i] == v.type_of[j]);
    }
  bool any = false;
  for (bool s : same) any = any || s;
  if (!any) throw std::invalid_argument("same_different_ap: no two test tokens share a word type");
  return average_precision(dist, same);
}

}  // namespace awe
