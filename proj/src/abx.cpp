#include "awe/abx.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "awe/analysis.hpp"
#include "awe/format.hpp"
#include "awe/mathcore/rng.hpp"

namespace awe {

const char* to_string(AbxTask task) { return task == AbxTask::kDurationSpeaker ? "dur_spk" : "onset"; }

namespace {

double ratio(double a, double b) { return std::max(a, b) / std::min(a, b); }

std::vector<Triple> sample(std::vector<Triple> all, std::size_t max_triples, std::uint64_t seed, AbxTask task) {
  Rng rng(derive_seed(seed, to_string(task)));
  const auto chosen = rng.sample_indices(all.size(), max_triples);
  std::vector<Triple> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(std::move(all[i]));
  return out;
}

/// Test-split token indices per word type, types in lexical order.
std::map<std::string, std::vector<std::size_t>> test_tokens_by_type(const Corpus& corpus) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i : corpus.indices(Split::kTest)) out[corpus.tokens[i].word_type].push_back(i);
  return out;
}

}  // namespace

std::vector<Triple> build_duration_speaker_triples(const Corpus& corpus, std::size_t max_triples, std::uint64_t seed,
                                                   const DurationSpeakerConstraints& constraints) {
  if (!(constraints.max_ratio_ax >= 1.0) || !(constraints.min_ratio_bx >= 1.0))
    throw std::invalid_argument("build_duration_speaker_triples: ratios must be >= 1");
  // Survivors after each successive constraint, for the empty-set diagnostic.
  std::size_t types_with_three = 0, with_bx = 0, with_speaker = 0;
  std::vector<Triple> all;
  for (const auto& [type, members] : test_tokens_by_type(corpus)) {
    if (members.size() < 3) continue;
    ++types_with_three;
    for (std::size_t x : members) {
      const WordToken& tx = corpus.tokens[x];
      for (std::size_t b : members) {
        const WordToken& tb = corpus.tokens[b];
        if (b == x || tb.speaker_id != tx.speaker_id) continue;
        const double rbx = ratio(tb.duration_ms, tx.duration_ms);
        if (rbx < constraints.min_ratio_bx) continue;
        ++with_bx;
        for (std::size_t a : members) {
          const WordToken& ta = corpus.tokens[a];
          if (ta.speaker_id == tx.speaker_id) continue;
          ++with_speaker;
          const double rax = ratio(ta.duration_ms, tx.duration_ms);
          if (rax > constraints.max_ratio_ax) continue;
          Triple t;
          t.task = AbxTask::kDurationSpeaker;
          t.a_id = ta.token_id;
          t.b_id = tb.token_id;
          t.x_id = tx.token_id;
          t.speaker_a = ta.speaker_id;
          t.speaker_b = tb.speaker_id;
          t.speaker_x = tx.speaker_id;
          t.duration_ratio_ax = rax;
          t.duration_ratio_bx = rbx;
          all.push_back(std::move(t));
        }
      }
    }
  }
  if (all.empty()) {
    std::ostringstream msg;
    msg << "build_duration_speaker_triples: no valid triple; ";
    if (types_with_three == 0)
      msg << "no word type has 3 test-split tokens";
    else if (with_bx == 0)
      msg << "no same-speaker (B, X) pair differs in duration by a factor >= " << constraints.min_ratio_bx;
    else if (with_speaker == 0)
      msg << "no A from a speaker other than X's (" << with_bx << " (B, X) pairs)";
    else
      msg << "no cross-speaker (A, X) pair within duration factor " << constraints.max_ratio_ax << " ("
          << with_speaker << " candidates)";
    throw std::runtime_error(msg.str());
  }
  return sample(std::move(all), max_triples, seed, AbxTask::kDurationSpeaker);
}

std::vector<Triple> build_onset_triples(const Corpus& corpus, std::size_t max_triples, std::uint64_t seed) {
  const auto by_type = test_tokens_by_type(corpus);
  std::vector<const std::vector<std::size_t>*> members;
  std::vector<const std::vector<std::string>*> phones;
  for (const auto& [type, tokens] : by_type) {
    members.push_back(&tokens);
    phones.push_back(&corpus.tokens[tokens.front()].phones);
  }
  const std::size_t n = members.size();

  std::vector<Triple> all;
  for (std::size_t x = 0; x < n; ++x) {
    // Neighbours of X at one unambiguous edit, split by edit position.
    std::vector<std::pair<std::size_t, int>> initial_subs, later_edits;
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x || phone_edit_distance(*phones[x], *phones[y]) != 1) continue;
      const auto at = unique_edit_index(*phones[x], *phones[y]);
      if (!at) continue;
      if (*at == 0) {
        if (phones[x]->size() == phones[y]->size()) initial_subs.emplace_back(y, 0);
      } else {
        later_edits.emplace_back(y, static_cast<int>(*at));
      }
    }
    for (const auto& [a, ia] : initial_subs)
      for (const auto& [b, ib] : later_edits)
        for (std::size_t tx : *members[x])
          for (std::size_t ta : *members[a])
            for (std::size_t tb : *members[b]) {
              Triple t;
              t.task = AbxTask::kOnset;
              t.a_id = corpus.tokens[ta].token_id;
              t.b_id = corpus.tokens[tb].token_id;
              t.x_id = corpus.tokens[tx].token_id;
              t.speaker_a = corpus.tokens[ta].speaker_id;
              t.speaker_b = corpus.tokens[tb].speaker_id;
              t.speaker_x = corpus.tokens[tx].speaker_id;
              t.duration_ratio_ax = ratio(corpus.tokens[ta].duration_ms, corpus.tokens[tx].duration_ms);
              t.duration_ratio_bx = ratio(corpus.tokens[tb].duration_ms, corpus.tokens[tx].duration_ms);
              t.edit_index_ax = ia;
              t.edit_index_bx = ib;
              all.push_back(std::move(t));
            }
  }
  if (all.empty())
    throw std::runtime_error("build_onset_triples: no test-split word type has both an initial-phone substitution "
                             "neighbour and a later single-edit neighbour");
  return sample(std::move(all), max_triples, seed, AbxTask::kOnset);
}

double abx_score(const std::vector<Triple>& triples, const EmbeddingSet& embeddings) {
  if (triples.empty()) throw std::invalid_argument("abx_score: empty triple list");
  const auto rows = embeddings.index();
  const auto row = [&](const std::string& id) {
    const auto it = rows.find(id);
    if (it == rows.end()) throw std::invalid_argument("abx_score: no embedding for token " + id);
    return embeddings.values.row(it->second).transpose();
  };
  // Twice the score, counted exactly.
  std::size_t halves = 0;
  for (const Triple& t : triples) {
    const Eigen::VectorXd x = row(t.x_id);
    const double dxa = cosine_distance(x, row(t.a_id));
    const double dxb = cosine_distance(x, row(t.b_id));
    halves += dxa < dxb ? 2 : (dxa == dxb ? 1 : 0);
  }
  return static_cast<double>(halves) / (2.0 * static_cast<double>(triples.size()));
}

void write_triples_csv(std::ostream& out, const std::vector<Triple>& triples) {
  out << "task_tag,a_id,b_id,x_id,speaker_a,speaker_b,speaker_x,duration_ratio_ax,duration_ratio_bx,"
         "edit_index_ax,edit_index_bx\n";
  for (const Triple& t : triples)
    out << to_string(t.task) << ',' << t.a_id << ',' << t.b_id << ',' << t.x_id << ',' << t.speaker_a << ','
        << t.speaker_b << ',' << t.speaker_x << ',' << format_number(t.duration_ratio_ax) << ','
        << format_number(t.duration_ratio_bx) << ',' << t.edit_index_ax << ',' << t.edit_index_bx << '\n';
}

}  // namespace awe
