#include "awe/embedding.hpp"

#include <fstream>
#include <limits>
#include <stdexcept>

#include "awe/binary_io.hpp"

namespace awe {

std::unordered_map<std::string, Eigen::Index> EmbeddingSet::index() const {
  std::unordered_map<std::string, Eigen::Index> out;
  out.reserve(token_ids.size());
  for (std::size_t i = 0; i < token_ids.size(); ++i) out.emplace(token_ids[i], static_cast<Eigen::Index>(i));
  return out;
}

Eigen::Index EmbeddingSet::row_of(const std::string& token_id) const {
  for (std::size_t i = 0; i < token_ids.size(); ++i)
    if (token_ids[i] == token_id) return static_cast<Eigen::Index>(i);
  throw std::out_of_range("no " + embedder_tag + " embedding for token " + token_id);
}

std::vector<Eigen::Index> downsample_indices(Eigen::Index num_frames, int k) {
  if (num_frames < 1) throw std::invalid_argument("downsample: need at least one frame");
  if (k < 1) throw std::invalid_argument("downsample: k must be positive");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(k), 0);
  if (k == 1) return idx;
  // Integer round-half-up of j (T-1) / (k-1).
  const Eigen::Index den = k - 1;
  for (Eigen::Index j = 0; j < k; ++j) idx[static_cast<std::size_t>(j)] = (2 * j * (num_frames - 1) + den) / (2 * den);
  return idx;
}

Embedding downsample_embed(const FrameSequence& frames, int k, const std::string& token_id) {
  const auto idx = downsample_indices(frames.num_frames(), k);
  const Eigen::Index d = frames.dim();
  Embedding e;
  e.token_id = token_id;
  e.embedder_tag = "DS";
  e.values.resize(static_cast<Eigen::Index>(idx.size()) * d);
  for (std::size_t j = 0; j < idx.size(); ++j)
    e.values.segment(static_cast<Eigen::Index>(j) * d, d) = frames.frames.row(idx[j]).transpose().cast<double>();
  return e;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  if (static_cast<Eigen::Index>(set.token_ids.size()) != set.values.rows())
    throw std::invalid_argument("write_embeddings: id count does not match row count");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write embedding file: " + path.string());
  binio::put_magic(os, "AWEE");
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(set.values.rows()));
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(set.values.cols()));
  for (Eigen::Index i = 0; i < set.values.rows(); ++i) {
    const std::string& id = set.token_ids[static_cast<std::size_t>(i)];
    if (id.size() > std::numeric_limits<std::uint16_t>::max())
      throw std::invalid_argument("write_embeddings: token id too long: " + id.substr(0, 32) + "...");
    binio::put_uint<std::uint16_t>(os, static_cast<std::uint16_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (Eigen::Index j = 0; j < set.values.cols(); ++j) binio::put_f32(os, static_cast<float>(set.values(i, j)));
  }
  if (!os) throw std::runtime_error("failed writing embedding file: " + path.string());
}

EmbeddingSet read_embeddings(const std::filesystem::path& path, const std::string& embedder_tag) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open embedding file: " + path.string());
  binio::expect_magic(is, "AWEE", path.string());
  const auto count = binio::get_uint<std::uint32_t>(is);
  const auto dim = binio::get_uint<std::uint32_t>(is);
  EmbeddingSet set;
  set.embedder_tag = embedder_tag;
  set.values.resize(count, dim);
  set.token_ids.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = binio::get_uint<std::uint16_t>(is);
    std::string id(len, '\0');
    if (!is.read(id.data(), len)) throw std::runtime_error(path.string() + ": truncated token id");
    set.token_ids.push_back(std::move(id));
    for (std::uint32_t j = 0; j < dim; ++j) set.values(i, j) = binio::get_f32(is);
  }
  return set;
}

}  // namespace awe
