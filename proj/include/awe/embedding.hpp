#ifndef AWE_EMBEDDING_HPP_
#define AWE_EMBEDDING_HPP_

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "awe/frontend.hpp"

namespace awe {

struct Embedding {
  std::string token_id;
  std::string embedder_tag;  // "DS" or "CAE"
  Eigen::VectorXd values;
};

/// Embeddings of many tokens from one embedder, one row per token.
struct EmbeddingSet {
  std::string embedder_tag;
  std::vector<std::string> token_ids;
  Eigen::MatrixXd values;  // N x d

  Eigen::Index size() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
  std::unordered_map<std::string, Eigen::Index> index() const;
  /// Row of `token_id`; throws std::out_of_range naming the token if absent.
  Eigen::Index row_of(const std::string& token_id) const;
};

/// Frame indices round(j (T-1) / (k-1)), j = 0..k-1.
std::vector<Eigen::Index> downsample_indices(Eigen::Index num_frames, int k = 10);

/// Downsampling baseline: k equally spaced frames, concatenated in time order.
Embedding downsample_embed(const FrameSequence& frames, int k = 10, const std::string& token_id = {});

// "AWEE" files: magic, u32 count, u32 dim, then per record u16 id length,
// id bytes, dim little-endian float32 values. Values are rounded to float.
void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
EmbeddingSet read_embeddings(const std::filesystem::path& path, const std::string& embedder_tag);

}  // namespace awe

#endif  // AWE_EMBEDDING_HPP_
