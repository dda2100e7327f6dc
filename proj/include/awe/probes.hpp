#ifndef AWE_PROBES_HPP_
#define AWE_PROBES_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "awe/corpus.hpp"
#include "awe/embedding.hpp"

namespace awe {

enum class ProbeKind { kClassification, kRegression };

const char* to_string(ProbeKind kind);

struct ProbeDataset {
  ProbeKind kind = ProbeKind::kRegression;
  Eigen::MatrixXd features;  // N x d
  Eigen::VectorXd targets;   // class index (classification) or value
  std::vector<std::string> token_ids;
  std::vector<std::string> class_names;  // classification only
  std::vector<bool> train_mask;          // empty until split

  Eigen::Index size() const { return features.rows(); }
  std::vector<Eigen::Index> train_indices() const;
  std::vector<Eigen::Index> test_indices() const;
  void validate() const;
};

struct ProbeResult {
  ProbeKind kind = ProbeKind::kRegression;
  double test_metric = 0.0;      // accuracy or MSE
  double r_squared = 0.0;        // regression only
  double baseline_metric = 0.0;  // majority accuracy or intercept-only MSE
  double baseline_r_squared = 0.0;
  double train_metric = 0.0;
  double train_baseline_metric = 0.0;
  // Coefficients in original feature units: one row per class (a single row
  // for regression), plus one intercept per row.
  Eigen::MatrixXd weights;
  Eigen::VectorXd intercepts;
  bool converged = true;
  int iterations = 0;
  double condition_number = 0.0;  // regression: of the standardized Gram matrix
  std::vector<std::string> warnings;
};

/// Uniform token-level split, round(0.8 N) train. Throws std::runtime_error
/// when a classification class is missing from the train fold.
ProbeDataset split_80_20(ProbeDataset dataset, std::uint64_t seed);

/// Least squares with intercept on standardized features, ridge 1e-8.
/// Test metrics are NaN when the test fold is empty.
ProbeResult fit_linear_regression(const ProbeDataset& dataset);

struct LogisticOptions {
  int max_iters = 20000;
  double tolerance = 1e-6;  // on the gradient norm of the penalized objective
  double l2 = 1e-4;
};

/// Multinomial softmax regression with intercepts by full-batch accelerated
/// gradient descent on mean cross-entropy + l2/2 ||W||^2.
ProbeResult fit_logistic_regression(const ProbeDataset& dataset, const LogisticOptions& options = {});

/// Test-split tokens of `corpus` that have a row in `embeddings`, in corpus
/// order. Throws if a test token is missing.
ProbeDataset speaker_dataset(const Corpus& corpus, const EmbeddingSet& embeddings);
ProbeDataset duration_dataset(const Corpus& corpus, const EmbeddingSet& embeddings);
ProbeDataset phone_count_dataset(const Corpus& corpus, const EmbeddingSet& embeddings);

ProbeResult probe_speaker(const Corpus& corpus, const EmbeddingSet& embeddings, std::uint64_t seed);
ProbeResult probe_duration(const Corpus& corpus, const EmbeddingSet& embeddings, std::uint64_t seed);
ProbeResult probe_phone_count(const Corpus& corpus, const EmbeddingSet& embeddings, std::uint64_t seed);

}  // namespace awe

#endif  // AWE_PROBES_HPP_
