#ifndef AWE_TRAINING_HPP_
#define AWE_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "awe/cae_rnn.hpp"
#include "awe/corpus.hpp"

namespace awe {

using CaeRnn = CaeRnnParams<double>;

struct TrainConfig {
  int ae_pretrain_epochs = 15;
  int cae_epochs = 25;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double gradient_clip_norm = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  std::string phase;  // "ae" or "cae"
  int epoch = 0;      // 1-based, counted across both phases
  double mean_loss = 0.0;
};

struct TrainResult {
  CaeRnn params;
  std::vector<EpochLog> log;
};

/// Raised when a batch loss is NaN or infinite.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(int epoch, int batch, double loss);
  int epoch;
  int batch;
  double loss;
};

/// One (source, target) reconstruction example; the target is decoded for
/// its own length.
struct Example {
  const FrameMatrix* source;
  const FrameMatrix* target;
};

/// Mean over valid target frames and coefficients of the squared error of a
/// batch, in the model's standardized feature space. Adds the gradient into
/// `grads` when given.
double batch_loss(const CaeRnn& params, std::span<const Example> batch, CaeRnn* grads = nullptr);

/// Per-dimension mean and inverse standard deviation of the given frames.
void fit_input_normalization(CaeRnn& params, std::span<const FrameMatrix* const> frames);

/// Initial parameters exactly as train() creates them for this corpus/pairs.
CaeRnn initial_params(const Corpus& corpus, std::span<const TrainPair> pairs, const Architecture& arch,
                      const TrainConfig& config);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Autoencoder pre-training on the tokens of `pairs`, then correspondence
/// training on both directions of every pair.
TrainResult train(const Corpus& corpus, std::span<const TrainPair> pairs, const Architecture& arch,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct GradientCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
};

/// Central finite differences against the analytic gradient of the
/// single-pair loss on `samples` randomly chosen parameter entries.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8); the finite differences are
/// evaluated in long double.
GradientCheckResult gradient_check(const CaeRnn& params, const Example& pair, double epsilon = 1e-5,
                                   int samples = 256, std::uint64_t seed = 0);

// "AWEP" parameter files: magic, u32 version, u32 layers, u32 hidden,
// u32 input_dim, u32 embedding_dim, input_shift and input_scale
// (input_dim f64 each), then every tensor in CaeRnnParams order as
// row-major little-endian f64.
void write_params(const std::filesystem::path& path, const CaeRnn& params);
CaeRnn read_params(const std::filesystem::path& path);

}  // namespace awe

#endif  // AWE_TRAINING_HPP_
