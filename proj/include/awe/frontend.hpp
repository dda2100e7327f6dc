#ifndef AWE_FRONTEND_HPP_
#define AWE_FRONTEND_HPP_

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace awe {

/// Row-major float storage used for frames on disk and in a corpus.
using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate_hz = 16000;

  double duration_ms() const { return 1000.0 * static_cast<double>(samples.size()) / sample_rate_hz; }
  /// Throws std::invalid_argument on empty/non-finite samples or rate < 8000.
  void validate() const;
};

struct MfccConfig {
  double frame_length_ms = 25.0;
  double frame_hop_ms = 10.0;
  int n_fft_bins = 512;
  int n_mel_filters = 24;
  int n_coefficients = 13;
  double pre_emphasis = 0.97;
  double energy_floor = 1e-10;
  bool cepstral_mean_norm = false;  // per-utterance mean subtraction

  int frame_length_samples(int sample_rate_hz) const;
  int frame_hop_samples(int sample_rate_hz) const;
  void validate(int sample_rate_hz) const;
};

struct FrameSequence {
  FrameMatrix frames;  // T x D
  double frame_hop_ms = 10.0;
  double source_duration_ms = 0.0;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

/// mel(f) = 2595 log10(1 + f / 700). Throws std::domain_error for f < 0.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Number of frames for N samples, frame length L and hop H (N >= L).
Eigen::Index frame_count(Eigen::Index n_samples, Eigen::Index frame_length, Eigen::Index hop);

/// Pre-emphasized, Hamming-windowed frames; one frame per row.
Eigen::MatrixXd frame_signal(const Waveform& waveform, const MfccConfig& config);

/// n_mel_filters x (n_fft_bins/2 + 1) triangular filterbank, centers equally
/// spaced on the mel scale between 0 Hz and Nyquist.
Eigen::MatrixXd mel_filterbank(const MfccConfig& config, int sample_rate_hz);

/// Center frequencies (Hz) of the filters in mel_filterbank.
Eigen::VectorXd mel_center_frequencies(const MfccConfig& config, int sample_rate_hz);

/// Orthonormal DCT-II, first `n_out` rows of the n_in x n_in transform.
Eigen::MatrixXd dct_matrix(int n_out, int n_in);

/// Floored log mel-filter energies, T x n_mel_filters (the pre-DCT values).
Eigen::MatrixXd log_mel_energies(const Waveform& waveform, const MfccConfig& config);

FrameSequence compute_mfcc(const Waveform& waveform, const MfccConfig& config);

// Minimal mono 16-bit PCM WAV support.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& waveform);

// "AWEF" frame files: magic, u32 T, u32 D, T*D little-endian float32 row-major.
void write_frames(const std::filesystem::path& path, const FrameMatrix& frames);
FrameMatrix read_frames(const std::filesystem::path& path);

}  // namespace awe

#endif  // AWE_FRONTEND_HPP_
