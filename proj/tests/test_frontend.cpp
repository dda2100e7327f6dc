#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "awe/frontend.hpp"
#include "awe/mathcore/rng.hpp"

namespace awe {
namespace {

Waveform tone(double hz, double seconds, int sr = 16000, double amp = 0.5) {
  Waveform w;
  w.sample_rate_hz = sr;
  w.samples.resize(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sr));
  return w;
}

Waveform zeros(std::size_t n, int sr = 16000) {
  Waveform w;
  w.sample_rate_hz = sr;
  w.samples.assign(n, 0.0f);
  return w;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("awe_frontend_" + name);
}

TEST(HzToMel, FixedPoints) {
  EXPECT_EQ(hz_to_mel(0.0), 0.0);
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-9);
  EXPECT_NEAR(hz_to_mel(700.0), 781.1728, 1e-4);
  EXPECT_NEAR(hz_to_mel(1000.0), 999.985, 1e-3);
}

TEST(HzToMel, NegativeIsDomainError) { EXPECT_THROW(hz_to_mel(-1.0), std::domain_error); }

TEST(HzToMel, MonotoneAndInvertible) {
  double prev = -1.0;
  for (double f = 0.0; f <= 8000.0; f += 37.5) {
    const double m = hz_to_mel(f);
    EXPECT_GT(m, prev);
    EXPECT_NEAR(mel_to_hz(m), f, 1e-9 * std::max(1.0, f));
    prev = m;
  }
}

TEST(FrameCount, ExactlyOneFrame) {
  EXPECT_EQ(frame_count(400, 400, 160), 1);
  EXPECT_EQ(frame_count(400, 400, 1), 1);
}

TEST(FrameCount, OneSecondAt16kHz) {
  MfccConfig cfg;
  EXPECT_EQ(cfg.frame_length_samples(16000), 400);
  EXPECT_EQ(cfg.frame_hop_samples(16000), 160);
  EXPECT_EQ(frame_count(16000, 400, 160), 98);
  EXPECT_EQ(frame_signal(zeros(16000), cfg).rows(), 98);
}

TEST(FrameCount, FormulaHoldsForRandomShapes) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto l = static_cast<Eigen::Index>(1 + rng.uniform_index(300));
    const auto h = static_cast<Eigen::Index>(1 + rng.uniform_index(static_cast<std::uint64_t>(l)));
    const auto n = static_cast<Eigen::Index>(l + rng.uniform_index(2000));
    // Count frames by sliding a window directly.
    Eigen::Index count = 0;
    for (Eigen::Index start = 0; start + l <= n; start += h) ++count;
    EXPECT_EQ(frame_count(n, l, h), count) << n << " " << l << " " << h;
  }
}

TEST(FrameSignal, ZeroWaveformGivesZeroFrames) {
  const Eigen::MatrixXd frames = frame_signal(zeros(1000), MfccConfig{});
  EXPECT_EQ(frames.cols(), 400);
  EXPECT_EQ(frames.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FrameSignal, ShorterThanOneFrameThrows) {
  EXPECT_THROW(frame_signal(zeros(399), MfccConfig{}), std::invalid_argument);
}

TEST(FrameSignal, PreEmphasisThenHamming) {
  Waveform w = zeros(400);
  for (int i = 0; i < 400; ++i) w.samples[i] = static_cast<float>(0.001 * i);
  MfccConfig cfg;
  const Eigen::MatrixXd f = frame_signal(w, cfg);
  ASSERT_EQ(f.rows(), 1);
  for (int i : {1, 57, 200, 399}) {
    const double emphasized = w.samples[i] - 0.97 * w.samples[i - 1];
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / 399.0);
    EXPECT_NEAR(f(0, i), emphasized * window, 1e-9);
  }
}

TEST(Dct, Orthonormal) {
  for (int n : {13, 24, 40}) {
    const Eigen::MatrixXd m = dct_matrix(n, n);
    EXPECT_LE((m * m.transpose() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
  }
  const Eigen::MatrixXd part = dct_matrix(13, 24);
  EXPECT_LE((part * part.transpose() - Eigen::MatrixXd::Identity(13, 13)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(MelFilterbank, Geometry) {
  const MfccConfig cfg;
  const Eigen::MatrixXd fb = mel_filterbank(cfg, 16000);
  ASSERT_EQ(fb.rows(), 24);
  ASSERT_EQ(fb.cols(), 257);
  EXPECT_GE(fb.minCoeff(), 0.0);
  for (Eigen::Index i = 0; i < fb.rows(); ++i) {
    EXPECT_GT(fb.row(i).sum(), 0.0) << "filter " << i;
    for (Eigen::Index j = i + 2; j < fb.rows(); ++j)
      EXPECT_EQ(fb.row(i).cwiseProduct(fb.row(j)).sum(), 0.0) << i << " overlaps " << j;
  }
  const Eigen::VectorXd centers = mel_center_frequencies(cfg, 16000);
  for (Eigen::Index i = 1; i < centers.size(); ++i) {
    EXPECT_GT(centers(i), centers(i - 1));
    EXPECT_NEAR(hz_to_mel(centers(i)) - hz_to_mel(centers(i - 1)), hz_to_mel(8000.0) / 25.0, 1e-6);
  }
}

TEST(Mfcc, PureTonePeaksAtNearestFilter) {
  const MfccConfig cfg;
  const Eigen::VectorXd centers = mel_center_frequencies(cfg, 16000);
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const double f = rng.uniform(centers(1), centers(centers.size() - 2));
    Eigen::Index nearest = 0;
    (centers.array() - f).abs().minCoeff(&nearest);
    const Eigen::MatrixXd logmel = log_mel_energies(tone(f, 0.2), cfg);
    for (Eigen::Index t = 0; t < logmel.rows(); ++t) {
      Eigen::Index peak = 0;
      logmel.row(t).maxCoeff(&peak);
      ASSERT_EQ(peak, nearest) << "tone " << f << " Hz, frame " << t;
    }
  }
}

TEST(Mfcc, SilenceGivesConstantLogEnergies) {
  const FrameSequence seq = compute_mfcc(zeros(4000), MfccConfig{});
  ASSERT_EQ(seq.dim(), 13);
  for (Eigen::Index t = 0; t < seq.num_frames(); ++t) {
    EXPECT_NEAR(seq.frames(t, 0), std::sqrt(24.0) * std::log(1e-10), 1e-3);
    for (Eigen::Index k = 1; k < 13; ++k) EXPECT_NEAR(seq.frames(t, k), 0.0, 1e-4);
  }
}

TEST(Mfcc, ShapeAndDeterminism) {
  const Waveform w = tone(440.0, 0.5);
  const FrameSequence a = compute_mfcc(w, MfccConfig{});
  const FrameSequence b = compute_mfcc(w, MfccConfig{});
  EXPECT_EQ(a.num_frames(), frame_count(8000, 400, 160));
  EXPECT_EQ(a.dim(), 13);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_TRUE(a.frames.allFinite());
  EXPECT_DOUBLE_EQ(a.source_duration_ms, 500.0);
}

TEST(Mfcc, CepstralMeanNormalizationIsOptional) {
  MfccConfig cfg;
  cfg.cepstral_mean_norm = true;
  const FrameSequence seq = compute_mfcc(tone(300.0, 0.3), cfg);
  EXPECT_LE(seq.frames.cast<double>().colwise().mean().cwiseAbs().maxCoeff(), 1e-4);
}

TEST(MfccConfig, RejectsInconsistentSettings) {
  MfccConfig c;
  c.n_coefficients = 30;
  EXPECT_THROW(c.validate(16000), std::invalid_argument);
  c = {};
  c.frame_hop_ms = 30;
  EXPECT_THROW(c.validate(16000), std::invalid_argument);
  c = {};
  c.n_fft_bins = 256;  // shorter than a 400-sample frame
  EXPECT_THROW(c.validate(16000), std::invalid_argument);
  c = {};
  c.n_fft_bins = 500;
  EXPECT_THROW(c.validate(16000), std::invalid_argument);
  c = {};
  c.pre_emphasis = 1.0;
  EXPECT_THROW(c.validate(16000), std::invalid_argument);
}

TEST(Waveform, Invariants) {
  Waveform w = zeros(10);
  EXPECT_NO_THROW(w.validate());
  w.sample_rate_hz = 4000;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w = zeros(0);
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w = zeros(10);
  w.samples[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(w.validate(), std::invalid_argument);
}

TEST(Wav, RoundTripWithinQuantization) {
  const Waveform w = tone(123.0, 0.05, 16000, 0.9);
  const auto path = temp_path("tone.wav");
  write_wav(path, w);
  const Waveform back = read_wav(path);
  EXPECT_EQ(back.sample_rate_hz, 16000);
  ASSERT_EQ(back.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) EXPECT_NEAR(back.samples[i], w.samples[i], 1.0 / 32767.0);
  std::filesystem::remove(path);
}

TEST(Awef, RoundTripIsExact) {
  FrameMatrix m(7, 13);
  Rng rng(8);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  const auto path = temp_path("frames.awef");
  write_frames(path, m);
  EXPECT_EQ(read_frames(path), m);
  EXPECT_EQ(std::filesystem::file_size(path), 4u + 4u + 4u + 7u * 13u * 4u);
  std::filesystem::remove(path);
}

TEST(Awef, BadMagicIsRejected) {
  const auto path = temp_path("bad.awef");
  std::ofstream(path, std::ios::binary) << "NOPE\x01\0\0\0";
  EXPECT_THROW(read_frames(path), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace awe
