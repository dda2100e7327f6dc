#include "awe/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "awe/binary_io.hpp"
#include "awe/mathcore/fft.hpp"

namespace awe {

void Waveform::validate() const {
  if (samples.empty()) throw std::invalid_argument("waveform has no samples");
  if (sample_rate_hz < 8000) throw std::invalid_argument("sample rate must be >= 8000 Hz");
  for (double s : samples)
    if (!std::isfinite(s)) throw std::invalid_argument("waveform contains non-finite samples");
}

int MfccConfig::frame_length_samples(int sample_rate_hz) const {
  return static_cast<int>(std::lround(frame_length_ms * sample_rate_hz / 1000.0));
}

int MfccConfig::frame_hop_samples(int sample_rate_hz) const {
  return static_cast<int>(std::lround(frame_hop_ms * sample_rate_hz / 1000.0));
}

void MfccConfig::validate(int sample_rate_hz) const {
  if (!(frame_length_ms > 0) || !(frame_hop_ms > 0))
    throw std::invalid_argument("frame length and hop must be positive");
  if (frame_hop_ms > frame_length_ms) throw std::invalid_argument("frame hop must not exceed frame length");
  if (n_mel_filters < 1 || n_coefficients < 1) throw std::invalid_argument("filter/coefficient counts must be positive");
  if (n_coefficients > n_mel_filters) throw std::invalid_argument("n_coefficients must be <= n_mel_filters");
  if (!(pre_emphasis >= 0.0 && pre_emphasis < 1.0)) throw std::invalid_argument("pre_emphasis must be in [0, 1)");
  if (!(energy_floor > 0)) throw std::invalid_argument("energy_floor must be positive");
  if (!is_power_of_two(n_fft_bins) || n_fft_bins < frame_length_samples(sample_rate_hz))
    throw std::invalid_argument("n_fft_bins must be a power of two >= frame length in samples");
  if (frame_hop_samples(sample_rate_hz) < 1) throw std::invalid_argument("frame hop is shorter than one sample");
}

double hz_to_mel(double hz) {
  if (hz < 0 || std::isnan(hz)) throw std::domain_error("hz_to_mel: frequency must be >= 0");
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::Index frame_count(Eigen::Index n_samples, Eigen::Index frame_length, Eigen::Index hop) {
  if (frame_length < 1 || hop < 1) throw std::invalid_argument("frame_count: length and hop must be positive");
  if (n_samples < frame_length) throw std::invalid_argument("signal is shorter than one frame");
  return 1 + (n_samples - frame_length) / hop;
}

Eigen::MatrixXd frame_signal(const Waveform& waveform, const MfccConfig& config) {
  waveform.validate();
  config.validate(waveform.sample_rate_hz);
  const Eigen::Index len = config.frame_length_samples(waveform.sample_rate_hz);
  const Eigen::Index hop = config.frame_hop_samples(waveform.sample_rate_hz);
  const Eigen::Index n = static_cast<Eigen::Index>(waveform.samples.size());
  const Eigen::Index count = frame_count(n, len, hop);

  Eigen::VectorXd window(len);
  for (Eigen::Index i = 0; i < len; ++i)
    window[i] = len == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (len - 1));

  Eigen::MatrixXd frames(count, len);
  for (Eigen::Index t = 0; t < count; ++t) {
    const double* x = waveform.samples.data() + t * hop;
    for (Eigen::Index i = len - 1; i > 0; --i) frames(t, i) = x[i] - config.pre_emphasis * x[i - 1];
    frames(t, 0) = x[0] * (1.0 - config.pre_emphasis);
    frames.row(t) = frames.row(t).cwiseProduct(window.transpose());
  }
  return frames;
}

Eigen::VectorXd mel_center_frequencies(const MfccConfig& config, int sample_rate_hz) {
  const double top = hz_to_mel(sample_rate_hz / 2.0);
  Eigen::VectorXd centers(config.n_mel_filters);
  for (int m = 0; m < config.n_mel_filters; ++m) centers[m] = mel_to_hz(top * (m + 1) / (config.n_mel_filters + 1));
  return centers;
}

Eigen::MatrixXd mel_filterbank(const MfccConfig& config, int sample_rate_hz) {
  config.validate(sample_rate_hz);
  const int n_bins = config.n_fft_bins / 2 + 1;
  const double top = hz_to_mel(sample_rate_hz / 2.0);
  std::vector<double> edges(config.n_mel_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(top * static_cast<double>(i) / (config.n_mel_filters + 1));

  Eigen::MatrixXd bank = Eigen::MatrixXd::Zero(config.n_mel_filters, n_bins);
  for (int m = 0; m < config.n_mel_filters; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / config.n_fft_bins;
      double w = 0.0;
      if (f > left && f <= center)
        w = (f - left) / (center - left);
      else if (f > center && f < right)
        w = (right - f) / (right - center);
      bank(m, k) = w;
    }
  }
  return bank;
}

Eigen::MatrixXd dct_matrix(int n_out, int n_in) {
  if (n_out < 1 || n_out > n_in) throw std::invalid_argument("dct_matrix: need 1 <= n_out <= n_in");
  Eigen::MatrixXd m(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n_in);
    for (int n = 0; n < n_in; ++n) m(k, n) = scale * std::cos(std::numbers::pi * k * (2.0 * n + 1.0) / (2.0 * n_in));
  }
  return m;
}

Eigen::MatrixXd log_mel_energies(const Waveform& waveform, const MfccConfig& config) {
  const Eigen::MatrixXd frames = frame_signal(waveform, config);
  const Eigen::MatrixXd bank = mel_filterbank(config, waveform.sample_rate_hz);
  Eigen::MatrixXd out(frames.rows(), config.n_mel_filters);
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    const auto spectrum = fft_real(frames.row(t).transpose(), config.n_fft_bins);
    const Eigen::VectorXd power = spectrum.cwiseAbs2();
    const Eigen::VectorXd energies = bank * power;
    out.row(t) = energies.unaryExpr([&](double e) { return std::log(std::max(e, config.energy_floor)); }).transpose();
  }
  return out;
}

FrameSequence compute_mfcc(const Waveform& waveform, const MfccConfig& config) {
  const Eigen::MatrixXd log_energies = log_mel_energies(waveform, config);
  const Eigen::MatrixXd dct = dct_matrix(config.n_coefficients, config.n_mel_filters);
  Eigen::MatrixXd ceps = log_energies * dct.transpose();
  if (config.cepstral_mean_norm) ceps.rowwise() -= ceps.colwise().mean();

  FrameSequence seq;
  seq.frames = ceps.cast<float>();
  seq.frame_hop_ms = config.frame_hop_ms;
  seq.source_duration_ms = waveform.duration_ms();
  return seq;
}

namespace {

std::string read_tag(std::istream& is) {
  char tag[4];
  if (!is.read(tag, 4)) throw std::runtime_error("wav: truncated header");
  return std::string(tag, 4);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open wav file: " + path.string());
  if (read_tag(is) != "RIFF") throw std::runtime_error("wav: missing RIFF header in " + path.string());
  binio::get_uint<std::uint32_t>(is);
  if (read_tag(is) != "WAVE") throw std::runtime_error("wav: missing WAVE tag in " + path.string());

  int channels = 0, bits = 0, rate = 0;
  bool have_fmt = false;
  while (is) {
    const std::string tag = read_tag(is);
    const auto size = binio::get_uint<std::uint32_t>(is);
    if (tag == "fmt ") {
      const auto format = binio::get_uint<std::uint16_t>(is);
      channels = binio::get_uint<std::uint16_t>(is);
      rate = static_cast<int>(binio::get_uint<std::uint32_t>(is));
      binio::get_uint<std::uint32_t>(is);
      binio::get_uint<std::uint16_t>(is);
      bits = binio::get_uint<std::uint16_t>(is);
      if (size > 16) is.ignore(size - 16);
      if (format != 1) throw std::runtime_error("wav: only PCM is supported: " + path.string());
      if (channels != 1 || bits != 16) throw std::runtime_error("wav: only mono 16-bit is supported: " + path.string());
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw std::runtime_error("wav: data chunk before fmt chunk: " + path.string());
      Waveform w;
      w.sample_rate_hz = rate;
      w.samples.resize(size / 2);
      for (auto& s : w.samples) s = static_cast<std::int16_t>(binio::get_uint<std::uint16_t>(is)) / 32768.0;
      return w;
    } else {
      is.ignore(size + (size & 1));
    }
  }
  throw std::runtime_error("wav: no data chunk in " + path.string());
}

void write_wav(const std::filesystem::path& path, const Waveform& waveform) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write wav file: " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(waveform.samples.size() * 2);
  os.write("RIFF", 4);
  binio::put_uint<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  binio::put_uint<std::uint32_t>(os, 16);
  binio::put_uint<std::uint16_t>(os, 1);
  binio::put_uint<std::uint16_t>(os, 1);
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(waveform.sample_rate_hz));
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(waveform.sample_rate_hz * 2));
  binio::put_uint<std::uint16_t>(os, 2);
  binio::put_uint<std::uint16_t>(os, 16);
  os.write("data", 4);
  binio::put_uint<std::uint32_t>(os, data_bytes);
  for (double s : waveform.samples) {
    const double clipped = std::clamp(s, -1.0, 32767.0 / 32768.0);
    binio::put_uint<std::uint16_t>(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32768.0))));
  }
}

void write_frames(const std::filesystem::path& path, const FrameMatrix& frames) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write frame file: " + path.string());
  binio::put_magic(os, "AWEF");
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(frames.rows()));
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(frames.cols()));
  for (Eigen::Index i = 0; i < frames.size(); ++i) binio::put_f32(os, frames.data()[i]);
  if (!os) throw std::runtime_error("failed writing frame file: " + path.string());
}

FrameMatrix read_frames(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open frame file: " + path.string());
  binio::expect_magic(is, "AWEF", path.string());
  const auto rows = binio::get_uint<std::uint32_t>(is);
  const auto cols = binio::get_uint<std::uint32_t>(is);
  FrameMatrix frames(rows, cols);
  for (Eigen::Index i = 0; i < frames.size(); ++i) frames.data()[i] = binio::get_f32(is);
  return frames;
}

}  // namespace awe
