#ifndef AWE_MATHCORE_FFT_HPP_
#define AWE_MATHCORE_FFT_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace awe {

template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

inline bool is_power_of_two(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 FFT. `inverse` applies the conjugate
/// transform and the 1/n scale.
template <typename Scalar>
void fft_inplace(ComplexVector<Scalar>& data, bool inverse = false) {
  const Eigen::Index n = data.size();
  if (!is_power_of_two(n)) throw std::invalid_argument("fft: length must be a power of two");

  for (Eigen::Index i = 1, j = 0; i < n; ++i) {
    Eigen::Index bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  const Scalar sign = inverse ? Scalar(1) : Scalar(-1);
  for (Eigen::Index len = 2; len <= n; len <<= 1) {
    const Eigen::Index half = len / 2;
    // Twiddles computed directly per index keep rounding error O(eps log n).
    for (Eigen::Index k = 0; k < half; ++k) {
      const Scalar angle = sign * Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / Scalar(len);
      const std::complex<Scalar> w(std::cos(angle), std::sin(angle));
      for (Eigen::Index start = 0; start < n; start += len) {
        const std::complex<Scalar> u = data[start + k];
        const std::complex<Scalar> v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
  if (inverse) data /= Scalar(n);
}

/// Spectrum of a real signal zero-padded (or truncated) to `n` points.
/// Returns the n/2 + 1 non-redundant bins.
template <typename Derived>
ComplexVector<typename Derived::Scalar> fft_real(const Eigen::MatrixBase<Derived>& signal,
                                                 Eigen::Index n) {
  using Scalar = typename Derived::Scalar;
  if (!is_power_of_two(n)) throw std::invalid_argument("fft_real: n must be a power of two");
  ComplexVector<Scalar> buf = ComplexVector<Scalar>::Zero(n);
  const Eigen::Index m = std::min<Eigen::Index>(n, signal.size());
  for (Eigen::Index i = 0; i < m; ++i) buf[i] = std::complex<Scalar>(signal(i), Scalar(0));
  fft_inplace(buf);
  return buf.head(n / 2 + 1);
}

/// Inverse of fft_real: rebuilds the length-n real signal from n/2 + 1 bins.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ifft_real(const ComplexVector<Scalar>& half_spectrum,
                                                   Eigen::Index n) {
  if (!is_power_of_two(n) || half_spectrum.size() != n / 2 + 1)
    throw std::invalid_argument("ifft_real: spectrum size must be n/2 + 1 for power-of-two n");
  ComplexVector<Scalar> buf(n);
  buf.head(n / 2 + 1) = half_spectrum;
  for (Eigen::Index k = n / 2 + 1; k < n; ++k) buf[k] = std::conj(half_spectrum[n - k]);
  fft_inplace(buf, true);
  return buf.real();
}

}  // namespace awe

#endif  // AWE_MATHCORE_FFT_HPP_
