#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <set>

#include "awe/cae_rnn.hpp"
#include "awe/mathcore/fft.hpp"
#include "awe/mathcore/rng.hpp"
#include "awe/mathcore/tape.hpp"

namespace awe {
namespace {

using Matrix = Eigen::MatrixXd;

// O(n^2) reference transform.
ComplexVector<double> naive_dft(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  ComplexVector<double> out(n / 2 + 1);
  for (Eigen::Index k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index t = 0; t < n; ++t)
      acc += x(t) * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
    out(k) = acc;
  }
  return out;
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, KnownSplitmixValues) {
  // First outputs of splitmix64 from state 0, as published with the algorithm.
  std::uint64_t s = 0;
  EXPECT_EQ(splitmix64(s), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(splitmix64(s), 0x6e789e6aa1b965f4ULL);
}

TEST(Rng, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(7, "train"), derive_seed(7, "pairs"));
  EXPECT_EQ(derive_seed(7, "train"), derive_seed(7, "train"));
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(1);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(5);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Rng, SampleIndicesDistinctAscending) {
  Rng rng(9);
  const auto idx = rng.sample_indices(100, 10);
  ASSERT_EQ(idx.size(), 10u);
  for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LT(idx[i - 1], idx[i]);
  EXPECT_EQ(rng.sample_indices(5, 10).size(), 5u);
}

TEST(Fft, ImpulseGivesFlatMagnitude) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(64);
  x(0) = 1.0;
  const auto spec = fft_real(x, 64);
  ASSERT_EQ(spec.size(), 33);
  for (Eigen::Index k = 0; k < spec.size(); ++k) EXPECT_NEAR(std::abs(spec(k)), 1.0, 1e-12);
}

TEST(Fft, SinusoidConcentratesAtItsBin) {
  const int n = 256, bin = 19;
  Eigen::VectorXd x(n);
  for (int t = 0; t < n; ++t) x(t) = std::sin(2.0 * std::numbers::pi * bin * t / n);
  const auto spec = fft_real(x, n);
  Eigen::Index peak = 0;
  spec.cwiseAbs().maxCoeff(&peak);
  EXPECT_EQ(peak, bin);
  EXPECT_NEAR(std::abs(spec(bin)), n / 2.0, 1e-9);
  double other = 0;
  for (Eigen::Index k = 0; k < spec.size(); ++k)
    if (k != bin) other = std::max(other, std::abs(spec(k)));
  EXPECT_LT(other, 1e-9);
}

TEST(Fft, MatchesNaiveDft) {
  Rng rng(11);
  for (int n : {2, 8, 64, 512}) {
    Eigen::VectorXd x(n);
    for (int t = 0; t < n; ++t) x(t) = rng.normal();
    const auto fast = fft_real(x, n);
    const auto slow = naive_dft(x);
    const double rel = (fast - slow).norm() / slow.norm();
    EXPECT_LE(rel, 1e-9) << "n = " << n;
  }
}

TEST(Fft, ZeroPadsShortSignals) {
  Eigen::VectorXd x(5);
  x << 1, 2, 3, 4, 5;
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(16);
  padded.head(5) = x;
  EXPECT_LE((fft_real(x, 16) - naive_dft(padded)).norm(), 1e-12);
}

TEST(Fft, RoundTrip) {
  Rng rng(12);
  Eigen::VectorXd x(128);
  for (Eigen::Index t = 0; t < x.size(); ++t) x(t) = rng.normal();
  const Eigen::VectorXd back = ifft_real(fft_real(x, 128), 128);
  EXPECT_LE((back - x).norm() / x.norm(), 1e-9);
}

TEST(Fft, RejectsNonPowerOfTwo) {
  Eigen::VectorXd x = Eigen::VectorXd::Ones(10);
  EXPECT_THROW(fft_real(x, 12), std::invalid_argument);
}

TEST(Tape, SumGradientIsOnes) {
  Tape<double> tape;
  Matrix x = Matrix::Random(3, 4), gx = Matrix::Zero(3, 4);
  const Var v = tape.parameter(x, &gx);
  tape.backward(tape.sum(v));
  EXPECT_TRUE(gx.isApprox(Matrix::Ones(3, 4)));
}

TEST(Tape, ConstantBranchGivesZeroGradient) {
  Tape<double> tape;
  Matrix w = Matrix::Random(2, 2), gw = Matrix::Zero(2, 2);
  const Var p = tape.parameter(w, &gw);
  const Var c = tape.constant(Matrix::Random(2, 2));
  // The loss reads only the constant; the parameter is on the tape but unused.
  tape.backward(tape.sum(tape.tanh(c)));
  EXPECT_EQ(gw, Matrix::Zero(2, 2));
  (void)p;
}

TEST(Tape, ShapeMismatchThrows) {
  Tape<double> tape;
  const Var a = tape.constant(Matrix::Ones(2, 3));
  const Var b = tape.constant(Matrix::Ones(2, 2));
  EXPECT_THROW(tape.add(a, b), std::invalid_argument);
  EXPECT_THROW(tape.matmul(a, a), std::invalid_argument);
}

TEST(Tape, SelectPassesGradientByMask) {
  Tape<double> tape;
  Matrix a = Matrix::Random(2, 2), b = Matrix::Random(2, 2), ga = Matrix::Zero(2, 2), gb = Matrix::Zero(2, 2);
  Matrix mask(2, 2);
  mask << 1, 0, 0, 1;
  const Var va = tape.parameter(a, &ga), vb = tape.parameter(b, &gb);
  tape.backward(tape.sum(tape.select(va, vb, mask)));
  EXPECT_EQ(ga, Matrix::Ones(2, 2) - mask);
  EXPECT_EQ(gb, mask);
}

// One GRU step: loss = sum(h' * c) for a fixed random c, checked against
// central differences on every weight.
TEST(Tape, GruCellMatchesFiniteDifferences) {
  const Eigen::Index in = 3, h = 4, b = 2;
  Rng rng(21);
  const auto random = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-0.8, 0.8);
    return m;
  };
  GruLayer<double> layer{random(3 * h, in), random(2 * h, h), random(h, h), random(3 * h, 1)};
  const Matrix x = random(in, b), h0 = random(h, b), c = random(h, b);

  const auto forward = [&](const GruLayer<double>& l, GruLayer<double>* grads) {
    Tape<double> tape;
    LayerVars lv{tape.parameter(l.w_input, grads ? &grads->w_input : nullptr),
                 tape.parameter(l.w_gates, grads ? &grads->w_gates : nullptr),
                 tape.parameter(l.w_cand, grads ? &grads->w_cand : nullptr),
                 tape.parameter(l.bias, grads ? &grads->bias : nullptr)};
    const Var term = tape.add_bias(tape.matmul(lv.w_input, tape.constant(x)), lv.bias);
    const Var next = gru_step(tape, lv, term, tape.constant(h0), h);
    const Var loss = tape.sum(tape.mul(next, tape.constant(c)));
    const double value = tape.value(loss)(0, 0);
    if (grads) tape.backward(loss);
    return value;
  };

  GruLayer<double> grads{Matrix::Zero(3 * h, in), Matrix::Zero(2 * h, h), Matrix::Zero(h, h), Matrix::Zero(3 * h, 1)};
  forward(layer, &grads);

  const double eps = 1e-6;
  double worst = 0.0;
  Matrix GruLayer<double>::*members[] = {&GruLayer<double>::w_input, &GruLayer<double>::w_gates,
                                         &GruLayer<double>::w_cand, &GruLayer<double>::bias};
  for (auto member : members) {
    for (Eigen::Index i = 0; i < (layer.*member).size(); ++i) {
      GruLayer<double> plus = layer, minus = layer;
      (plus.*member).data()[i] += eps;
      (minus.*member).data()[i] -= eps;
      const double numeric = (forward(plus, nullptr) - forward(minus, nullptr)) / (2 * eps);
      const double analytic = (grads.*member).data()[i];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

}  // namespace
}  // namespace awe
