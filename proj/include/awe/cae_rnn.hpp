#ifndef AWE_CAE_RNN_HPP_
#define AWE_CAE_RNN_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "awe/frontend.hpp"
#include "awe/mathcore/rng.hpp"
#include "awe/mathcore/tape.hpp"

namespace awe {

struct Architecture {
  int input_dim = 13;
  int hidden = 400;
  int layers = 3;
  int embedding_dim = 130;

  static Architecture paper() { return {13, 400, 3, 130}; }
  static Architecture desk() { return {13, 64, 2, 32}; }

  void validate() const {
    if (input_dim < 1 || hidden < 1 || layers < 1 || embedding_dim < 1)
      throw std::invalid_argument("architecture sizes must be positive");
  }
  bool operator==(const Architecture&) const = default;
};

/// One GRU layer. Gate blocks are stacked in the order update, reset,
/// candidate:
///   z = sigmoid(Wz x + Uz h + bz),  r = sigmoid(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r .* h) + bn),  h' = (1 - z) .* n + z .* h
template <typename Scalar>
struct GruLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix w_input;  // 3H x I  [Wz; Wr; Wn]
  Matrix w_gates;  // 2H x H  [Uz; Ur]
  Matrix w_cand;   // H x H   Un
  Matrix bias;     // 3H x 1  [bz; br; bn]
};

/// Encoder GRU stack -> linear projection to the embedding; decoder GRU
/// stack fed the embedding at every step -> linear head to a frame.
///
/// Inputs are standardized with (x - input_shift) .* input_scale before the
/// encoder, and decoder outputs live in the same standardized space.
/// Tensor order (also the parameter file order): encoder layers (w_input,
/// w_gates, w_cand, bias), projection weight, projection bias, decoder
/// layers, head weight, head bias.
template <typename Scalar>
struct CaeRnnParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Architecture arch;
  Vector input_shift;
  Vector input_scale;
  std::vector<GruLayer<Scalar>> encoder;
  Matrix proj_w;  // E x H
  Matrix proj_b;  // E x 1
  std::vector<GruLayer<Scalar>> decoder;
  Matrix head_w;  // D x H
  Matrix head_b;  // D x 1

  static CaeRnnParams zeros(const Architecture& arch) {
    arch.validate();
    CaeRnnParams p;
    p.arch = arch;
    const int h = arch.hidden;
    p.input_shift = Vector::Zero(arch.input_dim);
    p.input_scale = Vector::Ones(arch.input_dim);
    auto layer = [h](int in) {
      GruLayer<Scalar> g;
      g.w_input = Matrix::Zero(3 * h, in);
      g.w_gates = Matrix::Zero(2 * h, h);
      g.w_cand = Matrix::Zero(h, h);
      g.bias = Matrix::Zero(3 * h, 1);
      return g;
    };
    for (int l = 0; l < arch.layers; ++l) p.encoder.push_back(layer(l == 0 ? arch.input_dim : h));
    p.proj_w = Matrix::Zero(arch.embedding_dim, h);
    p.proj_b = Matrix::Zero(arch.embedding_dim, 1);
    for (int l = 0; l < arch.layers; ++l) p.decoder.push_back(layer(l == 0 ? arch.embedding_dim : h));
    p.head_w = Matrix::Zero(arch.input_dim, h);
    p.head_b = Matrix::Zero(arch.input_dim, 1);
    return p;
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per matrix, fan_in being
  /// its column count (H for biases).
  static CaeRnnParams initialize(const Architecture& arch, std::uint64_t seed) {
    CaeRnnParams p = zeros(arch);
    Rng rng(seed);
    for (Matrix* m : p.tensors()) {
      const double fan_in = m->cols() == 1 ? arch.hidden : static_cast<double>(m->cols());
      const double bound = 1.0 / std::sqrt(fan_in);
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
    return p;
  }

  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out;
    auto add_layers = [&out](std::vector<GruLayer<Scalar>>& layers) {
      for (auto& g : layers) out.insert(out.end(), {&g.w_input, &g.w_gates, &g.w_cand, &g.bias});
    };
    add_layers(encoder);
    out.insert(out.end(), {&proj_w, &proj_b});
    add_layers(decoder);
    out.insert(out.end(), {&head_w, &head_b});
    return out;
  }

  std::vector<const Matrix*> tensors() const {
    auto mut = const_cast<CaeRnnParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const Matrix* m : tensors()) n += m->size();
    return n;
  }

  bool all_finite() const {
    for (const Matrix* m : tensors())
      if (!m->allFinite()) return false;
    return input_shift.allFinite() && input_scale.allFinite();
  }

  void set_zero() {
    for (Matrix* m : tensors()) m->setZero();
  }

  bool operator==(const CaeRnnParams& o) const {
    if (!(arch == o.arch) || input_shift != o.input_shift || input_scale != o.input_scale) return false;
    auto a = tensors();
    auto b = o.tensors();
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols() || *a[i] != *b[i]) return false;
    return true;
  }
};

/// Parameters registered on a tape.
struct LayerVars {
  Var w_input, w_gates, w_cand, bias;
};

struct ParamVars {
  std::vector<LayerVars> encoder;
  Var proj_w, proj_b;
  std::vector<LayerVars> decoder;
  Var head_w, head_b;
};

/// Registers all parameters as tape leaves. `grads`, when given, must have
/// the same shapes and receives the gradients on backward().
template <typename Scalar>
ParamVars register_params(Tape<Scalar>& tape, const CaeRnnParams<Scalar>& params,
                          CaeRnnParams<Scalar>* grads = nullptr) {
  auto values = params.tensors();
  std::vector<typename CaeRnnParams<Scalar>::Matrix*> sinks(values.size(), nullptr);
  if (grads) sinks = grads->tensors();
  std::vector<Var> vars;
  for (std::size_t i = 0; i < values.size(); ++i) vars.push_back(tape.parameter(*values[i], sinks[i]));

  ParamVars pv;
  std::size_t k = 0;
  auto take_layers = [&](std::vector<LayerVars>& out) {
    for (int l = 0; l < params.arch.layers; ++l) {
      out.push_back({vars[k], vars[k + 1], vars[k + 2], vars[k + 3]});
      k += 4;
    }
  };
  take_layers(pv.encoder);
  pv.proj_w = vars[k++];
  pv.proj_b = vars[k++];
  take_layers(pv.decoder);
  pv.head_w = vars[k++];
  pv.head_b = vars[k++];
  return pv;
}

/// One GRU update given the precomputed input term W x + b (3H x B).
template <typename Scalar>
Var gru_step(Tape<Scalar>& tape, const LayerVars& layer, Var input_term, Var h, Eigen::Index hidden) {
  const Var zr = tape.sigmoid(tape.add(tape.rows(input_term, 0, 2 * hidden), tape.matmul(layer.w_gates, h)));
  const Var z = tape.rows(zr, 0, hidden);
  const Var r = tape.rows(zr, hidden, hidden);
  const Var n = tape.tanh(tape.add(tape.rows(input_term, 2 * hidden, hidden), tape.matmul(layer.w_cand, tape.mul(r, h))));
  return tape.add(n, tape.mul(z, tape.sub(h, n)));
}

/// Standardized input frames of a batch, padded to the longest sequence.
template <typename Scalar>
struct PaddedBatch {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Matrix> steps;  // per time step, D x B (zeros past each length)
  std::vector<Eigen::Index> lengths;

  Eigen::Index batch_size() const { return static_cast<Eigen::Index>(lengths.size()); }
  Eigen::Index max_length() const { return static_cast<Eigen::Index>(steps.size()); }

  static PaddedBatch build(const CaeRnnParams<Scalar>& params, std::span<const FrameMatrix* const> seqs) {
    PaddedBatch b;
    Eigen::Index max_t = 0;
    for (const auto* s : seqs) {
      if (s->cols() != params.arch.input_dim)
        throw std::invalid_argument("frame dimension " + std::to_string(s->cols()) + " does not match model input " +
                                    std::to_string(params.arch.input_dim));
      if (s->rows() < 1) throw std::invalid_argument("empty frame sequence");
      b.lengths.push_back(s->rows());
      max_t = std::max(max_t, s->rows());
    }
    const auto n = static_cast<Eigen::Index>(seqs.size());
    b.steps.assign(static_cast<std::size_t>(max_t), Matrix::Zero(params.arch.input_dim, n));
    for (Eigen::Index j = 0; j < n; ++j) {
      const FrameMatrix& f = *seqs[static_cast<std::size_t>(j)];
      for (Eigen::Index t = 0; t < f.rows(); ++t)
        b.steps[static_cast<std::size_t>(t)].col(j) =
            (f.row(t).transpose().template cast<Scalar>() - params.input_shift).cwiseProduct(params.input_scale);
    }
    return b;
  }

  /// rows x B matrix with ones where step t is inside the sequence.
  Matrix mask(Eigen::Index t, Eigen::Index rows) const {
    Matrix m(rows, batch_size());
    for (Eigen::Index j = 0; j < batch_size(); ++j)
      m.col(j).setConstant(t < lengths[static_cast<std::size_t>(j)] ? Scalar(1) : Scalar(0));
    return m;
  }
};

/// Runs the encoder over a padded batch from zero states; returns the
/// embeddings (E x B). Padded steps leave a column's state untouched.
template <typename Scalar>
Var encode_batch(Tape<Scalar>& tape, const ParamVars& pv, const CaeRnnParams<Scalar>& params,
                 const PaddedBatch<Scalar>& batch) {
  using Matrix = typename CaeRnnParams<Scalar>::Matrix;
  const Eigen::Index h = params.arch.hidden;
  const Eigen::Index b = batch.batch_size();
  std::vector<Var> state(static_cast<std::size_t>(params.arch.layers), tape.constant(Matrix::Zero(h, b)));
  for (Eigen::Index t = 0; t < batch.max_length(); ++t) {
    const Matrix mask = batch.mask(t, h);
    Var input = tape.constant(batch.steps[static_cast<std::size_t>(t)]);
    for (std::size_t l = 0; l < state.size(); ++l) {
      const LayerVars& lv = pv.encoder[l];
      const Var term = tape.add_bias(tape.matmul(lv.w_input, input), lv.bias);
      const Var next = gru_step(tape, lv, term, state[l], h);
      state[l] = tape.select(state[l], next, mask);
      input = state[l];
    }
  }
  return tape.add_bias(tape.matmul(pv.proj_w, state.back()), pv.proj_b);
}

/// Unrolls the decoder for n_steps with the embedding as input at every
/// step; returns one standardized D x B output per step.
template <typename Scalar>
std::vector<Var> decode_batch(Tape<Scalar>& tape, const ParamVars& pv, const CaeRnnParams<Scalar>& params,
                              Var embedding, Eigen::Index n_steps) {
  using Matrix = typename CaeRnnParams<Scalar>::Matrix;
  if (n_steps < 1) throw std::invalid_argument("decode: n_steps must be >= 1");
  const Eigen::Index h = params.arch.hidden;
  const Eigen::Index b = tape.value(embedding).cols();
  std::vector<Var> state(static_cast<std::size_t>(params.arch.layers), tape.constant(Matrix::Zero(h, b)));
  const Var first_term = tape.add_bias(tape.matmul(pv.decoder[0].w_input, embedding), pv.decoder[0].bias);
  std::vector<Var> outputs;
  for (Eigen::Index t = 0; t < n_steps; ++t) {
    for (std::size_t l = 0; l < state.size(); ++l) {
      const LayerVars& lv = pv.decoder[l];
      const Var term = l == 0 ? first_term : tape.add_bias(tape.matmul(lv.w_input, state[l - 1]), lv.bias);
      state[l] = gru_step(tape, lv, term, state[l], h);
    }
    outputs.push_back(tape.add_bias(tape.matmul(pv.head_w, state.back()), pv.head_b));
  }
  return outputs;
}

/// Embedding of one frame sequence.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> encode(const CaeRnnParams<Scalar>& params, const FrameMatrix& frames) {
  Tape<Scalar> tape;
  const ParamVars pv = register_params(tape, params);
  const FrameMatrix* seqs[] = {&frames};
  const auto batch = PaddedBatch<Scalar>::build(params, seqs);
  return tape.value(encode_batch(tape, pv, params, batch)).col(0);
}

/// Reconstructed frames (n_steps x D) in the original feature scale.
template <typename Scalar>
FrameMatrix decode(const CaeRnnParams<Scalar>& params, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& embedding,
                   Eigen::Index n_steps) {
  if (embedding.size() != params.arch.embedding_dim)
    throw std::invalid_argument("decode: embedding dimension does not match the model");
  Tape<Scalar> tape;
  const ParamVars pv = register_params(tape, params);
  const Var e = tape.constant(embedding);
  const auto outs = decode_batch(tape, pv, params, e, n_steps);
  FrameMatrix frames(n_steps, params.arch.input_dim);
  for (Eigen::Index t = 0; t < n_steps; ++t) {
    const auto& y = tape.value(outs[static_cast<std::size_t>(t)]).col(0);
    frames.row(t) = (y.cwiseQuotient(params.input_scale) + params.input_shift).transpose().template cast<float>();
  }
  return frames;
}

/// Mean squared error over frames and coefficients. Throws on shape mismatch.
double reconstruction_loss(const FrameMatrix& predicted, const FrameMatrix& target);

}  // namespace awe

#endif  // AWE_CAE_RNN_HPP_
