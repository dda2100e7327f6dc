#ifndef AWE_MATHCORE_TAPE_HPP_
#define AWE_MATHCORE_TAPE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace awe {

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
};

/// Minimal reverse-mode differentiation tape over the primitives the GRU
/// sequence-to-sequence model needs. Values are dense matrices; a batch is
/// laid out one sequence per column.
///
/// Parameters are registered with a gradient sink; backward() adds the
/// accumulated gradient of every parameter leaf into its sink.
template <typename Scalar>
class Tape {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Tape() { nodes_.reserve(4096); }

  Var constant(Matrix value) {
    Node n;
    n.op = Op::kLeaf;
    n.value = std::move(value);
    return push(std::move(n));
  }

  /// Leaf that refers to `value` without copying; it must outlive the tape.
  Var parameter(const Matrix& value, Matrix* grad_sink) {
    Node n;
    n.op = Op::kLeaf;
    n.external = &value;
    n.sink = grad_sink;
    n.needs_grad = true;
    return push(std::move(n));
  }

  Var matmul(Var a, Var b) {
    check_inner(value(a).cols() == value(b).rows(), "matmul");
    Node n = binary(Op::kMatmul, a, b);
    n.value.noalias() = value(a) * value(b);
    return push(std::move(n));
  }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    Node n = binary(Op::kAdd, a, b);
    n.value = value(a) + value(b);
    return push(std::move(n));
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Node n = binary(Op::kSub, a, b);
    n.value = value(a) - value(b);
    return push(std::move(n));
  }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Node n = binary(Op::kMul, a, b);
    n.value = value(a).cwiseProduct(value(b));
    return push(std::move(n));
  }

  /// Adds a column vector to every column of `a`.
  Var add_bias(Var a, Var bias) {
    check_inner(value(bias).cols() == 1 && value(bias).rows() == value(a).rows(), "add_bias");
    Node n = binary(Op::kAddBias, a, bias);
    n.value = value(a).colwise() + value(bias).col(0);
    return push(std::move(n));
  }

  Var sigmoid(Var a) {
    Node n = unary(Op::kSigmoid, a);
    n.value = value(a).unaryExpr([](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); });
    return push(std::move(n));
  }

  Var tanh(Var a) {
    Node n = unary(Op::kTanh, a);
    n.value = value(a).array().tanh().matrix();
    return push(std::move(n));
  }

  /// Rows [start, start + count) of `a`.
  Var rows(Var a, Eigen::Index start, Eigen::Index count) {
    check_inner(start >= 0 && count >= 0 && start + count <= value(a).rows(), "rows");
    Node n = unary(Op::kRows, a);
    n.start = start;
    n.count = count;
    n.value = value(a).middleRows(start, count);
    return push(std::move(n));
  }

  /// Elementwise `mask ? b : a` with a constant 0/1 mask. Exact: unmasked
  /// entries of `a` pass through bit-for-bit.
  Var select(Var a, Var b, const Matrix& mask) {
    check_same(a, b, "select");
    if (mask.rows() != value(a).rows() || mask.cols() != value(a).cols())
      throw std::invalid_argument("Tape::select: mask shape mismatch");
    Node n = binary(Op::kSelect, a, b);
    n.aux = mask;
    n.value = (mask.array() != Scalar(0)).select(value(b), value(a));
    return push(std::move(n));
  }

  Var scale(Var a, Scalar factor) {
    Node n = unary(Op::kScale, a);
    n.factor = factor;
    n.value = value(a) * factor;
    return push(std::move(n));
  }

  /// Sum of all entries, as a 1x1 value.
  Var sum(Var a) {
    Node n = unary(Op::kSum, a);
    n.value = Matrix::Constant(1, 1, value(a).sum());
    return push(std::move(n));
  }

  /// sum(mask .* (pred - target)^2) / normalizer, as a 1x1 value. Entries
  /// where mask is zero contribute neither loss nor gradient.
  Var masked_mse(Var pred, const Matrix& target, const Matrix& mask, Scalar normalizer) {
    const Matrix& p = value(pred);
    if (p.rows() != target.rows() || p.cols() != target.cols() || p.rows() != mask.rows() ||
        p.cols() != mask.cols())
      throw std::invalid_argument("Tape::masked_mse: shape mismatch");
    Node n = unary(Op::kMaskedMse, pred);
    n.factor = normalizer;
    n.aux = mask.cwiseProduct(p - target);
    n.value = Matrix::Constant(1, 1, n.aux.squaredNorm() / normalizer);
    return push(std::move(n));
  }

  const Matrix& value(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    return n.external ? *n.external : n.value;
  }

  /// Gradient of the last backward() target w.r.t. `v` (empty if unreached).
  const Matrix& grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).grad; }

  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a 1x1 output.
  void backward(Var output) {
    const Matrix& out = value(output);
    if (out.rows() != 1 || out.cols() != 1)
      throw std::invalid_argument("Tape::backward: output must be 1x1");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[static_cast<std::size_t>(output.id)].grad = Matrix::Ones(1, 1);

    for (int i = output.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      const Matrix& g = n.grad;
      switch (n.op) {
        case Op::kLeaf:
          if (n.sink) *n.sink += g;
          break;
        case Op::kMatmul:
          if (needs(n.a)) accumulate(n.a, g * value(Var{n.b}).transpose());
          if (needs(n.b)) accumulate(n.b, value(Var{n.a}).transpose() * g);
          break;
        case Op::kAdd:
          if (needs(n.a)) accumulate(n.a, g);
          if (needs(n.b)) accumulate(n.b, g);
          break;
        case Op::kSub:
          if (needs(n.a)) accumulate(n.a, g);
          if (needs(n.b)) accumulate(n.b, -g);
          break;
        case Op::kMul:
          if (needs(n.a)) accumulate(n.a, g.cwiseProduct(value(Var{n.b})));
          if (needs(n.b)) accumulate(n.b, g.cwiseProduct(value(Var{n.a})));
          break;
        case Op::kAddBias:
          if (needs(n.a)) accumulate(n.a, g);
          if (needs(n.b)) accumulate(n.b, g.rowwise().sum());
          break;
        case Op::kSigmoid:
          accumulate(n.a, (g.array() * n.value.array() * (Scalar(1) - n.value.array())).matrix());
          break;
        case Op::kTanh:
          accumulate(n.a, (g.array() * (Scalar(1) - n.value.array().square())).matrix());
          break;
        case Op::kRows: {
          Node& src = nodes_[static_cast<std::size_t>(n.a)];
          if (src.grad.size() == 0) src.grad = Matrix::Zero(value(Var{n.a}).rows(), value(Var{n.a}).cols());
          src.grad.middleRows(n.start, n.count) += g;
          break;
        }
        case Op::kSelect: {
          const auto on = (n.aux.array() != Scalar(0));
          if (needs(n.a)) accumulate(n.a, on.select(Matrix::Zero(g.rows(), g.cols()), g));
          if (needs(n.b)) accumulate(n.b, on.select(g, Matrix::Zero(g.rows(), g.cols())));
          break;
        }
        case Op::kScale:
          accumulate(n.a, g * n.factor);
          break;
        case Op::kSum:
          accumulate(n.a, Matrix::Constant(value(Var{n.a}).rows(), value(Var{n.a}).cols(), g(0, 0)));
          break;
        case Op::kMaskedMse:
          accumulate(n.a, n.aux * (Scalar(2) * g(0, 0) / n.factor));
          break;
      }
    }
  }

 private:
  enum class Op { kLeaf, kMatmul, kAdd, kSub, kMul, kAddBias, kSigmoid, kTanh, kRows, kSelect, kScale, kSum, kMaskedMse };

  struct Node {
    Op op = Op::kLeaf;
    int a = -1;
    int b = -1;
    bool needs_grad = false;
    Eigen::Index start = 0;
    Eigen::Index count = 0;
    Scalar factor = Scalar(1);
    Matrix value;
    Matrix aux;
    Matrix grad;
    const Matrix* external = nullptr;
    Matrix* sink = nullptr;
  };

  Var push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool needs(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  Node unary(Op op, Var a) const {
    Node n;
    n.op = op;
    n.a = a.id;
    n.needs_grad = needs(a.id);
    return n;
  }

  Node binary(Op op, Var a, Var b) const {
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = needs(a.id) || needs(b.id);
    return n;
  }

  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  void check_same(Var a, Var b, const char* what) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
      throw std::invalid_argument(std::string("Tape::") + what + ": shape mismatch");
  }

  static void check_inner(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("Tape::") + what + ": shape mismatch");
  }

  std::vector<Node> nodes_;
};

}  // namespace awe

#endif  // AWE_MATHCORE_TAPE_HPP_
