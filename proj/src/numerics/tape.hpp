#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "numerics/parameter.hpp"
#include "numerics/tensor.hpp"

namespace dvr::num {

enum class OpKind {
  leaf,
  constant,
  matmul,
  add,
  sub,
  mul,
  scale,
  concat,
  slice,
  gather_rows,
  gather_elements,
  transpose,
  tanh,
  sigmoid,
  relu,
  log,
  softmax,
  softmax_cross_entropy,
  sum,
  mean,
  max_pool_over_axis,
  l2_normalize,
};

const char* op_name(OpKind kind);

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
// is alive and not cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

struct BackwardArgs {
  const Tensor& out;
  const Tensor& gout;
  std::span<const Tensor* const> in;
  // Gradient accumulators per input; nullptr for inputs that need no grad.
  std::span<Tensor* const> gin;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

// Reverse-mode tape. Operations are appended in execution order, so the
// tape is topologically sorted by construction. One backward pass per
// recording; clear() starts a new recording.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf bound to a parameter; repeated calls for the same parameter return
  // the same node. Gradients flow into parameter.grad on backward().
  Var leaf(Parameter& p);
  Var constant(Tensor t);

  Var record(OpKind kind, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(OpKind kind, Tensor value, std::span<const Var> inputs, BackwardFn fn);

  // Accumulates d(loss)/d(leaf) into every bound parameter's grad.
  void backward(Var loss);
  void clear();

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].needs_grad; }

 private:
  struct Node {
    OpKind kind = OpKind::constant;
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> leaves_;
  bool consumed_ = false;
};

// Operations. Each checks shapes and throws ShapeError naming the op kind.
Var matmul(Var a, Var b);
// Same-shape elementwise add, or matrix [m x n] + row [1 x n] bias add.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// axis 0 stacks rows, axis 1 joins columns.
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
Var gather_rows(Var a, std::span<const std::size_t> rows);
// Picks a[r][c] for each pair; result has shape [n].
Var gather_elements(Var a, std::span<const std::pair<std::size_t, std::size_t>> coords);
Var transpose(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var log(Var a);
// Row-wise softmax with max subtraction.
Var softmax(Var a);
// Mean over rows of -log softmax(logits[row])[targets[row]].
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> targets);
Var sum(Var a);
Var mean(Var a);
// Max over rows (axis 0, e.g. time) or columns (axis 1); first max wins ties.
Var max_pool_over_axis(Var a, int axis);
// Row-wise division by the L2 norm; a zero row is a NumericError.
Var l2_normalize(Var a);

// Cosine similarity matrix: out[i][j] = cos(a row i, b row j).
Var cosine_matrix(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// Plain (untaped) kernels shared with inference code.
void matmul_into(const Tensor& a, const Tensor& b, Tensor& out);

}  // namespace dvr::num
