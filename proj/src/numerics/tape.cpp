#include "numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "common/error.hpp"

namespace dvr::num {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::constant: return "constant";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::gather_elements: return "gather_elements";
    case OpKind::transpose: return "transpose";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::relu: return "relu";
    case OpKind::log: return "log";
    case OpKind::softmax: return "softmax";
    case OpKind::softmax_cross_entropy: return "softmax_cross_entropy";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::max_pool_over_axis: return "max_pool_over_axis";
    case OpKind::l2_normalize: return "l2_normalize";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (!tape_) throw InvalidArgument("use of an empty Var");
  return tape_->value(id_);
}

Var Tape::leaf(Parameter& p) {
  if (auto it = leaves_.find(&p); it != leaves_.end()) return Var(this, it->second);
  Node n;
  n.kind = OpKind::leaf;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = p.requires_grad;
  nodes_.push_back(std::move(n));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  leaves_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::constant(Tensor t) {
  Node n;
  n.kind = OpKind::constant;
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(OpKind kind, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(kind, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(OpKind kind, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  if (consumed_) throw InvalidArgument("recording on a tape after backward(); call clear() first");
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (in.tape() != this) throw InvalidArgument(std::string(op_name(kind)) + ": input belongs to another tape");
    n.inputs.push_back(in.id());
    n.needs_grad = n.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw InvalidArgument("backward: loss is not on this tape");
  if (consumed_) throw InvalidArgument("backward called twice on the same recording");
  auto& root = nodes_[loss.id()];
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(root.value.shape()));
  }
  consumed_ = true;
  if (!root.needs_grad) return;
  root.grad = Tensor(root.value.shape(), 1.0);

  std::vector<const Tensor*> in_vals;
  std::vector<Tensor*> in_grads;
  for (std::int64_t id = loss.id(); id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.needs_grad || node.grad.size() == 0) continue;
    if (node.kind == OpKind::leaf) {
      auto& g = node.param->grad.data();
      const auto& src = node.grad.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
      continue;
    }
    if (!node.backward) continue;
    in_vals.clear();
    in_grads.clear();
    for (auto in_id : node.inputs) {
      auto& in = nodes_[in_id];
      in_vals.push_back(&in.value);
      if (in.needs_grad) {
        if (in.grad.size() == 0) in.grad = Tensor(in.value.shape(), 0.0);
        in_grads.push_back(&in.grad);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardArgs{node.value, node.grad, in_vals, in_grads});
    // Intermediate grads are no longer needed once propagated.
    node.grad = Tensor();
  }
}

void Tape::clear() {
  nodes_.clear();
  leaves_.clear();
  consumed_ = false;
}

namespace {

[[noreturn]] void shape_fail(OpKind kind, const std::string& detail) {
  throw ShapeError(std::string(op_name(kind)) + ": " + detail);
}

Tape& tape_of(OpKind kind, std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const auto& v : vars) {
    if (!v.valid()) shape_fail(kind, "empty input");
    if (t && v.tape() != t) shape_fail(kind, "inputs live on different tapes");
    t = v.tape();
  }
  return *t;
}

Shape matrix_shape(std::size_t r, std::size_t c) { return Shape{r, c}; }

template <typename F, typename G>
Var unary(OpKind kind, Var a, F fwd, G dfdx) {
  auto& tape = tape_of(kind, {a});
  const auto& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return tape.record(kind, std::move(out), {a}, [dfdx](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    const auto& xin = *args.in[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += args.gout[i] * dfdx(xin[i], args.out[i]);
  });
}

}  // namespace

void matmul_into(const Tensor& a, const Tensor& b, Tensor& out) {
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  std::fill(po, po + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = po + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      if (av == 0.0) continue;
      const double* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

Var matmul(Var a, Var b) {
  auto& tape = tape_of(OpKind::matmul, {a, b});
  const auto& x = a.value();
  const auto& y = b.value();
  if (x.rank() > 2 || y.rank() > 2 || x.cols() != y.rows()) {
    shape_fail(OpKind::matmul, "cannot multiply " + shape_str(x.shape()) + " by " + shape_str(y.shape()));
  }
  Tensor out(matrix_shape(x.rows(), y.cols()));
  matmul_into(x, y, out);
  return tape.record(OpKind::matmul, std::move(out), {a, b}, [](const BackwardArgs& args) {
    const auto& A = *args.in[0];
    const auto& B = *args.in[1];
    const auto& G = args.gout;
    const auto m = A.rows(), k = A.cols(), n = B.cols();
    if (auto* gA = args.gin[0]) {
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data().data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double* brow = B.data().data() + kk * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          (*gA)[i * k + kk] += acc;
        }
      }
    }
    if (auto* gB = args.gin[1]) {
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G.data().data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double av = A[i * k + kk];
          if (av == 0.0) continue;
          double* dst = gB->data().data() + kk * n;
          for (std::size_t j = 0; j < n; ++j) dst[j] += av * grow[j];
        }
      }
    }
  });
}

Var add(Var a, Var b) {
  auto& tape = tape_of(OpKind::add, {a, b});
  const auto& x = a.value();
  const auto& y = b.value();
  if (x.shape() == y.shape()) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return tape.record(OpKind::add, std::move(out), {a, b}, [](const BackwardArgs& args) {
      for (int s = 0; s < 2; ++s) {
        if (auto* g = args.gin[s]) {
          for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += args.gout[i];
        }
      }
    });
  }
  // Bias add: [m x n] + [1 x n] (or rank-1 [n]).
  if (x.rank() <= 2 && y.rows() == 1 && y.rank() <= 2 && y.cols() == x.cols()) {
    const auto m = x.rows(), n = x.cols();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + y[j];
    }
    return tape.record(OpKind::add, std::move(out), {a, b}, [m, n](const BackwardArgs& args) {
      if (auto* g = args.gin[0]) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += args.gout[i];
      }
      if (auto* g = args.gin[1]) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) (*g)[j] += args.gout[i * n + j];
        }
      }
    });
  }
  shape_fail(OpKind::add, "incompatible shapes " + shape_str(x.shape()) + " and " + shape_str(y.shape()) +
                              " (only same-shape or row bias broadcasting is supported)");
}

Var sub(Var a, Var b) {
  auto& tape = tape_of(OpKind::sub, {a, b});
  const auto& x = a.value();
  const auto& y = b.value();
  if (x.shape() != y.shape()) {
    shape_fail(OpKind::sub, "shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return tape.record(OpKind::sub, std::move(out), {a, b}, [](const BackwardArgs& args) {
    if (auto* g = args.gin[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += args.gout[i];
    }
    if (auto* g = args.gin[1]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= args.gout[i];
    }
  });
}

Var mul(Var a, Var b) {
  auto& tape = tape_of(OpKind::mul, {a, b});
  const auto& x = a.value();
  const auto& y = b.value();
  if (x.shape() != y.shape()) {
    shape_fail(OpKind::mul, "shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return tape.record(OpKind::mul, std::move(out), {a, b}, [](const BackwardArgs& args) {
    const auto& X = *args.in[0];
    const auto& Y = *args.in[1];
    if (auto* g = args.gin[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += args.gout[i] * Y[i];
    }
    if (auto* g = args.gin[1]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += args.gout[i] * X[i];
    }
  });
}

Var scale(Var a, double factor) {
  auto& tape = tape_of(OpKind::scale, {a});
  const auto& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  return tape.record(OpKind::scale, std::move(out), {a}, [factor](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += args.gout[i] * factor;
  });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) shape_fail(OpKind::concat, "no inputs");
  if (axis != 0 && axis != 1) shape_fail(OpKind::concat, "axis must be 0 or 1");
  Tape* tape = parts[0].tape();
  for (const auto& p : parts) {
    if (!p.valid() || p.tape() != tape) shape_fail(OpKind::concat, "inputs live on different tapes");
    if (p.value().rank() > 2) shape_fail(OpKind::concat, "rank > 2 input");
  }
  std::vector<std::size_t> extents;
  extents.reserve(parts.size());
  if (axis == 1) {
    const auto rows = parts[0].value().rows();
    std::size_t cols = 0;
    for (const auto& p : parts) {
      if (p.value().rows() != rows) {
        shape_fail(OpKind::concat, "row count mismatch " + std::to_string(rows) + " vs " +
                                       shape_str(p.value().shape()) + " along axis 1");
      }
      extents.push_back(p.value().cols());
      cols += p.value().cols();
    }
    Tensor out(matrix_shape(rows, cols));
    std::size_t off = 0;
    for (const auto& p : parts) {
      const auto& v = p.value();
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(v.data().data() + r * v.cols(), v.cols(), out.data().data() + r * cols + off);
      }
      off += v.cols();
    }
    return tape->record(OpKind::concat, std::move(out), parts, [extents, rows, cols](const BackwardArgs& args) {
      std::size_t off = 0;
      for (std::size_t p = 0; p < extents.size(); ++p) {
        if (auto* g = args.gin[p]) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < extents[p]; ++c) (*g)[r * extents[p] + c] += args.gout[r * cols + off + c];
          }
        }
        off += extents[p];
      }
    });
  }
  const auto cols = parts[0].value().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.value().cols() != cols) {
      shape_fail(OpKind::concat, "column count mismatch " + std::to_string(cols) + " vs " +
                                     shape_str(p.value().shape()) + " along axis 0");
    }
    extents.push_back(p.value().rows());
    rows += p.value().rows();
  }
  std::vector<double> vals;
  vals.reserve(rows * cols);
  for (const auto& p : parts) vals.insert(vals.end(), p.value().data().begin(), p.value().data().end());
  Tensor out(matrix_shape(rows, cols), std::move(vals));
  return tape->record(OpKind::concat, std::move(out), parts, [extents, cols](const BackwardArgs& args) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < extents.size(); ++p) {
      const auto n = extents[p] * cols;
      if (auto* g = args.gin[p]) {
        for (std::size_t i = 0; i < n; ++i) (*g)[i] += args.gout[off + i];
      }
      off += n;
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  auto& tape = tape_of(OpKind::slice, {a});
  const auto& x = a.value();
  if (x.rank() > 2 || (axis != 0 && axis != 1)) shape_fail(OpKind::slice, "expects a matrix and axis 0 or 1");
  const auto rows = x.rows(), cols = x.cols();
  const auto extent = axis == 0 ? rows : cols;
  if (begin >= end || end > extent) {
    shape_fail(OpKind::slice, "range [" + std::to_string(begin) + "," + std::to_string(end) + ") out of bounds for " +
                                  shape_str(x.shape()) + " along axis " + std::to_string(axis));
  }
  if (axis == 0) {
    const auto n = end - begin;
    std::vector<double> vals(x.data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                             x.data().begin() + static_cast<std::ptrdiff_t>(end * cols));
    return tape.record(OpKind::slice, Tensor(matrix_shape(n, cols), std::move(vals)), {a},
                       [begin, cols](const BackwardArgs& args) {
                         auto& g = *args.gin[0];
                         for (std::size_t i = 0; i < args.gout.size(); ++i) g[begin * cols + i] += args.gout[i];
                       });
  }
  const auto w = end - begin;
  Tensor out(matrix_shape(rows, w));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.data().data() + r * cols + begin, w, out.data().data() + r * w);
  }
  return tape.record(OpKind::slice, std::move(out), {a}, [begin, rows, cols, w](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) g[r * cols + begin + c] += args.gout[r * w + c];
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  auto& tape = tape_of(OpKind::gather_rows, {a});
  const auto& x = a.value();
  if (rows.empty()) shape_fail(OpKind::gather_rows, "empty row list");
  const auto cols = x.cols();
  Tensor out(matrix_shape(rows.size(), cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows()) {
      shape_fail(OpKind::gather_rows,
                 "row " + std::to_string(rows[i]) + " out of range for " + shape_str(x.shape()));
    }
    std::copy_n(x.data().data() + rows[i] * cols, cols, out.data().data() + i * cols);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape.record(OpKind::gather_rows, std::move(out), {a}, [idx = std::move(idx), cols](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = g.data().data() + idx[i] * cols;
      const double* src = args.gout.data().data() + i * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var gather_elements(Var a, std::span<const std::pair<std::size_t, std::size_t>> coords) {
  auto& tape = tape_of(OpKind::gather_elements, {a});
  const auto& x = a.value();
  if (coords.empty()) shape_fail(OpKind::gather_elements, "empty coordinate list");
  const auto cols = x.cols();
  std::vector<std::size_t> flat;
  flat.reserve(coords.size());
  Tensor out(Shape{coords.size()});
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto [r, c] = coords[i];
    if (r >= x.rows() || c >= cols) {
      shape_fail(OpKind::gather_elements, "coordinate (" + std::to_string(r) + "," + std::to_string(c) +
                                              ") out of range for " + shape_str(x.shape()));
    }
    flat.push_back(r * cols + c);
    out[i] = x[r * cols + c];
  }
  return tape.record(OpKind::gather_elements, std::move(out), {a}, [flat = std::move(flat)](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    for (std::size_t i = 0; i < flat.size(); ++i) g[flat[i]] += args.gout[i];
  });
}

Var transpose(Var a) {
  auto& tape = tape_of(OpKind::transpose, {a});
  const auto& x = a.value();
  if (x.rank() > 2) shape_fail(OpKind::transpose, "expects rank <= 2");
  const auto m = x.rows(), n = x.cols();
  Tensor out(matrix_shape(n, m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  }
  return tape.record(OpKind::transpose, std::move(out), {a}, [m, n](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += args.gout[j * m + i];
    }
  });
}

Var tanh(Var a) {
  return unary(
      OpKind::tanh, a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      OpKind::sigmoid, a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      OpKind::relu, a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var log(Var a) {
  return unary(
      OpKind::log, a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softmax(Var a) {
  auto& tape = tape_of(OpKind::softmax, {a});
  const auto& x = a.value();
  if (x.rank() > 2) shape_fail(OpKind::softmax, "expects rank <= 2");
  const auto m = x.rows(), n = x.cols();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = x.row_span(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return tape.record(OpKind::softmax, std::move(out), {a}, [m, n](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += args.gout[i * n + j] * args.out[i * n + j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += args.out[i * n + j] * (args.gout[i * n + j] - dot);
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> targets) {
  auto& tape = tape_of(OpKind::softmax_cross_entropy, {logits});
  const auto& x = logits.value();
  const auto m = x.rows(), n = x.cols();
  if (x.rank() > 2 || targets.size() != m) {
    shape_fail(OpKind::softmax_cross_entropy, "logits " + shape_str(x.shape()) + " with " +
                                                  std::to_string(targets.size()) + " targets");
  }
  Tensor probs(matrix_shape(m, n));
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (targets[i] >= n) {
      shape_fail(OpKind::softmax_cross_entropy,
                 "target " + std::to_string(targets[i]) + " out of range for " + std::to_string(n) + " classes");
    }
    const auto row = x.row_span(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      probs[i * n + j] = std::exp(row[j] - mx);
      z += probs[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= z;
    loss += -(row[targets[i]] - mx - std::log(z));
  }
  loss /= static_cast<double>(m);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return tape.record(OpKind::softmax_cross_entropy, Tensor::scalar(loss), {logits},
                     [probs = std::move(probs), tg = std::move(tg), m, n](const BackwardArgs& args) {
                       auto& g = *args.gin[0];
                       const double s = args.gout[0] / static_cast<double>(m);
                       for (std::size_t i = 0; i < m; ++i) {
                         for (std::size_t j = 0; j < n; ++j) {
                           const double onehot = j == tg[i] ? 1.0 : 0.0;
                           g[i * n + j] += s * (probs[i * n + j] - onehot);
                         }
                       }
                     });
}

Var sum(Var a) {
  auto& tape = tape_of(OpKind::sum, {a});
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return tape.record(OpKind::sum, Tensor::scalar(s), {a}, [](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += args.gout[0];
  });
}

Var mean(Var a) {
  auto& tape = tape_of(OpKind::mean, {a});
  const auto n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return tape.record(OpKind::mean, Tensor::scalar(s / n), {a}, [n](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += args.gout[0] / n;
  });
}

Var max_pool_over_axis(Var a, int axis) {
  auto& tape = tape_of(OpKind::max_pool_over_axis, {a});
  const auto& x = a.value();
  if (x.rank() > 2 || (axis != 0 && axis != 1)) shape_fail(OpKind::max_pool_over_axis, "expects a matrix, axis 0 or 1");
  const auto m = x.rows(), n = x.cols();
  std::vector<std::size_t> arg;
  Tensor out;
  if (axis == 0) {
    out = Tensor(matrix_shape(1, n));
    arg.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      arg[j] = j;
      double best = x[j];
      for (std::size_t i = 1; i < m; ++i) {
        if (x[i * n + j] > best) {
          best = x[i * n + j];
          arg[j] = i * n + j;
        }
      }
      out[j] = best;
    }
  } else {
    out = Tensor(matrix_shape(m, 1));
    arg.assign(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t best_j = 0;
      for (std::size_t j = 1; j < n; ++j) {
        if (x[i * n + j] > x[i * n + best_j]) best_j = j;
      }
      arg[i] = i * n + best_j;
      out[i] = x[arg[i]];
    }
  }
  return tape.record(OpKind::max_pool_over_axis, std::move(out), {a}, [arg = std::move(arg)](const BackwardArgs& args) {
    auto& g = *args.gin[0];
    for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += args.gout[i];
  });
}

Var l2_normalize(Var a) {
  auto& tape = tape_of(OpKind::l2_normalize, {a});
  const auto& x = a.value();
  if (x.rank() > 2) shape_fail(OpKind::l2_normalize, "expects rank <= 2");
  const auto m = x.rows(), n = x.cols();
  Tensor out(x.shape());
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += x[i * n + j] * x[i * n + j];
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 0.0)) throw NumericError("l2_normalize: zero-norm row " + std::to_string(i));
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] / norms[i];
  }
  return tape.record(OpKind::l2_normalize, std::move(out), {a},
                     [norms = std::move(norms), m, n](const BackwardArgs& args) {
                       auto& g = *args.gin[0];
                       for (std::size_t i = 0; i < m; ++i) {
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) dot += args.out[i * n + j] * args.gout[i * n + j];
                         for (std::size_t j = 0; j < n; ++j) {
                           g[i * n + j] += (args.gout[i * n + j] - args.out[i * n + j] * dot) / norms[i];
                         }
                       }
                     });
}

Var cosine_matrix(Var a, Var b) { return matmul(l2_normalize(a), transpose(l2_normalize(b))); }

}  // namespace dvr::num
