#include "spe/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spe/errors.hpp"

namespace spe {

namespace {

const char* op_name(OpId op) {
  switch (op) {
    case OpId::kLeaf: return "leaf";
    case OpId::kConstant: return "constant";
    case OpId::kAdd: return "add";
    case OpId::kSub: return "sub";
    case OpId::kMul: return "mul";
    case OpId::kHadamard: return "hadamard";
    case OpId::kReciprocal: return "reciprocal";
    case OpId::kMatMul: return "matmul";
    case OpId::kExp: return "exp";
    case OpId::kLog: return "log";
    case OpId::kSoftplus: return "softplus";
    case OpId::kRelu: return "relu";
    case OpId::kSqrt: return "sqrt";
    case OpId::kSquare: return "square";
    case OpId::kSum: return "sum";
    case OpId::kBroadcast: return "broadcast";
    case OpId::kConcat: return "concat";
    case OpId::kSlice: return "slice";
    case OpId::kLogSumExp: return "log_sum_exp";
    case OpId::kReshape: return "reshape";
    case OpId::kGatherRows: return "gather_rows";
  }
  return "?";
}

Tape& tape_of(const Var& v) {
  if (v.tape() == nullptr) throw std::logic_error("Var is not attached to a tape");
  return *v.tape();
}

Tape& common_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw std::logic_error("Vars belong to different tapes");
  return tape_of(a);
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 operand, got " + shape_string(t.shape()));
  }
}

// Broadcast-compatible result shape for an elementwise binary op.
std::vector<std::size_t> broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_matrix(a, op);
  require_matrix(b, op);
  std::vector<std::size_t> out(2);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    const auto ea = a.shape()[axis];
    const auto eb = b.shape()[axis];
    if (ea == eb || eb == 1) {
      out[axis] = ea;
    } else if (ea == 1) {
      out[axis] = eb;
    } else {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_string(a.shape()) + " with " +
                           shape_string(b.shape()));
    }
  }
  return out;
}

// Reads t as if broadcast to [rows, cols].
inline double at_broadcast(const Tensor& t, std::size_t r, std::size_t c) {
  const auto tr = t.shape()[0];
  const auto tc = t.shape()[1];
  return t[(tr == 1 ? 0 : r) * tc + (tc == 1 ? 0 : c)];
}

Tensor expand(const Tensor& t, std::size_t rows, std::size_t cols) {
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = at_broadcast(t, r, c);
  }
  return out;
}

// Sums a gradient of shape [R,C] down to a broadcast operand's shape.
Tensor reduce_to(const Tensor& g, const std::vector<std::size_t>& shape) {
  if (g.shape() == shape) return g;
  Tensor out(shape, 0.0);
  const auto rows = g.rows();
  const auto cols = g.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[(shape[0] == 1 ? 0 : r) * shape[1] + (shape[1] == 1 ? 0 : c)] += g(r, c);
    }
  }
  return out;
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const std::vector<std::size_t>& shape, F f) {
  Tensor out(shape);
  for (std::size_t r = 0; r < shape[0]; ++r) {
    for (std::size_t c = 0; c < shape[1]; ++c) out(r, c) = f(at_broadcast(a, r, c), at_broadcast(b, r, c));
  }
  return out;
}

// C = A * B with optional transposes, i-k-j loop order.
Tensor gemm(const Tensor& a, bool ta, const Tensor& b, bool tb) {
  const auto m = ta ? a.cols() : a.rows();
  const auto k = ta ? a.rows() : a.cols();
  const auto kb = tb ? b.cols() : b.rows();
  const auto n = tb ? b.rows() : b.cols();
  if (k != kb) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out = Tensor::zeros(m, n);
  const auto a_cols = a.cols();
  const auto b_cols = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = &out(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ta ? a[p * a_cols + i] : a[i * a_cols + p];
      if (av == 0.0) continue;
      if (!tb) {
        const double* brow = b.data().data() + p * b_cols;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * b[j * b_cols + p];
      }
    }
  }
  return out;
}

double softplus_value(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_positive(const Tensor& t, const char* op) {
  for (double v : t.data()) {
    if (!(v > 0.0)) throw NumericalError(std::string(op) + ": non-positive input " + std::to_string(v));
  }
}

Var unary(OpId op, const Var& a, Tensor value) {
  TapeNode node;
  node.op = op;
  node.parents = {a.id()};
  node.value = std::move(value);
  return tape_of(a).record(std::move(node));
}

Var binary(OpId op, const Var& a, const Var& b, Tensor value) {
  Tape& tape = common_tape(a, b);
  TapeNode node;
  node.op = op;
  node.parents = {a.id(), b.id()};
  node.value = std::move(value);
  return tape.record(std::move(node));
}

void accumulate(std::vector<Tensor>& grads, std::size_t id, Tensor g) {
  if (grads[id].empty()) {
    grads[id] = std::move(g);
    return;
  }
  auto dst = grads[id].data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

const Tensor& Var::value() const { return tape_of(*this).value(id_); }

Var Tape::leaf(Tensor value) {
  TapeNode node;
  node.op = OpId::kLeaf;
  node.value = std::move(value);
  node.requires_grad = true;
  return record(std::move(node));
}

Var Tape::constant(Tensor value) {
  TapeNode node;
  node.op = OpId::kConstant;
  node.value = std::move(value);
  return record(std::move(node));
}

Var Tape::record(TapeNode node) {
  if (consumed_) throw std::logic_error("tape already consumed by backward()");
  if (!node.value.all_finite()) {
    throw NumericalError(std::string("non-finite result in ") + op_name(node.op) + " of shape " +
                         shape_string(node.value.shape()));
  }
  for (auto p : node.parents) node.requires_grad = node.requires_grad || nodes_[p].requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw std::logic_error("loss belongs to a different tape");
  if (consumed_) throw std::logic_error("tape already consumed by backward()");
  if (nodes_[loss.id()].value.size() != 1) {
    throw DimensionError("backward requires a scalar loss, got " + shape_string(nodes_[loss.id()].value.shape()));
  }
  consumed_ = true;
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id()] = Tensor(nodes_[loss.id()].value.shape(), 1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (grads[id].empty() || !nodes_[id].requires_grad) continue;
    if (nodes_[id].op == OpId::kLeaf) continue;
    backprop_node(id, grads);
    if (id != loss.id()) grads[id] = Tensor();
  }
  std::vector<Tensor> leaves(nodes_.size());
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].op != OpId::kLeaf) continue;
    leaves[id] = grads[id].empty() ? Tensor(nodes_[id].value.shape(), 0.0) : std::move(grads[id]);
  }
  return Gradients(std::move(leaves));
}

void Tape::backprop_node(std::size_t id, std::vector<Tensor>& grads) const {
  const TapeNode& n = nodes_[id];
  const Tensor& g = grads[id];
  auto wants = [&](std::size_t k) { return nodes_[n.parents[k]].requires_grad; };
  auto parent = [&](std::size_t k) -> const Tensor& { return nodes_[n.parents[k]].value; };
  auto send = [&](std::size_t k, Tensor t) { accumulate(grads, n.parents[k], std::move(t)); };

  switch (n.op) {
    case OpId::kLeaf:
    case OpId::kConstant:
      break;
    case OpId::kAdd:
      if (wants(0)) send(0, reduce_to(g, parent(0).shape()));
      if (wants(1)) send(1, reduce_to(g, parent(1).shape()));
      break;
    case OpId::kSub:
      if (wants(0)) send(0, reduce_to(g, parent(0).shape()));
      if (wants(1)) send(1, reduce_to(map(g, [](double v) { return -v; }), parent(1).shape()));
      break;
    case OpId::kHadamard:
      if (wants(0)) send(0, reduce_to(zip(g, parent(1), g.shape(), std::multiplies<>()), parent(0).shape()));
      if (wants(1)) send(1, reduce_to(zip(g, parent(0), g.shape(), std::multiplies<>()), parent(1).shape()));
      break;
    case OpId::kMul: {
      const double k = n.scalar;
      send(0, map(g, [k](double v) { return k * v; }));
      break;
    }
    case OpId::kReciprocal:
      send(0, zip(g, n.value, g.shape(), [](double gv, double y) { return -gv * y * y; }));
      break;
    case OpId::kMatMul:
      if (wants(0)) send(0, gemm(g, false, parent(1), true));
      if (wants(1)) send(1, gemm(parent(0), true, g, false));
      break;
    case OpId::kExp:
      send(0, zip(g, n.value, g.shape(), std::multiplies<>()));
      break;
    case OpId::kLog:
      send(0, zip(g, parent(0), g.shape(), std::divides<>()));
      break;
    case OpId::kSoftplus:
      send(0, zip(g, parent(0), g.shape(), [](double gv, double x) { return gv * sigmoid(x); }));
      break;
    case OpId::kRelu:
      send(0, zip(g, parent(0), g.shape(), [](double gv, double x) { return x > 0.0 ? gv : 0.0; }));
      break;
    case OpId::kSqrt:
      send(0, zip(g, n.value, g.shape(), [](double gv, double y) { return 0.5 * gv / y; }));
      break;
    case OpId::kSquare:
      send(0, zip(g, parent(0), g.shape(), [](double gv, double x) { return 2.0 * gv * x; }));
      break;
    case OpId::kSum:
    case OpId::kBroadcast: {
      // Sum and broadcast are adjoint: each routes g to the other's shape.
      const auto& in = parent(0).shape();
      if (n.op == OpId::kSum) {
        send(0, expand(g, in[0], in[1]));
      } else {
        send(0, reduce_to(g, in));
      }
      break;
    }
    case OpId::kConcat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        const Tensor& part = parent(k);
        const auto pr = part.rows();
        const auto pc = part.cols();
        if (wants(k)) {
          Tensor piece({pr, pc});
          for (std::size_t r = 0; r < pr; ++r) {
            for (std::size_t c = 0; c < pc; ++c) {
              piece(r, c) = n.axis == 0 ? g(offset + r, c) : g(r, offset + c);
            }
          }
          send(k, std::move(piece));
        }
        offset += n.axis == 0 ? pr : pc;
      }
      break;
    }
    case OpId::kSlice: {
      Tensor full(parent(0).shape(), 0.0);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
          if (n.axis == 0) {
            full(n.begin + r, c) = g(r, c);
          } else {
            full(r, n.begin + c) = g(r, c);
          }
        }
      }
      send(0, std::move(full));
      break;
    }
    case OpId::kLogSumExp: {
      const Tensor& x = parent(0);
      Tensor out(x.shape());
      for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
          const double y = n.axis == 0 ? n.value(0, c) : n.value(r, 0);
          const double gv = n.axis == 0 ? g(0, c) : g(r, 0);
          out(r, c) = gv * std::exp(x(r, c) - y);
        }
      }
      send(0, std::move(out));
      break;
    }
    case OpId::kReshape:
      send(0, Tensor(parent(0).shape(), std::vector<double>(g.data().begin(), g.data().end())));
      break;
    case OpId::kGatherRows: {
      const Tensor& x = parent(0);
      Tensor out(x.shape(), 0.0);
      const auto cols = x.cols();
      for (std::size_t i = 0; i < n.indices.size(); ++i) {
        for (std::size_t c = 0; c < cols; ++c) out(n.indices[i], c) += g(i, c);
      }
      send(0, std::move(out));
      break;
    }
  }
}

Var add(const Var& a, const Var& b) {
  const auto shape = broadcast_shape(a.value(), b.value(), "add");
  return binary(OpId::kAdd, a, b, zip(a.value(), b.value(), shape, std::plus<>()));
}

Var sub(const Var& a, const Var& b) {
  const auto shape = broadcast_shape(a.value(), b.value(), "sub");
  return binary(OpId::kSub, a, b, zip(a.value(), b.value(), shape, std::minus<>()));
}

Var hadamard(const Var& a, const Var& b) {
  const auto shape = broadcast_shape(a.value(), b.value(), "hadamard");
  return binary(OpId::kHadamard, a, b, zip(a.value(), b.value(), shape, std::multiplies<>()));
}

Var mul(const Var& a, double factor) {
  TapeNode node;
  node.op = OpId::kMul;
  node.parents = {a.id()};
  node.value = map(a.value(), [factor](double v) { return factor * v; });
  node.scalar = factor;
  return tape_of(a).record(std::move(node));
}

Var reciprocal(const Var& a) {
  require_positive(a.value(), "reciprocal");
  return unary(OpId::kReciprocal, a, map(a.value(), [](double v) { return 1.0 / v; }));
}

Var matmul(const Var& a, const Var& b) {
  require_matrix(a.value(), "matmul");
  require_matrix(b.value(), "matmul");
  return binary(OpId::kMatMul, a, b, gemm(a.value(), false, b.value(), false));
}

Var exp(const Var& a) { return unary(OpId::kExp, a, map(a.value(), [](double v) { return std::exp(v); })); }

Var log(const Var& a) {
  require_positive(a.value(), "log");
  return unary(OpId::kLog, a, map(a.value(), [](double v) { return std::log(v); }));
}

Var softplus(const Var& a) { return unary(OpId::kSoftplus, a, map(a.value(), softplus_value)); }

Var relu(const Var& a) {
  return unary(OpId::kRelu, a, map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }));
}

Var sqrt(const Var& a) {
  require_positive(a.value(), "sqrt");
  return unary(OpId::kSqrt, a, map(a.value(), [](double v) { return std::sqrt(v); }));
}

Var square(const Var& a) { return unary(OpId::kSquare, a, map(a.value(), [](double v) { return v * v; })); }

Var sum(const Var& a) {
  require_matrix(a.value(), "sum");
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return unary(OpId::kSum, a, Tensor::scalar(total));
}

Var sum(const Var& a, std::size_t axis) {
  const Tensor& x = a.value();
  require_matrix(x, "sum");
  if (axis > 1) throw DimensionError("sum: axis must be 0 or 1");
  Tensor out = axis == 0 ? Tensor::zeros(1, x.cols()) : Tensor::zeros(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out[axis == 0 ? c : r] += x(r, c);
  }
  return unary(OpId::kSum, a, std::move(out));
}

Var broadcast(const Var& a, std::size_t rows, std::size_t cols) {
  const Tensor& x = a.value();
  require_matrix(x, "broadcast");
  if ((x.rows() != rows && x.rows() != 1) || (x.cols() != cols && x.cols() != 1)) {
    throw DimensionError("broadcast: cannot expand " + shape_string(x.shape()) + " to [" + std::to_string(rows) +
                         "," + std::to_string(cols) + "]");
  }
  return unary(OpId::kBroadcast, a, expand(x, rows, cols));
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  if (axis > 1) throw DimensionError("concat: axis must be 0 or 1");
  Tape& tape = tape_of(parts.front());
  const auto fixed = parts.front().value().shape()[1 - axis];
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.tape() != &tape) throw std::logic_error("Vars belong to different tapes");
    require_matrix(p.value(), "concat");
    if (p.value().shape()[1 - axis] != fixed) throw DimensionError("concat: mismatched extents");
    total += p.value().shape()[axis];
  }
  Tensor out = axis == 0 ? Tensor::zeros(total, fixed) : Tensor::zeros(fixed, total);
  std::size_t offset = 0;
  TapeNode node;
  for (const auto& p : parts) {
    const Tensor& x = p.value();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) {
        if (axis == 0) {
          out(offset + r, c) = x(r, c);
        } else {
          out(r, offset + c) = x(r, c);
        }
      }
    }
    offset += x.shape()[axis];
    node.parents.push_back(p.id());
  }
  node.op = OpId::kConcat;
  node.axis = axis;
  node.value = std::move(out);
  return tape.record(std::move(node));
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require_matrix(x, "slice");
  if (axis > 1 || begin >= end || end > x.shape()[axis]) {
    throw DimensionError("slice: invalid range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         shape_string(x.shape()));
  }
  const auto rows = axis == 0 ? end - begin : x.rows();
  const auto cols = axis == 1 ? end - begin : x.cols();
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = axis == 0 ? x(begin + r, c) : x(r, begin + c);
  }
  TapeNode node;
  node.op = OpId::kSlice;
  node.parents = {a.id()};
  node.value = std::move(out);
  node.axis = axis;
  node.begin = begin;
  node.end = end;
  return tape_of(a).record(std::move(node));
}

Var log_sum_exp(const Var& a, std::size_t axis) {
  const Tensor& x = a.value();
  require_matrix(x, "log_sum_exp");
  if (axis > 1) throw DimensionError("log_sum_exp: axis must be 0 or 1");
  const auto outer = axis == 0 ? x.cols() : x.rows();
  const auto inner = axis == 0 ? x.rows() : x.cols();
  Tensor out = axis == 0 ? Tensor::zeros(1, outer) : Tensor::zeros(outer, 1);
  for (std::size_t o = 0; o < outer; ++o) {
    auto at = [&](std::size_t i) { return axis == 0 ? x(i, o) : x(o, i); };
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner; ++i) peak = std::max(peak, at(i));
    double acc = 0.0;
    for (std::size_t i = 0; i < inner; ++i) acc += std::exp(at(i) - peak);
    out[o] = peak + std::log(acc);
  }
  TapeNode node;
  node.op = OpId::kLogSumExp;
  node.parents = {a.id()};
  node.value = std::move(out);
  node.axis = axis;
  return tape_of(a).record(std::move(node));
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  const Tensor& x = a.value();
  if (rows * cols != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as [" + std::to_string(rows) + "," +
                         std::to_string(cols) + "]");
  }
  return unary(OpId::kReshape, a,
               Tensor({rows, cols}, std::vector<double>(x.data().begin(), x.data().end())));
}

Var gather_rows(const Var& a, const std::vector<std::size_t>& indices) {
  const Tensor& x = a.value();
  require_matrix(x, "gather_rows");
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  const auto cols = x.cols();
  Tensor out({indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.rows()) throw DimensionError("gather_rows: index out of range");
    for (std::size_t c = 0; c < cols; ++c) out(i, c) = x(indices[i], c);
  }
  TapeNode node;
  node.op = OpId::kGatherRows;
  node.parents = {a.id()};
  node.value = std::move(out);
  node.indices = indices;
  return tape_of(a).record(std::move(node));
}

Var mean(const Var& a) { return mul(sum(a), 1.0 / static_cast<double>(a.value().size())); }

}  // namespace spe
