#pragma once

// Reverse-mode automatic differentiation over rank-2 tensors.
//
// A Tape records every operation applied to Vars created from it. Node ids
// are assigned in creation order, so the tape is topologically sorted by
// construction and backward() is a single reverse sweep. A tape is meant to
// be built for one training step and discarded.

#include <cstddef>
#include <vector>

#include "spe/tensor.hpp"

namespace spe {

class Tape;

enum class OpId {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kHadamard,
  kReciprocal,
  kMatMul,
  kExp,
  kLog,
  kSoftplus,
  kRelu,
  kSqrt,
  kSquare,
  kSum,
  kBroadcast,
  kConcat,
  kSlice,
  kLogSumExp,
  kReshape,
  kGatherRows,
};

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct TapeNode {
  OpId op = OpId::kConstant;
  std::vector<std::size_t> parents;
  Tensor value;
  // Op-specific data needed by the backward pass.
  double scalar = 0.0;
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::vector<std::size_t> indices;
  bool requires_grad = false;
};

/// Gradients of a scalar loss with respect to the leaves of a tape.
class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> by_node) : by_node_(std::move(by_node)) {}
  /// d(loss)/d(leaf). Zero-filled when the leaf did not influence the loss.
  const Tensor& of(const Var& leaf) const { return by_node_.at(leaf.id()); }

 private:
  std::vector<Tensor> by_node_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A trainable input; gradients are reported for it.
  Var leaf(Tensor value);
  /// A fixed input; no gradient flows into it.
  Var constant(Tensor value);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  /// Reverse sweep from a 1x1 loss. A tape supports exactly one sweep.
  Gradients backward(const Var& loss);

  // Used by the op implementations.
  Var record(TapeNode node);
  const TapeNode& node(std::size_t id) const { return nodes_[id]; }

 private:
  void backprop_node(std::size_t id, std::vector<Tensor>& grads) const;

  std::vector<TapeNode> nodes_;
  bool consumed_ = false;
};

// Elementwise binary ops broadcast [1,1], [1,c] and [r,1] operands against
// [r,c]; the backward pass sums gradients back to the operand's shape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
/// Multiplication by a constant.
Var mul(const Var& a, double factor);
/// 1/a; every entry must be strictly positive.
Var reciprocal(const Var& a);
Var matmul(const Var& a, const Var& b);
Var exp(const Var& a);
/// Natural log; every entry must be strictly positive.
Var log(const Var& a);
Var softplus(const Var& a);
Var relu(const Var& a);
/// Square root; every entry must be strictly positive.
Var sqrt(const Var& a);
Var square(const Var& a);
/// Sum of all entries -> [1,1].
Var sum(const Var& a);
/// Reduction over one axis: 0 -> [1,c], 1 -> [r,1].
Var sum(const Var& a, std::size_t axis);
Var broadcast(const Var& a, std::size_t rows, std::size_t cols);
Var concat(const std::vector<Var>& parts, std::size_t axis);
/// Half-open range [begin, end) along an axis.
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
/// log(sum(exp(a))) reduced over one axis, computed with max-shifting.
Var log_sum_exp(const Var& a, std::size_t axis);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
/// Rows of a selected by index (repetition allowed).
Var gather_rows(const Var& a, const std::vector<std::size_t>& indices);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return hadamard(a, b); }
inline Var operator*(const Var& a, double k) { return mul(a, k); }
inline Var operator*(double k, const Var& a) { return mul(a, k); }
inline Var operator-(const Var& a) { return mul(a, -1.0); }
/// Division by a strictly positive tensor.
inline Var operator/(const Var& a, const Var& b) { return hadamard(a, reciprocal(b)); }

/// Mean of all entries -> [1,1].
Var mean(const Var& a);

}  // namespace spe
