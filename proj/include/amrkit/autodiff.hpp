#pragma once

// Reverse-mode differentiation over small dense tensors.
//
// A Tape records every op executed on its tensors. Calling backward() on a
// scalar result walks the record in reverse and accumulates gradients into
// every tensor that requires them. A tape is single-use: record, backward once,
// discard. Tensors from different tapes cannot be mixed.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "amrkit/tensor.hpp"

namespace amrkit {

enum class OpKind {
  Leaf,
  Add,
  Sub,
  ElementwiseMul,
  Matmul,
  Relu,
  Broadcast,
  Reshape,
  Permute,
  ConcatAlongAxis,
  MeanOverAxes,
  Sum,
  SoftmaxCrossEntropy,
  ClassMargin,
  ScalarMul,
  ScalarAffine,
  Clamp,
};

std::string_view op_name(OpKind kind);

class Tape;

namespace detail {
struct TapeCore;
struct Node {
  Tensor value;
  Tensor grad;  // empty shape + no data until allocated
  bool has_grad = false;
  bool requires_grad = false;
  OpKind kind = OpKind::Leaf;
  std::uint64_t id = 0;
  std::shared_ptr<TapeCore> core;
};
}  // namespace detail

// Handle to a value recorded on a tape. Copies share the same node.
class DiffTensor {
 public:
  DiffTensor() = default;

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t numel() const { return value().numel(); }
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  // Gradient of the last backward() loss w.r.t. this tensor.
  const Tensor& grad() const;

  std::uint64_t id() const;
  OpKind kind() const;

 private:
  friend class Tape;
  friend struct OpAccess;
  explicit DiffTensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

class Tape {
 public:
  // A non-recording tape evaluates ops but keeps no backward record; use it
  // for pure inference.
  explicit Tape(bool recording = true);
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  DiffTensor leaf(Tensor value, bool requires_grad = true);
  DiffTensor constant(Tensor value) { return leaf(std::move(value), false); }

  // Populates grad() on every tensor of this tape that requires a gradient.
  // Leaves that the loss does not reach get a zero gradient.
  void backward(const DiffTensor& loss);

  bool recording() const;
  std::size_t size() const;

 private:
  friend struct OpAccess;
  std::shared_ptr<detail::TapeCore> core_;
};

namespace ops {

DiffTensor add(const DiffTensor& a, const DiffTensor& b);
DiffTensor sub(const DiffTensor& a, const DiffTensor& b);
DiffTensor mul(const DiffTensor& a, const DiffTensor& b);
// [M,K] x [K,N] -> [M,N]
DiffTensor matmul(const DiffTensor& a, const DiffTensor& b);
DiffTensor relu(const DiffTensor& x);
// Replicates a leading extent-1 axis to `shape[0]`, or a single-element tensor
// to any shape.
DiffTensor broadcast(const DiffTensor& x, const Shape& shape);
DiffTensor reshape(const DiffTensor& x, const Shape& shape);
DiffTensor permute(const DiffTensor& x, std::span<const std::size_t> perm);
DiffTensor concat(std::span<const DiffTensor> parts, std::size_t axis);
DiffTensor mean_over_axes(const DiffTensor& x, std::span<const std::size_t> axes,
                          bool keep_dims = false);
DiffTensor sum(const DiffTensor& x);
// Batch-mean cross-entropy of logits [B,N] against labels in [0,N).
DiffTensor softmax_cross_entropy(const DiffTensor& logits, std::span<const int> labels);
// Batch-mean of max_{i != y} z_i - z_y. Ties in the max go to the lowest index.
DiffTensor class_margin(const DiffTensor& logits, std::span<const int> labels);
DiffTensor scalar_mul(const DiffTensor& x, double s);
// s * x + c elementwise.
DiffTensor scalar_affine(const DiffTensor& x, double s, double c);
// Gradient is 1 on [lo, hi] (bounds included) and 0 outside.
DiffTensor clamp(const DiffTensor& x, double lo, double hi);

// a + broadcast(bias) for a [M,N] matrix and a [1,N] row.
DiffTensor add_row(const DiffTensor& a, const DiffTensor& bias);

}  // namespace ops

// Per-sample cross-entropy and margin, computed without a tape.
std::vector<double> cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels);
std::vector<double> class_margin_per_sample(const Tensor& logits, std::span<const int> labels);

}  // namespace amrkit
