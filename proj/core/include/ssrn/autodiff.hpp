// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode automatic differentiation over dense, row-major,
// double precision tensors. A Tape is rebuilt for every forward pass; leaves
// are copied in from long-lived Tensors and gradients are read back out after
// backward().

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssrn::ad {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dimensions of a dense tensor. The innermost dimension is the column count;
// every leading dimension folds into rows, so rank-1 shapes are row vectors.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  [[nodiscard]] std::size_t rank() const { return dims_.size(); }
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;
  [[nodiscard]] const std::vector<std::size_t>& dims() const { return dims_; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

// Plain value tensor. Holds learnable parameters and constant inputs
// between tapes.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, std::vector<double> values);

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor filled(Shape s, double value);

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] std::size_t rows() const { return shape.rows(); }
  [[nodiscard]] std::size_t cols() const { return shape.cols(); }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

class Tape;

// Handle to a value recorded on a Tape (the tape-node id plus its owner).
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] Tape& tape() const;
  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] bool valid() const { return tape_ != nullptr; }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::span<const double> data() const;
  [[nodiscard]] std::span<const double> grad() const;
  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] Tensor value() const;
  [[nodiscard]] double item() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the adjoint of an op's output and accumulates into its inputs via
// Tape::accumulate.
using BackwardFn = std::function<void(Tape&, std::span<const double> out_grad)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var leaf(const Tensor& value, bool requires_grad = true);
  Var constant(const Tensor& value) { return leaf(value, false); }
  Var scalar(double value, bool requires_grad = true);

  // Records a primitive. `backward` may be empty when no input requires grad.
  Var record(Shape shape, std::vector<double> value, std::vector<std::size_t> inputs,
             BackwardFn backward);

  // Adds `contribution` into the pending adjoint of node `id`. Only valid
  // inside a BackwardFn.
  void accumulate(std::size_t id, std::span<const double> contribution);
  std::span<double> adjoint_for(std::size_t id);

  // Seeds d(loss)/d(loss) = 1 and sweeps nodes in reverse insertion order.
  // Gradients add onto whatever earlier backward() calls left in place.
  // Only leaves keep a gradient; recorded ops report zeros.
  void backward(Var loss);

  void zero_grad();

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const Shape& shape(std::size_t id) const { return nodes_.at(id).shape; }
  [[nodiscard]] std::span<const double> data(std::size_t id) const { return nodes_.at(id).value; }
  [[nodiscard]] std::span<const double> grad(std::size_t id) const;
  [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> pending_;
  mutable std::vector<double> zeros_;
  bool in_backward_ = false;
};

// ---------------------------------------------------------------------------
// Primitive operations. All throw ShapeError on incompatible shapes.

Var matmul(Var a, Var b);

enum class ElementwiseOp { kAdd, kSub, kMul, kRelu, kSigmoid, kTanh, kScale, kSoftplus };

// Binary ops take `b`; unary ops ignore it. kScale multiplies by `factor`.
Var elementwise(ElementwiseOp op, Var a, Var b = {}, double factor = 1.0);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);

// x [rows x n] + bias [n], the one broadcasting op.
Var add_bias_row(Var x, Var bias);

// x [rows x n] scaled row-wise by s [rows x 1].
Var scale_rows(Var x, Var s);

// Elementwise min(x, ceiling); gradient is zero where the ceiling is active.
Var clamp_max(Var x, double ceiling);

// Row-wise standardization followed by gain/bias [n].
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// Mean over rows of -log softmax(logits)[target]; logits are [rows x c].
Var softmax_cross_entropy(Var logits, std::span<const int> targets);
Var softmax_cross_entropy(Var logits, int target);

// Mean squared difference against a constant.
Var mse(Var a, const Tensor& target);

Var sum(Var a);
Var sum_squares(Var a);

// Columns [start, start + count) of a 2-D value.
Var slice_cols(Var x, std::size_t start, std::size_t count);

// Reinterprets `shape.size()` contiguous elements starting at `offset`.
Var view(Var x, std::size_t offset, Shape shape);

// Row-wise softmax of plain values with max subtraction.
std::vector<double> softmax_rows(std::span<const double> logits, std::size_t cols);

// ---------------------------------------------------------------------------
// Central-difference gradient checker.

using TapeFunction = std::function<Var(Tape&, std::span<const Var> params)>;

struct GradCheckOptions {
  double eps = 1e-5;
  // Checks at most this many coordinates per parameter (0 = all), chosen by
  // a seeded stride so repeated runs pick the same ones.
  std::size_t max_coords_per_param = 0;
};

// Max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const TapeFunction& function, std::span<const Tensor> params,
                  GradCheckOptions options = {});

}  // namespace ssrn::ad
