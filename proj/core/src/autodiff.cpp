// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ssrn::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (!a.valid() || !b.valid()) {
    throw std::invalid_argument(std::string(op) + ": invalid operand");
  }
  if (&a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

bool any_requires_grad(std::initializer_list<Var> vars) {
  return std::any_of(vars.begin(), vars.end(), [](const Var& v) { return v.requires_grad(); });
}

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Applies f elementwise and records a unary op whose local derivative is
// dfdx(input, output).
template <typename F, typename D>
Var unary(Var a, F f, D dfdx) {
  Tape& tape = a.tape();
  const auto in = a.data();
  std::vector<double> out(in.size());
  std::transform(in.begin(), in.end(), out.begin(), f);
  BackwardFn back;
  if (a.requires_grad()) {
    const std::size_t ia = a.id();
    back = [ia, dfdx](Tape& t, std::span<const double> g) {
      const auto x = t.data(ia);
      auto dst = t.adjoint_for(ia);
      for (std::size_t i = 0; i < g.size(); ++i) {
        dst[i] += g[i] * dfdx(x[i]);
      }
    };
  }
  return tape.record(a.shape(), std::move(out), {a.id()}, std::move(back));
}

}  // namespace

// ---------------------------------------------------------------------------
// Shape / Tensor

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) {
    throw ShapeError("shape must have rank >= 1");
  }
  for (auto d : dims_) {
    if (d == 0) {
      throw ShapeError("shape dims must be positive, got " + str());
    }
  }
}

std::size_t Shape::size() const {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t Shape::rows() const { return dims_.empty() ? 0 : size() / dims_.back(); }

std::size_t Shape::cols() const { return dims_.empty() ? 0 : dims_.back(); }

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    os << (i ? "x" : "") << dims_[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(shape.size(), 0.0) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != shape.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape.str());
  }
}

Tensor Tensor::filled(Shape s, double value) {
  Tensor t(std::move(s));
  std::fill(t.data.begin(), t.data.end(), value);
  return t;
}

// ---------------------------------------------------------------------------
// Var

Tape& Var::tape() const {
  if (tape_ == nullptr) {
    throw std::logic_error("Var is not bound to a tape");
  }
  return *tape_;
}

const Shape& Var::shape() const { return tape().shape(id_); }
std::span<const double> Var::data() const { return tape().data(id_); }
std::span<const double> Var::grad() const { return tape().grad(id_); }
bool Var::requires_grad() const { return tape().requires_grad(id_); }

Tensor Var::value() const {
  auto d = data();
  return Tensor(shape(), std::vector<double>(d.begin(), d.end()));
}

double Var::item() const {
  if (shape().size() != 1) {
    throw ShapeError("item() on non-scalar " + shape().str());
  }
  return data()[0];
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::leaf(const Tensor& value, bool requires_grad) {
  if (value.data.size() != value.shape.size()) {
    throw ShapeError("leaf data does not match shape " + value.shape.str());
  }
  Node node;
  node.shape = value.shape;
  node.value = value.data;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::scalar(double value, bool requires_grad) {
  return leaf(Tensor(Shape{1}, {value}), requires_grad);
}

Var Tape::record(Shape shape, std::vector<double> value, std::vector<std::size_t> inputs,
                 BackwardFn backward) {
  if (in_backward_) {
    throw std::logic_error("cannot record onto a tape during backward()");
  }
  if (value.size() != shape.size()) {
    throw ShapeError("recorded value does not match shape " + shape.str());
  }
  for (auto id : inputs) {
    if (id >= nodes_.size()) {
      throw std::logic_error("op input precedes no recorded node");
    }
  }
  Node node;
  node.shape = std::move(shape);
  node.value = std::move(value);
  node.inputs = std::move(inputs);
  node.requires_grad = static_cast<bool>(backward);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::adjoint_for(std::size_t id) {
  auto& buf = pending_.at(id);
  if (buf.empty()) {
    buf.assign(nodes_[id].value.size(), 0.0);
  }
  return buf;
}

void Tape::accumulate(std::size_t id, std::span<const double> contribution) {
  auto dst = adjoint_for(id);
  if (dst.size() != contribution.size()) {
    throw ShapeError("adjoint contribution has wrong length");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] += contribution[i];
  }
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) {
    throw std::invalid_argument("backward: loss lives on another tape");
  }
  if (nodes_[loss.id()].shape.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + nodes_[loss.id()].shape.str());
  }
  pending_.assign(nodes_.size(), {});
  pending_[loss.id()] = {1.0};
  in_backward_ = true;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    auto& adj = pending_[i];
    if (adj.empty() || !node.requires_grad) {
      adj.clear();
      adj.shrink_to_fit();
      continue;
    }
    if (node.inputs.empty()) {
      if (node.grad.empty()) {
        node.grad.assign(node.value.size(), 0.0);
      }
      for (std::size_t k = 0; k < adj.size(); ++k) {
        node.grad[k] += adj[k];
      }
    }
    if (node.backward) {
      node.backward(*this, adj);
    }
    std::vector<double>().swap(adj);
  }
  in_backward_ = false;
  pending_.clear();
}

void Tape::zero_grad() {
  for (auto& node : nodes_) {
    std::fill(node.grad.begin(), node.grad.end(), 0.0);
  }
}

std::span<const double> Tape::grad(std::size_t id) const {
  const auto& node = nodes_.at(id);
  if (!node.grad.empty()) {
    return node.grad;
  }
  if (zeros_.size() < node.value.size()) {
    zeros_.assign(node.value.size(), 0.0);
  }
  return std::span<const double>(zeros_.data(), node.value.size());
}

// ---------------------------------------------------------------------------
// Operations

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.rank() > 2 || sb.rank() > 2 || sa.cols() != sb.rows()) {
    throw ShapeError("matmul: cannot multiply " + sa.str() + " by " + sb.str() +
                     " (inner dims " + std::to_string(sa.cols()) + " vs " +
                     std::to_string(sb.rows()) + ")");
  }
  const auto m = static_cast<Eigen::Index>(sa.rows());
  const auto k = static_cast<Eigen::Index>(sa.cols());
  const auto n = static_cast<Eigen::Index>(sb.cols());
  std::vector<double> out(static_cast<std::size_t>(m * n));
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);

  BackwardFn back;
  if (any_requires_grad({a, b})) {
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    const bool ga = a.requires_grad();
    const bool gb = b.requires_grad();
    back = [=](Tape& t, std::span<const double> g) {
      ConstMap gout(g.data(), m, n);
      if (ga) {
        auto dst = t.adjoint_for(ia);
        MutMap(dst.data(), m, k).noalias() += gout * ConstMap(t.data(ib).data(), k, n).transpose();
      }
      if (gb) {
        auto dst = t.adjoint_for(ib);
        MutMap(dst.data(), k, n).noalias() += ConstMap(t.data(ia).data(), m, k).transpose() * gout;
      }
    };
  }
  return a.tape().record(Shape{sa.rows(), sb.cols()}, std::move(out), {a.id(), b.id()},
                         std::move(back));
}

Var elementwise(ElementwiseOp op, Var a, Var b, double factor) {
  switch (op) {
    case ElementwiseOp::kAdd:
    case ElementwiseOp::kSub:
    case ElementwiseOp::kMul: {
      require_same_tape(a, b, "elementwise");
      require_same_shape(a, b, "elementwise");
      const auto x = a.data();
      const auto y = b.data();
      std::vector<double> out(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = op == ElementwiseOp::kAdd   ? x[i] + y[i]
                 : op == ElementwiseOp::kSub ? x[i] - y[i]
                                             : x[i] * y[i];
      }
      BackwardFn back;
      if (any_requires_grad({a, b})) {
        const std::size_t ia = a.id();
        const std::size_t ib = b.id();
        const bool ga = a.requires_grad();
        const bool gb = b.requires_grad();
        back = [=](Tape& t, std::span<const double> g) {
          if (ga) {
            auto dst = t.adjoint_for(ia);
            const auto yv = t.data(ib);
            for (std::size_t i = 0; i < g.size(); ++i) {
              dst[i] += op == ElementwiseOp::kMul ? g[i] * yv[i] : g[i];
            }
          }
          if (gb) {
            auto dst = t.adjoint_for(ib);
            const auto xv = t.data(ia);
            for (std::size_t i = 0; i < g.size(); ++i) {
              dst[i] += op == ElementwiseOp::kMul   ? g[i] * xv[i]
                        : op == ElementwiseOp::kSub ? -g[i]
                                                    : g[i];
            }
          }
        };
      }
      return a.tape().record(a.shape(), std::move(out), {a.id(), b.id()}, std::move(back));
    }
    case ElementwiseOp::kRelu:
      // relu'(0) := 0
      return unary(
          a, [](double x) { return x > 0.0 || std::isnan(x) ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
    case ElementwiseOp::kSigmoid:
      return unary(a, stable_sigmoid, [](double x) {
        const double s = stable_sigmoid(x);
        return s * (1.0 - s);
      });
    case ElementwiseOp::kTanh:
      return unary(
          a, [](double x) { return std::tanh(x); },
          [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
          });
    case ElementwiseOp::kScale:
      return unary(
          a, [factor](double x) { return factor * x; }, [factor](double) { return factor; });
    case ElementwiseOp::kSoftplus:
      return unary(a, stable_softplus, stable_sigmoid);
  }
  throw std::invalid_argument("elementwise: unknown op");
}

Var add(Var a, Var b) { return elementwise(ElementwiseOp::kAdd, a, b); }
Var sub(Var a, Var b) { return elementwise(ElementwiseOp::kSub, a, b); }
Var mul(Var a, Var b) { return elementwise(ElementwiseOp::kMul, a, b); }
Var scale(Var a, double factor) { return elementwise(ElementwiseOp::kScale, a, {}, factor); }
Var relu(Var a) { return elementwise(ElementwiseOp::kRelu, a); }
Var sigmoid(Var a) { return elementwise(ElementwiseOp::kSigmoid, a); }
Var tanh(Var a) { return elementwise(ElementwiseOp::kTanh, a); }
Var softplus(Var a) { return elementwise(ElementwiseOp::kSoftplus, a); }

Var add_bias_row(Var x, Var bias) {
  require_same_tape(x, bias, "add_bias_row");
  const std::size_t rows = x.shape().rows();
  const std::size_t cols = x.shape().cols();
  if (bias.shape().size() != cols) {
    throw ShapeError("add_bias_row: bias " + bias.shape().str() + " does not match columns of " +
                     x.shape().str());
  }
  const auto xv = x.data();
  const auto bv = bias.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = xv[r * cols + c] + bv[c];
    }
  }
  BackwardFn back;
  if (any_requires_grad({x, bias})) {
    const std::size_t ix = x.id();
    const std::size_t ib = bias.id();
    const bool gx = x.requires_grad();
    const bool gb = bias.requires_grad();
    back = [=](Tape& t, std::span<const double> g) {
      if (gx) {
        t.accumulate(ix, g);
      }
      if (gb) {
        auto dst = t.adjoint_for(ib);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            dst[c] += g[r * cols + c];
          }
        }
      }
    };
  }
  return x.tape().record(x.shape(), std::move(out), {x.id(), bias.id()}, std::move(back));
}

Var scale_rows(Var x, Var s) {
  require_same_tape(x, s, "scale_rows");
  const std::size_t rows = x.shape().rows();
  const std::size_t cols = x.shape().cols();
  if (s.shape().size() != rows) {
    throw ShapeError("scale_rows: scale " + s.shape().str() + " does not match rows of " +
                     x.shape().str());
  }
  const auto xv = x.data();
  const auto sv = s.data();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = xv[r * cols + c] * sv[r];
    }
  }
  BackwardFn back;
  if (any_requires_grad({x, s})) {
    const std::size_t ix = x.id();
    const std::size_t is = s.id();
    const bool gx = x.requires_grad();
    const bool gs = s.requires_grad();
    back = [=](Tape& t, std::span<const double> g) {
      const auto xd = t.data(ix);
      const auto sd = t.data(is);
      if (gx) {
        auto dst = t.adjoint_for(ix);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            dst[r * cols + c] += g[r * cols + c] * sd[r];
          }
        }
      }
      if (gs) {
        auto dst = t.adjoint_for(is);
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            acc += g[r * cols + c] * xd[r * cols + c];
          }
          dst[r] += acc;
        }
      }
    };
  }
  return x.tape().record(x.shape(), std::move(out), {x.id(), s.id()}, std::move(back));
}

Var clamp_max(Var x, double ceiling) {
  return unary(
      x, [ceiling](double v) { return std::min(v, ceiling); },
      [ceiling](double v) { return v < ceiling ? 1.0 : 0.0; });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  if (!(eps > 0.0)) {
    throw std::invalid_argument("layer_norm: eps must be positive");
  }
  const std::size_t rows = x.shape().rows();
  const std::size_t cols = x.shape().cols();
  if (gain.shape().size() != cols || bias.shape().size() != cols) {
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(cols) + " entries");
  }
  const auto xv = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  std::vector<double> out(xv.size());
  // Per-row normalized values and inverse std, kept for backward.
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(rows);
  const double n = static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      mean += row[c];
    }
    mean /= n;
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      var += (row[c] - mean) * (row[c] - mean);
    }
    var /= n;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mean) * inv_std[r];
      xhat[r * cols + c] = h;
      out[r * cols + c] = h * gv[c] + bv[c];
    }
  }
  BackwardFn back;
  if (any_requires_grad({x, gain, bias})) {
    const std::size_t ix = x.id();
    const std::size_t ig = gain.id();
    const std::size_t ib = bias.id();
    const bool gx = x.requires_grad();
    const bool gg = gain.requires_grad();
    const bool gb = bias.requires_grad();
    back = [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                     std::span<const double> g) {
      const auto gd = t.data(ig);
      if (gg) {
        auto dst = t.adjoint_for(ig);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            dst[c] += g[r * cols + c] * xhat[r * cols + c];
          }
        }
      }
      if (gb) {
        auto dst = t.adjoint_for(ib);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            dst[c] += g[r * cols + c];
          }
        }
      }
      if (gx) {
        auto dst = t.adjoint_for(ix);
        for (std::size_t r = 0; r < rows; ++r) {
          // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
          double mean_d = 0.0;
          double mean_dx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g[r * cols + c] * gd[c];
            mean_d += d;
            mean_dx += d * xhat[r * cols + c];
          }
          mean_d /= n;
          mean_dx /= n;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g[r * cols + c] * gd[c];
            dst[r * cols + c] += inv_std[r] * (d - mean_d - xhat[r * cols + c] * mean_dx);
          }
        }
      }
    };
  }
  return x.tape().record(x.shape(), std::move(out), {x.id(), gain.id(), bias.id()},
                         std::move(back));
}

std::vector<double> softmax_rows(std::span<const double> logits, std::size_t cols) {
  std::vector<double> out(logits.size());
  const std::size_t rows = cols == 0 ? 0 : logits.size() / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = logits.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = std::exp(row[c] - mx);
      z += out[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] /= z;
    }
  }
  return out;
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets) {
  const std::size_t rows = logits.shape().rows();
  const std::size_t cols = logits.shape().cols();
  if (targets.size() != rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                     " targets for logits " + logits.shape().str());
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= cols) {
      throw std::out_of_range("softmax_cross_entropy: target " + std::to_string(t) +
                              " outside [0, " + std::to_string(cols) + ")");
    }
  }
  const auto lv = logits.data();
  std::vector<double> probs = softmax_rows(lv, cols);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = lv.data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      z += std::exp(row[c] - mx);
    }
    loss += -(row[targets[r]] - mx - std::log(z));
  }
  loss /= static_cast<double>(rows);

  BackwardFn back;
  if (logits.requires_grad()) {
    const std::size_t il = logits.id();
    back = [=, probs = std::move(probs), tgt = std::vector<int>(targets.begin(), targets.end())](
               Tape& t, std::span<const double> g) {
      auto dst = t.adjoint_for(il);
      const double w = g[0] / static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const double onehot = static_cast<int>(c) == tgt[r] ? 1.0 : 0.0;
          dst[r * cols + c] += w * (probs[r * cols + c] - onehot);
        }
      }
    };
  }
  return logits.tape().record(Shape{1}, {loss}, {logits.id()}, std::move(back));
}

Var softmax_cross_entropy(Var logits, int target) {
  if (logits.shape().rows() != 1) {
    throw ShapeError("softmax_cross_entropy: single target needs one row of logits, got " +
                     logits.shape().str());
  }
  const int targets[1] = {target};
  return softmax_cross_entropy(logits, std::span<const int>(targets));
}

Var mse(Var a, const Tensor& target) {
  if (a.shape() != target.shape) {
    throw ShapeError("mse: shape mismatch " + a.shape().str() + " vs " + target.shape.str());
  }
  const auto x = a.data();
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - target.data[i];
    acc += d * d;
  }
  BackwardFn back;
  if (a.requires_grad()) {
    const std::size_t ia = a.id();
    back = [ia, n, tgt = target.data](Tape& t, std::span<const double> g) {
      const auto xv = t.data(ia);
      auto dst = t.adjoint_for(ia);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        dst[i] += g[0] * 2.0 * (xv[i] - tgt[i]) / n;
      }
    };
  }
  return a.tape().record(Shape{1}, {acc / n}, {a.id()}, std::move(back));
}

Var sum(Var a) {
  const auto x = a.data();
  const double s = std::accumulate(x.begin(), x.end(), 0.0);
  BackwardFn back;
  if (a.requires_grad()) {
    const std::size_t ia = a.id();
    back = [ia](Tape& t, std::span<const double> g) {
      for (double& d : t.adjoint_for(ia)) {
        d += g[0];
      }
    };
  }
  return a.tape().record(Shape{1}, {s}, {a.id()}, std::move(back));
}

Var sum_squares(Var a) {
  const auto x = a.data();
  double s = 0.0;
  for (double v : x) {
    s += v * v;
  }
  BackwardFn back;
  if (a.requires_grad()) {
    const std::size_t ia = a.id();
    back = [ia](Tape& t, std::span<const double> g) {
      const auto xv = t.data(ia);
      auto dst = t.adjoint_for(ia);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        dst[i] += 2.0 * g[0] * xv[i];
      }
    };
  }
  return a.tape().record(Shape{1}, {s}, {a.id()}, std::move(back));
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  const std::size_t rows = x.shape().rows();
  const std::size_t cols = x.shape().cols();
  if (count == 0 || start + count > cols) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + x.shape().str());
  }
  const auto xv = x.data();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * cols + start, count, out.data() + r * count);
  }
  BackwardFn back;
  if (x.requires_grad()) {
    const std::size_t ix = x.id();
    back = [=](Tape& t, std::span<const double> g) {
      auto dst = t.adjoint_for(ix);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < count; ++c) {
          dst[r * cols + start + c] += g[r * count + c];
        }
      }
    };
  }
  return x.tape().record(Shape{rows, count}, std::move(out), {x.id()}, std::move(back));
}

Var view(Var x, std::size_t offset, Shape shape) {
  const std::size_t n = shape.size();
  if (offset + n > x.shape().size()) {
    throw ShapeError("view: " + shape.str() + " at offset " + std::to_string(offset) +
                     " overruns " + x.shape().str());
  }
  const auto xv = x.data();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(offset),
                          xv.begin() + static_cast<std::ptrdiff_t>(offset + n));
  BackwardFn back;
  if (x.requires_grad()) {
    const std::size_t ix = x.id();
    back = [ix, offset](Tape& t, std::span<const double> g) {
      auto dst = t.adjoint_for(ix);
      for (std::size_t i = 0; i < g.size(); ++i) {
        dst[offset + i] += g[i];
      }
    };
  }
  return x.tape().record(std::move(shape), std::move(out), {x.id()}, std::move(back));
}

// ---------------------------------------------------------------------------
// Gradient check

double grad_check(const TapeFunction& function, std::span<const Tensor> params,
                  GradCheckOptions options) {
  if (options.eps < 1e-7 || options.eps > 1e-3) {
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  std::vector<Tensor> work(params.begin(), params.end());

  auto evaluate = [&](bool keep_grads, std::vector<std::vector<double>>* grads) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(work.size());
    for (const auto& p : work) {
      vars.push_back(tape.leaf(p, true));
    }
    Var loss = function(tape, vars);
    const double value = loss.item();
    if (keep_grads) {
      tape.backward(loss);
      grads->clear();
      for (const auto& v : vars) {
        auto g = v.grad();
        grads->emplace_back(g.begin(), g.end());
      }
    }
    return value;
  };

  std::vector<std::vector<double>> analytic;
  evaluate(true, &analytic);

  double worst = 0.0;
  for (std::size_t p = 0; p < work.size(); ++p) {
    const std::size_t n = work[p].size();
    std::size_t stride = 1;
    if (options.max_coords_per_param != 0 && n > options.max_coords_per_param) {
      stride = (n + options.max_coords_per_param - 1) / options.max_coords_per_param;
    }
    for (std::size_t i = (p * 7919) % stride; i < n; i += stride) {
      const double saved = work[p].data[i];
      work[p].data[i] = saved + options.eps;
      const double up = evaluate(false, nullptr);
      work[p].data[i] = saved - options.eps;
      const double down = evaluate(false, nullptr);
      work[p].data[i] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[p][i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace ssrn::ad
