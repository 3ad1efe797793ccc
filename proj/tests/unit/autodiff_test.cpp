// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace ssrn::ad {
namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data) {
    v = dist(rng);
  }
  return t;
}

// Keeps values away from the relu kink so central differences are smooth.
Tensor away_from_zero(Shape shape, std::mt19937_64& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.2, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : t.data) {
    if (flip(rng)) {
      v = -v;
    }
  }
  return t;
}

constexpr double kTol = 1e-4;

TEST(Shape, RowsFoldLeadingDims) {
  const Shape s{2, 3, 4};
  EXPECT_EQ(s.rows(), 6u);
  EXPECT_EQ(s.cols(), 4u);
  EXPECT_EQ(s.size(), 24u);
  EXPECT_EQ(Shape{5}.rows(), 1u);
  EXPECT_THROW(Shape({2, 0}), ShapeError);
}

TEST(Tape, MatmulValues) {
  Tape tape;
  const Var a = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  const Var b = tape.leaf(Tensor({3, 2}, {7, 8, 9, 10, 11, 12}));
  const Var c = matmul(a, b);
  const std::vector<double> expected = {58, 64, 139, 154};
  ASSERT_EQ(c.shape(), (Shape{2, 2}));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(c.data()[i], expected[i]);
  }
}

TEST(Tape, MatmulShapeMismatchNamesBothShapes) {
  Tape tape;
  const Var a = tape.leaf(Tensor::zeros({2, 3}));
  const Var b = tape.leaf(Tensor::zeros({4, 2}));
  try {
    (void)matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Tape, BackwardAccumulatesAcrossCalls) {
  Tape tape;
  const Var x = tape.leaf(Tensor({1}, {3.0}));
  const Var y = mul(x, x);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
  tape.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape tape;
  const Var x = tape.leaf(Tensor({2}, {1.0, 2.0}));
  const Var c = tape.constant(Tensor({2}, {5.0, 7.0}));
  tape.backward(sum(mul(x, c)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 5.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 7.0);
  EXPECT_DOUBLE_EQ(c.grad()[0], 0.0);
  EXPECT_FALSE(c.requires_grad());
}

TEST(Tape, NonScalarLossRejected) {
  Tape tape;
  const Var x = tape.leaf(Tensor::zeros({3}));
  EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(Ops, ReluDerivativeAtZeroIsZero) {
  Tape tape;
  const Var x = tape.leaf(Tensor({3}, {-1.0, 0.0, 2.0}));
  tape.backward(sum(relu(x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 0.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 1.0);
}

TEST(Ops, SoftplusAndSigmoidStableAtExtremes) {
  Tape tape;
  const Var x = tape.leaf(Tensor({4}, {-800.0, -30.0, 30.0, 800.0}));
  const auto sp = softplus(x).data();
  const auto sg = sigmoid(x).data();
  EXPECT_DOUBLE_EQ(sp[3], 800.0);
  EXPECT_GT(sp[0], 0.0 - 1e-300);
  EXPECT_NEAR(sp[1], std::exp(-30.0), 1e-25);
  for (double v : sp) {
    EXPECT_TRUE(std::isfinite(v));
  }
  EXPECT_DOUBLE_EQ(sg[3], 1.0);
  EXPECT_NEAR(sg[0], 0.0, 1e-300);
}

TEST(Ops, ClampMaxPassesGradientOnlyBelowCeiling) {
  Tape tape;
  const Var x = tape.leaf(Tensor({3}, {0.5, 2.0, 3.0}));
  const Var y = clamp_max(x, 2.0);
  EXPECT_DOUBLE_EQ(y.data()[0], 0.5);
  EXPECT_DOUBLE_EQ(y.data()[1], 2.0);
  EXPECT_DOUBLE_EQ(y.data()[2], 2.0);
  tape.backward(sum(y));
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 0.0);
}

TEST(Ops, LayerNormRowsHaveZeroMeanUnitVariance) {
  std::mt19937_64 rng(3);
  Tape tape;
  const Var x = tape.leaf(random_tensor({4, 8}, rng, -3.0, 3.0));
  const Var g = tape.constant(Tensor::filled({8}, 1.0));
  const Var b = tape.constant(Tensor::zeros({8}));
  const auto y = layer_norm(x, g, b, 1e-5).data();
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0;
    double var = 0.0;
    for (std::size_t c = 0; c < 8; ++c) {
      mean += y[r * 8 + c];
    }
    mean /= 8.0;
    for (std::size_t c = 0; c < 8; ++c) {
      var += (y[r * 8 + c] - mean) * (y[r * 8 + c] - mean);
    }
    var /= 8.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(Ops, CrossEntropyOfUniformLogitsIsLogC) {
  Tape tape;
  const Var logits = tape.leaf(Tensor::zeros({3, 5}));
  const std::vector<int> targets = {0, 4, 2};
  EXPECT_NEAR(softmax_cross_entropy(logits, targets).item(), std::log(5.0), 1e-15);
  EXPECT_THROW(softmax_cross_entropy(logits, std::vector<int>{0, 5, 1}), std::out_of_range);
}

TEST(Ops, CrossEntropyLargeLogitsFinite) {
  Tape tape;
  const Var logits = tape.leaf(Tensor({1, 3}, {1000.0, -1000.0, 0.0}));
  const Var loss = softmax_cross_entropy(logits, 1);
  EXPECT_NEAR(loss.item(), 2000.0, 1e-9);
  tape.backward(loss);
  for (double g : logits.grad()) {
    EXPECT_TRUE(std::isfinite(g));
  }
}

TEST(Ops, ViewAndSliceAddressSubBlocks) {
  Tape tape;
  const Var x = tape.leaf(Tensor({2, 4}, {0, 1, 2, 3, 4, 5, 6, 7}));
  const auto s = slice_cols(x, 1, 2).data();
  EXPECT_EQ(std::vector<double>(s.begin(), s.end()), (std::vector<double>{1, 2, 5, 6}));
  const auto v = view(x, 3, Shape{4}).data();
  EXPECT_EQ(std::vector<double>(v.begin(), v.end()), (std::vector<double>{3, 4, 5, 6}));
  EXPECT_THROW(view(x, 6, Shape{4}), ShapeError);
}

// Each op is checked through a random linear read-out so every output
// coordinate contributes to the scalar.
TEST(GradCheck, ElementwiseOps) {
  std::mt19937_64 rng(11);
  const Tensor x = away_from_zero({3, 4}, rng);
  const Tensor y = away_from_zero({3, 4}, rng);
  const Tensor probe = random_tensor({3, 4}, rng);
  const auto readout = [&](Tape& t, Var v) { return sum(mul(v, t.constant(probe))); };
  const std::vector<std::pair<const char*, std::function<Var(Var, Var)>>> binary = {
      {"add", add}, {"sub", sub}, {"mul", mul}};
  for (const auto& [name, op] : binary) {
    const double err = grad_check(
        [&](Tape& t, std::span<const Var> p) { return readout(t, op(p[0], p[1])); },
        std::vector<Tensor>{x, y});
    EXPECT_LE(err, kTol) << name;
  }
  const std::vector<std::pair<const char*, std::function<Var(Var)>>> unary = {
      {"relu", relu},
      {"sigmoid", sigmoid},
      {"tanh", tanh},
      {"softplus", softplus},
      {"scale", [](Var v) { return scale(v, -2.5); }},
      {"clamp_max", [](Var v) { return clamp_max(v, 0.5); }}};
  for (const auto& [name, op] : unary) {
    const double err = grad_check(
        [&](Tape& t, std::span<const Var> p) { return readout(t, op(p[0])); }, std::vector<Tensor>{x});
    EXPECT_LE(err, kTol) << name;
  }
}

TEST(GradCheck, StructuredOps) {
  std::mt19937_64 rng(12);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 5}, rng);
  const Tensor bias = random_tensor({5}, rng);
  const Tensor s = random_tensor({3, 1}, rng);
  const Tensor gain = random_tensor({4}, rng, 0.5, 1.5);
  const Tensor shift = random_tensor({4}, rng);
  const Tensor target = random_tensor({3, 4}, rng);
  const Tensor p35 = random_tensor({3, 5}, rng);
  const Tensor p34 = random_tensor({3, 4}, rng);
  const Tensor p32 = random_tensor({3, 2}, rng);
  const Tensor p12 = random_tensor({6}, rng);
  const std::vector<int> labels = {4, 0, 2};

  struct Case {
    const char* name;
    TapeFunction f;
    std::vector<Tensor> params;
  };
  const std::vector<Case> cases = {
      {"matmul",
       [&](Tape& t, std::span<const Var> p) { return sum(mul(matmul(p[0], p[1]), t.constant(p35))); },
       {a, b}},
      {"add_bias_row",
       [&](Tape& t, std::span<const Var> p) {
         return sum(mul(add_bias_row(p[0], p[1]), t.constant(p35)));
       },
       {p35, bias}},
      {"scale_rows",
       [&](Tape& t, std::span<const Var> p) { return sum(mul(scale_rows(p[0], p[1]), t.constant(p34))); },
       {a, s}},
      {"layer_norm",
       [&](Tape& t, std::span<const Var> p) {
         return sum(mul(layer_norm(p[0], p[1], p[2], 1e-5), t.constant(p34)));
       },
       {a, gain, shift}},
      {"softmax_cross_entropy",
       [&](Tape&, std::span<const Var> p) { return softmax_cross_entropy(p[0], labels); },
       {p35}},
      {"softmax_cross_entropy_single",
       [&](Tape&, std::span<const Var> p) { return softmax_cross_entropy(p[0], 3); },
       {random_tensor({1, 5}, rng)}},
      {"mse", [&](Tape&, std::span<const Var> p) { return mse(p[0], target); }, {a}},
      {"sum", [&](Tape& t, std::span<const Var> p) { return sum(mul(p[0], t.constant(p34))); }, {a}},
      {"sum_squares", [&](Tape&, std::span<const Var> p) { return sum_squares(p[0]); }, {a}},
      {"slice_cols",
       [&](Tape& t, std::span<const Var> p) { return sum(mul(slice_cols(p[0], 1, 2), t.constant(p32))); },
       {a}},
      {"view",
       [&](Tape& t, std::span<const Var> p) { return sum(mul(view(p[0], 3, Shape{6}), t.constant(p12))); },
       {a}},
  };
  for (const auto& c : cases) {
    EXPECT_LE(grad_check(c.f, c.params), kTol) << c.name;
  }
}

TEST(GradCheck, DetectsAWrongGradient) {
  // A deliberately broken op: forward x^2, backward claims 3x.
  const TapeFunction broken = [](Tape& t, std::span<const Var> p) {
    const Var x = p[0];
    std::vector<double> out(x.data().begin(), x.data().end());
    for (auto& v : out) {
      v *= v;
    }
    const std::size_t id = x.id();
    const Var y = t.record(x.shape(), std::move(out), {id}, [id](Tape& tape, std::span<const double> g) {
      auto dst = tape.adjoint_for(id);
      const auto xv = tape.data(id);
      for (std::size_t i = 0; i < g.size(); ++i) {
        dst[i] += g[i] * 3.0 * xv[i];
      }
    });
    return sum(y);
  };
  EXPECT_GT(grad_check(broken, std::vector<Tensor>{Tensor({2}, {1.0, 2.0})}), 0.1);
}

TEST(GradCheck, EpsilonOutsideRangeRejected) {
  const TapeFunction f = [](Tape&, std::span<const Var> p) { return sum_squares(p[0]); };
  const std::vector<Tensor> x = {Tensor({1}, {1.0})};
  EXPECT_THROW(grad_check(f, x, {.eps = 1e-9}), std::invalid_argument);
  EXPECT_THROW(grad_check(f, x, {.eps = 1e-2}), std::invalid_argument);
}

TEST(GradCheck, Deterministic) {
  std::mt19937_64 rng(2);
  const Tensor a = random_tensor({5, 5}, rng);
  const TapeFunction f = [](Tape&, std::span<const Var> p) { return sum_squares(tanh(p[0])); };
  const std::vector<Tensor> params = {a};
  EXPECT_EQ(grad_check(f, params, {.max_coords_per_param = 7}),
            grad_check(f, params, {.max_coords_per_param = 7}));
}

TEST(SoftmaxRows, RowsSumToOne) {
  const std::vector<double> logits = {1.0, 2.0, 3.0, -5.0, 0.0, 5.0};
  const auto p = softmax_rows(logits, 3);
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
  EXPECT_NEAR(p[3] + p[4] + p[5], 1.0, 1e-15);
}

}  // namespace
}  // namespace ssrn::ad
