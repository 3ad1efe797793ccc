// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/renderer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace ssrn {
namespace {

ModelDims small_dims() {
  ModelDims d;
  d.latent = 8;
  d.hidden = 8;
  d.feature = 6;
  d.marcher_hidden = 5;
  d.rgb_hidden = 7;
  d.march_steps = 4;
  return d;
}

CameraView small_view(int res = 6) {
  return {Intrinsics::centered(res, res, 1.1 * res), Pose::look_at({0.4, 0.9, -2.3}, {0, 0, 0}), res, res};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Lstm, StepMatchesScalarOracle) {
  std::mt19937_64 rng(1);
  const ModelDims dims = small_dims();
  const Marcher marcher = Marcher::init(dims, rng);
  const std::size_t n = 6;
  const std::size_t m = 5;
  std::normal_distribution<double> g(0.0, 1.0);
  ad::Tensor x({2, n});
  ad::Tensor h({2, m});
  ad::Tensor c({2, m});
  for (auto* t : {&x, &h, &c}) {
    for (auto& v : t->data) {
      v = g(rng);
    }
  }
  ad::Tape tape;
  Binding b(tape);
  const MarcherVars vars = bind(b, marcher, false);
  const LstmState out = lstm_step(vars, tape.constant(x), {tape.constant(h), tape.constant(c)});

  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      double z[4];
      for (std::size_t gate = 0; gate < 4; ++gate) {
        const std::size_t col = gate * m + j;
        double acc = marcher.bias.data[col];
        for (std::size_t k = 0; k < n; ++k) {
          acc += x.at(r, k) * marcher.wx.at(k, col);
        }
        for (std::size_t k = 0; k < m; ++k) {
          acc += h.at(r, k) * marcher.wh.at(k, col);
        }
        z[gate] = acc;
      }
      const double cell = sigmoid(z[1]) * c.at(r, j) + sigmoid(z[0]) * std::tanh(z[2]);
      const double hidden = sigmoid(z[3]) * std::tanh(cell);
      EXPECT_NEAR(out.cell.data()[r * m + j], cell, 1e-12);
      EXPECT_NEAR(out.hidden.data()[r * m + j], hidden, 1e-12);
    }
  }
}

TEST(Marcher, InitialisationConventions) {
  std::mt19937_64 rng(2);
  const ModelDims dims;
  const Marcher marcher = Marcher::init(dims, rng);
  const double bound = 1.0 / std::sqrt(32.0);
  for (double v : marcher.wx.data) {
    EXPECT_LE(std::abs(v), bound);
  }
  for (std::size_t j = 0; j < 32; ++j) {
    EXPECT_EQ(marcher.bias.data[32 + j], 1.0);
    EXPECT_EQ(marcher.bias.data[j], 0.0);
  }
  EXPECT_NEAR(std::log1p(std::exp(marcher.proj_b.data[0])), dims.initial_step, 1e-12);
}

TEST(March, FrozenStepLeavesPointsAtInitialDepth) {
  Model model = Model::init(small_dims(), 3);
  std::fill(model.marcher.proj_w.data.begin(), model.marcher.proj_w.data.end(), 0.0);
  model.marcher.proj_b.data[0] = -60.0;
  std::mt19937_64 rng(3);
  const ad::Tensor z = sample_latent(8, rng);
  const RenderOutput r = render(model, z, small_view());
  const double d0 = model.dims.initial_depth();
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    EXPECT_EQ(r.depth.data[i], d0);
    EXPECT_NEAR((r.points[i] - (r.origins[i] + d0 * r.directions[i])).norm(), 0.0, 1e-12);
  }
}

TEST(March, DepthsAreMonotoneAndBounded) {
  const Model model = Model::init(small_dims(), 4);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const ad::Tensor z = sample_latent(8, rng, 1.0);
    ad::Tape tape;
    Binding b(tape);
    const ModelVars vars = bind(b, model, {});
    const SceneFunction scene = generate_scene(vars.hyper, tape.constant(z));
    const auto view = small_view(5);
    const RayBatch rays = make_ray_batch(rays_for_view(view));
    const MarchTrace trace = march(scene, rays, vars.marcher, model.dims);
    ASSERT_EQ(trace.depths.size(), 4u);
    for (std::size_t i = 0; i < rays.size(); ++i) {
      double prev = model.dims.initial_depth();
      for (const auto& d : trace.depths) {
        EXPECT_GE(d.data()[i], prev);
        EXPECT_LE(d.data()[i], model.dims.max_depth());
        prev = d.data()[i];
      }
    }
  }
}

TEST(March, NonFiniteFeatureNamesRay) {
  const Model model = Model::init(small_dims(), 5);
  ad::Tape tape;
  Binding b(tape);
  const ModelVars vars = bind(b, model, {});
  const SceneFunction scene = generate_scene(vars.hyper, tape.constant(ad::Tensor::zeros({8})));
  RayBatch rays = make_ray_batch(rays_for_view(small_view(2)));
  rays.origins.at(2, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)march(scene, rays, vars.marcher, model.dims);
    FAIL();
  } catch (const MarchError& e) {
    EXPECT_EQ(e.ray(), 2u);
  }
}

TEST(RayBatch, PixelIndicesRangeChecked) {
  const auto view = small_view(3);
  const std::vector<int> ok = {0, 8};
  EXPECT_EQ(make_ray_batch(view, ok).size(), 2u);
  const std::vector<int> bad = {9};
  EXPECT_THROW(make_ray_batch(view, bad), std::out_of_range);
}

TEST(SegHead, ZeroWeightsGiveUniformCrossEntropy) {
  const ModelDims dims = small_dims();
  const SegHead head = SegHead::zeros(dims);
  EXPECT_EQ(head.parameter_count(), 6u * 5u + 5u);
  ad::Tape tape;
  Binding b(tape);
  const SegHeadVars vars = bind(b, head, false);
  ad::Tensor feats({3, 6});
  for (std::size_t i = 0; i < feats.size(); ++i) {
    feats.data[i] = static_cast<double>(i) - 7.5;
  }
  const ad::Var logits = ad::add_bias_row(ad::matmul(tape.constant(feats), vars.weight), vars.bias);
  const std::vector<int> labels = {0, 3, 4};
  EXPECT_NEAR(ad::softmax_cross_entropy(logits, labels).item(), std::log(5.0), 1e-12);
}

TEST(SegHead, LogitsAreExactlyLinear) {
  // Dyadic values keep every product and sum exact.
  SegHead head = SegHead::zeros(small_dims());
  for (std::size_t i = 0; i < head.weight.size(); ++i) {
    head.weight.data[i] = static_cast<double>(static_cast<int>(i % 7) - 3) * 0.25;
  }
  for (std::size_t i = 0; i < head.bias.size(); ++i) {
    head.bias.data[i] = 0.5 * static_cast<double>(i);
  }
  const std::vector<double> v1 = {0.5, -1.0, 2.0, 0.125, 0.0, 3.0};
  const std::vector<double> v2 = {-0.25, 1.5, 0.75, 1.0, -2.0, 0.5};
  std::vector<double> sum(6);
  for (std::size_t i = 0; i < 6; ++i) {
    sum[i] = v1[i] + v2[i];
  }
  const auto a = head.logits(v1);
  const auto b = head.logits(v2);
  const auto s = head.logits(sum);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(s[c], a[c] + b[c] - head.bias.data[c]);
  }
}

TEST(Render, DeterministicAndGeometricallyConsistent) {
  const Model model = Model::init(small_dims(), 6);
  std::mt19937_64 rng(6);
  const ad::Tensor z = sample_latent(8, rng, 0.5);
  const auto view = small_view(7);
  RenderOptions small_chunks;
  small_chunks.chunk = 5;
  small_chunks.keep_features = true;
  const RenderOutput a = render(model, z, view);
  const RenderOutput again = render(model, z, view);
  EXPECT_EQ(a.rgb, again.rgb);
  EXPECT_EQ(a.labels, again.labels);
  EXPECT_EQ(a.logits, again.logits);
  EXPECT_EQ(a.depth, again.depth);
  // Chunking changes matrix-kernel blocking, so only the last bits may move.
  const RenderOutput b = render(model, z, view, small_chunks);
  for (std::size_t i = 0; i < a.rgb.data.size(); ++i) {
    EXPECT_NEAR(a.rgb.data[i], b.rgb.data[i], 1e-12);
  }
  for (std::size_t i = 0; i < a.depth.data.size(); ++i) {
    EXPECT_NEAR(a.depth.data[i], b.depth.data[i], 1e-12);
  }
  EXPECT_EQ(b.features.size(), 49u * 6u);
  EXPECT_TRUE(a.features.empty());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_NEAR((a.points[i] - (a.origins[i] + a.depth.data[i] * a.directions[i])).norm(), 0.0, 1e-9);
    EXPECT_TRUE(std::isfinite(a.depth.data[i]));
  }
  for (double v : a.rgb.data) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Render, FarBoundRaysAreBackground) {
  Model model = Model::init(small_dims(), 7);
  // Huge steps push every ray to the far bound; a seg bias favours class 2.
  std::fill(model.marcher.proj_w.data.begin(), model.marcher.proj_w.data.end(), 0.0);
  model.marcher.proj_b.data[0] = 5.0;
  std::fill(model.seg.weight.data.begin(), model.seg.weight.data.end(), 0.0);
  model.seg.bias.data[2] = 10.0;
  const RenderOutput r = render(model, ad::Tensor::zeros({8}), small_view());
  for (std::size_t i = 0; i < r.labels.data.size(); ++i) {
    EXPECT_EQ(r.depth.data[i], model.dims.max_depth());
    EXPECT_EQ(r.labels.data[i], 0);
  }
  model.marcher.proj_b.data[0] = -60.0;
  const RenderOutput near = render(model, ad::Tensor::zeros({8}), small_view());
  for (auto l : near.labels.data) {
    EXPECT_EQ(l, 2);
  }
}

TEST(PointCloud, LabelsMatchRenderedForeground) {
  Model model = Model::init(small_dims(), 8);
  std::mt19937_64 rng(8);
  for (auto& v : model.seg.weight.data) {
    v = std::normal_distribution<double>(0.0, 3.0)(rng);
  }
  const ad::Tensor z = sample_latent(8, rng, 0.5);
  const std::vector<CameraView> views = {small_view(5), {Intrinsics::centered(4, 4, 5.0), orbit_pose(2.5, 1.0, 0.2), 4, 4}};
  EXPECT_TRUE(point_cloud(model, z, {}).empty());
  const auto cloud = point_cloud(model, z, views);
  std::size_t k = 0;
  std::size_t pixels = 0;
  for (const auto& view : views) {
    const RenderOutput r = render(model, z, view);
    pixels += r.labels.data.size();
    for (std::size_t i = 0; i < r.labels.data.size(); ++i) {
      if (r.labels.data[i] == 0) {
        continue;
      }
      ASSERT_LT(k, cloud.size());
      EXPECT_EQ(cloud[k].label, r.labels.data[i]);
      EXPECT_EQ(cloud[k].position[0], r.points[i].x());
      EXPECT_EQ(cloud[k].color[1], io::quantize(r.rgb.data[i * 3 + 1]));
      ++k;
    }
  }
  EXPECT_EQ(k, cloud.size());
  EXPECT_LE(cloud.size(), pixels);
  EXPECT_GT(cloud.size(), 0u);
}

TEST(Interpolate, EndpointsExactAndMidpointOfOpposites) {
  std::mt19937_64 rng(9);
  const ad::Tensor a = sample_latent(8, rng);
  const ad::Tensor b = sample_latent(8, rng);
  EXPECT_EQ(interpolate_codes(a, b, 0.0), a);
  EXPECT_EQ(interpolate_codes(a, b, 1.0), b);
  ad::Tensor neg = a;
  for (auto& v : neg.data) {
    v = -v;
  }
  for (double v : interpolate_codes(a, neg, 0.5).data) {
    EXPECT_EQ(v, 0.0);
  }
  EXPECT_THROW(interpolate_codes(a, ad::Tensor::zeros({3}), 0.5), ad::ShapeError);

  const Model model = Model::init(small_dims(), 9);
  const auto view = small_view(4);
  EXPECT_EQ(render(model, interpolate_codes(a, b, 1.0), view).rgb, render(model, b, view).rgb);
}

TEST(Model, ParameterOrderAndCodeLookup) {
  Model model = Model::init(small_dims(), 10);
  const NamedTensors params = model.parameters();
  EXPECT_EQ(params.front().first, "hyper.0.w1");
  EXPECT_EQ(params.back().first, "seg.bias");
  EXPECT_THROW((void)model.code("missing"), std::out_of_range);
  const Model again = Model::init(small_dims(), 10);
  EXPECT_EQ(again.marcher.wx, model.marcher.wx);
  EXPECT_EQ(again.rgb.weights, model.rgb.weights);
}

}  // namespace
}  // namespace ssrn
