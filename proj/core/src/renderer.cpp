// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ssrn {

namespace {

ad::Tensor gaussian(ad::Shape shape, double sigma, std::mt19937_64& rng) {
  ad::Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& v : t.data) {
    v = dist(rng);
  }
  return t;
}

ad::Tensor uniform(ad::Shape shape, double bound, std::mt19937_64& rng) {
  ad::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data) {
    v = dist(rng);
  }
  return t;
}

void require_finite(const ad::Var& v, const char* what) {
  const auto d = v.data();
  const std::size_t cols = v.shape().cols();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      throw MarchError(i / cols, std::string("non-finite ") + what);
    }
  }
}

}  // namespace

Marcher Marcher::init(const ModelDims& dims, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(dims.feature);
  const auto m = static_cast<std::size_t>(dims.marcher_hidden);
  const double bound = 1.0 / std::sqrt(static_cast<double>(m));
  Marcher mr;
  mr.wx = uniform({n, 4 * m}, bound, rng);
  mr.wh = uniform({m, 4 * m}, bound, rng);
  mr.bias = ad::Tensor::zeros({4 * m});
  for (std::size_t j = m; j < 2 * m; ++j) {
    mr.bias.data[j] = 1.0;  // forget gate
  }
  mr.proj_w = gaussian({m, 1}, 1e-3, rng);
  // softplus^-1(initial_step)
  mr.proj_b = ad::Tensor({1}, {std::log(std::expm1(dims.initial_step))});
  return mr;
}

void Marcher::collect(NamedTensors& out) {
  out.emplace_back("marcher.wx", &wx);
  out.emplace_back("marcher.wh", &wh);
  out.emplace_back("marcher.bias", &bias);
  out.emplace_back("marcher.proj_w", &proj_w);
  out.emplace_back("marcher.proj_b", &proj_b);
}

RgbHead RgbHead::init(const ModelDims& dims, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(dims.feature);
  const auto r = static_cast<std::size_t>(dims.rgb_hidden);
  const std::vector<std::pair<std::size_t, std::size_t>> sizes = {{n, r}, {r, r}, {r, r}, {r, 3}};
  RgbHead head;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto [in, out] = sizes[i];
    const bool last = i + 1 == sizes.size();
    head.weights.push_back(gaussian({in, out}, std::sqrt((last ? 1.0 : 2.0) / in), rng));
    head.biases.push_back(ad::Tensor::zeros({out}));
    if (!last) {
      head.ln_gain.push_back(ad::Tensor::filled({out}, 1.0));
      head.ln_bias.push_back(ad::Tensor::zeros({out}));
    }
  }
  return head;
}

void RgbHead::collect(NamedTensors& out) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::string p = "rgb." + std::to_string(i) + ".";
    out.emplace_back(p + "w", &weights[i]);
    out.emplace_back(p + "b", &biases[i]);
    if (i < ln_gain.size()) {
      out.emplace_back(p + "ln_gain", &ln_gain[i]);
      out.emplace_back(p + "ln_bias", &ln_bias[i]);
    }
  }
}

SegHead SegHead::init(const ModelDims& dims, std::mt19937_64& rng) {
  SegHead head;
  head.weight = gaussian({static_cast<std::size_t>(dims.feature), static_cast<std::size_t>(dims.classes)},
                         0.01, rng);
  head.bias = ad::Tensor::zeros({static_cast<std::size_t>(dims.classes)});
  return head;
}

SegHead SegHead::zeros(const ModelDims& dims) {
  SegHead head;
  head.weight = ad::Tensor::zeros(
      {static_cast<std::size_t>(dims.feature), static_cast<std::size_t>(dims.classes)});
  head.bias = ad::Tensor::zeros({static_cast<std::size_t>(dims.classes)});
  return head;
}

void SegHead::collect(NamedTensors& out) {
  out.emplace_back("seg.weight", &weight);
  out.emplace_back("seg.bias", &bias);
}

std::vector<double> SegHead::logits(std::span<const double> feature) const {
  const std::size_t n = weight.rows();
  const std::size_t c = weight.cols();
  if (feature.size() != n) {
    throw ad::ShapeError("SegHead::logits: feature has wrong length");
  }
  std::vector<double> out(bias.data.begin(), bias.data.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out[j] += feature[i] * weight.data[i * c + j];
    }
  }
  return out;
}

Model Model::init(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  std::mt19937_64 rng(seed);
  Model model;
  model.dims = dims;
  model.hyper = Hypernetwork::init(dims, rng);
  model.marcher = Marcher::init(dims, rng);
  model.rgb = RgbHead::init(dims, rng);
  model.seg = SegHead::init(dims, rng);
  return model;
}

NamedTensors Model::parameters() {
  NamedTensors out;
  hyper.collect(out);
  marcher.collect(out);
  rgb.collect(out);
  seg.collect(out);
  return out;
}

const ad::Tensor& Model::code(const std::string& instance) const {
  auto it = codes.find(instance);
  if (it == codes.end()) {
    throw std::out_of_range("model has no latent code for instance '" + instance + "'");
  }
  return it->second;
}

MarcherVars bind(Binding& binding, const Marcher& marcher, bool trainable) {
  return {binding("marcher.wx", marcher.wx, trainable), binding("marcher.wh", marcher.wh, trainable),
          binding("marcher.bias", marcher.bias, trainable),
          binding("marcher.proj_w", marcher.proj_w, trainable),
          binding("marcher.proj_b", marcher.proj_b, trainable)};
}

RgbHeadVars bind(Binding& binding, const RgbHead& head, bool trainable) {
  RgbHeadVars vars;
  for (std::size_t i = 0; i < head.weights.size(); ++i) {
    const std::string p = "rgb." + std::to_string(i) + ".";
    vars.weights.push_back(binding(p + "w", head.weights[i], trainable));
    vars.biases.push_back(binding(p + "b", head.biases[i], trainable));
    if (i < head.ln_gain.size()) {
      vars.ln_gain.push_back(binding(p + "ln_gain", head.ln_gain[i], trainable));
      vars.ln_bias.push_back(binding(p + "ln_bias", head.ln_bias[i], trainable));
    }
  }
  return vars;
}

SegHeadVars bind(Binding& binding, const SegHead& head, bool trainable) {
  return {binding("seg.weight", head.weight, trainable), binding("seg.bias", head.bias, trainable)};
}

ModelVars bind(Binding& binding, const Model& model, Trainable trainable) {
  return {bind(binding, model.hyper, model.dims.ln_eps, trainable.hyper),
          bind(binding, model.marcher, trainable.marcher), bind(binding, model.rgb, trainable.rgb),
          bind(binding, model.seg, trainable.seg)};
}

RayBatch make_ray_batch(const std::vector<Ray>& rays) {
  RayBatch batch{ad::Tensor({rays.size(), 3}), ad::Tensor({rays.size(), 3})};
  for (std::size_t i = 0; i < rays.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      batch.origins.at(i, static_cast<std::size_t>(c)) = rays[i].origin[c];
      batch.directions.at(i, static_cast<std::size_t>(c)) = rays[i].direction[c];
    }
  }
  return batch;
}

RayBatch make_ray_batch(const CameraView& view, std::span<const int> pixel_indices) {
  std::vector<Ray> rays;
  rays.reserve(pixel_indices.size());
  for (int idx : pixel_indices) {
    if (idx < 0 || idx >= view.pixel_count()) {
      throw std::out_of_range("pixel index outside view");
    }
    rays.push_back(pixel_ray(view, idx % view.width, idx / view.width));
  }
  return make_ray_batch(rays);
}

LstmState lstm_step(const MarcherVars& marcher, ad::Var input, const LstmState& state) {
  const std::size_t m = marcher.wh.shape().rows();
  const ad::Var gates = ad::add_bias_row(
      ad::add(ad::matmul(input, marcher.wx), ad::matmul(state.hidden, marcher.wh)), marcher.bias);
  const ad::Var i = ad::sigmoid(ad::slice_cols(gates, 0, m));
  const ad::Var f = ad::sigmoid(ad::slice_cols(gates, m, m));
  const ad::Var g = ad::tanh(ad::slice_cols(gates, 2 * m, m));
  const ad::Var o = ad::sigmoid(ad::slice_cols(gates, 3 * m, m));
  const ad::Var cell = ad::add(ad::mul(f, state.cell), ad::mul(i, g));
  const ad::Var hidden = ad::mul(o, ad::tanh(cell));
  return {hidden, cell};
}

MarchTrace march(const SceneFunction& scene, const RayBatch& rays, const MarcherVars& marcher,
                 const ModelDims& dims) {
  ad::Tape& tape = marcher.wx.tape();
  const std::size_t b = rays.size();
  const std::size_t m = marcher.wh.shape().rows();
  const ad::Var origins = tape.constant(rays.origins);
  const ad::Var dirs = tape.constant(rays.directions);
  ad::Var depth = tape.constant(ad::Tensor::filled({b, 1}, dims.initial_depth()));
  LstmState state{tape.constant(ad::Tensor::zeros({b, m})), tape.constant(ad::Tensor::zeros({b, m}))};
  MarchTrace trace;
  for (int s = 0; s < dims.march_steps; ++s) {
    const ad::Var points = ad::add(origins, ad::scale_rows(dirs, depth));
    const ad::Var v = scene_features(scene, points);
    require_finite(v, "scene feature while marching");
    state = lstm_step(marcher, v, state);
    const ad::Var step =
        ad::softplus(ad::add_bias_row(ad::matmul(state.hidden, marcher.proj_w), marcher.proj_b));
    depth = ad::clamp_max(ad::add(depth, step), dims.max_depth());
    trace.depths.push_back(depth);
  }
  trace.depth = depth;
  trace.points = ad::add(origins, ad::scale_rows(dirs, depth));
  return trace;
}

HeadOutputs shade(const SceneFunction& scene, ad::Var points, const RgbHeadVars& rgb,
                  const SegHeadVars& seg) {
  HeadOutputs out;
  out.features = scene_features(scene, points);
  require_finite(out.features, "final scene feature");
  ad::Var h = out.features;
  const std::size_t layers = rgb.weights.size();
  for (std::size_t i = 0; i < layers; ++i) {
    h = ad::add_bias_row(ad::matmul(h, rgb.weights[i]), rgb.biases[i]);
    if (i + 1 < layers) {
      h = ad::relu(ad::layer_norm(h, rgb.ln_gain[i], rgb.ln_bias[i]));
    }
  }
  out.rgb = ad::sigmoid(h);
  out.logits = ad::add_bias_row(ad::matmul(out.features, seg.weight), seg.bias);
  return out;
}

RenderOutput render(const Model& model, const ad::Tensor& code, const CameraView& view,
                    RenderOptions options) {
  view.validate();
  const auto rays = rays_for_view(view);
  const std::size_t total = rays.size();
  const std::size_t c = static_cast<std::size_t>(model.dims.classes);
  const std::size_t n = static_cast<std::size_t>(model.dims.feature);
  const std::size_t chunk = std::max<std::size_t>(1, options.chunk);

  RenderOutput out;
  out.width = view.width;
  out.height = view.height;
  out.classes = model.dims.classes;
  out.rgb = RgbImage(view.width, view.height);
  out.logits.assign(total * c, 0.0);
  out.depth = DepthMap(view.width, view.height, 0.0);
  out.labels = ClassMask(view.width, view.height);
  out.points.resize(total);
  out.origins.resize(total);
  out.directions.resize(total);
  if (options.keep_features) {
    out.features.assign(total * n, 0.0);
  }

  for (std::size_t start = 0; start < total; start += chunk) {
    const std::size_t count = std::min(chunk, total - start);
    std::vector<Ray> part(rays.begin() + static_cast<std::ptrdiff_t>(start),
                          rays.begin() + static_cast<std::ptrdiff_t>(start + count));
    const RayBatch batch = make_ray_batch(part);
    ad::Tape tape;
    Binding binding(tape);
    const ModelVars vars = bind(binding, model, Trainable{});
    const SceneFunction scene = generate_scene(vars.hyper, tape.constant(code));
    MarchTrace trace;
    try {
      trace = march(scene, batch, vars.marcher, model.dims);
    } catch (const MarchError& e) {
      throw MarchError(start + e.ray(), "render: marching failed");
    }
    const HeadOutputs heads = shade(scene, trace.points, vars.rgb, vars.seg);
    const auto depth = trace.depth.data();
    const auto pts = trace.points.data();
    const auto rgb = heads.rgb.data();
    const auto logits = heads.logits.data();
    const auto feats = heads.features.data();
    for (std::size_t r = 0; r < count; ++r) {
      const std::size_t p = start + r;
      const int u = static_cast<int>(p % static_cast<std::size_t>(view.width));
      const int v = static_cast<int>(p / static_cast<std::size_t>(view.width));
      out.depth.at(u, v) = depth[r];
      out.points[p] = Eigen::Vector3d(pts[3 * r], pts[3 * r + 1], pts[3 * r + 2]);
      out.origins[p] = part[r].origin;
      out.directions[p] = part[r].direction;
      for (int ch = 0; ch < 3; ++ch) {
        out.rgb.at(u, v, ch) = rgb[3 * r + static_cast<std::size_t>(ch)];
      }
      std::copy_n(logits.data() + r * c, c, out.logits.data() + p * c);
      if (options.keep_features) {
        std::copy_n(feats.data() + r * n, n, out.features.data() + p * n);
      }
      const auto* row = logits.data() + r * c;
      int label = static_cast<int>(std::max_element(row, row + c) - row);
      if (depth[r] >= model.dims.max_depth()) {
        label = 0;
      }
      out.labels.at(u, v) = static_cast<std::uint8_t>(label);
    }
  }
  return out;
}

std::vector<io::LabeledPoint> point_cloud(const Model& model, const ad::Tensor& code,
                                          const std::vector<CameraView>& views,
                                          PointCloudOptions options) {
  const std::set<int> background(options.background_labels.begin(), options.background_labels.end());
  std::vector<io::LabeledPoint> cloud;
  for (const auto& view : views) {
    const RenderOutput r = render(model, code, view);
    for (int v = 0; v < r.height; ++v) {
      for (int u = 0; u < r.width; ++u) {
        const int label = r.labels.at(u, v);
        if (background.contains(label)) {
          continue;
        }
        const auto& p = r.points[static_cast<std::size_t>(v) * r.width + u];
        io::LabeledPoint lp;
        lp.position = {p.x(), p.y(), p.z()};
        lp.color = {io::quantize(r.rgb.at(u, v, 0)), io::quantize(r.rgb.at(u, v, 1)),
                    io::quantize(r.rgb.at(u, v, 2))};
        lp.label = static_cast<std::uint8_t>(label);
        cloud.push_back(lp);
      }
    }
  }
  return cloud;
}

ad::Tensor interpolate_codes(const ad::Tensor& a, const ad::Tensor& b, double alpha) {
  if (a.shape.size() != b.shape.size()) {
    throw ad::ShapeError("interpolate_codes: codes differ in length");
  }
  if (alpha == 0.0) {
    return a;
  }
  if (alpha == 1.0) {
    return b;
  }
  ad::Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = (1.0 - alpha) * a.data[i] + alpha * b.data[i];
  }
  return out;
}

}  // namespace ssrn
