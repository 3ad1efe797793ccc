// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/scene_model.hpp"

#include <cmath>
#include <stdexcept>

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

}  // namespace

void ModelDims::validate() const {
  if (latent < 1 || hidden < 1 || feature < 1 || marcher_hidden < 1 || rgb_hidden < 1) {
    throw std::invalid_argument("model dims must be positive");
  }
  if (classes < 2) {
    throw std::invalid_argument("model needs at least 2 classes");
  }
  if (march_steps < 1) {
    throw std::invalid_argument("march_steps must be >= 1");
  }
  if (!(initial_depth() > 0.0)) {
    throw std::invalid_argument("initial depth must be positive");
  }
  if (!(ln_eps > 0.0) || !(initial_step > 0.0)) {
    throw std::invalid_argument("ln_eps and initial_step must be positive");
  }
}

ad::Var Binding::operator()(const std::string& name, const ad::Tensor& value, bool trainable) {
  ad::Var v = tape_->leaf(value, trainable);
  if (trainable) {
    trainable_.emplace_back(name, v);
  }
  return v;
}

std::vector<std::pair<int, int>> scene_layer_sizes(const ModelDims& dims) {
  return {{3, dims.hidden}, {dims.hidden, dims.hidden}, {dims.hidden, dims.hidden},
          {dims.hidden, dims.feature}};
}

Hypernetwork Hypernetwork::init(const ModelDims& dims, std::mt19937_64& rng) {
  dims.validate();
  const auto k = static_cast<std::size_t>(dims.latent);
  Hypernetwork hyper;
  for (auto [in, out] : scene_layer_sizes(dims)) {
    HyperHead head;
    head.in = in;
    head.out = out;
    head.w1 = gaussian({k, k}, std::sqrt(2.0 / static_cast<double>(k)), rng);
    head.b1 = ad::Tensor::zeros({k});
    head.ln_gain = ad::Tensor::filled({k}, 1.0);
    head.ln_bias = ad::Tensor::zeros({k});
    // The hidden layer is layer-normed, so its ReLU output has energy ~k/2;
    // this sigma puts emitted weights near Kaiming scale for the target layer.
    const double sigma = 2.0 / std::sqrt(static_cast<double>(k) * in);
    head.w2 = gaussian({k, head.emitted()}, sigma, rng);
    head.b2 = ad::Tensor::zeros({head.emitted()});
    hyper.heads.push_back(std::move(head));
  }
  return hyper;
}

std::size_t Hypernetwork::generated_count() const {
  std::size_t n = 0;
  for (const auto& h : heads) {
    n += h.emitted();
  }
  return n;
}

void Hypernetwork::collect(NamedTensors& out) {
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const std::string p = "hyper." + std::to_string(i) + ".";
    auto& h = heads[i];
    out.emplace_back(p + "w1", &h.w1);
    out.emplace_back(p + "b1", &h.b1);
    out.emplace_back(p + "ln_gain", &h.ln_gain);
    out.emplace_back(p + "ln_bias", &h.ln_bias);
    out.emplace_back(p + "w2", &h.w2);
    out.emplace_back(p + "b2", &h.b2);
  }
}

HypernetVars bind(Binding& binding, const Hypernetwork& hyper, double ln_eps, bool trainable) {
  HypernetVars vars;
  vars.ln_eps = ln_eps;
  for (std::size_t i = 0; i < hyper.heads.size(); ++i) {
    const std::string p = "hyper." + std::to_string(i) + ".";
    auto& h = hyper.heads[i];
    vars.heads.push_back({h.in, h.out, binding(p + "w1", h.w1, trainable),
                          binding(p + "b1", h.b1, trainable),
                          binding(p + "ln_gain", h.ln_gain, trainable),
                          binding(p + "ln_bias", h.ln_bias, trainable),
                          binding(p + "w2", h.w2, trainable), binding(p + "b2", h.b2, trainable)});
  }
  return vars;
}

SceneFunction generate_scene(const HypernetVars& hyper, ad::Var z) {
  if (hyper.heads.empty()) {
    throw std::invalid_argument("generate_scene: empty hypernetwork");
  }
  const std::size_t k = hyper.heads.front().w1.shape().rows();
  if (z.shape().size() != k) {
    throw ad::ShapeError("generate_scene: latent has " + std::to_string(z.shape().size()) +
                         " entries, hypernetwork expects " + std::to_string(k));
  }
  ad::Tape& tape = z.tape();
  const ad::Var zr = z.shape().rank() == 2 ? z : ad::view(z, 0, ad::Shape{1, k});
  SceneFunction scene;
  scene.ln_eps = hyper.ln_eps;
  for (const auto& h : hyper.heads) {
    ad::Var hidden = ad::add_bias_row(ad::matmul(zr, h.w1), h.b1);
    hidden = ad::relu(ad::layer_norm(hidden, h.ln_gain, h.ln_bias, hyper.ln_eps));
    const ad::Var emitted = ad::add_bias_row(ad::matmul(hidden, h.w2), h.b2);
    const auto in = static_cast<std::size_t>(h.in);
    const auto out = static_cast<std::size_t>(h.out);
    scene.weights.push_back(ad::view(emitted, 0, ad::Shape{in, out}));
    scene.biases.push_back(ad::view(emitted, in * out, ad::Shape{out}));
    scene.ln_unit_gain.push_back(tape.constant(ad::Tensor::filled({out}, 1.0)));
    scene.ln_zero_bias.push_back(tape.constant(ad::Tensor::zeros({out})));
  }
  return scene;
}

std::vector<double> SceneFunction::flat_weights() const {
  std::vector<double> w;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto a = weights[i].data();
    auto b = biases[i].data();
    w.insert(w.end(), a.begin(), a.end());
    w.insert(w.end(), b.begin(), b.end());
  }
  return w;
}

ad::Var scene_features(const SceneFunction& scene, ad::Var points) {
  if (points.shape().cols() != 3) {
    throw ad::ShapeError("scene_features: points must be [B x 3], got " + points.shape().str());
  }
  ad::Var h = points;
  const std::size_t layers = scene.weights.size();
  for (std::size_t i = 0; i < layers; ++i) {
    h = ad::add_bias_row(ad::matmul(h, scene.weights[i]), scene.biases[i]);
    if (i + 1 < layers) {
      h = ad::relu(ad::layer_norm(h, scene.ln_unit_gain[i], scene.ln_zero_bias[i], scene.ln_eps));
    }
  }
  return h;
}

ad::Tensor sample_latent(int dim, std::mt19937_64& rng, double sigma) {
  return gaussian({static_cast<std::size_t>(dim)}, sigma, rng);
}

}  // namespace ssrn
