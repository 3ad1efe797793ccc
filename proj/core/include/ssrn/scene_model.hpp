// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Latent-conditioned implicit scene: a hypernetwork turns a per-object latent
// code into the weights of a small coordinate MLP that maps world points to
// feature vectors.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ssrn/autodiff.hpp"

namespace ssrn {

struct ModelDims {
  int latent = 32;          // k
  int hidden = 32;          // scene-function width h
  int feature = 32;         // n
  int marcher_hidden = 32;  // LSTM width
  int rgb_hidden = 32;
  int classes = 5;          // c, including background
  int march_steps = 10;
  double camera_radius = 2.5;
  // Marching starts this far in front of the unit object sphere's far side
  // and is clamped the same distance behind it.
  double depth_margin = 1.2;
  double initial_step = 0.08;
  double ln_eps = 1e-5;

  [[nodiscard]] double initial_depth() const { return camera_radius - depth_margin; }
  [[nodiscard]] double max_depth() const { return camera_radius + depth_margin; }
  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Puts long-lived parameter tensors onto a tape and remembers which leaves
// should have their gradients harvested.
class Binding {
 public:
  explicit Binding(ad::Tape& tape) : tape_(&tape) {}

  ad::Var operator()(const std::string& name, const ad::Tensor& value, bool trainable);

  [[nodiscard]] ad::Tape& tape() const { return *tape_; }
  [[nodiscard]] const std::vector<std::pair<std::string, ad::Var>>& trainable() const {
    return trainable_;
  }

 private:
  ad::Tape* tape_;
  std::vector<std::pair<std::string, ad::Var>> trainable_;
};

using NamedTensors = std::vector<std::pair<std::string, ad::Tensor*>>;

// Per scene-function layer, a one-hidden-layer MLP emitting that layer's
// flattened [in x out] weights followed by its [out] biases.
struct HyperHead {
  int in = 0;
  int out = 0;
  ad::Tensor w1;       // [k x k]
  ad::Tensor b1;       // [k]
  ad::Tensor ln_gain;  // [k]
  ad::Tensor ln_bias;  // [k]
  ad::Tensor w2;       // [k x (in*out + out)]
  ad::Tensor b2;       // [in*out + out]

  [[nodiscard]] std::size_t emitted() const { return static_cast<std::size_t>(in * out + out); }
};

struct Hypernetwork {
  std::vector<HyperHead> heads;

  static Hypernetwork init(const ModelDims& dims, std::mt19937_64& rng);
  // Total scene-function weight count l.
  [[nodiscard]] std::size_t generated_count() const;
  void collect(NamedTensors& out);
};

// Layer sizes of the 4-layer scene function: 3 -> h -> h -> h -> n.
std::vector<std::pair<int, int>> scene_layer_sizes(const ModelDims& dims);

struct HypernetVars {
  struct Head {
    int in = 0;
    int out = 0;
    ad::Var w1, b1, ln_gain, ln_bias, w2, b2;
  };
  std::vector<Head> heads;
  double ln_eps = 1e-5;
};

HypernetVars bind(Binding& binding, const Hypernetwork& hyper, double ln_eps, bool trainable);

// Generated weights living on a tape; immutable once produced.
struct SceneFunction {
  std::vector<ad::Var> weights;  // [in x out]
  std::vector<ad::Var> biases;   // [out]
  std::vector<ad::Var> ln_unit_gain;
  std::vector<ad::Var> ln_zero_bias;
  double ln_eps = 1e-5;

  // Flattened w in R^l.
  [[nodiscard]] std::vector<double> flat_weights() const;
};

// z is [k] or [1 x k].
SceneFunction generate_scene(const HypernetVars& hyper, ad::Var z);

// points [B x 3] -> features [B x n]. Hidden layers apply layer norm, then
// ReLU; the output layer is linear.
ad::Var scene_features(const SceneFunction& scene, ad::Var points);

// Zero-mean Gaussian code with sigma 0.01.
ad::Tensor sample_latent(int dim, std::mt19937_64& rng, double sigma = 0.01);

}  // namespace ssrn
