// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable LSTM ray marcher plus the two per-point heads (RGB and
// linear segmentation), and the Model aggregate that owns every learnable
// tensor.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssrn/autodiff.hpp"
#include "ssrn/camera.hpp"
#include "ssrn/image.hpp"
#include "ssrn/io.hpp"
#include "ssrn/scene_model.hpp"

namespace ssrn {

// LSTM over scene features with a softplus step-length projection. Gate
// blocks in the fused matrices are ordered input, forget, cell, output.
struct Marcher {
  ad::Tensor wx;      // [n x 4m]
  ad::Tensor wh;      // [m x 4m]
  ad::Tensor bias;    // [4m]
  ad::Tensor proj_w;  // [m x 1]
  ad::Tensor proj_b;  // [1]

  static Marcher init(const ModelDims& dims, std::mt19937_64& rng);
  void collect(NamedTensors& out);
};

// 4-layer MLP n -> r -> r -> r -> 3 with layer norm + ReLU on hidden layers
// and a sigmoid output.
struct RgbHead {
  std::vector<ad::Tensor> weights;
  std::vector<ad::Tensor> biases;
  std::vector<ad::Tensor> ln_gain;
  std::vector<ad::Tensor> ln_bias;

  static RgbHead init(const ModelDims& dims, std::mt19937_64& rng);
  void collect(NamedTensors& out);
};

// Linear classifier over features: exactly n*c + c parameters.
struct SegHead {
  ad::Tensor weight;  // [n x c]
  ad::Tensor bias;    // [c]

  static SegHead init(const ModelDims& dims, std::mt19937_64& rng);
  static SegHead zeros(const ModelDims& dims);
  void collect(NamedTensors& out);
  [[nodiscard]] std::size_t parameter_count() const { return weight.size() + bias.size(); }
  // Plain-value logits for one feature row.
  [[nodiscard]] std::vector<double> logits(std::span<const double> feature) const;
};

struct Model {
  ModelDims dims;
  Hypernetwork hyper;
  Marcher marcher;
  RgbHead rgb;
  SegHead seg;
  std::vector<std::string> class_names;
  // Per training instance latent code, [k].
  std::map<std::string, ad::Tensor> codes;

  static Model init(const ModelDims& dims, std::uint64_t seed);

  // Every network tensor (not the codes), in a fixed order.
  NamedTensors parameters();
  // Lookup of a single code, rejecting unknown ids.
  [[nodiscard]] const ad::Tensor& code(const std::string& instance) const;
};

// Bound views of the networks on one tape.
struct MarcherVars {
  ad::Var wx, wh, bias, proj_w, proj_b;
};
struct RgbHeadVars {
  std::vector<ad::Var> weights, biases, ln_gain, ln_bias;
};
struct SegHeadVars {
  ad::Var weight, bias;
};

MarcherVars bind(Binding& binding, const Marcher& marcher, bool trainable);
RgbHeadVars bind(Binding& binding, const RgbHead& head, bool trainable);
SegHeadVars bind(Binding& binding, const SegHead& head, bool trainable);

struct ModelVars {
  HypernetVars hyper;
  MarcherVars marcher;
  RgbHeadVars rgb;
  SegHeadVars seg;
};

struct Trainable {
  bool hyper = false;
  bool marcher = false;
  bool rgb = false;
  bool seg = false;
};

ModelVars bind(Binding& binding, const Model& model, Trainable trainable);

struct RayBatch {
  ad::Tensor origins;     // [B x 3]
  ad::Tensor directions;  // [B x 3], unit length

  [[nodiscard]] std::size_t size() const { return origins.rows(); }
};

RayBatch make_ray_batch(const std::vector<Ray>& rays);
RayBatch make_ray_batch(const CameraView& view, std::span<const int> pixel_indices);

class MarchError : public std::runtime_error {
 public:
  MarchError(std::size_t ray, const std::string& what)
      : std::runtime_error(what + " (ray " + std::to_string(ray) + ")"), ray_(ray) {}
  [[nodiscard]] std::size_t ray() const { return ray_; }

 private:
  std::size_t ray_;
};

struct MarchTrace {
  ad::Var points;              // [B x 3]
  ad::Var depth;               // [B x 1]
  std::vector<ad::Var> depths; // one [B x 1] per step, after the update
};

// One LSTM step, exposed for equation-level testing.
struct LstmState {
  ad::Var hidden;
  ad::Var cell;
};
LstmState lstm_step(const MarcherVars& marcher, ad::Var input, const LstmState& state);

// Marches every ray `dims.march_steps` times from the initial depth. Throws
// MarchError when a queried feature is not finite.
MarchTrace march(const SceneFunction& scene, const RayBatch& rays, const MarcherVars& marcher,
                 const ModelDims& dims);

// Final feature query and both heads.
struct HeadOutputs {
  ad::Var features;  // [B x n]
  ad::Var rgb;       // [B x 3]
  ad::Var logits;    // [B x c]
};
HeadOutputs shade(const SceneFunction& scene, ad::Var points, const RgbHeadVars& rgb,
                  const SegHeadVars& seg);

// Plain-value render of a full view.
struct RenderOutput {
  int width = 0;
  int height = 0;
  int classes = 0;
  RgbImage rgb;
  std::vector<double> logits;  // [H*W x c]
  DepthMap depth;              // marched depth (always finite)
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> origins;
  std::vector<Eigen::Vector3d> directions;
  ClassMask labels;
  std::vector<double> features;  // [H*W x n], only with keep_features
};

struct RenderOptions {
  std::size_t chunk = 1024;
  bool keep_features = false;
};

// Labels are the argmax of the logits, except that rays pushed to the far
// depth bound are background (class 0).
RenderOutput render(const Model& model, const ad::Tensor& code, const CameraView& view,
                    RenderOptions options = {});

struct PointCloudOptions {
  // Labels in this set are dropped.
  std::vector<int> background_labels = {0};
};

// Union over views of marched intersection points whose rendered label is
// foreground, each carrying the rendered RGB and label of its source pixel.
std::vector<io::LabeledPoint> point_cloud(const Model& model, const ad::Tensor& code,
                                          const std::vector<CameraView>& views,
                                          PointCloudOptions options = {});

// (1 - alpha) * a + alpha * b.
ad::Tensor interpolate_codes(const ad::Tensor& a, const ad::Tensor& b, double alpha);

}  // namespace ssrn
