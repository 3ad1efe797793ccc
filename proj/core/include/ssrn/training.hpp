// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// The three optimization procedures: RGB-only pretraining of the shared
// networks and per-instance codes, linear segmentation-head fitting on frozen
// features, and latent-code inference with every network weight frozen.

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ssrn/renderer.hpp"
#include "ssrn/synthetic.hpp"

namespace ssrn {

struct AdamConfig {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction and an independent step counter per named
// parameter, so a latent code only advances when it was actually used.
class Adam {
 public:
  struct Item {
    std::string name;
    ad::Tensor* value = nullptr;
    std::span<const double> grad;
  };

  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Applies one update to every item. Returns false and leaves all values
  // untouched when any gradient is non-finite.
  bool step(std::span<const Item> items);

  [[nodiscard]] std::uint64_t steps(const std::string& name) const;
  [[nodiscard]] std::size_t skipped() const { return skipped_; }
  [[nodiscard]] const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
  };

  AdamConfig config_;
  std::unordered_map<std::string, Moments> state_;
  std::size_t skipped_ = 0;
};

struct LossWeights {
  double rgb = 1.0;
  double ce = 0.04;
  double latent = 1e-3;

  void validate() const;
};

struct LossTerms {
  ad::Var total;
  double rgb = 0.0;     // mean squared error over rays and channels
  double ce = 0.0;      // mean cross-entropy over rays
  double latent = 0.0;  // squared code norm
};

// Weighted objective for one ray batch: march, shade, and compare against
// whichever targets are present.
// `ray_weights`, when given, turns the RGB term into a weighted mean.
LossTerms scene_loss(const ModelVars& vars, ad::Var code, const RayBatch& rays,
                     const ad::Tensor* rgb_target, std::span<const int> labels,
                     const LossWeights& weights, const ModelDims& dims,
                     std::span<const double> ray_weights = {});

// Per-pixel targets gathered at `pixels`.
ad::Tensor gather_rgb(const RgbImage& image, std::span<const int> pixels);
std::vector<int> gather_labels(const ClassMask& mask, std::span<const int> pixels);

struct TrainConfig {
  int steps = 2000;
  int rays_per_step = 1024;
  std::uint64_t seed = 1;
  LossWeights weights;
  AdamConfig adam;
  ModelDims dims;
  int log_every = 100;
  // Relative RGB-loss weight of non-white pixels; 1 is the plain mean.
  double foreground_weight = 1.0;
  // Cosine decay from adam.lr down to adam.lr * final_lr_fraction over the
  // run; 1 keeps the rate constant.
  double final_lr_fraction = 1.0;

  void validate() const;
  [[nodiscard]] double lr_at(int step) const;
};

struct TrainResult {
  Model model;
  std::vector<double> losses;  // total objective per step
  std::size_t skipped_steps = 0;
};

// Only RGB is supervised; masks in the dataset are never read.
TrainResult pretrain(const synth::Dataset& dataset, const TrainConfig& config,
                     std::ostream* log = nullptr);

struct LabeledObservation {
  std::string instance;
  CameraView view;
  ClassMask mask;
};

struct HeadFitConfig {
  int steps = 1500;
  double lr = 1e-2;
  int log_every = 250;
};

struct HeadFitResult {
  SegHead head;
  std::vector<double> losses;
};

// Full-batch Adam on mean softmax cross-entropy of a linear classifier over
// the rows of `x` [N x d], starting from zero weights.
HeadFitResult fit_linear_classifier(const ad::Tensor& x, std::span<const int> labels, int classes,
                                    const HeadFitConfig& config = {}, std::ostream* log = nullptr);

// Argmax class per row of `x`.
std::vector<int> predict_linear(const SegHead& head, const ad::Tensor& x);

// Full-batch Adam on the segmentation head over features rendered once from
// the frozen backbone.
HeadFitResult fit_seg_head(const Model& model, std::span<const LabeledObservation> labeled,
                           const HeadFitConfig& config = {}, std::ostream* log = nullptr);

// Picks `count` labeled (instance, train view) pairs by seeded rejection
// sampling until every class id occurs in at least one chosen mask. Distinct
// instances are used while they last.
std::vector<std::pair<std::string, std::string>> select_labeled_views(
    const synth::Dataset& dataset, int count, std::uint64_t seed, int max_attempts = 10000);

std::vector<LabeledObservation> labeled_observations(
    const synth::Dataset& dataset, std::span<const std::pair<std::string, std::string>> picks);

struct Observation {
  CameraView view;
  std::optional<RgbImage> rgb;
  std::optional<ClassMask> mask;
};

struct InferConfig {
  int iters = 300;
  double lr = 1e-2;
  std::uint64_t seed = 1;
  LossWeights weights;
  // When false, pixels labeled 0 are left out of the cross-entropy.
  bool ce_background = true;
  int log_every = 0;
};

struct InferResult {
  ad::Tensor code;
  double initial_objective = 0.0;
  double best_objective = 0.0;
  std::vector<double> objectives;  // one per evaluated iterate
};

// Returns the lowest-objective iterate, including the initialization.
InferResult infer_latent(const Model& model, std::span<const Observation> observations,
                         const InferConfig& config = {}, std::ostream* log = nullptr);

}  // namespace ssrn
