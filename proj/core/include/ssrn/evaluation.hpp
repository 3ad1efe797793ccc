// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Segmentation metrics, PSNR and the cross-view label consistency statistic.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssrn/image.hpp"
#include "ssrn/renderer.hpp"
#include "ssrn/synthetic.hpp"

namespace ssrn::eval {

struct SegmentationResult {
  ClassMask predicted;
  ClassMask truth;
};

// Per image, mean IoU over classes present in truth or prediction; then the
// unweighted mean over images. Images whose class set is empty (possible
// only with ignore_background) are skipped.
double miou(std::span<const SegmentationResult> results, int classes, bool ignore_background = false);

// Per class, IoU of intersection and union counts pooled over all images;
// classes with an empty pooled union are skipped. Mean over classes.
double shape_miou(std::span<const SegmentationResult> results, int classes,
                  bool ignore_background = false);

// 10 log10(1 / MSE); +inf for identical images.
double psnr(const RgbImage& predicted, const RgbImage& truth);

struct ViewPair {
  ad::Tensor code;
  synth::ViewRecord a;
  synth::ViewRecord b;
};

struct ConsistencyOptions {
  int samples_per_pair = 200;
  double tolerance = 0.02;
  std::uint64_t seed = 1;
};

struct ConsistencyResult {
  double rate = 0.0;
  std::size_t agreed = 0;
  std::size_t compared = 0;
};

// Lifts ground-truth foreground pixels of view A to surface points, keeps
// those that view B also sees (B's ground-truth depth along the pixel ray
// through the projection matches within `tolerance`), and counts how often
// the rendered labels at the two pixels agree.
ConsistencyResult consistency_rate(const Model& model, std::span<const ViewPair> pairs,
                                   const ConsistencyOptions& options = {});

struct MetricReport {
  double miou = 0.0;
  double shape_miou = 0.0;
  double psnr_mean = 0.0;
  double consistency_rate = 0.0;
  std::size_t images = 0;

  [[nodiscard]] std::string to_key_value() const;
  [[nodiscard]] std::string to_json() const;
};

}  // namespace ssrn::eval
