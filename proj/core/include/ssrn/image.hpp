// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace ssrn {

// Interleaved RGB in [0, 1], row-major from the top-left pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  RgbImage() = default;
  RgbImage(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  double& at(int u, int v, int ch) { return data[(static_cast<std::size_t>(v) * width + u) * 3 + ch]; }
  [[nodiscard]] double at(int u, int v, int ch) const {
    return data[(static_cast<std::size_t>(v) * width + u) * 3 + ch];
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Per-pixel class ids.
struct ClassMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ClassMask() = default;
  ClassMask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  [[nodiscard]] std::uint8_t at(int u, int v) const {
    return data[static_cast<std::size_t>(v) * width + u];
  }
  friend bool operator==(const ClassMask&, const ClassMask&) = default;
};

// Hit distance along each pixel's unit ray; +inf where nothing was hit.
struct DepthMap {
  static constexpr double kMiss = std::numeric_limits<double>::infinity();

  int width = 0;
  int height = 0;
  std::vector<double> data;

  DepthMap() = default;
  DepthMap(int w, int h, double fill = kMiss)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  [[nodiscard]] double at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
  friend bool operator==(const DepthMap&, const DepthMap&) = default;
};

}  // namespace ssrn
