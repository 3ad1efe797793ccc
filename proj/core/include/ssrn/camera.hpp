// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pinhole cameras. Conventions: the camera looks along its local +z axis,
// image rows grow downward from a top-left origin, and pixel (u, v) is
// sampled at its center (u + 0.5, v + 0.5).

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <string>
#include <vector>

namespace ssrn {

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  // Square-pixel intrinsics with the principal point at the image center.
  static Intrinsics centered(int width, int height, double focal);
  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

// Camera-to-world rigid transform.
class Pose {
 public:
  Pose() : m_(Eigen::Matrix4d::Identity()) {}
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  // Validates orthonormality, handedness and the affine last row (1e-9).
  static Pose from_matrix(const Eigen::Matrix4d& m);

  // Camera at `eye` whose +z axis points at `target`. Uses +y as the up
  // reference and falls back to +x when the view direction is colinear
  // with it.
  static Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

  [[nodiscard]] const Eigen::Matrix4d& matrix() const { return m_; }
  [[nodiscard]] Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  [[nodiscard]] Eigen::Vector3d translation() const { return m_.topRightCorner<3, 1>(); }
  [[nodiscard]] Pose inverse() const;
  [[nodiscard]] Pose compose(const Pose& other) const;

  // 16 whitespace-separated row-major decimals, round-trip exact.
  [[nodiscard]] std::string serialize() const;
  static Pose parse(const std::string& text);

  friend bool operator==(const Pose& a, const Pose& b) { return a.m_ == b.m_; }

 private:
  explicit Pose(const Eigen::Matrix4d& m) : m_(m) {}
  Eigen::Matrix4d m_;
};

struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
};

struct CameraView {
  Intrinsics intrinsics;
  Pose pose;
  int width = 1;
  int height = 1;

  void validate() const;
  [[nodiscard]] int pixel_count() const { return width * height; }
};

// Row-major [height x width] grid of rays.
std::vector<Ray> rays_for_view(const CameraView& view);

// Ray through the center of a single pixel.
Ray pixel_ray(const CameraView& view, int u, int v);

// Projects a world point; returns false when it lies behind the camera.
bool project(const CameraView& view, const Eigen::Vector3d& world, double& u, double& v);

// Area-uniform camera centers on a sphere around the origin, each looking at
// the origin. Deterministic in `seed`.
std::vector<Pose> sample_sphere_poses(int n, double radius, std::uint64_t seed);

// Camera on a horizontal circle at the given elevation; used for orbit paths.
Pose orbit_pose(double radius, double azimuth, double elevation);

}  // namespace ssrn
