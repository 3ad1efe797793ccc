// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/camera.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ssrn {

Intrinsics Intrinsics::centered(int width, int height, double focal) {
  return {focal, focal, 0.5 * width, 0.5 * height};
}

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : m_(Eigen::Matrix4d::Identity()) {
  m_.topLeftCorner<3, 3>() = rotation;
  m_.topRightCorner<3, 1>() = translation;
}

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("pose rotation is not orthonormal");
  }
  if (std::abs(r.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("pose rotation is not proper (det != +1)");
  }
  const Eigen::RowVector4d last(0.0, 0.0, 0.0, 1.0);
  if ((m.row(3) - last).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("pose last row must be [0 0 0 1]");
  }
  return Pose(m);
}

Pose Pose::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitY();
  if (forward.cross(up).norm() < 1e-9) {
    up = Eigen::Vector3d::UnitX();
  }
  // Image rows grow downward; x = y cross z keeps the frame right-handed.
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose(r, eye);
}

Pose Pose::inverse() const {
  const Eigen::Matrix3d rt = rotation().transpose();
  return Pose(rt, -rt * translation());
}

Pose Pose::compose(const Pose& other) const { return Pose(Eigen::Matrix4d(m_ * other.m_)); }

std::string Pose::serialize() const {
  std::string out;
  char buf[40];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m_(r, c));
      out += buf;
      out += (r == 3 && c == 3) ? "" : " ";
    }
  }
  return out;
}

Pose Pose::parse(const std::string& text) {
  std::istringstream is(text);
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      std::string tok;
      if (!(is >> tok)) {
        throw std::invalid_argument("pose needs 16 decimals, got fewer");
      }
      m(r, c) = std::stod(tok);
    }
  }
  std::string extra;
  if (is >> extra) {
    throw std::invalid_argument("pose has more than 16 decimals");
  }
  return from_matrix(m);
}

void CameraView::validate() const {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("camera view needs width, height >= 1");
  }
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
}

Ray pixel_ray(const CameraView& view, int u, int v) {
  const auto& k = view.intrinsics;
  const Eigen::Vector3d local((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
  Ray ray;
  ray.origin = view.pose.translation();
  ray.direction = (view.pose.rotation() * local).normalized();
  return ray;
}

std::vector<Ray> rays_for_view(const CameraView& view) {
  view.validate();
  std::vector<Ray> rays;
  rays.reserve(static_cast<std::size_t>(view.pixel_count()));
  for (int v = 0; v < view.height; ++v) {
    for (int u = 0; u < view.width; ++u) {
      rays.push_back(pixel_ray(view, u, v));
    }
  }
  return rays;
}

bool project(const CameraView& view, const Eigen::Vector3d& world, double& u, double& v) {
  const Eigen::Vector3d local =
      view.pose.rotation().transpose() * (world - view.pose.translation());
  if (local.z() <= 1e-12) {
    return false;
  }
  const auto& k = view.intrinsics;
  u = k.fx * local.x() / local.z() + k.cx;
  v = k.fy * local.y() / local.z() + k.cy;
  return true;
}

std::vector<Pose> sample_sphere_poses(int n, double radius, std::uint64_t seed) {
  if (n < 1) {
    throw std::invalid_argument("sample_sphere_poses: n must be >= 1");
  }
  if (!(radius > 0.0)) {
    throw std::invalid_argument("sample_sphere_poses: radius must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Pose> poses;
  poses.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double azimuth = 2.0 * std::numbers::pi * unit(rng);
    const double cos_polar = 2.0 * unit(rng) - 1.0;
    const double sin_polar = std::sqrt(std::max(0.0, 1.0 - cos_polar * cos_polar));
    const Eigen::Vector3d center(radius * sin_polar * std::cos(azimuth), radius * cos_polar,
                                 radius * sin_polar * std::sin(azimuth));
    poses.push_back(Pose::look_at(center, Eigen::Vector3d::Zero()));
  }
  return poses;
}

Pose orbit_pose(double radius, double azimuth, double elevation) {
  const Eigen::Vector3d center(radius * std::cos(elevation) * std::cos(azimuth),
                               radius * std::sin(elevation),
                               radius * std::cos(elevation) * std::sin(azimuth));
  return Pose::look_at(center, Eigen::Vector3d::Zero());
}

}  // namespace ssrn
