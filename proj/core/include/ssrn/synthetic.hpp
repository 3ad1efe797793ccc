// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural part-labeled furniture built from boxes, spheres and cylinders,
// an exact analytic ray tracer for it, and the on-disk dataset layout.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssrn/camera.hpp"
#include "ssrn/image.hpp"

namespace ssrn::synth {

enum class PrimitiveKind { kBox, kSphere, kCylinder };

// Local frame: boxes use `size` as half extents; spheres use size.x() as the
// radius; cylinders run along local y with radius size.x() and half-height
// size.y().
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kBox;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  Eigen::Vector3d albedo = Eigen::Vector3d::Constant(0.5);
  int class_id = 1;
};

enum class Template { kChair, kTable };

struct TemplateInfo {
  std::string name;
  // Index 0 is always "background".
  std::vector<std::string> class_names;
};

const TemplateInfo& template_info(Template t);
Template parse_template(const std::string& name);

struct PartScene {
  Template kind = Template::kChair;
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;

  [[nodiscard]] std::vector<int> class_ids() const;
};

// Chair: 4 leg cylinders (1), seat box (2), back box (3) and, for even
// seeds, two arm boxes (4). Table: 4 leg cylinders (1), top box (2) and, for
// even seeds, a shelf box (3). Fitted inside the unit sphere.
PartScene make_block_object(Template kind, std::uint64_t seed);

// Sampled surface points (box corners, sphere/cylinder rims); max norm.
double max_vertex_norm(const PartScene& scene);

struct Hit {
  double distance = 0.0;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  int primitive = -1;
};

std::optional<Hit> intersect(const Primitive& primitive, const Ray& ray);
std::optional<Hit> intersect(const PartScene& scene, const Ray& ray);

struct ReferenceImages {
  RgbImage rgb;
  ClassMask mask;
  DepthMap depth;
};

// Nearest-hit tracing with a headlight Lambert term on a white background.
ReferenceImages reference_render(const PartScene& scene, const CameraView& view);

// ---------------------------------------------------------------------------
// Datasets

struct ViewRecord {
  std::string name;
  CameraView view;
  RgbImage rgb;
  ClassMask mask;
  DepthMap depth;
};

struct InstanceRecord {
  std::string id;
  std::uint64_t seed = 0;
  std::vector<ViewRecord> train_views;
  std::vector<ViewRecord> test_views;
};

struct Dataset {
  std::string template_name;
  int class_count = 0;
  std::vector<std::string> class_names;
  double camera_radius = 2.5;
  std::vector<InstanceRecord> instances;

  [[nodiscard]] const InstanceRecord& instance(const std::string& id) const;
};

struct GenerateOptions {
  Template kind = Template::kChair;
  int instances = 12;
  int train_views = 16;
  int test_views = 8;
  int resolution = 32;
  std::uint64_t seed = 7;
  double camera_radius = 2.5;
  // Focal length in pixels is focal_factor * resolution.
  double focal_factor = 1.1;
};

std::uint64_t instance_seed(std::uint64_t dataset_seed, int index);

Dataset generate_dataset(const GenerateOptions& options);

// Writes manifest.json plus per-view .pose/.ppm/.pgm/.depth files.
void write_dataset(const Dataset& dataset, const std::filesystem::path& root);
Dataset read_dataset(const std::filesystem::path& root);

inline constexpr int kManifestVersion = 1;

}  // namespace ssrn::synth
