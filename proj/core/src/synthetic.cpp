// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/synthetic.hpp"

#include <Eigen/Geometry>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include "ssrn/io.hpp"

namespace ssrn::synth {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kHitEpsilon = 1e-9;
constexpr double kFitRadius = 0.95;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  // HSV color with the given saturation/value ranges.
  Eigen::Vector3d color(double sat_lo, double sat_hi, double val_lo, double val_hi) {
    const double h = uniform(0.0, 6.0);
    const double s = uniform(sat_lo, sat_hi);
    const double v = uniform(val_lo, val_hi);
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
    Eigen::Vector3d rgb;
    switch (static_cast<int>(h)) {
      case 0: rgb = {c, x, 0}; break;
      case 1: rgb = {x, c, 0}; break;
      case 2: rgb = {0, c, x}; break;
      case 3: rgb = {0, x, c}; break;
      case 4: rgb = {x, 0, c}; break;
      default: rgb = {c, 0, x}; break;
    }
    return rgb + Eigen::Vector3d::Constant(v - c);
  }

 private:
  std::mt19937_64 rng_;
};

Primitive box(const Eigen::Vector3d& center, const Eigen::Vector3d& half, const Eigen::Vector3d& albedo,
              int class_id, const Eigen::Matrix3d& rotation = Eigen::Matrix3d::Identity()) {
  return {PrimitiveKind::kBox, rotation, center, half, albedo, class_id};
}

Primitive cylinder(const Eigen::Vector3d& center, double radius, double half_height,
                   const Eigen::Vector3d& albedo, int class_id) {
  return {PrimitiveKind::kCylinder, Eigen::Matrix3d::Identity(), center,
          Eigen::Vector3d(radius, half_height, radius), albedo, class_id};
}

std::vector<Eigen::Vector3d> surface_samples(const Primitive& p) {
  std::vector<Eigen::Vector3d> pts;
  switch (p.kind) {
    case PrimitiveKind::kBox:
      for (int i = 0; i < 8; ++i) {
        const Eigen::Vector3d corner((i & 1 ? 1 : -1) * p.size.x(), (i & 2 ? 1 : -1) * p.size.y(),
                                     (i & 4 ? 1 : -1) * p.size.z());
        pts.push_back(p.center + p.rotation * corner);
      }
      break;
    case PrimitiveKind::kSphere:
      for (int i = 0; i < 3; ++i) {
        for (double s : {-1.0, 1.0}) {
          Eigen::Vector3d d = Eigen::Vector3d::Zero();
          d[i] = s * p.size.x();
          pts.push_back(p.center + d);
        }
      }
      // The farthest sphere point from the origin lies along the center.
      if (p.center.norm() > 0.0) {
        pts.push_back(p.center + p.center.normalized() * p.size.x());
      }
      break;
    case PrimitiveKind::kCylinder:
      for (int k = 0; k < 64; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 64.0;
        for (double s : {-1.0, 1.0}) {
          const Eigen::Vector3d local(p.size.x() * std::cos(a), s * p.size.y(),
                                      p.size.x() * std::sin(a));
          pts.push_back(p.center + p.rotation * local);
        }
      }
      break;
  }
  return pts;
}

// Conservative radius of the primitive's farthest point from the origin.
double bounding_norm(const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::kBox:
      return p.center.norm() + p.size.norm();
    case PrimitiveKind::kSphere:
      return p.center.norm() + p.size.x();
    case PrimitiveKind::kCylinder:
      return p.center.norm() + std::hypot(p.size.x(), p.size.y());
  }
  return 0.0;
}

void fit_unit_sphere(PartScene& scene) {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
  Eigen::Vector3d hi = -lo;
  for (const auto& p : scene.primitives) {
    for (const auto& q : surface_samples(p)) {
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
  }
  const Eigen::Vector3d shift = -0.5 * (lo + hi);
  for (auto& p : scene.primitives) {
    p.center += shift;
  }
  double radius = 0.0;
  for (const auto& p : scene.primitives) {
    radius = std::max(radius, bounding_norm(p));
  }
  const double factor = kFitRadius / radius;
  for (auto& p : scene.primitives) {
    p.center *= factor;
    p.size *= factor;
  }
}

PartScene make_chair(std::uint64_t seed) {
  Sampler s(seed);
  PartScene scene{Template::kChair, seed, {}};
  const double w = s.uniform(0.32, 0.48);
  const double d = s.uniform(0.32, 0.48);
  const double t = s.uniform(0.04, 0.07);
  const double seat_y = s.uniform(-0.1, 0.1);
  const double floor_y = -0.75;
  const double leg_r = s.uniform(0.035, 0.06);
  const double back_h = s.uniform(0.35, 0.6);
  const double back_t = s.uniform(0.03, 0.06);
  const double tilt = s.uniform(-0.2, 0.0);

  const Eigen::Vector3d leg_color = s.color(0.3, 0.6, 0.2, 0.4);
  const Eigen::Vector3d seat_color = s.color(0.4, 0.8, 0.55, 0.9);
  const Eigen::Vector3d back_color = s.color(0.4, 0.8, 0.55, 0.9);
  const Eigen::Vector3d arm_color = s.color(0.4, 0.8, 0.4, 0.8);

  const double leg_half = 0.5 * (seat_y - t - floor_y);
  const double leg_y = floor_y + leg_half;
  for (double sx : {-1.0, 1.0}) {
    for (double sz : {-1.0, 1.0}) {
      scene.primitives.push_back(
          cylinder({sx * (w - leg_r), leg_y, sz * (d - leg_r)}, leg_r, leg_half, leg_color, 1));
    }
  }
  scene.primitives.push_back(box({0.0, seat_y, 0.0}, {w, t, d}, seat_color, 2));

  const Eigen::Matrix3d back_rot = Eigen::AngleAxisd(tilt, Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Eigen::Vector3d back_center(0.0, seat_y + t + 0.5 * back_h, -d + back_t);
  scene.primitives.push_back(box(back_center, {w, 0.5 * back_h, back_t}, back_color, 3, back_rot));

  if (seed % 2 == 0) {
    const double arm_y = seat_y + t + s.uniform(0.15, 0.25);
    const double arm_t = s.uniform(0.025, 0.04);
    for (double sx : {-1.0, 1.0}) {
      scene.primitives.push_back(
          box({sx * (w - arm_t), arm_y, 0.05}, {arm_t, arm_t, 0.85 * d}, arm_color, 4));
    }
  }
  fit_unit_sphere(scene);
  return scene;
}

PartScene make_table(std::uint64_t seed) {
  Sampler s(seed);
  PartScene scene{Template::kTable, seed, {}};
  const double w = s.uniform(0.5, 0.7);
  const double d = s.uniform(0.35, 0.6);
  const double t = s.uniform(0.03, 0.06);
  const double top_y = s.uniform(0.1, 0.25);
  const double floor_y = -0.6;
  const double leg_r = s.uniform(0.035, 0.06);
  const double inset = s.uniform(0.0, 0.08);

  const Eigen::Vector3d leg_color = s.color(0.3, 0.6, 0.2, 0.45);
  const Eigen::Vector3d top_color = s.color(0.4, 0.8, 0.55, 0.9);
  const Eigen::Vector3d shelf_color = s.color(0.4, 0.8, 0.45, 0.85);

  const double leg_half = 0.5 * (top_y - t - floor_y);
  const double leg_y = floor_y + leg_half;
  for (double sx : {-1.0, 1.0}) {
    for (double sz : {-1.0, 1.0}) {
      scene.primitives.push_back(cylinder({sx * (w - leg_r - inset), leg_y, sz * (d - leg_r - inset)},
                                          leg_r, leg_half, leg_color, 1));
    }
  }
  scene.primitives.push_back(box({0.0, top_y, 0.0}, {w, t, d}, top_color, 2));
  if (seed % 2 == 0) {
    const double shelf_y = floor_y + s.uniform(0.2, 0.35);
    scene.primitives.push_back(box({0.0, shelf_y, 0.0}, {w - leg_r - inset, 0.025, d - leg_r - inset},
                                   shelf_color, 3));
  }
  fit_unit_sphere(scene);
  return scene;
}

// Ray/axis-aligned-box slab test in the primitive's local frame.
std::optional<Hit> intersect_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                                 const Eigen::Vector3d& half) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  double near_sign = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-300) {
      if (o[i] < -half[i] || o[i] > half[i]) {
        return std::nullopt;
      }
      continue;
    }
    double t0 = (-half[i] - o[i]) / d[i];
    double t1 = (half[i] - o[i]) / d[i];
    double sign = -1.0;
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = i;
      near_sign = sign;
    }
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_far < kHitEpsilon || near_axis < 0 || t_near < kHitEpsilon) {
    return std::nullopt;
  }
  Hit hit;
  hit.distance = t_near;
  hit.normal = Eigen::Vector3d::Zero();
  hit.normal[near_axis] = near_sign;
  return hit;
}

std::optional<Hit> intersect_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r) {
  const double b = o.dot(d);
  const double c = o.squaredNorm() - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) {
    return std::nullopt;
  }
  const double sq = std::sqrt(disc);
  double t = -b - sq;
  if (t < kHitEpsilon) {
    t = -b + sq;
    if (t < kHitEpsilon) {
      return std::nullopt;
    }
  }
  return Hit{t, (o + t * d).normalized(), -1};
}

std::optional<Hit> intersect_cylinder(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r,
                                      double hh) {
  std::optional<Hit> best;
  auto consider = [&](double t, const Eigen::Vector3d& n) {
    if (t >= kHitEpsilon && (!best || t < best->distance)) {
      best = Hit{t, n, -1};
    }
  };
  const double a = d.x() * d.x() + d.z() * d.z();
  if (a > 1e-300) {
    const double b = o.x() * d.x() + o.z() * d.z();
    const double c = o.x() * o.x() + o.z() * o.z() - r * r;
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / a, (-b + sq) / a}) {
        const Eigen::Vector3d p = o + t * d;
        if (std::abs(p.y()) <= hh) {
          consider(t, Eigen::Vector3d(p.x(), 0.0, p.z()).normalized());
        }
      }
    }
  }
  if (std::abs(d.y()) > 1e-300) {
    for (double cap : {-hh, hh}) {
      const double t = (cap - o.y()) / d.y();
      const Eigen::Vector3d p = o + t * d;
      if (p.x() * p.x() + p.z() * p.z() <= r * r) {
        consider(t, Eigen::Vector3d(0.0, cap > 0 ? 1.0 : -1.0, 0.0));
      }
    }
  }
  return best;
}

ViewRecord render_view(const PartScene& scene, const std::string& name, const CameraView& view) {
  auto images = reference_render(scene, view);
  return {name, view, std::move(images.rgb), std::move(images.mask), std::move(images.depth)};
}

std::string view_name(bool test, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d", test ? "test" : "train", index);
  return buf;
}

}  // namespace

const TemplateInfo& template_info(Template t) {
  static const TemplateInfo chair{"chair", {"background", "leg", "seat", "back", "arm"}};
  static const TemplateInfo table{"table", {"background", "leg", "top", "shelf"}};
  return t == Template::kChair ? chair : table;
}

Template parse_template(const std::string& name) {
  if (name == "chair") {
    return Template::kChair;
  }
  if (name == "table") {
    return Template::kTable;
  }
  throw std::invalid_argument("unknown template '" + name + "' (expected chair or table)");
}

std::vector<int> PartScene::class_ids() const {
  std::set<int> ids;
  for (const auto& p : primitives) {
    ids.insert(p.class_id);
  }
  return {ids.begin(), ids.end()};
}

PartScene make_block_object(Template kind, std::uint64_t seed) {
  return kind == Template::kChair ? make_chair(seed) : make_table(seed);
}

double max_vertex_norm(const PartScene& scene) {
  double m = 0.0;
  for (const auto& p : scene.primitives) {
    for (const auto& q : surface_samples(p)) {
      m = std::max(m, q.norm());
    }
  }
  return m;
}

std::optional<Hit> intersect(const Primitive& primitive, const Ray& ray) {
  const Eigen::Matrix3d rt = primitive.rotation.transpose();
  const Eigen::Vector3d o = rt * (ray.origin - primitive.center);
  const Eigen::Vector3d d = rt * ray.direction;
  std::optional<Hit> hit;
  switch (primitive.kind) {
    case PrimitiveKind::kBox:
      hit = intersect_box(o, d, primitive.size);
      break;
    case PrimitiveKind::kSphere:
      hit = intersect_sphere(o, d, primitive.size.x());
      break;
    case PrimitiveKind::kCylinder:
      hit = intersect_cylinder(o, d, primitive.size.x(), primitive.size.y());
      break;
  }
  if (hit) {
    hit->normal = primitive.rotation * hit->normal;
  }
  return hit;
}

std::optional<Hit> intersect(const PartScene& scene, const Ray& ray) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    auto hit = intersect(scene.primitives[i], ray);
    if (hit && (!best || hit->distance < best->distance)) {
      best = hit;
      best->primitive = static_cast<int>(i);
    }
  }
  return best;
}

ReferenceImages reference_render(const PartScene& scene, const CameraView& view) {
  view.validate();
  ReferenceImages out{RgbImage(view.width, view.height, 1.0), ClassMask(view.width, view.height, 0),
                      DepthMap(view.width, view.height)};
  for (int v = 0; v < view.height; ++v) {
    for (int u = 0; u < view.width; ++u) {
      const Ray ray = pixel_ray(view, u, v);
      const auto hit = intersect(scene, ray);
      if (!hit) {
        continue;
      }
      const auto& prim = scene.primitives[static_cast<std::size_t>(hit->primitive)];
      const double lambert = std::abs(hit->normal.dot(ray.direction));
      const Eigen::Vector3d rgb = prim.albedo * (0.35 + 0.65 * lambert);
      for (int ch = 0; ch < 3; ++ch) {
        out.rgb.at(u, v, ch) = std::clamp(rgb[ch], 0.0, 1.0);
      }
      out.mask.at(u, v) = static_cast<std::uint8_t>(prim.class_id);
      out.depth.at(u, v) = hit->distance;
    }
  }
  return out;
}

const InstanceRecord& Dataset::instance(const std::string& id) const {
  for (const auto& inst : instances) {
    if (inst.id == id) {
      return inst;
    }
  }
  throw std::out_of_range("unknown instance id '" + id + "'");
}

std::uint64_t instance_seed(std::uint64_t dataset_seed, int index) {
  return dataset_seed * 100003ULL + static_cast<std::uint64_t>(index);
}

Dataset generate_dataset(const GenerateOptions& options) {
  if (options.instances < 1) {
    throw std::invalid_argument("generate_dataset: need at least one instance");
  }
  if (options.train_views < 2) {
    throw std::invalid_argument("generate_dataset: every instance needs >= 2 train views");
  }
  if (options.test_views < 0 || options.resolution < 1) {
    throw std::invalid_argument("generate_dataset: bad view count or resolution");
  }
  const auto& info = template_info(options.kind);
  Dataset ds;
  ds.template_name = info.name;
  ds.class_count = static_cast<int>(info.class_names.size());
  ds.class_names = info.class_names;
  ds.camera_radius = options.camera_radius;

  const Intrinsics k = Intrinsics::centered(options.resolution, options.resolution,
                                            options.focal_factor * options.resolution);
  for (int i = 0; i < options.instances; ++i) {
    const std::uint64_t seed = instance_seed(options.seed, i);
    const PartScene scene = make_block_object(options.kind, seed);
    const auto poses = sample_sphere_poses(options.train_views + options.test_views,
                                           options.camera_radius, seed ^ 0x9e3779b97f4a7c15ULL);
    InstanceRecord inst;
    char id[32];
    std::snprintf(id, sizeof(id), "%s_%03d", info.name.c_str(), i);
    inst.id = id;
    inst.seed = seed;
    for (int v = 0; v < options.train_views + options.test_views; ++v) {
      const bool test = v >= options.train_views;
      const CameraView view{k, poses[static_cast<std::size_t>(v)], options.resolution,
                            options.resolution};
      auto rec = render_view(scene, view_name(test, test ? v - options.train_views : v), view);
      (test ? inst.test_views : inst.train_views).push_back(std::move(rec));
    }
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  json manifest;
  manifest["format_version"] = kManifestVersion;
  manifest["template"] = dataset.template_name;
  manifest["class_count"] = dataset.class_count;
  manifest["class_names"] = dataset.class_names;
  manifest["camera_radius"] = dataset.camera_radius;
  manifest["instances"] = json::array();
  for (const auto& inst : dataset.instances) {
    json ji;
    ji["id"] = inst.id;
    ji["seed"] = inst.seed;
    ji["views"] = json::array();
    const auto& first = inst.train_views.front().view;
    ji["intrinsics"] = {{"fx", first.intrinsics.fx},
                        {"fy", first.intrinsics.fy},
                        {"cx", first.intrinsics.cx},
                        {"cy", first.intrinsics.cy}};
    ji["width"] = first.width;
    ji["height"] = first.height;
    for (const auto* views : {&inst.train_views, &inst.test_views}) {
      for (const auto& rec : *views) {
        if (!(rec.view.intrinsics == first.intrinsics) || rec.view.width != first.width ||
            rec.view.height != first.height) {
          throw std::invalid_argument("instance " + inst.id + " mixes camera intrinsics");
        }
        const std::string stem = inst.id + "/" + rec.name;
        io::write_file_atomic(root / (stem + ".pose"), rec.view.pose.serialize() + "\n");
        io::write_ppm(root / (stem + ".ppm"), rec.rgb);
        io::write_pgm(root / (stem + ".pgm"), rec.mask);
        io::write_depth(root / (stem + ".depth"), rec.depth);
        ji["views"].push_back({{"name", rec.name},
                               {"split", views == &inst.train_views ? "train" : "test"},
                               {"pose_file", stem + ".pose"},
                               {"rgb_file", stem + ".ppm"},
                               {"mask_file", stem + ".pgm"},
                               {"depth_file", stem + ".depth"}});
      }
    }
    manifest["instances"].push_back(std::move(ji));
  }
  io::write_file_atomic(root / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(io::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw io::FormatError(manifest_path, std::string("invalid manifest: ") + e.what());
  }
  try {
    if (manifest.at("format_version").get<int>() != kManifestVersion) {
      throw io::FormatError(manifest_path, "unsupported manifest version");
    }
    Dataset ds;
    ds.template_name = manifest.at("template").get<std::string>();
    ds.class_count = manifest.at("class_count").get<int>();
    ds.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    ds.camera_radius = manifest.at("camera_radius").get<double>();
    for (const auto& ji : manifest.at("instances")) {
      InstanceRecord inst;
      inst.id = ji.at("id").get<std::string>();
      inst.seed = ji.at("seed").get<std::uint64_t>();
      const Intrinsics k{ji.at("intrinsics").at("fx").get<double>(),
                         ji.at("intrinsics").at("fy").get<double>(),
                         ji.at("intrinsics").at("cx").get<double>(),
                         ji.at("intrinsics").at("cy").get<double>()};
      const int width = ji.at("width").get<int>();
      const int height = ji.at("height").get<int>();
      for (const auto& jv : ji.at("views")) {
        ViewRecord rec;
        rec.name = jv.at("name").get<std::string>();
        const fs::path pose_path = root / jv.at("pose_file").get<std::string>();
        try {
          rec.view = CameraView{k, Pose::parse(io::read_file(pose_path)), width, height};
        } catch (const std::invalid_argument& e) {
          throw io::FormatError(pose_path, e.what());
        }
        rec.rgb = io::read_ppm(root / jv.at("rgb_file").get<std::string>());
        rec.mask = io::read_pgm(root / jv.at("mask_file").get<std::string>());
        rec.depth = io::read_depth(root / jv.at("depth_file").get<std::string>());
        if (rec.rgb.width != width || rec.rgb.height != height || rec.mask.width != width ||
            rec.mask.height != height || rec.depth.width != width || rec.depth.height != height) {
          throw io::FormatError(root / jv.at("rgb_file").get<std::string>(),
                                "image size disagrees with manifest");
        }
        const std::string split = jv.at("split").get<std::string>();
        (split == "test" ? inst.test_views : inst.train_views).push_back(std::move(rec));
      }
      if (inst.train_views.size() < 2) {
        throw io::FormatError(manifest_path, "instance " + inst.id + " has fewer than 2 train views");
      }
      ds.instances.push_back(std::move(inst));
    }
    return ds;
  } catch (const json::exception& e) {
    throw io::FormatError(manifest_path, std::string("invalid manifest: ") + e.what());
  }
}

}  // namespace ssrn::synth
