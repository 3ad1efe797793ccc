// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ssrn::eval {

namespace {

struct Counts {
  std::vector<std::size_t> inter;
  std::vector<std::size_t> uni;
};

Counts count(const SegmentationResult& r, int classes) {
  if (r.predicted.width != r.truth.width || r.predicted.height != r.truth.height) {
    throw std::invalid_argument("segmentation result: predicted and truth masks differ in size");
  }
  const auto c = static_cast<std::size_t>(classes);
  Counts k{std::vector<std::size_t>(c, 0), std::vector<std::size_t>(c, 0)};
  for (std::size_t i = 0; i < r.truth.data.size(); ++i) {
    const std::size_t p = r.predicted.data[i];
    const std::size_t t = r.truth.data[i];
    if (p >= c || t >= c) {
      throw std::out_of_range("segmentation result: class id exceeds class count");
    }
    if (p == t) {
      ++k.inter[p];
      ++k.uni[p];
    } else {
      ++k.uni[p];
      ++k.uni[t];
    }
  }
  return k;
}

void require_nonempty(std::span<const SegmentationResult> results, int classes) {
  if (results.empty()) {
    throw std::invalid_argument("segmentation metrics need at least one image");
  }
  if (classes < 1) {
    throw std::invalid_argument("segmentation metrics need a positive class count");
  }
}

}  // namespace

double miou(std::span<const SegmentationResult> results, int classes, bool ignore_background) {
  require_nonempty(results, classes);
  double sum = 0.0;
  std::size_t images = 0;
  for (const auto& r : results) {
    const Counts k = count(r, classes);
    double acc = 0.0;
    std::size_t present = 0;
    for (std::size_t c = ignore_background ? 1 : 0; c < k.uni.size(); ++c) {
      if (k.uni[c] == 0) {
        continue;
      }
      acc += static_cast<double>(k.inter[c]) / static_cast<double>(k.uni[c]);
      ++present;
    }
    if (present > 0) {
      sum += acc / static_cast<double>(present);
      ++images;
    }
  }
  if (images == 0) {
    throw std::invalid_argument("miou: no image contains a scored class");
  }
  return sum / static_cast<double>(images);
}

double shape_miou(std::span<const SegmentationResult> results, int classes, bool ignore_background) {
  require_nonempty(results, classes);
  const auto c = static_cast<std::size_t>(classes);
  std::vector<std::size_t> inter(c, 0);
  std::vector<std::size_t> uni(c, 0);
  for (const auto& r : results) {
    const Counts k = count(r, classes);
    for (std::size_t i = 0; i < c; ++i) {
      inter[i] += k.inter[i];
      uni[i] += k.uni[i];
    }
  }
  double acc = 0.0;
  std::size_t present = 0;
  for (std::size_t i = ignore_background ? 1 : 0; i < c; ++i) {
    if (uni[i] == 0) {
      continue;
    }
    acc += static_cast<double>(inter[i]) / static_cast<double>(uni[i]);
    ++present;
  }
  if (present == 0) {
    throw std::invalid_argument("shape_miou: no class is present");
  }
  return acc / static_cast<double>(present);
}

double psnr(const RgbImage& predicted, const RgbImage& truth) {
  if (predicted.width != truth.width || predicted.height != truth.height ||
      predicted.data.size() != truth.data.size() || truth.data.empty()) {
    throw std::invalid_argument("psnr: images differ in size or are empty");
  }
  double se = 0.0;
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    const double d = predicted.data[i] - truth.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(truth.data.size());
  if (mse == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return 10.0 * std::log10(1.0 / mse);
}

ConsistencyResult consistency_rate(const Model& model, std::span<const ViewPair> pairs,
                                   const ConsistencyOptions& options) {
  if (options.samples_per_pair < 1 || !(options.tolerance > 0.0)) {
    throw std::invalid_argument("consistency_rate: bad sample count or tolerance");
  }
  std::mt19937_64 rng(options.seed);
  ConsistencyResult result;
  for (const auto& pair : pairs) {
    const auto& a = pair.a;
    const auto& b = pair.b;
    const ClassMask la = render(model, pair.code, a.view).labels;
    const ClassMask lb = render(model, pair.code, b.view).labels;

    std::vector<int> candidates;
    for (int p = 0; p < a.view.pixel_count(); ++p) {
      if (std::isfinite(a.depth.data[static_cast<std::size_t>(p)])) {
        candidates.push_back(p);
      }
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);

    int taken = 0;
    for (int p : candidates) {
      if (taken >= options.samples_per_pair) {
        break;
      }
      const int ua = p % a.view.width;
      const int va = p / a.view.width;
      const Ray ray = pixel_ray(a.view, ua, va);
      const Eigen::Vector3d point = ray.origin + a.depth.at(ua, va) * ray.direction;
      double u = 0.0;
      double v = 0.0;
      if (!project(b.view, point, u, v)) {
        continue;
      }
      const int ub = static_cast<int>(std::floor(u));
      const int vb = static_cast<int>(std::floor(v));
      if (ub < 0 || vb < 0 || ub >= b.view.width || vb >= b.view.height) {
        continue;
      }
      const double depth_b = b.depth.at(ub, vb);
      const Eigen::Vector3d origin_b = pixel_ray(b.view, ub, vb).origin;
      if (!std::isfinite(depth_b) || std::abs((point - origin_b).norm() - depth_b) > options.tolerance) {
        continue;
      }
      ++taken;
      ++result.compared;
      if (la.at(ua, va) == lb.at(ub, vb)) {
        ++result.agreed;
      }
    }
  }
  if (result.compared == 0) {
    throw std::runtime_error("consistency_rate: no mutually visible surface samples");
  }
  result.rate = static_cast<double>(result.agreed) / static_cast<double>(result.compared);
  return result;
}

std::string MetricReport::to_key_value() const {
  std::ostringstream out;
  out.precision(10);
  out << "images=" << images << "\n"
      << "miou=" << miou << "\n"
      << "shape_miou=" << shape_miou << "\n"
      << "psnr_mean=" << psnr_mean << "\n"
      << "consistency_rate=" << consistency_rate << "\n";
  return out.str();
}

std::string MetricReport::to_json() const {
  const auto finite_or_null = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  const nlohmann::json j{{"images", images},
                         {"miou", miou},
                         {"shape_miou", shape_miou},
                         {"psnr_mean", finite_or_null(psnr_mean)},
                         {"consistency_rate", consistency_rate}};
  return j.dump(2) + "\n";
}

}  // namespace ssrn::eval
