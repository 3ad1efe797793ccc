// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/evaluation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

namespace ssrn::eval {
namespace {

ClassMask mask_from(int w, int h, std::vector<std::uint8_t> data) {
  ClassMask m(w, h);
  m.data = std::move(data);
  return m;
}

// Set-based IoU over pixel indices, written without the per-class counters
// the library uses.
double set_iou(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  std::vector<std::size_t> inter;
  std::vector<std::size_t> uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

std::set<std::size_t> pixels_of(const ClassMask& m, int c, std::size_t offset = 0) {
  std::set<std::size_t> s;
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (m.data[i] == c) {
      s.insert(offset + i);
    }
  }
  return s;
}

double brute_miou(std::span<const SegmentationResult> rs, int classes) {
  double total = 0.0;
  for (const auto& r : rs) {
    double acc = 0.0;
    int present = 0;
    for (int c = 0; c < classes; ++c) {
      const auto p = pixels_of(r.predicted, c);
      const auto t = pixels_of(r.truth, c);
      if (p.empty() && t.empty()) {
        continue;
      }
      acc += set_iou(p, t);
      ++present;
    }
    total += acc / present;
  }
  return total / static_cast<double>(rs.size());
}

double brute_shape_miou(std::span<const SegmentationResult> rs, int classes) {
  double acc = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    std::set<std::size_t> p;
    std::set<std::size_t> t;
    std::size_t offset = 0;
    for (const auto& r : rs) {
      p.merge(pixels_of(r.predicted, c, offset));
      t.merge(pixels_of(r.truth, c, offset));
      offset += r.truth.data.size();
    }
    if (p.empty() && t.empty()) {
      continue;
    }
    acc += set_iou(p, t);
    ++present;
  }
  return acc / present;
}

ClassMask random_mask(std::mt19937_64& rng, int classes) {
  ClassMask m(8, 8);
  std::uniform_int_distribution<int> d(0, classes - 1);
  for (auto& v : m.data) {
    v = static_cast<std::uint8_t>(d(rng));
  }
  return m;
}

TEST(Miou, WorkedExample) {
  // Class 0: inter 1, union 2. Class 1: inter 2, union 3. Mean = 7/12.
  const ClassMask pred = mask_from(2, 2, {0, 1, 1, 1});
  const ClassMask truth = mask_from(2, 2, {0, 0, 1, 1});
  const std::vector<SegmentationResult> r = {{pred, truth}};
  EXPECT_NEAR(miou(r, 2), 7.0 / 12.0, 1e-15);
  EXPECT_NEAR(shape_miou(r, 2), 7.0 / 12.0, 1e-15);
}

TEST(Miou, PerfectAndDisjoint) {
  std::mt19937_64 rng(1);
  const ClassMask m = random_mask(rng, 5);
  const std::vector<SegmentationResult> same = {{m, m}};
  EXPECT_EQ(miou(same, 5), 1.0);
  EXPECT_EQ(shape_miou(same, 5), 1.0);
  const std::vector<SegmentationResult> disjoint = {{ClassMask(3, 3, 1), ClassMask(3, 3, 2)}};
  EXPECT_EQ(miou(disjoint, 5), 0.0);
}

TEST(Miou, MatchesBruteForceOnRandomPairs) {
  std::mt19937_64 rng(2);
  std::vector<SegmentationResult> all;
  for (int i = 0; i < 100; ++i) {
    all.push_back({random_mask(rng, 5), random_mask(rng, 5)});
    const std::span<const SegmentationResult> one(&all.back(), 1);
    EXPECT_NEAR(miou(one, 5), brute_miou(one, 5), 1e-12);
    EXPECT_NEAR(shape_miou(one, 5), brute_shape_miou(one, 5), 1e-12);
  }
  EXPECT_NEAR(miou(all, 5), brute_miou(all, 5), 1e-12);
  EXPECT_NEAR(shape_miou(all, 5), brute_shape_miou(all, 5), 1e-12);
}

TEST(Miou, InvariantUnderPixelPermutation) {
  std::mt19937_64 rng(3);
  const ClassMask p = random_mask(rng, 5);
  const ClassMask t = random_mask(rng, 5);
  std::vector<std::size_t> perm(64);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  ClassMask pp(8, 8);
  ClassMask tp(8, 8);
  for (std::size_t i = 0; i < 64; ++i) {
    pp.data[i] = p.data[perm[i]];
    tp.data[i] = t.data[perm[i]];
  }
  const std::vector<SegmentationResult> a = {{p, t}};
  const std::vector<SegmentationResult> b = {{pp, tp}};
  EXPECT_EQ(miou(a, 5), miou(b, 5));
  EXPECT_EQ(shape_miou(a, 5), shape_miou(b, 5));
}

TEST(Miou, SingleImageAggregatesCoincide) {
  std::mt19937_64 rng(4);
  const std::vector<SegmentationResult> r = {{random_mask(rng, 3), random_mask(rng, 3)}};
  EXPECT_NEAR(miou(r, 3), shape_miou(r, 3), 1e-15);
}

TEST(Miou, RareClassMissedPullsShapeMiouBelowMiou) {
  // Image 1 is perfect with classes 0/1; image 2 contains one pixel of
  // class 2 that is predicted as 1.
  const ClassMask a = mask_from(2, 2, {0, 0, 1, 1});
  ClassMask b_truth = mask_from(2, 2, {0, 1, 1, 2});
  ClassMask b_pred = mask_from(2, 2, {0, 1, 1, 1});
  const std::vector<SegmentationResult> r = {{a, a}, {b_pred, b_truth}};
  EXPECT_LT(shape_miou(r, 3), miou(r, 3));
  EXPECT_NEAR(miou(r, 3), brute_miou(r, 3), 1e-15);
  EXPECT_NEAR(shape_miou(r, 3), brute_shape_miou(r, 3), 1e-15);
}

TEST(Miou, IgnoreBackgroundAndErrors) {
  const ClassMask pred = mask_from(2, 2, {0, 1, 1, 1});
  const ClassMask truth = mask_from(2, 2, {0, 0, 1, 1});
  const std::vector<SegmentationResult> r = {{pred, truth}};
  EXPECT_NEAR(miou(r, 2, true), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(miou({}, 2), std::invalid_argument);
  const std::vector<SegmentationResult> bad = {{mask_from(1, 1, {7}), mask_from(1, 1, {0})}};
  EXPECT_THROW(miou(bad, 5), std::out_of_range);
  const std::vector<SegmentationResult> sizes = {{ClassMask(2, 2), ClassMask(1, 1)}};
  EXPECT_THROW(shape_miou(sizes, 5), std::invalid_argument);
}

TEST(Psnr, KnownValues) {
  const RgbImage zero(4, 4, 0.0);
  const RgbImage tenth(4, 4, 0.1);
  EXPECT_NEAR(psnr(zero, tenth), 20.0, 1e-9);
  EXPECT_TRUE(std::isinf(psnr(tenth, tenth)));
  EXPECT_THROW(psnr(zero, RgbImage(2, 2)), std::invalid_argument);
}

TEST(Consistency, ViewAgainstItselfAgreesEverywhere) {
  synth::GenerateOptions o;
  o.instances = 1;
  o.train_views = 2;
  o.test_views = 0;
  o.resolution = 12;
  const synth::Dataset ds = synth::generate_dataset(o);
  ModelDims dims;
  dims.latent = 4;
  dims.hidden = 6;
  dims.feature = 4;
  dims.marcher_hidden = 4;
  dims.rgb_hidden = 4;
  dims.march_steps = 3;
  const Model model = Model::init(dims, 1);
  const auto& v = ds.instances[0].train_views[0];
  const std::vector<ViewPair> pairs = {{ad::Tensor::zeros({4}), v, v}};
  ConsistencyOptions opts;
  opts.samples_per_pair = 20;
  const ConsistencyResult r = consistency_rate(model, pairs, opts);
  EXPECT_EQ(r.rate, 1.0);
  EXPECT_EQ(r.compared, 20u);

  synth::ViewRecord empty = v;
  std::fill(empty.depth.data.begin(), empty.depth.data.end(), DepthMap::kMiss);
  const std::vector<ViewPair> none = {{ad::Tensor::zeros({4}), empty, v}};
  EXPECT_THROW(consistency_rate(model, none, opts), std::runtime_error);
}

TEST(MetricReport, Formats) {
  MetricReport r;
  r.miou = 0.5;
  r.shape_miou = 0.25;
  r.psnr_mean = std::numeric_limits<double>::infinity();
  r.consistency_rate = 1.0;
  r.images = 3;
  const std::string kv = r.to_key_value();
  EXPECT_NE(kv.find("miou=0.5"), std::string::npos) << kv;
  EXPECT_NE(kv.find("images=3"), std::string::npos) << kv;
  const auto js = nlohmann::json::parse(r.to_json());
  EXPECT_TRUE(js.at("psnr_mean").is_null());
  EXPECT_EQ(js.at("shape_miou").get<double>(), 0.25);
  EXPECT_EQ(js.at("images").get<int>(), 3);
}

}  // namespace
}  // namespace ssrn::eval
