// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "test_util.hpp"

namespace ssrn::io {
namespace {

TEST(Quantize, RoundsAndClamps) {
  EXPECT_EQ(quantize(0.0), 0);
  EXPECT_EQ(quantize(1.0), 255);
  EXPECT_EQ(quantize(-0.3), 0);
  EXPECT_EQ(quantize(1.7), 255);
  EXPECT_EQ(quantize(0.5), 128);
  EXPECT_EQ(quantize(127.4 / 255.0), 127);
}

TEST(Ppm, RoundTripWithinQuantizationBound) {
  test::TempDir dir;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RgbImage img(5, 3);
  for (auto& v : img.data) {
    v = u(rng);
  }
  write_ppm(dir.path() / "a.ppm", img);
  const RgbImage back = read_ppm(dir.path() / "a.ppm");
  ASSERT_EQ(back.width, 5);
  ASSERT_EQ(back.height, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    EXPECT_LE(std::abs(back.data[i] - img.data[i]), 0.5 / 255.0 + 1e-12);
  }
  EXPECT_EQ(read_file(dir.path() / "a.ppm").substr(0, 2), "P6");
}

TEST(Pgm, RoundTripBitIdentical) {
  test::TempDir dir;
  ClassMask m(4, 4);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = static_cast<std::uint8_t>(i % 5);
  }
  write_pgm(dir.path() / "m.pgm", m);
  EXPECT_EQ(read_pgm(dir.path() / "m.pgm"), m);
}

TEST(Depth, RoundTripExactIncludingMisses) {
  test::TempDir dir;
  DepthMap d(3, 2);
  d.at(0, 0) = 1.0 / 3.0;
  d.at(2, 1) = 2.718281828459045;
  write_depth(dir.path() / "d.depth", d);
  const DepthMap back = read_depth(dir.path() / "d.depth");
  EXPECT_EQ(back.data[0], d.data[0]);
  EXPECT_EQ(back.data[5], d.data[5]);
  EXPECT_TRUE(std::isinf(back.at(1, 0)));
  EXPECT_EQ(read_file(dir.path() / "d.depth").substr(0, 4), "3 2\n");
}

TEST(Ply, HeaderCountMatchesAndRoundTrips) {
  test::TempDir dir;
  std::vector<LabeledPoint> pts(3);
  pts[0] = {{0.5, -0.25, 1.0}, {255, 0, 10}, 2};
  pts[1] = {{0.0, 0.0, 0.0}, {1, 2, 3}, 4};
  pts[2] = {{-1.0, 0.125, 0.75}, {9, 9, 9}, 1};
  write_ply(dir.path() / "p.ply", pts);
  const std::string text = read_file(dir.path() / "p.ply");
  EXPECT_NE(text.find("element vertex 3\n"), std::string::npos);
  EXPECT_NE(text.find("property uchar label\n"), std::string::npos);
  EXPECT_EQ(text.substr(0, 16), "ply\nformat ascii");
  const auto back = read_ply(dir.path() / "p.ply");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].label, pts[i].label);
    EXPECT_EQ(back[i].color, pts[i].color);
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(back[i].position[c], pts[i].position[c], 1e-6);
    }
  }
}

TEST(Ply, EmptyCloudIsValid) {
  test::TempDir dir;
  write_ply(dir.path() / "e.ply", {});
  EXPECT_TRUE(read_ply(dir.path() / "e.ply").empty());
}

TEST(Errors, MissingAndCorruptFilesNamePath) {
  test::TempDir dir;
  const auto missing = dir.path() / "nope.ppm";
  try {
    (void)read_ppm(missing);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.ppm"), std::string::npos);
  }
  write_file_atomic(dir.path() / "bad.pgm", "P5\n4 4\n255\nxx");
  EXPECT_THROW(read_pgm(dir.path() / "bad.pgm"), FormatError);
  write_file_atomic(dir.path() / "bad.ppm", "P3\n1 1\n255\n0 0 0");
  EXPECT_THROW(read_ppm(dir.path() / "bad.ppm"), FormatError);
}

TEST(Atomic, NoTempFileLeftBehind) {
  test::TempDir dir;
  write_file_atomic(dir.path() / "x.txt", "hello");
  EXPECT_EQ(read_file(dir.path() / "x.txt"), "hello");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) {
    ++entries;
  }
  EXPECT_EQ(entries, 1u);
}

}  // namespace
}  // namespace ssrn::io
