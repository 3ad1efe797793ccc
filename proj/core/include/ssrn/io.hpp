// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dependency-free file formats: binary PPM (P6) for color, binary PGM (P5)
// for class masks, ASCII depth maps and ASCII PLY point clouds. Every writer
// goes through a temp file and a rename.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssrn/image.hpp"

namespace ssrn::io {

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what) {}
};

// Writes `contents` to `path` via `path.tmp` + rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

// Quantizes to 8 bits with round-to-nearest.
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const ClassMask& mask);
ClassMask read_pgm(const std::filesystem::path& path);

// One row of width decimals per image row, "inf" for misses.
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path);

struct LabeledPoint {
  std::array<double, 3> position{};
  std::array<std::uint8_t, 3> color{};
  std::uint8_t label = 0;
};

// ASCII PLY with x y z (float), red green blue (uchar) and label (uchar).
void write_ply(const std::filesystem::path& path, const std::vector<LabeledPoint>& points);
std::vector<LabeledPoint> read_ply(const std::filesystem::path& path);

std::uint8_t quantize(double value);

}  // namespace ssrn::io
