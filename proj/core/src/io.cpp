// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ssrn::io {

namespace fs = std::filesystem;

namespace {

// Reads a netpbm header token, skipping whitespace and '#' comments.
std::string next_token(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') {
        ++pos;
      }
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) {
    ++pos;
  }
  return buf.substr(start, pos - start);
}

struct NetpbmHeader {
  int width = 0;
  int height = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_netpbm(const fs::path& path, const std::string& buf, const char* magic) {
  std::size_t pos = 0;
  if (next_token(buf, pos) != magic) {
    throw FormatError(path, std::string("expected netpbm magic ") + magic);
  }
  NetpbmHeader h;
  try {
    h.width = std::stoi(next_token(buf, pos));
    h.height = std::stoi(next_token(buf, pos));
    const int maxval = std::stoi(next_token(buf, pos));
    if (maxval != 255) {
      throw FormatError(path, "only maxval 255 is supported");
    }
  } catch (const std::logic_error&) {
    throw FormatError(path, "malformed netpbm header");
  }
  if (h.width < 1 || h.height < 1) {
    throw FormatError(path, "non-positive image size");
  }
  // Exactly one whitespace byte separates the header from the raster.
  h.data_offset = pos + 1;
  return h;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw FormatError(path, "cannot open for writing");
    }
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) {
      throw FormatError(path, "write failed");
    }
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw FormatError(path, "cannot open for reading");
  }
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::uint8_t quantize(double value) {
  const double clamped = std::clamp(value, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.reserve(out.size() + image.data.size());
  for (double v : image.data) {
    out.push_back(static_cast<char>(quantize(v)));
  }
  write_file_atomic(path, out);
}

RgbImage read_ppm(const fs::path& path) {
  const std::string buf = read_file(path);
  const auto h = parse_netpbm(path, buf, "P6");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * 3;
  if (buf.size() < h.data_offset + n) {
    throw FormatError(path, "truncated PPM raster");
  }
  RgbImage img(h.width, h.height);
  for (std::size_t i = 0; i < n; ++i) {
    img.data[i] = static_cast<unsigned char>(buf[h.data_offset + i]) / 255.0;
  }
  return img;
}

void write_pgm(const fs::path& path, const ClassMask& mask) {
  std::string out =
      "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  out.append(mask.data.begin(), mask.data.end());
  write_file_atomic(path, out);
}

ClassMask read_pgm(const fs::path& path) {
  const std::string buf = read_file(path);
  const auto h = parse_netpbm(path, buf, "P5");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (buf.size() < h.data_offset + n) {
    throw FormatError(path, "truncated PGM raster");
  }
  ClassMask mask(h.width, h.height);
  for (std::size_t i = 0; i < n; ++i) {
    mask.data[i] = static_cast<std::uint8_t>(buf[h.data_offset + i]);
  }
  return mask;
}

void write_depth(const fs::path& path, const DepthMap& depth) {
  std::string out = std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n";
  char buf[40];
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double d = depth.at(u, v);
      if (std::isinf(d)) {
        out += "inf";
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g", d);
        out += buf;
      }
      out += (u + 1 == depth.width) ? '\n' : ' ';
    }
  }
  write_file_atomic(path, out);
}

DepthMap read_depth(const fs::path& path) {
  std::istringstream is(read_file(path));
  int w = 0;
  int h = 0;
  if (!(is >> w >> h) || w < 1 || h < 1) {
    throw FormatError(path, "malformed depth header");
  }
  DepthMap depth(w, h);
  for (auto& d : depth.data) {
    std::string tok;
    if (!(is >> tok)) {
      throw FormatError(path, "truncated depth map");
    }
    if (tok == "inf") {
      d = DepthMap::kMiss;
    } else {
      try {
        d = std::stod(tok);
      } catch (const std::logic_error&) {
        throw FormatError(path, "bad depth value '" + tok + "'");
      }
    }
  }
  return depth;
}

void write_ply(const fs::path& path, const std::vector<LabeledPoint>& points) {
  std::string out;
  out += "ply\nformat ascii 1.0\n";
  out += "element vertex " + std::to_string(points.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "property uchar label\nend_header\n";
  char buf[160];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.7g %.7g %.7g %u %u %u %u\n", p.position[0], p.position[1],
                  p.position[2], p.color[0], p.color[1], p.color[2], p.label);
    out += buf;
  }
  write_file_atomic(path, out);
}

std::vector<LabeledPoint> read_ply(const fs::path& path) {
  std::istringstream is(read_file(path));
  std::string line;
  std::size_t count = 0;
  bool saw_header_end = false;
  if (!std::getline(is, line) || line != "ply") {
    throw FormatError(path, "missing ply magic");
  }
  while (std::getline(is, line)) {
    if (line.rfind("element vertex ", 0) == 0) {
      count = std::stoul(line.substr(15));
    } else if (line == "end_header") {
      saw_header_end = true;
      break;
    }
  }
  if (!saw_header_end) {
    throw FormatError(path, "missing end_header");
  }
  std::vector<LabeledPoint> points(count);
  for (auto& p : points) {
    unsigned r = 0, g = 0, b = 0, l = 0;
    if (!(is >> p.position[0] >> p.position[1] >> p.position[2] >> r >> g >> b >> l)) {
      throw FormatError(path, "truncated vertex list");
    }
    p.color = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
               static_cast<std::uint8_t>(b)};
    p.label = static_cast<std::uint8_t>(l);
  }
  return points;
}

}  // namespace ssrn::io
