// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Versioned JSON checkpoints. Doubles are written in shortest round-trip
// form, so save followed by load reproduces every parameter bit for bit.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "ssrn/renderer.hpp"

namespace ssrn {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string serialize_model(const Model& model);
Model parse_model(const std::string& text);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

// A standalone latent code file: {"version", "code": [...]}.
void save_code(const ad::Tensor& code, const std::filesystem::path& path);
ad::Tensor load_code(const std::filesystem::path& path);

}  // namespace ssrn
