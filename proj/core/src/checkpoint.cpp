// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/checkpoint.hpp"

#include "json.hpp"
#include "ssrn/io.hpp"

namespace ssrn {

namespace {

using nlohmann::json;

json tensor_json(const ad::Tensor& t) {
  return json{{"shape", t.shape.dims()}, {"data", t.data}};
}

ad::Tensor tensor_from(const json& j, const std::string& name) {
  ad::Tensor t(ad::Shape(j.at("shape").get<std::vector<std::size_t>>()));
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != t.data.size()) {
    throw CheckpointError("tensor '" + name + "' has " + std::to_string(data.size()) +
                          " values for shape " + t.shape.str());
  }
  t.data = std::move(data);
  return t;
}

json dims_json(const ModelDims& d) {
  return json{{"latent", d.latent},
              {"hidden", d.hidden},
              {"feature", d.feature},
              {"marcher_hidden", d.marcher_hidden},
              {"rgb_hidden", d.rgb_hidden},
              {"classes", d.classes},
              {"march_steps", d.march_steps},
              {"camera_radius", d.camera_radius},
              {"depth_margin", d.depth_margin},
              {"initial_step", d.initial_step},
              {"ln_eps", d.ln_eps}};
}

ModelDims dims_from(const json& j) {
  ModelDims d;
  d.latent = j.at("latent").get<int>();
  d.hidden = j.at("hidden").get<int>();
  d.feature = j.at("feature").get<int>();
  d.marcher_hidden = j.at("marcher_hidden").get<int>();
  d.rgb_hidden = j.at("rgb_hidden").get<int>();
  d.classes = j.at("classes").get<int>();
  d.march_steps = j.at("march_steps").get<int>();
  d.camera_radius = j.at("camera_radius").get<double>();
  d.depth_margin = j.at("depth_margin").get<double>();
  d.initial_step = j.at("initial_step").get<double>();
  d.ln_eps = j.at("ln_eps").get<double>();
  d.validate();
  return d;
}

void check_version(const json& j) {
  if (!j.contains("version") || !j.at("version").is_number_integer()) {
    throw CheckpointError("missing checkpoint version");
  }
  const int v = j.at("version").get<int>();
  if (v != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(v) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
}

}  // namespace

std::string serialize_model(const Model& model) {
  Model copy = model;
  json params = json::object();
  for (const auto& [name, tensor] : copy.parameters()) {
    params[name] = tensor_json(*tensor);
  }
  json codes = json::object();
  for (const auto& [id, code] : model.codes) {
    codes[id] = code.data;
  }
  const json j{{"version", kCheckpointVersion},
               {"dims", dims_json(model.dims)},
               {"class_names", model.class_names},
               {"params", params},
               {"codes", codes}};
  return j.dump() + "\n";
}

Model parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
  check_version(j);
  try {
    Model model = Model::init(dims_from(j.at("dims")), 0);
    model.class_names = j.at("class_names").get<std::vector<std::string>>();
    const auto& params = j.at("params");
    auto slots = model.parameters();
    if (params.size() != slots.size()) {
      throw CheckpointError("checkpoint has " + std::to_string(params.size()) +
                            " parameter tensors, model expects " + std::to_string(slots.size()));
    }
    for (auto& [name, tensor] : slots) {
      if (!params.contains(name)) {
        throw CheckpointError("checkpoint is missing parameter '" + name + "'");
      }
      ad::Tensor loaded = tensor_from(params.at(name), name);
      if (loaded.shape != tensor->shape) {
        throw CheckpointError("parameter '" + name + "' has shape " + loaded.shape.str() +
                              ", expected " + tensor->shape.str());
      }
      *tensor = std::move(loaded);
    }
    const auto k = static_cast<std::size_t>(model.dims.latent);
    for (const auto& [id, values] : j.at("codes").items()) {
      auto data = values.get<std::vector<double>>();
      if (data.size() != k) {
        throw CheckpointError("code '" + id + "' has wrong length");
      }
      model.codes.emplace(id, ad::Tensor({k}, std::move(data)));
    }
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_model(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return parse_model(io::read_file(path));
}

void save_code(const ad::Tensor& code, const std::filesystem::path& path) {
  const json j{{"version", kCheckpointVersion}, {"code", code.data}};
  io::write_file_atomic(path, j.dump() + "\n");
}

ad::Tensor load_code(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
    check_version(j);
    auto data = j.at("code").get<std::vector<double>>();
    const std::size_t n = data.size();
    return ad::Tensor({n}, std::move(data));
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": malformed code file: " + e.what());
  }
}

}  // namespace ssrn
