// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssrn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace ssrn {

namespace {

class Stopwatch {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<int> all_pixels(const CameraView& view) {
  std::vector<int> px(static_cast<std::size_t>(view.pixel_count()));
  std::iota(px.begin(), px.end(), 0);
  return px;
}

std::vector<int> sample_pixels(const CameraView& view, int count, std::mt19937_64& rng) {
  std::vector<int> px = all_pixels(view);
  if (count <= 0 || static_cast<std::size_t>(count) >= px.size()) {
    return px;
  }
  // Partial Fisher-Yates.
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), px.size() - 1);
    std::swap(px[static_cast<std::size_t>(i)], px[pick(rng)]);
  }
  px.resize(static_cast<std::size_t>(count));
  std::sort(px.begin(), px.end());
  return px;
}

std::vector<Adam::Item> harvest(const Binding& binding, const std::map<std::string, ad::Tensor*>& slots) {
  std::vector<Adam::Item> items;
  items.reserve(binding.trainable().size());
  for (const auto& [name, var] : binding.trainable()) {
    items.push_back({name, slots.at(name), var.grad()});
  }
  return items;
}

}  // namespace

bool Adam::step(std::span<const Item> items) {
  for (const auto& item : items) {
    if (item.value == nullptr || item.grad.size() != item.value->size()) {
      throw ad::ShapeError("Adam::step: gradient for '" + item.name + "' does not match its value");
    }
    for (double g : item.grad) {
      if (!std::isfinite(g)) {
        ++skipped_;
        return false;
      }
    }
  }
  const auto& c = config_;
  for (const auto& item : items) {
    auto& s = state_[item.name];
    if (s.m.empty()) {
      s.m.assign(item.value->size(), 0.0);
      s.v.assign(item.value->size(), 0.0);
    }
    ++s.t;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.t));
    auto& w = item.value->data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = item.grad[i];
      s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g;
      s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * g * g;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
  return true;
}

std::uint64_t Adam::steps(const std::string& name) const {
  auto it = state_.find(name);
  return it == state_.end() ? 0 : it->second.t;
}

void LossWeights::validate() const {
  if (rgb < 0.0 || ce < 0.0 || latent < 0.0) {
    throw std::invalid_argument("loss weights must be nonnegative");
  }
  if (!(rgb > 0.0 || ce > 0.0)) {
    throw std::invalid_argument("at least one of the rgb and ce weights must be positive");
  }
}

void TrainConfig::validate() const {
  if (steps < 1) {
    throw std::invalid_argument("steps must be >= 1");
  }
  if (rays_per_step < 1) {
    throw std::invalid_argument("rays_per_step must be >= 1");
  }
  if (!(adam.lr > 0.0)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  if (!(foreground_weight > 0.0)) {
    throw std::invalid_argument("foreground_weight must be positive");
  }
  if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0)) {
    throw std::invalid_argument("final_lr_fraction must be in [0, 1]");
  }
  weights.validate();
  dims.validate();
}

ad::Tensor gather_rgb(const RgbImage& image, std::span<const int> pixels) {
  ad::Tensor t({pixels.size(), 3});
  for (std::size_t r = 0; r < pixels.size(); ++r) {
    const int p = pixels[r];
    const int u = p % image.width;
    const int v = p / image.width;
    for (int c = 0; c < 3; ++c) {
      t.at(r, static_cast<std::size_t>(c)) = image.at(u, v, c);
    }
  }
  return t;
}

std::vector<int> gather_labels(const ClassMask& mask, std::span<const int> pixels) {
  std::vector<int> out;
  out.reserve(pixels.size());
  for (int p : pixels) {
    out.push_back(mask.data.at(static_cast<std::size_t>(p)));
  }
  return out;
}

LossTerms scene_loss(const ModelVars& vars, ad::Var code, const RayBatch& rays,
                     const ad::Tensor* rgb_target, std::span<const int> labels,
                     const LossWeights& weights, const ModelDims& dims,
                     std::span<const double> ray_weights) {
  ad::Tape& tape = code.tape();
  const SceneFunction scene = generate_scene(vars.hyper, code);
  const MarchTrace trace = march(scene, rays, vars.marcher, dims);
  const HeadOutputs heads = shade(scene, trace.points, vars.rgb, vars.seg);

  LossTerms terms;
  ad::Var total = tape.scalar(0.0, false);
  if (rgb_target != nullptr && weights.rgb > 0.0) {
    ad::Var l;
    if (ray_weights.empty()) {
      l = ad::mse(heads.rgb, *rgb_target);
    } else {
      if (ray_weights.size() != rays.size()) {
        throw ad::ShapeError("scene_loss: one weight per ray required");
      }
      ad::Tensor root({ray_weights.size(), 1});
      double total_weight = 0.0;
      for (std::size_t i = 0; i < ray_weights.size(); ++i) {
        root.data[i] = std::sqrt(ray_weights[i]);
        total_weight += ray_weights[i];
      }
      const ad::Var diff = ad::sub(heads.rgb, tape.constant(*rgb_target));
      l = ad::scale(ad::sum_squares(ad::scale_rows(diff, tape.constant(root))), 1.0 / (3.0 * total_weight));
    }
    terms.rgb = l.item();
    total = ad::add(total, ad::scale(l, weights.rgb));
  }
  if (!labels.empty() && weights.ce > 0.0) {
    const ad::Var l = ad::softmax_cross_entropy(heads.logits, labels);
    terms.ce = l.item();
    total = ad::add(total, ad::scale(l, weights.ce));
  }
  if (weights.latent > 0.0) {
    const ad::Var l = ad::sum_squares(code);
    terms.latent = l.item();
    total = ad::add(total, ad::scale(l, weights.latent));
  }
  terms.total = total;
  return terms;
}

double TrainConfig::lr_at(int step) const {
  if (final_lr_fraction == 1.0 || steps <= 1) {
    return adam.lr;
  }
  const double t = static_cast<double>(step) / static_cast<double>(steps - 1);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  return adam.lr * (final_lr_fraction + (1.0 - final_lr_fraction) * cosine);
}

TrainResult pretrain(const synth::Dataset& dataset, const TrainConfig& config, std::ostream* log) {
  config.validate();
  if (dataset.instances.empty()) {
    throw std::invalid_argument("pretrain: dataset has no instances");
  }
  for (const auto& inst : dataset.instances) {
    if (inst.train_views.size() < 2) {
      throw std::invalid_argument("pretrain: instance '" + inst.id + "' has fewer than 2 train views");
    }
  }

  TrainResult result;
  ModelDims dims = config.dims;
  dims.classes = dataset.class_count;
  dims.camera_radius = dataset.camera_radius;
  std::mt19937_64 rng(config.seed);
  result.model = Model::init(dims, rng());
  Model& model = result.model;
  model.class_names = dataset.class_names;
  for (const auto& inst : dataset.instances) {
    model.codes.emplace(inst.id, sample_latent(dims.latent, rng));
  }

  std::map<std::string, ad::Tensor*> slots;
  for (auto& [name, t] : model.parameters()) {
    slots.emplace(name, t);
  }
  for (auto& [id, code] : model.codes) {
    slots.emplace("code." + id, &code);
  }

  LossWeights weights = config.weights;
  weights.ce = 0.0;
  Adam adam(config.adam);
  const Stopwatch clock;
  std::uniform_int_distribution<std::size_t> pick_instance(0, dataset.instances.size() - 1);
  result.losses.reserve(static_cast<std::size_t>(config.steps));

  for (int step = 0; step < config.steps; ++step) {
    const auto& inst = dataset.instances[pick_instance(rng)];
    std::uniform_int_distribution<std::size_t> pick_view(0, inst.train_views.size() - 1);
    const auto& rec = inst.train_views[pick_view(rng)];
    const auto pixels = sample_pixels(rec.view, config.rays_per_step, rng);
    const RayBatch rays = make_ray_batch(rec.view, pixels);
    const ad::Tensor target = gather_rgb(rec.rgb, pixels);
    std::vector<double> ray_weights;
    if (config.foreground_weight != 1.0) {
      ray_weights.resize(pixels.size());
      for (std::size_t r = 0; r < pixels.size(); ++r) {
        const bool white = target.at(r, 0) == 1.0 && target.at(r, 1) == 1.0 && target.at(r, 2) == 1.0;
        ray_weights[r] = white ? 1.0 : config.foreground_weight;
      }
    }

    ad::Tape tape;
    Binding binding(tape);
    const ModelVars vars = bind(binding, model, Trainable{true, true, true, false});
    const ad::Var code = binding("code." + inst.id, model.codes.at(inst.id), true);
    const LossTerms terms = scene_loss(vars, code, rays, &target, {}, weights, model.dims, ray_weights);
    tape.backward(terms.total);
    const auto items = harvest(binding, slots);
    adam.set_lr(config.lr_at(step));
    adam.step(items);

    result.losses.push_back(terms.total.item());
    if (log != nullptr && config.log_every > 0 &&
        (step % config.log_every == 0 || step + 1 == config.steps)) {
      *log << "phase=pretrain step=" << step << " loss=" << terms.total.item()
           << " rgb=" << terms.rgb << " latent=" << terms.latent
           << " psnr=" << (terms.rgb > 0.0 ? -10.0 * std::log10(terms.rgb) : 0.0)
           << " skipped=" << adam.skipped() << " time_s=" << clock.seconds() << "\n";
    }
  }
  result.skipped_steps = adam.skipped();
  return result;
}

HeadFitResult fit_seg_head(const Model& model, std::span<const LabeledObservation> labeled,
                           const HeadFitConfig& config, std::ostream* log) {
  if (labeled.empty()) {
    throw std::invalid_argument("fit_seg_head: no labeled observations");
  }
  if (config.steps < 0 || !(config.lr > 0.0)) {
    throw std::invalid_argument("fit_seg_head: steps must be >= 0 and lr positive");
  }
  const auto n = static_cast<std::size_t>(model.dims.feature);
  std::vector<double> features;
  std::vector<int> labels;
  for (const auto& obs : labeled) {
    const ad::Tensor& code = model.code(obs.instance);
    if (obs.mask.width != obs.view.width || obs.mask.height != obs.view.height) {
      throw std::invalid_argument("fit_seg_head: mask size does not match view");
    }
    const RenderOutput r = render(model, code, obs.view, RenderOptions{.keep_features = true});
    features.insert(features.end(), r.features.begin(), r.features.end());
    for (std::uint8_t l : obs.mask.data) {
      if (l >= model.dims.classes) {
        throw std::out_of_range("fit_seg_head: label exceeds class count");
      }
      labels.push_back(l);
    }
  }
  const ad::Tensor x({labels.size(), n}, std::move(features));
  return fit_linear_classifier(x, labels, model.dims.classes, config, log);
}

HeadFitResult fit_linear_classifier(const ad::Tensor& x, std::span<const int> labels, int classes,
                                    const HeadFitConfig& config, std::ostream* log) {
  if (x.rows() != labels.size() || x.shape.rank() != 2) {
    throw ad::ShapeError("fit_linear_classifier: need [N x d] inputs and N labels");
  }
  if (config.steps < 0 || !(config.lr > 0.0) || classes < 2) {
    throw std::invalid_argument("fit_linear_classifier: bad steps, lr or class count");
  }
  HeadFitResult result;
  const auto c = static_cast<std::size_t>(classes);
  result.head.weight = ad::Tensor::zeros({x.cols(), c});
  result.head.bias = ad::Tensor::zeros({c});
  Adam adam(AdamConfig{.lr = config.lr});
  const Stopwatch clock;
  for (int step = 0; step < config.steps; ++step) {
    ad::Tape tape;
    Binding binding(tape);
    const SegHeadVars head = bind(binding, result.head, true);
    const ad::Var logits = ad::add_bias_row(ad::matmul(tape.constant(x), head.weight), head.bias);
    const ad::Var loss = ad::softmax_cross_entropy(logits, labels);
    tape.backward(loss);
    const std::map<std::string, ad::Tensor*> slots{{"seg.weight", &result.head.weight},
                                                   {"seg.bias", &result.head.bias}};
    const auto items = harvest(binding, slots);
    adam.step(items);
    result.losses.push_back(loss.item());
    if (log != nullptr && config.log_every > 0 &&
        (step % config.log_every == 0 || step + 1 == config.steps)) {
      *log << "phase=fit_head step=" << step << " ce=" << loss.item()
           << " time_s=" << clock.seconds() << "\n";
    }
  }
  return result;
}

std::vector<int> predict_linear(const SegHead& head, const ad::Tensor& x) {
  const std::size_t d = x.cols();
  const std::size_t c = head.bias.size();
  if (head.weight.rows() != d) {
    throw ad::ShapeError("predict_linear: input width does not match classifier");
  }
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto logits = head.logits(std::span<const double>(x.data.data() + r * d, d));
    out[r] = static_cast<int>(std::max_element(logits.begin(), logits.begin() + static_cast<std::ptrdiff_t>(c)) -
                              logits.begin());
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> select_labeled_views(
    const synth::Dataset& dataset, int count, std::uint64_t seed, int max_attempts) {
  if (count < 1) {
    throw std::invalid_argument("select_labeled_views: count must be >= 1");
  }
  std::size_t available = 0;
  for (const auto& inst : dataset.instances) {
    available += inst.train_views.size();
  }
  if (static_cast<std::size_t>(count) > available) {
    throw std::invalid_argument("select_labeled_views: not enough train views");
  }
  std::mt19937_64 rng(seed);
  const std::size_t n_inst = dataset.instances.size();
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<std::size_t> order(n_inst);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> views(n_inst);
    for (std::size_t i = 0; i < n_inst; ++i) {
      views[i].resize(dataset.instances[i].train_views.size());
      std::iota(views[i].begin(), views[i].end(), 0);
      std::shuffle(views[i].begin(), views[i].end(), rng);
    }
    std::vector<std::pair<std::string, std::string>> picks;
    std::set<int> classes;
    std::vector<std::size_t> used(n_inst, 0);
    for (std::size_t k = 0; picks.size() < static_cast<std::size_t>(count); ++k) {
      const std::size_t i = order[k % n_inst];
      if (used[i] >= views[i].size()) {
        continue;
      }
      const auto& inst = dataset.instances[i];
      const auto& rec = inst.train_views[views[i][used[i]++]];
      picks.emplace_back(inst.id, rec.name);
      classes.insert(rec.mask.data.begin(), rec.mask.data.end());
    }
    if (static_cast<int>(classes.size()) == dataset.class_count) {
      return picks;
    }
  }
  throw std::runtime_error("select_labeled_views: no subset covering every class was found");
}

std::vector<LabeledObservation> labeled_observations(
    const synth::Dataset& dataset, std::span<const std::pair<std::string, std::string>> picks) {
  std::vector<LabeledObservation> out;
  for (const auto& [id, view_name] : picks) {
    const auto& inst = dataset.instance(id);
    const synth::ViewRecord* found = nullptr;
    for (const auto* list : {&inst.train_views, &inst.test_views}) {
      for (const auto& rec : *list) {
        if (rec.name == view_name) {
          found = &rec;
        }
      }
    }
    if (found == nullptr) {
      throw std::out_of_range("instance '" + id + "' has no view '" + view_name + "'");
    }
    out.push_back({id, found->view, found->mask});
  }
  return out;
}

InferResult infer_latent(const Model& model, std::span<const Observation> observations,
                         const InferConfig& config, std::ostream* log) {
  if (observations.empty()) {
    throw std::invalid_argument("infer_latent: no observations");
  }
  if (config.iters < 0 || !(config.lr > 0.0)) {
    throw std::invalid_argument("infer_latent: iters must be >= 0 and lr positive");
  }
  config.weights.validate();

  struct Batch {
    RayBatch rays;
    std::optional<ad::Tensor> rgb;
    std::vector<int> labels;
  };
  std::vector<Batch> batches;
  for (const auto& obs : observations) {
    if (!obs.rgb && !obs.mask) {
      throw std::invalid_argument("infer_latent: observation has neither rgb nor mask");
    }
    obs.view.validate();
    const auto pixels = all_pixels(obs.view);
    if (obs.rgb && (obs.rgb->width != obs.view.width || obs.rgb->height != obs.view.height)) {
      throw std::invalid_argument("infer_latent: rgb size does not match view");
    }
    if (obs.mask && (obs.mask->width != obs.view.width || obs.mask->height != obs.view.height)) {
      throw std::invalid_argument("infer_latent: mask size does not match view");
    }
    if (obs.mask && !config.ce_background) {
      std::vector<int> fg;
      for (int p : pixels) {
        if (obs.mask->data[static_cast<std::size_t>(p)] != 0) {
          fg.push_back(p);
        }
      }
      if (obs.rgb) {
        batches.push_back({make_ray_batch(obs.view, pixels), gather_rgb(*obs.rgb, pixels), {}});
      }
      if (!fg.empty()) {
        batches.push_back({make_ray_batch(obs.view, fg), std::nullopt, gather_labels(*obs.mask, fg)});
      }
      continue;
    }
    Batch b{make_ray_batch(obs.view, pixels), std::nullopt, {}};
    if (obs.rgb) {
      b.rgb = gather_rgb(*obs.rgb, pixels);
    }
    if (obs.mask) {
      b.labels = gather_labels(*obs.mask, pixels);
    }
    batches.push_back(std::move(b));
  }

  LossWeights per_batch = config.weights;
  per_batch.latent = 0.0;
  const double inv = 1.0 / static_cast<double>(observations.size());

  std::mt19937_64 rng(config.seed);
  ad::Tensor z = sample_latent(model.dims.latent, rng);
  Adam adam(AdamConfig{.lr = config.lr});
  const Stopwatch clock;

  InferResult result;
  result.code = z;
  for (int it = 0; it <= config.iters; ++it) {
    ad::Tape tape;
    Binding binding(tape);
    const ModelVars vars = bind(binding, model, Trainable{});
    const ad::Var code = binding("code", z, true);
    ad::Var total = ad::scale(ad::sum_squares(code), config.weights.latent);
    for (const auto& b : batches) {
      const LossTerms t = scene_loss(vars, code, b.rays, b.rgb ? &*b.rgb : nullptr, b.labels,
                                     per_batch, model.dims);
      total = ad::add(total, ad::scale(t.total, inv));
    }
    const double objective = total.item();
    result.objectives.push_back(objective);
    if (it == 0) {
      result.initial_objective = objective;
      result.best_objective = objective;
    } else if (objective < result.best_objective) {
      result.best_objective = objective;
      result.code = z;
    }
    if (log != nullptr && config.log_every > 0 && (it % config.log_every == 0 || it == config.iters)) {
      *log << "phase=infer iter=" << it << " objective=" << objective
           << " best=" << result.best_objective << " time_s=" << clock.seconds() << "\n";
    }
    if (it == config.iters) {
      break;
    }
    tape.backward(total);
    const std::map<std::string, ad::Tensor*> slots{{"code", &z}};
    const auto items = harvest(binding, slots);
    adam.step(items);
  }
  return result;
}

}  // namespace ssrn
