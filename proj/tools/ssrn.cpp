// Copyright 2026 The ssrn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, the three training phases,
// rendering and exports.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssrn/checkpoint.hpp"
#include "ssrn/evaluation.hpp"
#include "ssrn/io.hpp"
#include "ssrn/training.hpp"

namespace fs = std::filesystem;
using namespace ssrn;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Files and directories a command created; removed again if it fails.
class Outputs {
 public:
  void file(const fs::path& p) { paths_.push_back(p); }
  void directory(const fs::path& p) {
    if (!fs::exists(p)) {
      fs::create_directories(p);
      paths_.push_back(p);
    }
  }
  void rollback() {
    std::error_code ec;
    for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) {
      fs::remove_all(*it, ec);
    }
  }

 private:
  std::vector<fs::path> paths_;
};

struct CameraFlags {
  int resolution = 32;
  double focal_factor = 1.1;

  [[nodiscard]] CameraView view(const Pose& pose) const {
    return {Intrinsics::centered(resolution, resolution, focal_factor * resolution), pose, resolution,
            resolution};
  }
  void add(CLI::App* cmd) {
    cmd->add_option("--resolution", resolution, "Image width and height in pixels")->check(CLI::Range(1, 1 << 16));
    cmd->add_option("--focal-factor", focal_factor, "Focal length as a multiple of the resolution")
        ->check(CLI::PositiveNumber);
  }
};

struct CodeFlags {
  std::string instance;
  std::string code_file;

  void add(CLI::App* cmd, const std::string& suffix = "") {
    auto* a = cmd->add_option("--instance" + suffix, instance, "Training instance whose code to use");
    auto* b = cmd->add_option("--code" + suffix, code_file, "Latent code file written by infer");
    a->excludes(b);
  }
  [[nodiscard]] ad::Tensor resolve(const Model& model) const {
    if (!code_file.empty()) {
      ad::Tensor z = load_code(code_file);
      if (z.size() != static_cast<std::size_t>(model.dims.latent)) {
        throw UsageError("code length " + std::to_string(z.size()) + " does not match latent size " +
                         std::to_string(model.dims.latent));
      }
      return z;
    }
    if (instance.empty()) {
      throw UsageError("one of --instance or --code is required");
    }
    return model.code(instance);
  }
};

Pose read_pose(const fs::path& p) {
  try {
    return Pose::parse(io::read_file(p));
  } catch (const io::FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw io::FormatError(p, e.what());
  }
}

void write_render(const RenderOutput& r, const fs::path& rgb, const fs::path& mask, Outputs& out) {
  if (!rgb.empty()) {
    out.file(rgb);
    io::write_ppm(rgb, r.rgb);
  }
  if (!mask.empty()) {
    out.file(mask);
    io::write_pgm(mask, r.labels);
  }
}

std::vector<std::pair<std::string, std::string>> read_labels_list(const fs::path& p) {
  std::istringstream in(io::read_file(p));
  std::vector<std::pair<std::string, std::string>> picks;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string instance;
    std::string view;
    if (!(ls >> instance) || instance.front() == '#') {
      continue;
    }
    if (!(ls >> view)) {
      throw io::FormatError(p, "expected '<instance> <view>' but got '" + line + "'");
    }
    picks.emplace_back(instance, view);
  }
  if (picks.empty()) {
    throw UsageError(p.string() + ": labels list is empty");
  }
  return picks;
}

std::string labels_list_text(const std::vector<std::pair<std::string, std::string>>& picks) {
  std::string s;
  for (const auto& [i, v] : picks) {
    s += i + " " + v + "\n";
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic scene representation networks"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  Outputs outputs;

  // gen-data ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic part-labeled dataset");
  synth::GenerateOptions gen_opt;
  std::string gen_template = "chair";
  std::string gen_out;
  gen->add_option("--template", gen_template, "Object template (chair or table)");
  gen->add_option("--instances", gen_opt.instances, "Number of instances")->check(CLI::Range(1, 100000));
  gen->add_option("--views", gen_opt.train_views, "Train views per instance");
  gen->add_option("--test-views", gen_opt.test_views, "Held-out views per instance");
  gen->add_option("--resolution", gen_opt.resolution, "Image size")->check(CLI::Range(8, 4096));
  gen->add_option("--seed", gen_opt.seed, "Dataset seed");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->callback([&] {
    gen_opt.kind = synth::parse_template(gen_template);
    const synth::Dataset ds = synth::generate_dataset(gen_opt);
    outputs.directory(gen_out);
    synth::write_dataset(ds, gen_out);
    std::cout << "instances=" << ds.instances.size() << " train_views="
              << ds.instances.size() * static_cast<std::size_t>(gen_opt.train_views) << " test_views="
              << ds.instances.size() * static_cast<std::size_t>(gen_opt.test_views) << "\n";
  });

  // pretrain ---------------------------------------------------------------
  auto* pre = app.add_subcommand("pretrain", "RGB-only training of the scene prior and per-instance codes");
  TrainConfig tc;
  std::string pre_data;
  std::string pre_out;
  pre->add_option("--data", pre_data, "Dataset directory")->required();
  pre->add_option("--out", pre_out, "Checkpoint to write")->required();
  pre->add_option("--steps", tc.steps, "Optimizer steps");
  pre->add_option("--rays", tc.rays_per_step, "Rays per step");
  pre->add_option("--seed", tc.seed, "Seed");
  pre->add_option("--lr", tc.adam.lr, "Adam learning rate");
  pre->add_option("--lambda-rgb", tc.weights.rgb, "RGB loss weight");
  pre->add_option("--lambda-latent", tc.weights.latent, "Code prior weight");
  pre->add_option("--foreground-weight", tc.foreground_weight, "RGB weight of non-white pixels");
  pre->add_option("--final-lr-fraction", tc.final_lr_fraction, "Cosine-decay the learning rate to this fraction by the last step")
      ->check(CLI::Range(0.0, 1.0));
  pre->add_option("--log-every", tc.log_every, "Steps between log lines (0 disables)");
  pre->add_option("--latent", tc.dims.latent, "Latent code size");
  pre->add_option("--hidden", tc.dims.hidden, "Scene function width");
  pre->add_option("--feature", tc.dims.feature, "Feature size");
  pre->add_option("--march-steps", tc.dims.march_steps, "Ray-marching steps");
  pre->add_option("--initial-step", tc.dims.initial_step, "Initial march step length");
  pre->callback([&] {
    const synth::Dataset ds = synth::read_dataset(pre_data);
    const TrainResult r = pretrain(ds, tc, &std::cerr);
    outputs.file(pre_out);
    save_checkpoint(r.model, pre_out);
    std::cout << "skipped_steps=" << r.skipped_steps << " final_loss=" << r.losses.back() << "\n";
  });

  // select-labels ----------------------------------------------------------
  auto* sel = app.add_subcommand("select-labels", "Pick labeled views that cover every class");
  std::string sel_data;
  std::string sel_out;
  int sel_count = 30;
  std::uint64_t sel_seed = 1;
  sel->add_option("--data", sel_data, "Dataset directory")->required();
  sel->add_option("--count", sel_count, "Number of labeled views")->check(CLI::Range(1, 1 << 30));
  sel->add_option("--seed", sel_seed, "Selection seed");
  sel->add_option("--out", sel_out, "Labels list to write")->required();
  sel->callback([&] {
    const auto picks = select_labeled_views(synth::read_dataset(sel_data), sel_count, sel_seed);
    outputs.file(sel_out);
    io::write_file_atomic(sel_out, labels_list_text(picks));
  });

  // fit-head ---------------------------------------------------------------
  auto* fit = app.add_subcommand("fit-head", "Fit the linear segmentation head on frozen features");
  std::string fit_ckpt;
  std::string fit_data;
  std::string fit_labels;
  std::string fit_out;
  int fit_count = 30;
  std::uint64_t fit_seed = 1;
  HeadFitConfig hc;
  fit->add_option("--checkpoint", fit_ckpt, "Pretrained checkpoint")->required();
  fit->add_option("--data", fit_data, "Dataset directory")->required();
  auto* labels_opt = fit->add_option("--labels", fit_labels, "File of '<instance> <view>' lines");
  fit->add_option("--count", fit_count, "Labeled views to select when --labels is absent")
      ->excludes(labels_opt)
      ->check(CLI::Range(1, 1 << 30));
  fit->add_option("--seed", fit_seed, "Selection seed when --labels is absent");
  fit->add_option("--steps", hc.steps, "Optimizer steps");
  fit->add_option("--lr", hc.lr, "Adam learning rate");
  fit->add_option("--out", fit_out, "Checkpoint to write")->required();
  fit->callback([&] {
    Model model = load_checkpoint(fit_ckpt);
    const synth::Dataset ds = synth::read_dataset(fit_data);
    const auto picks = fit_labels.empty() ? select_labeled_views(ds, fit_count, fit_seed)
                                          : read_labels_list(fit_labels);
    const auto labeled = labeled_observations(ds, picks);
    model.seg = fit_seg_head(model, labeled, hc, &std::cerr).head;
    outputs.file(fit_out);
    save_checkpoint(model, fit_out);
  });

  // infer ------------------------------------------------------------------
  auto* inf = app.add_subcommand("infer", "Infer a latent code for a new object from RGB and/or masks");
  std::string inf_ckpt;
  std::vector<std::string> inf_poses;
  std::vector<std::string> inf_rgb;
  std::vector<std::string> inf_mask;
  std::string inf_out;
  InferConfig ic;
  CameraFlags inf_cam;
  inf->add_option("--checkpoint", inf_ckpt, "Checkpoint")->required();
  inf->add_option("--pose", inf_poses, "Pose file per observation")->required();
  inf->add_option("--rgb", inf_rgb, "PPM per observation");
  inf->add_option("--mask", inf_mask, "PGM per observation");
  inf->add_option("--iters", ic.iters, "Optimizer iterations");
  inf->add_option("--lr", ic.lr, "Adam learning rate");
  inf->add_option("--seed", ic.seed, "Code initialization seed");
  inf->add_option("--lambda-latent", ic.weights.latent, "Code prior weight");
  inf->add_option("--ce-background", ic.ce_background, "Include background pixels in the cross-entropy");
  inf->add_option("--focal-factor", inf_cam.focal_factor, "Focal length as a multiple of the resolution")
      ->check(CLI::PositiveNumber);
  inf->add_option("--out", inf_out, "Code file to write")->required();
  inf->callback([&] {
    if (inf_rgb.empty() && inf_mask.empty()) {
      throw UsageError("infer needs --rgb and/or --mask");
    }
    if ((!inf_rgb.empty() && inf_rgb.size() != inf_poses.size()) ||
        (!inf_mask.empty() && inf_mask.size() != inf_poses.size())) {
      throw UsageError("give one --rgb/--mask file per --pose");
    }
    const Model model = load_checkpoint(inf_ckpt);
    std::vector<Observation> obs;
    for (std::size_t i = 0; i < inf_poses.size(); ++i) {
      Observation o;
      if (!inf_rgb.empty()) {
        o.rgb = io::read_ppm(inf_rgb[i]);
      }
      if (!inf_mask.empty()) {
        o.mask = io::read_pgm(inf_mask[i]);
      }
      const int res = o.rgb ? o.rgb->width : o.mask->width;
      CameraFlags cam = inf_cam;
      cam.resolution = res;
      o.view = cam.view(read_pose(inf_poses[i]));
      o.view.height = o.rgb ? o.rgb->height : o.mask->height;
      obs.push_back(std::move(o));
    }
    ic.log_every = 50;
    const InferResult r = infer_latent(model, obs, ic, &std::cerr);
    outputs.file(inf_out);
    save_code(r.code, inf_out);
    std::cout << "initial_objective=" << r.initial_objective << " best_objective=" << r.best_objective << "\n";
  });

  // render -----------------------------------------------------------------
  auto* ren = app.add_subcommand("render", "Render RGB and labels for one camera");
  std::string ren_ckpt;
  CodeFlags ren_code;
  CameraFlags ren_cam;
  std::string ren_pose;
  double ren_az = 0.0;
  double ren_el = 20.0;
  std::string ren_rgb;
  std::string ren_mask;
  std::string ren_depth;
  ren->add_option("--checkpoint", ren_ckpt, "Checkpoint")->required();
  ren_code.add(ren);
  ren_cam.add(ren);
  ren->add_option("--pose", ren_pose, "Pose file (otherwise an orbit camera)");
  ren->add_option("--azimuth", ren_az, "Orbit azimuth in degrees");
  ren->add_option("--elevation", ren_el, "Orbit elevation in degrees");
  ren->add_option("--out-rgb", ren_rgb, "PPM to write");
  ren->add_option("--out-mask", ren_mask, "PGM of labels to write");
  ren->add_option("--out-depth", ren_depth, "Depth map to write");
  ren->callback([&] {
    if (ren_rgb.empty() && ren_mask.empty() && ren_depth.empty()) {
      throw UsageError("render needs at least one of --out-rgb, --out-mask, --out-depth");
    }
    const Model model = load_checkpoint(ren_ckpt);
    const ad::Tensor z = ren_code.resolve(model);
    const Pose pose = ren_pose.empty() ? orbit_pose(model.dims.camera_radius, ren_az * std::numbers::pi / 180.0,
                                                    ren_el * std::numbers::pi / 180.0)
                                       : read_pose(ren_pose);
    const RenderOutput r = render(model, z, ren_cam.view(pose));
    write_render(r, ren_rgb, ren_mask, outputs);
    if (!ren_depth.empty()) {
      outputs.file(ren_depth);
      io::write_depth(ren_depth, r.depth);
    }
  });

  // interpolate ------------------------------------------------------------
  auto* itp = app.add_subcommand("interpolate", "Render frames along a code interpolation on an orbit");
  std::string itp_ckpt;
  CodeFlags itp_a;
  CodeFlags itp_b;
  CameraFlags itp_cam;
  int itp_steps = 8;
  double itp_orbit = 90.0;
  double itp_el = 20.0;
  std::string itp_out;
  itp->add_option("--checkpoint", itp_ckpt, "Checkpoint")->required();
  itp_a.add(itp, "-a");
  itp_b.add(itp, "-b");
  itp_cam.add(itp);
  itp->add_option("--steps", itp_steps, "Number of frames (>= 2)")->check(CLI::Range(2, 100000));
  itp->add_option("--orbit", itp_orbit, "Total azimuth sweep in degrees");
  itp->add_option("--elevation", itp_el, "Orbit elevation in degrees");
  itp->add_option("--out", itp_out, "Output directory")->required();
  itp->callback([&] {
    const Model model = load_checkpoint(itp_ckpt);
    const ad::Tensor a = itp_a.resolve(model);
    const ad::Tensor b = itp_b.resolve(model);
    outputs.directory(itp_out);
    for (int i = 0; i < itp_steps; ++i) {
      const double alpha = static_cast<double>(i) / static_cast<double>(itp_steps - 1);
      const Pose pose = orbit_pose(model.dims.camera_radius, alpha * itp_orbit * std::numbers::pi / 180.0,
                                   itp_el * std::numbers::pi / 180.0);
      const RenderOutput r = render(model, interpolate_codes(a, b, alpha), itp_cam.view(pose));
      std::ostringstream stem;
      stem << "frame_" << std::setw(3) << std::setfill('0') << i;
      const fs::path dir(itp_out);
      write_render(r, dir / (stem.str() + ".ppm"), dir / (stem.str() + ".pgm"), outputs);
      outputs.file(dir / (stem.str() + ".pose"));
      io::write_file_atomic(dir / (stem.str() + ".pose"), pose.serialize() + "\n");
    }
  });

  // pointcloud -------------------------------------------------------------
  auto* pc = app.add_subcommand("pointcloud", "Export a labeled, colored point cloud as ASCII PLY");
  std::string pc_ckpt;
  CodeFlags pc_code;
  CameraFlags pc_cam;
  std::vector<std::string> pc_poses;
  int pc_views = 8;
  std::string pc_out;
  pc->add_option("--checkpoint", pc_ckpt, "Checkpoint")->required();
  pc_code.add(pc);
  pc_cam.add(pc);
  pc->add_option("--pose", pc_poses, "Pose files (otherwise an orbit)");
  pc->add_option("--views", pc_views, "Orbit views when no --pose is given")->check(CLI::Range(1, 1 << 30));
  pc->add_option("--out", pc_out, "PLY to write")->required();
  pc->callback([&] {
    const Model model = load_checkpoint(pc_ckpt);
    const ad::Tensor z = pc_code.resolve(model);
    std::vector<CameraView> views;
    for (const auto& p : pc_poses) {
      views.push_back(pc_cam.view(read_pose(p)));
    }
    for (int i = 0; pc_poses.empty() && i < pc_views; ++i) {
      views.push_back(pc_cam.view(orbit_pose(model.dims.camera_radius, 2.0 * std::numbers::pi * i / pc_views, 0.35)));
    }
    const auto cloud = point_cloud(model, z, views);
    outputs.file(pc_out);
    io::write_ply(pc_out, cloud);
    std::cout << "points=" << cloud.size() << "\n";
  });

  // eval -------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Segmentation, RGB and consistency metrics on held-out views");
  std::string ev_ckpt;
  std::string ev_data;
  std::string ev_report;
  bool ev_ignore_bg = false;
  bool ev_gt = false;
  int ev_samples = 200;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--report", ev_report, "JSON report to write");
  ev->add_flag("--ignore-background", ev_ignore_bg, "Leave class 0 out of the metrics");
  ev->add_flag("--gt-as-predictions", ev_gt, "Score ground-truth masks against themselves");
  ev->add_option("--samples", ev_samples, "Consistency samples per view pair")->check(CLI::Range(1, 1 << 30));
  ev->callback([&] {
    const Model model = load_checkpoint(ev_ckpt);
    const synth::Dataset ds = synth::read_dataset(ev_data);
    std::vector<eval::SegmentationResult> seg;
    std::vector<eval::ViewPair> pairs;
    eval::MetricReport rep;
    double psnr_sum = 0.0;
    for (const auto& inst : ds.instances) {
      if (!model.codes.contains(inst.id)) {
        continue;
      }
      const auto& z = model.code(inst.id);
      const auto& views = inst.test_views.empty() ? inst.train_views : inst.test_views;
      for (const auto& rec : views) {
        const RenderOutput r = render(model, z, rec.view);
        seg.push_back({ev_gt ? rec.mask : r.labels, rec.mask});
        psnr_sum += eval::psnr(r.rgb, rec.rgb);
        ++rep.images;
      }
      for (std::size_t i = 0; i + 1 < views.size(); i += 2) {
        pairs.push_back({z, views[i], views[i + 1]});
      }
    }
    if (seg.empty()) {
      throw UsageError("no dataset instance has a code in the checkpoint");
    }
    rep.miou = eval::miou(seg, model.dims.classes, ev_ignore_bg);
    rep.shape_miou = eval::shape_miou(seg, model.dims.classes, ev_ignore_bg);
    rep.psnr_mean = psnr_sum / static_cast<double>(rep.images);
    if (!pairs.empty()) {
      eval::ConsistencyOptions co;
      co.samples_per_pair = ev_samples;
      rep.consistency_rate = eval::consistency_rate(model, pairs, co).rate;
    }
    std::cout << rep.to_key_value();
    if (!ev_report.empty()) {
      outputs.file(ev_report);
      io::write_file_atomic(ev_report, rep.to_json() + "\n");
    }
  });

  // export-features --------------------------------------------------------
  auto* ef = app.add_subcommand("export-features", "Write per-pixel features with ground-truth labels");
  std::string ef_ckpt;
  CodeFlags ef_code;
  CameraFlags ef_cam;
  std::string ef_pose;
  std::string ef_mask;
  std::string ef_out;
  ef->add_option("--checkpoint", ef_ckpt, "Checkpoint")->required();
  ef_code.add(ef);
  ef_cam.add(ef);
  ef->add_option("--pose", ef_pose, "Pose file")->required();
  ef->add_option("--mask", ef_mask, "Ground-truth PGM (sets the resolution)")->required();
  ef->add_option("--out", ef_out, "Text file: one 'label f_1 ... f_n' row per pixel")->required();
  ef->callback([&] {
    const Model model = load_checkpoint(ef_ckpt);
    const ad::Tensor z = ef_code.resolve(model);
    const ClassMask mask = io::read_pgm(ef_mask);
    CameraFlags cam = ef_cam;
    cam.resolution = mask.width;
    CameraView view = cam.view(read_pose(ef_pose));
    view.height = mask.height;
    RenderOptions ro;
    ro.keep_features = true;
    const RenderOutput r = render(model, z, view, ro);
    const auto n = static_cast<std::size_t>(model.dims.feature);
    std::ostringstream os;
    os << std::setprecision(9);
    for (std::size_t p = 0; p < mask.data.size(); ++p) {
      os << static_cast<int>(mask.data[p]);
      for (std::size_t k = 0; k < n; ++k) {
        os << ' ' << r.features[p * n + k];
      }
      os << '\n';
    }
    outputs.file(ef_out);
    io::write_file_atomic(ef_out, os.str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    outputs.rollback();
    return app.exit(e);
  } catch (const UsageError& e) {
    outputs.rollback();
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    outputs.rollback();
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
