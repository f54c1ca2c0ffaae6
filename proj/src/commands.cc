// Copyright 2026 The mvparse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvparse/commands.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvparse/annotation.h"
#include "mvparse/external_segmenter.h"
#include "mvparse/image_io.h"
#include "mvparse/parallel.h"

namespace mvparse {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os << text;
  if (!os) throw Error("failed writing " + path);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

SyntheticScene synth_frame(const RunConfig& config, int frame) {
  SceneConfig sc;
  sc.n_people = config.synth.people;
  sc.n_views = config.synth.views;
  sc.overlap_target = config.synth.overlap_target;
  sc.overlap_tolerance = config.synth.overlap_tolerance;
  sc.width = config.synth.width;
  sc.height = config.synth.height;
  sc.ring_radius = config.synth.ring_radius;
  sc.camera_height = config.synth.camera_height;
  sc.horizontal_fov_deg = config.synth.horizontal_fov_deg;
  // A few independent placement attempts before giving up on the overlap target.
  std::string last;
  for (int attempt = 0; attempt < 8; ++attempt) {
    sc.seed = frame_seed(frame_seed(config.rng_seed, frame), attempt);
    try {
      return generate_scene(sc);
    } catch (const Error& e) {
      last = e.what();
    }
  }
  throw Error("frame " + std::to_string(frame) + ": " + last);
}

LabeledPointCloud frame_cloud(const DatasetFrame& frame, const OutlierParams& outliers) {
  std::vector<FusionView> fusion;
  for (const auto& v : frame.views) fusion.push_back(FusionView{&v.depth, &v.calib, &v.rgb});
  return label_points_by_nearest_joint(fuse_and_clean(fusion, outliers), frame.skeletons);
}

ordered_json annotation_parameters(const RunConfig& c) {
  const AnnotationParams& a = c.annotation;
  return ordered_json{{"segmenter", c.segmenter},
                      {"density", a.seeds.density},
                      {"k_min", a.seeds.k_min},
                      {"k_max", a.seeds.k_max},
                      {"kmeans_iterations", a.seeds.max_iterations},
                      {"kmeans_seed", a.seeds.kmeans_seed},
                      {"beta", a.beta},
                      {"tau_color", a.region.tau_color},
                      {"tau_depth", a.region.tau_depth},
                      {"tau_margin", a.region.tau_margin},
                      {"outlier_k", a.outliers.k},
                      {"outlier_std_ratio", a.outliers.std_ratio}};
}

// Ground-truth side of one image's evaluation.
FrameEvaluation ground_truth_evaluation(const DatasetView& view, const std::vector<Skeleton>& skeletons) {
  if (!view.gt_instance || !view.gt_part) throw Error("view " + view.calib.view_id + ": ground truth missing");
  FrameEvaluation e;
  e.gt_parts = *view.gt_part;
  e.pred_parts = LabelMap(view.calib.width, view.calib.height, 0);
  std::vector<Box> boxes;
  for (const auto& s : skeletons) {
    LabelMap inst(view.calib.width, view.calib.height, 0);
    Mask m(view.calib.width, view.calib.height, 0);
    bool any = false;
    for (size_t p = 0; p < inst.size(); ++p) {
      if ((*view.gt_instance)[p] != s.instance_id) continue;
      inst[p] = (*view.gt_part)[p];
      m[p] = 1;
      any = true;
    }
    if (!any) continue;
    boxes.push_back(bounding_box(m));
    e.gt_instances.push_back(std::move(inst));
  }
  e.overlap_degree = overlap_degree(boxes);
  return e;
}

std::string prediction_dir(const std::string& root, const std::string& view, const std::string& frame) {
  return (fs::path(root) / view / frame).string();
}

}  // namespace

uint64_t frame_seed(uint64_t run_seed, int frame) {
  uint64_t z = run_seed + 0x9E3779B97F4A7C15ULL * (static_cast<uint64_t>(frame) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void cmd_synth(const RunConfig& config, const std::string& output_dir, std::ostream& log) {
  config.validate();
  fs::create_directories(output_dir);
  std::vector<CameraCalibration> cameras;
  std::vector<double> overlaps(config.synth.frames, 0.0);
  parallel_for(config.synth.frames, config.threads, [&](size_t f) {
    const SyntheticScene scene = synth_frame(config, static_cast<int>(f));
    write_scene_frame(output_dir, frame_name(static_cast<int>(f)), scene);
    overlaps[f] = overlap_degree(instance_boxes(scene.views[0].instance, config.synth.people));
    if (f == 0) cameras = scene.cameras;
  });
  write_calibration((fs::path(output_dir) / "calibration.json").string(), cameras);
  for (int f = 0; f < config.synth.frames; ++f) {
    log << "frame " << frame_name(f) << ": reference-view overlap " << fmt("%.3f", overlaps[f]) << "\n";
  }
  log << "wrote " << config.synth.frames << " frames x " << config.synth.views << " views to " << output_dir << "\n";
}

int cmd_annotate(const RunConfig& config, const std::string& dataset_dir, std::ostream& log) {
  config.validate();
  const auto cameras = read_calibration((fs::path(dataset_dir) / "calibration.json").string());
  const auto frames = list_frames(dataset_dir);
  if (frames.empty()) throw Error("no frames under " + dataset_dir);
  std::unique_ptr<ExternalSegmenter> external;
  if (config.segmenter.rfind("external:", 0) == 0) external = std::make_unique<ExternalSegmenter>(config.segmenter.substr(9));

  std::vector<std::string> errors(frames.size());
  std::vector<std::vector<std::string>> warnings(frames.size());
  parallel_for(frames.size(), config.threads, [&](size_t f) {
    try {
      const DatasetFrame frame = read_frame(dataset_dir, cameras, frames[f]);
      const LabeledPointCloud cloud = frame_cloud(frame, config.annotation.outliers);
      BaselineSegmenter baseline(config.annotation.region);
      PromptableSegmenter& seg = external ? static_cast<PromptableSegmenter&>(*external) : baseline;
      for (const auto& v : frame.views) {
        const ViewInput input{&v.rgb, &v.depth, &v.calib};
        const ViewAnnotation va = annotate_view(cloud, frame.skeletons, input, seg, config.annotation);
        const std::string dir = mask_dir(dataset_dir, v.calib.view_id, frame.name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        for (const auto& [id, mask] : va.masks) write_mask_png(dir + "/instance_" + std::to_string(id) + ".png", mask);
        ordered_json prov;
        prov["frame"] = frame.name;
        prov["view"] = v.calib.view_id;
        prov["order_far_to_near"] = va.order;
        ordered_json depth = ordered_json::object();
        for (const auto& [id, d] : va.mean_depth) depth[std::to_string(id)] = d;
        prov["mean_depth"] = depth;
        ordered_json seeds = ordered_json::array();
        for (const auto& s : va.seeds) {
          ordered_json pts = ordered_json::array();
          for (const auto& p : s.seeds) pts.push_back(ordered_json{{"x", p.x}, {"y", p.y}, {"source", seed_source_name(p.source)}});
          seeds.push_back(ordered_json{{"instance_id", s.instance_id}, {"seeds", pts}, {"no_projections", s.empty_warning}});
        }
        prov["seeds"] = seeds;
        prov["warnings"] = va.warnings;
        prov["parameters"] = annotation_parameters(config);
        prov["cloud_points"] = cloud.size();
        write_text(dir + "/provenance.json", prov.dump(2) + "\n");
        for (const auto& w : va.warnings) warnings[f].push_back(v.calib.view_id + ": " + w);
      }
    } catch (const std::exception& e) {
      errors[f] = e.what();
    }
  });
  int failed = 0;
  for (size_t f = 0; f < frames.size(); ++f) {
    for (const auto& w : warnings[f]) log << "frame " << frames[f] << " warning: " << w << "\n";
    if (errors[f].empty()) continue;
    ++failed;
    log << "frame " << frames[f] << " failed: " << errors[f] << "\n";
  }
  if (failed == static_cast<int>(frames.size())) throw Error("annotation failed for every frame");
  log << "annotated " << frames.size() - failed << "/" << frames.size() << " frames\n";
  return failed;
}

std::vector<TrainingFrame> load_training_frames(const RunConfig& config, const std::string& dataset_dir,
                                                MaskSource source) {
  const auto cameras = read_calibration((fs::path(dataset_dir) / "calibration.json").string());
  const auto names = list_frames(dataset_dir);
  if (names.empty()) throw Error("no frames under " + dataset_dir);
  std::vector<TrainingFrame> frames(names.size());
  parallel_for(names.size(), config.threads, [&](size_t f) {
    frames[f] = to_training_frame(dataset_dir, read_frame(dataset_dir, cameras, names[f]), source,
                                  config.annotation.outliers);
  });
  return frames;
}

ToyParser load_or_init_parser(const RunConfig& config, const std::string& weights) {
  if (weights.empty()) return ToyParser::zeros(config.labels);
  ToyParser p = load_parser(weights);
  if (p.num_categories != config.labels.size()) throw Error(weights + ": label space size differs from the configuration");
  p.labels = config.labels;
  return p;
}

void cmd_pretrain(const RunConfig& config, const std::string& dataset_dir, const std::string& init,
                  const std::string& out_weights, std::ostream& log) {
  const auto frames = load_training_frames(config, dataset_dir, MaskSource::kGroundTruth);
  std::vector<double> losses;
  const ToyParser parser = pretrain(load_or_init_parser(config, init), frames, config.pretrain, &losses);
  if (fs::path(out_weights).has_parent_path()) fs::create_directories(fs::path(out_weights).parent_path());
  save_parser(parser, out_weights);
  if (!losses.empty()) {
    log << "pretrain: cross-entropy " << fmt("%.6f", losses.front()) << " -> " << fmt("%.6f", losses.back()) << "\n";
  }
}

std::string history_csv(const std::vector<EpochStats>& history, Objective mode) {
  std::string out = mode == Objective::kMVIG ? "epoch,l_fg,l_miou,l_identity,l_part,total\n" : "epoch,l_fg,l_miou,total\n";
  for (const auto& h : history) {
    out += std::to_string(h.epoch) + "," + fmt("%.12g", h.fg) + "," + fmt("%.12g", h.miou);
    if (mode == Objective::kMVIG) out += "," + fmt("%.12g", h.identity) + "," + fmt("%.12g", h.part);
    out += "," + fmt("%.12g", h.total) + "\n";
  }
  return out;
}

FinetuneResult cmd_finetune(const RunConfig& config, const std::string& dataset_dir, Objective mode,
                            MaskSource source, const std::string& init, const std::string& out_weights,
                            const std::string& history_path, std::ostream& log) {
  const auto frames = load_training_frames(config, dataset_dir, source);
  FinetuneConfig fc = config.finetune;
  fc.rng_seed = config.rng_seed;
  fc.threads = config.threads;
  FinetuneResult res = finetune(load_or_init_parser(config, init), frames, fc, mode);
  if (!out_weights.empty()) {
    if (fs::path(out_weights).has_parent_path()) fs::create_directories(fs::path(out_weights).parent_path());
    save_parser(res.parser, out_weights);
  }
  if (!history_path.empty()) write_text(history_path, history_csv(res.history, mode));
  if (!res.history.empty()) {
    log << "finetune (" << (mode == Objective::kMVIG ? "mvig" : "ig") << "): total loss "
        << fmt("%.6f", res.history.front().total) << " -> " << fmt("%.6f", res.history.back().total) << " over "
        << res.history.size() << " epochs\n";
  }
  return res;
}

void cmd_predict(const RunConfig& config, const std::string& dataset_dir, const std::string& weights,
                 const std::string& pred_dir, std::ostream& log) {
  const ToyParser parser = load_or_init_parser(config, weights);
  const auto cameras = read_calibration((fs::path(dataset_dir) / "calibration.json").string());
  const auto names = list_frames(dataset_dir);
  parallel_for(names.size(), config.threads, [&](size_t f) {
    const TrainingFrame tf = to_training_frame(dataset_dir, read_frame(dataset_dir, cameras, names[f]),
                                               MaskSource::kAuto, config.annotation.outliers);
    for (const auto& tv : tf.views) {
      const ViewPrediction pred = predict_view(parser, tv, tf.skeletons);
      const std::string dir = prediction_dir(pred_dir, tv.calib.view_id, names[f]);
      fs::remove_all(dir);
      fs::create_directories(dir);
      Grid<uint8_t> parts(pred.parts.width, pred.parts.height, 0);
      for (size_t i = 0; i < parts.size(); ++i) parts[i] = static_cast<uint8_t>(pred.parts[i]);
      write_gray8_png(dir + "/parts.png", parts);
      ordered_json inst = ordered_json::array();
      for (size_t k = 0; k < pred.instances.size(); ++k) {
        Grid<uint8_t> g(parts.width, parts.height, 0);
        for (size_t i = 0; i < g.size(); ++i) g[i] = static_cast<uint8_t>(pred.instances[k].parts[i]);
        write_gray8_png(dir + "/instance_" + std::to_string(pred.instance_ids[k]) + ".png", g);
        inst.push_back(ordered_json{{"instance_id", pred.instance_ids[k]}, {"confidence", pred.instances[k].confidence}});
      }
      write_text(dir + "/scores.json", ordered_json{{"instances", inst}}.dump(2) + "\n");
    }
  });
  log << "wrote predictions for " << names.size() << " frames to " << pred_dir << "\n";
}

double cmd_evaluate(const RunConfig& config, const std::string& pred_dir, const std::string& dataset_dir,
                    const std::string& json_path, std::ostream& log) {
  const auto cameras = read_calibration((fs::path(dataset_dir) / "calibration.json").string());
  const auto names = list_frames(dataset_dir);
  if (names.empty()) throw Error("no frames under " + dataset_dir);
  const size_t nv = cameras.size();
  std::vector<FrameEvaluation> evals(names.size() * nv);
  std::vector<uint8_t> missing(names.size() * nv, 0);
  parallel_for(names.size(), config.threads, [&](size_t f) {
    const DatasetFrame frame = read_frame(dataset_dir, cameras, names[f]);
    for (size_t v = 0; v < nv; ++v) {
      FrameEvaluation e = ground_truth_evaluation(frame.views[v], frame.skeletons);
      const std::string dir = prediction_dir(pred_dir, cameras[v].view_id, names[f]);
      if (!fs::exists(dir + "/parts.png") || !fs::exists(dir + "/scores.json")) {
        missing[f * nv + v] = 1;
      } else {
        const Grid<uint8_t> parts = read_gray8_png(dir + "/parts.png");
        if (!parts.same_shape(e.gt_parts)) throw Error(dir + ": prediction size mismatch");
        for (size_t i = 0; i < parts.size(); ++i) e.pred_parts[i] = parts[i];
        std::ifstream is(dir + "/scores.json");
        const ordered_json scores = ordered_json::parse(is);
        for (const auto& s : scores.at("instances")) {
          const int id = s.at("instance_id").get<int>();
          const Grid<uint8_t> g = read_gray8_png(dir + "/instance_" + std::to_string(id) + ".png");
          if (!g.same_shape(e.gt_parts)) throw Error(dir + ": instance size mismatch");
          InstanceParsing ip;
          ip.parts = LabelMap(g.width, g.height, 0);
          for (size_t i = 0; i < g.size(); ++i) ip.parts[i] = g[i];
          ip.confidence = s.at("confidence").get<double>();
          e.pred_instances.push_back(std::move(ip));
        }
      }
      evals[f * nv + v] = std::move(e);
    }
  });
  size_t n_missing = 0;
  for (size_t i = 0; i < missing.size(); ++i) {
    if (!missing[i]) continue;
    ++n_missing;
    log << "missing prediction: view " << cameras[i % nv].view_id << " frame " << names[i / nv] << "\n";
  }
  std::vector<std::string> warnings;
  const auto reports = evaluate_by_overlap(evals, config.labels, &warnings);
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  if (!json_path.empty()) write_text(json_path, metrics_json(reports, config.report_foreground_iou));
  log << metrics_table(reports, config.report_foreground_iou);
  return static_cast<double>(n_missing) / static_cast<double>(missing.size());
}

std::string cmd_sweep(const RunConfig& config, const std::string& dataset_dir, const std::string& eval_dir,
                      SweepAxis axis, Objective mode, const std::string& init, std::ostream& log) {
  const auto train = load_training_frames(config, dataset_dir, MaskSource::kAuto);
  const auto eval = eval_dir.empty() || eval_dir == dataset_dir
                        ? train
                        : load_training_frames(config, eval_dir, MaskSource::kGroundTruth);
  const ToyParser start = load_or_init_parser(config, init);
  std::string table = axis == SweepAxis::kViews ? "Number of views" : "Visibility threshold beta";
  table += std::string(" (") + (mode == Objective::kMVIG ? "MVIG" : "IG") + ")\n";
  table += "setting      mIoU_p   mIoU_h\n";
  const std::vector<double> settings = axis == SweepAxis::kViews ? std::vector<double>{2, 4, 8}
                                                                 : std::vector<double>{0.20, 0.30, 0.40};
  for (double s : settings) {
    FinetuneConfig fc = config.finetune;
    fc.rng_seed = config.rng_seed;
    fc.threads = config.threads;
    std::string name;
    if (axis == SweepAxis::kViews) {
      fc.n_views = static_cast<int>(s);
      name = std::to_string(fc.n_views) + " views";
    } else {
      fc.beta = s;
      name = std::to_string(static_cast<int>(std::lround(s * 100))) + " cm";
    }
    const FinetuneResult res = finetune(start, train, fc, mode);
    const auto reports = evaluate_by_overlap(evaluate_parser(res.parser, eval, config.threads), config.labels);
    char line[128];
    std::snprintf(line, sizeof(line), "%-10s %8.2f %8.2f\n", name.c_str(), 100 * reports[0].miou_p,
                  100 * reports[0].miou_h);
    table += line;
    log << "sweep " << name << " done\n";
  }
  return table;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"mvparse: multi-view weakly supervised multi-human parsing toolkit"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  std::string config_path, save_config_path;
  app.add_option("--seed", seed, "run seed");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--save-config", save_config_path, "write the effective configuration here");

  // synth
  auto* synth = app.add_subcommand("synth", "render a synthetic multi-view RGB-D dataset");
  std::string synth_out;
  std::optional<int> people, views, frames, width, height;
  std::optional<double> overlap;
  synth->add_option("output_dir", synth_out);
  synth->add_option("--people", people);
  synth->add_option("--views", views);
  synth->add_option("--frames", frames);
  synth->add_option("--overlap", overlap, "target reference-view overlap degree");
  synth->add_option("--width", width);
  synth->add_option("--height", height);

  // annotate
  auto* annotate = app.add_subcommand("annotate", "generate instance masks from skeletons and depth");
  std::string ann_dir;
  std::optional<std::string> segmenter;
  std::optional<double> ann_beta, density, tau_color, tau_depth;
  std::optional<int> tau_margin;
  annotate->add_option("dataset_dir", ann_dir);
  annotate->add_option("--segmenter", segmenter, "baseline | external:<command>");
  annotate->add_option("--beta", ann_beta);
  annotate->add_option("--density", density);
  annotate->add_option("--tau-color", tau_color);
  annotate->add_option("--tau-depth", tau_depth);
  annotate->add_option("--tau-margin", tau_margin);

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "supervised warm start from ground-truth part maps");
  std::string pre_dir, pre_out, pre_init;
  std::optional<int> pre_epochs;
  std::optional<double> pre_lr;
  pre->add_option("dataset_dir", pre_dir);
  pre->add_option("--out", pre_out, "weights file")->required();
  pre->add_option("--init", pre_init);
  pre->add_option("--epochs", pre_epochs);
  pre->add_option("--lr", pre_lr);

  // finetune and sweep share the training flags
  std::string ft_mode = "mvig", ft_masks = "auto", ft_init, ft_out, ft_history;
  std::optional<int> ft_views, ft_points, ft_batch, ft_epochs;
  std::optional<double> ft_beta, ft_lambda, ft_lr;
  std::optional<std::string> ft_reduction;
  auto add_training_flags = [&](CLI::App* c) {
    c->add_option("--mode", ft_mode)->check(CLI::IsMember({"ig", "mvig"}));
    c->add_option("--masks", ft_masks, "auto | gt | annotated")->check(CLI::IsMember({"auto", "gt", "annotated"}));
    c->add_option("--init", ft_init, "initial weights");
    c->add_option("--views", ft_views);
    c->add_option("--beta", ft_beta);
    c->add_option("--lambda", ft_lambda);
    c->add_option("--points", ft_points);
    c->add_option("--lr", ft_lr);
    c->add_option("--batch", ft_batch);
    c->add_option("--epochs", ft_epochs);
    c->add_option("--reduction", ft_reduction)->check(CLI::IsMember({"sum", "mean"}));
  };
  auto* ft = app.add_subcommand("finetune", "fine-tune the parser with the IG or MVIG objective");
  std::string ft_dir;
  ft->add_option("dataset_dir", ft_dir);
  add_training_flags(ft);
  ft->add_option("--out", ft_out, "weights file");
  ft->add_option("--history", ft_history, "loss history CSV");

  // predict
  auto* pred = app.add_subcommand("predict", "write per-instance part predictions");
  std::string pred_dataset, pred_weights, pred_out;
  pred->add_option("dataset_dir", pred_dataset);
  pred->add_option("--weights", pred_weights)->required();
  pred->add_option("--out", pred_out, "prediction directory")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score predictions per overlap subset");
  std::string ev_pred, ev_dataset, ev_json;
  ev->add_option("predictions_dir", ev_pred)->required();
  ev->add_option("dataset_dir", ev_dataset);
  ev->add_option("--out", ev_json, "metrics JSON");

  // sweep
  auto* sw = app.add_subcommand("sweep", "ablation over views {2,4,8} or beta {0.20,0.30,0.40}");
  std::string sw_dir, sw_axis, sw_eval, sw_out;
  sw->add_option("dataset_dir", sw_dir);
  sw->add_option("--axis", sw_axis)->required()->check(CLI::IsMember({"views", "beta"}));
  sw->add_option("--eval-dataset", sw_eval);
  sw->add_option("--out", sw_out, "table file");
  add_training_flags(sw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  RunConfig cfg;
  std::string dataset;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed) cfg.rng_seed = *seed;
    if (threads) cfg.threads = *threads;
    if (people) cfg.synth.people = *people;
    if (views) cfg.synth.views = *views;
    if (frames) cfg.synth.frames = *frames;
    if (overlap) cfg.synth.overlap_target = *overlap;
    if (width) cfg.synth.width = *width;
    if (height) cfg.synth.height = *height;
    if (segmenter) cfg.segmenter = *segmenter;
    if (ann_beta) cfg.annotation.beta = *ann_beta;
    if (density) cfg.annotation.seeds.density = *density;
    if (tau_color) cfg.annotation.region.tau_color = *tau_color;
    if (tau_depth) cfg.annotation.region.tau_depth = *tau_depth;
    if (tau_margin) cfg.annotation.region.tau_margin = *tau_margin;
    if (pre_epochs) cfg.pretrain.epochs = *pre_epochs;
    if (pre_lr) cfg.pretrain.learning_rate = *pre_lr;
    if (ft_views) cfg.finetune.n_views = *ft_views;
    if (ft_beta) cfg.finetune.beta = *ft_beta;
    if (ft_lambda) cfg.finetune.lambda = *ft_lambda;
    if (ft_points) cfg.finetune.n_points = *ft_points;
    if (ft_lr) cfg.finetune.learning_rate = *ft_lr;
    if (ft_batch) cfg.finetune.batch_size = *ft_batch;
    if (ft_epochs) cfg.finetune.max_epochs = *ft_epochs;
    if (ft_reduction) cfg.finetune.reduction = *ft_reduction == "sum" ? Reduction::kSum : Reduction::kMean;
    cfg.annotation.seeds.kmeans_seed = cfg.rng_seed;
    cfg.finetune.rng_seed = cfg.rng_seed;
    cfg.finetune.threads = cfg.threads;
    cfg.pretrain.threads = cfg.threads;
    cfg.validate();

    std::string positional;
    if (*synth) positional = synth_out.empty() ? cfg.paths.output : synth_out;
    if (*annotate) positional = ann_dir;
    if (*pre) positional = pre_dir;
    if (*ft) positional = ft_dir;
    if (*pred) positional = pred_dataset;
    if (*ev) positional = ev_dataset;
    if (*sw) positional = sw_dir;
    dataset = !positional.empty() ? positional : cfg.paths.dataset;
    if (dataset.empty()) throw UsageError("a dataset/output directory is required (argument or paths in --config)");
    if (!save_config_path.empty()) save_config(cfg, save_config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const Objective mode = ft_mode == "ig" ? Objective::kIG : Objective::kMVIG;
    const MaskSource source = ft_masks == "gt"          ? MaskSource::kGroundTruth
                              : ft_masks == "annotated" ? MaskSource::kAnnotated
                                                        : MaskSource::kAuto;
    if (*synth) {
      cmd_synth(cfg, dataset, std::cout);
    } else if (*annotate) {
      cmd_annotate(cfg, dataset, std::cout);
    } else if (*pre) {
      cmd_pretrain(cfg, dataset, pre_init, pre_out, std::cout);
    } else if (*ft) {
      const std::string out = ft_out.empty() ? cfg.paths.weights : ft_out;
      cmd_finetune(cfg, dataset, mode, source, ft_init, out, ft_history, std::cout);
    } else if (*pred) {
      cmd_predict(cfg, dataset, pred_weights, pred_out, std::cout);
    } else if (*ev) {
      const double missing = cmd_evaluate(cfg, ev_pred, dataset, ev_json, std::cout);
      if (missing > 0.10) {
        std::cerr << "error: " << fmt("%.1f", 100 * missing) << "% of predictions missing\n";
        return 1;
      }
    } else if (*sw) {
      const std::string table =
          cmd_sweep(cfg, dataset, sw_eval, sw_axis == "views" ? SweepAxis::kViews : SweepAxis::kBeta, mode, ft_init,
                    std::cout);
      std::cout << table;
      if (!sw_out.empty()) write_text(sw_out, table);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mvparse
