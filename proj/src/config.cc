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

#include "mvparse/config.h"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

namespace mvparse {

using nlohmann::ordered_json;

namespace {

// Reads the keys of one JSON object into fields, rejecting anything unknown.
class Section {
 public:
  Section(const ordered_json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  Section& field(const std::string& key, T& out) {
    known_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return *this;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error("config: '" + path(key) + "' has the wrong type");
    }
    return *this;
  }

  Section& object(const std::string& key, const std::function<void(Section&)>& fn) {
    known_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return *this;
    Section sub(*it, path(key));
    fn(sub);
    sub.finish();
    return *this;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (std::find(known_.begin(), known_.end(), k) == known_.end()) throw Error("config: unknown key '" + path(k) + "'");
    }
  }

 private:
  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
  const ordered_json& j_;
  std::string name_;
  std::vector<std::string> known_;
};

std::string reduction_name(Reduction r) { return r == Reduction::kSum ? "sum" : "mean"; }

Reduction parse_reduction(const std::string& s) {
  if (s == "sum") return Reduction::kSum;
  if (s == "mean") return Reduction::kMean;
  throw Error("config: reduction must be 'sum' or 'mean'");
}

}  // namespace

void RunConfig::validate() const {
  if (threads < 1) throw Error("config: threads must be >= 1");
  if (synth.people < 1 || synth.views < 1 || synth.frames < 1) throw Error("config: people, views and frames must be >= 1");
  if (synth.width < 8 || synth.height < 8) throw Error("config: image size must be >= 8");
  if (synth.overlap_target < 0.0 || synth.overlap_target > 1.0 || synth.overlap_tolerance <= 0.0) {
    throw Error("config: overlap target must lie in [0,1] with a positive tolerance");
  }
  if (synth.ring_radius <= 0.0 || synth.horizontal_fov_deg <= 0.0 || synth.horizontal_fov_deg >= 180.0) {
    throw Error("config: invalid camera ring");
  }
  const SeedParams& s = annotation.seeds;
  if (s.density <= 0.0 || s.k_min < 1 || s.k_max < s.k_min || s.max_iterations < 1) throw Error("config: invalid seed parameters");
  if (annotation.beta <= 0.0) throw Error("config: annotation beta must be positive");
  if (annotation.region.tau_color < 0.0 || annotation.region.tau_depth < 0.0 || annotation.region.tau_margin < 0) {
    throw Error("config: region-growing thresholds must be non-negative");
  }
  if (annotation.outliers.k < 1 || annotation.outliers.std_ratio <= 0.0) throw Error("config: invalid outlier parameters");
  if (segmenter != "baseline" && segmenter.rfind("external:", 0) != 0) {
    throw Error("config: segmenter must be 'baseline' or 'external:<command>'");
  }
  if (segmenter.rfind("external:", 0) == 0 && segmenter.size() == 9) throw Error("config: empty external segmenter command");
  finetune.validate();
  if (pretrain.epochs < 0 || !(pretrain.learning_rate >= 0.0)) throw Error("config: invalid pretrain settings");
  labels.validate();
}

RunConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  RunConfig c;
  Section root(j, "");
  root.field("rng_seed", c.rng_seed).field("threads", c.threads).field("segmenter", c.segmenter)
      .field("report_foreground_iou", c.report_foreground_iou);
  root.object("synth", [&](Section& s) {
    s.field("people", c.synth.people).field("views", c.synth.views).field("frames", c.synth.frames)
        .field("width", c.synth.width).field("height", c.synth.height)
        .field("overlap_target", c.synth.overlap_target).field("overlap_tolerance", c.synth.overlap_tolerance)
        .field("ring_radius", c.synth.ring_radius).field("camera_height", c.synth.camera_height)
        .field("horizontal_fov_deg", c.synth.horizontal_fov_deg);
  });
  root.object("annotation", [&](Section& s) {
    AnnotationParams& a = c.annotation;
    s.field("density", a.seeds.density).field("k_min", a.seeds.k_min).field("k_max", a.seeds.k_max)
        .field("kmeans_iterations", a.seeds.max_iterations).field("beta", a.beta)
        .field("tau_color", a.region.tau_color).field("tau_depth", a.region.tau_depth)
        .field("tau_margin", a.region.tau_margin).field("outlier_k", a.outliers.k)
        .field("outlier_std_ratio", a.outliers.std_ratio);
  });
  root.object("finetune", [&](Section& s) {
    FinetuneConfig& f = c.finetune;
    std::string red = reduction_name(f.reduction);
    s.field("lambda", f.lambda).field("beta", f.beta).field("n_points", f.n_points).field("n_views", f.n_views)
        .field("learning_rate", f.learning_rate).field("batch_size", f.batch_size).field("max_epochs", f.max_epochs)
        .field("reduction", red);
    f.reduction = parse_reduction(red);
  });
  root.object("pretrain", [&](Section& s) {
    s.field("learning_rate", c.pretrain.learning_rate).field("epochs", c.pretrain.epochs);
  });
  root.object("labels", [&](Section& s) {
    std::vector<int> ignore(c.labels.ignore.begin(), c.labels.ignore.end());
    std::vector<std::pair<int, int>> mapping(c.labels.mapping.begin(), c.labels.mapping.end());
    s.field("names", c.labels.names).field("ignore", ignore).field("mapping", mapping);
    c.labels.ignore = std::set<int>(ignore.begin(), ignore.end());
    c.labels.mapping = std::map<int, int>(mapping.begin(), mapping.end());
  });
  root.object("paths", [&](Section& s) {
    s.field("dataset", c.paths.dataset).field("output", c.paths.output).field("weights", c.paths.weights);
  });
  root.finish();
  c.annotation.seeds.kmeans_seed = c.rng_seed;
  c.finetune.rng_seed = c.rng_seed;
  c.finetune.threads = c.threads;
  c.pretrain.threads = c.threads;
  c.validate();
  return c;
}

std::string config_to_json(const RunConfig& c) {
  const AnnotationParams& a = c.annotation;
  const FinetuneConfig& f = c.finetune;
  ordered_json j;
  j["rng_seed"] = c.rng_seed;
  j["threads"] = c.threads;
  j["segmenter"] = c.segmenter;
  j["report_foreground_iou"] = c.report_foreground_iou;
  j["synth"] = ordered_json{{"people", c.synth.people},
                            {"views", c.synth.views},
                            {"frames", c.synth.frames},
                            {"width", c.synth.width},
                            {"height", c.synth.height},
                            {"overlap_target", c.synth.overlap_target},
                            {"overlap_tolerance", c.synth.overlap_tolerance},
                            {"ring_radius", c.synth.ring_radius},
                            {"camera_height", c.synth.camera_height},
                            {"horizontal_fov_deg", c.synth.horizontal_fov_deg}};
  j["annotation"] = ordered_json{{"density", a.seeds.density},
                                 {"k_min", a.seeds.k_min},
                                 {"k_max", a.seeds.k_max},
                                 {"kmeans_iterations", a.seeds.max_iterations},
                                 {"beta", a.beta},
                                 {"tau_color", a.region.tau_color},
                                 {"tau_depth", a.region.tau_depth},
                                 {"tau_margin", a.region.tau_margin},
                                 {"outlier_k", a.outliers.k},
                                 {"outlier_std_ratio", a.outliers.std_ratio}};
  j["finetune"] = ordered_json{{"lambda", f.lambda},
                               {"beta", f.beta},
                               {"n_points", f.n_points},
                               {"n_views", f.n_views},
                               {"learning_rate", f.learning_rate},
                               {"batch_size", f.batch_size},
                               {"max_epochs", f.max_epochs},
                               {"reduction", reduction_name(f.reduction)}};
  j["pretrain"] = ordered_json{{"learning_rate", c.pretrain.learning_rate}, {"epochs", c.pretrain.epochs}};
  ordered_json mapping = ordered_json::array();
  for (auto [k, v] : c.labels.mapping) mapping.push_back(ordered_json::array({k, v}));
  j["labels"] = ordered_json{{"names", c.labels.names},
                             {"ignore", std::vector<int>(c.labels.ignore.begin(), c.labels.ignore.end())},
                             {"mapping", mapping}};
  j["paths"] = ordered_json{{"dataset", c.paths.dataset}, {"output", c.paths.output}, {"weights", c.paths.weights}};
  return j.dump(2) + "\n";
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write config " + path);
  os << config_to_json(config);
}

}  // namespace mvparse
