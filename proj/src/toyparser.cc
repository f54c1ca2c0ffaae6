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

#include "mvparse/toyparser.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mvparse/annotation.h"
#include "mvparse/parallel.h"

namespace mvparse {

namespace {

constexpr char kMagic[8] = {'M', 'V', 'T', 'O', 'Y', 'P', 'R', 'S'};
constexpr uint32_t kFileVersion = 1;

uint64_t mix_seed(uint64_t a, uint64_t b) {
  // splitmix64 finalizer over the pair
  uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  const uint64_t bits = std::bit_cast<uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("weights file truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error("weights file truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

int feature_dim(int num_categories) { return 8 + kNumJoints + (num_categories - 1); }

ToyParser ToyParser::zeros(const LabelSpace& labels) {
  labels.validate();
  ToyParser p;
  p.labels = labels;
  p.num_categories = labels.size();
  p.feature_dim = mvparse::feature_dim(p.num_categories);
  p.weights.assign(static_cast<size_t>(p.feature_dim) * p.num_categories, 0.0);
  p.bias.assign(p.num_categories, 0.0);
  return p;
}

std::vector<double> ToyParser::params() const {
  std::vector<double> out = weights;
  out.insert(out.end(), bias.begin(), bias.end());
  return out;
}

void ToyParser::set_params(const std::vector<double>& flat) {
  if (flat.size() != num_params()) throw Error("ToyParser: parameter count mismatch");
  std::copy(flat.begin(), flat.begin() + weights.size(), weights.begin());
  std::copy(flat.begin() + weights.size(), flat.end(), bias.begin());
}

void ToyParser::validate() const {
  if (recipe_version != kFeatureRecipeVersion) throw Error("ToyParser: unsupported feature recipe");
  if (num_categories != labels.size()) throw Error("ToyParser: label space size mismatch");
  if (feature_dim != mvparse::feature_dim(num_categories)) throw Error("ToyParser: feature_dim inconsistent with recipe");
  if (weights.size() != static_cast<size_t>(feature_dim) * num_categories || bias.size() != static_cast<size_t>(num_categories)) {
    throw Error("ToyParser: parameter shape mismatch");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw Error("ToyParser: non-finite weight");
  }
  for (double b : bias) {
    if (!std::isfinite(b)) throw Error("ToyParser: non-finite bias");
  }
}

void save_parser(const ToyParser& parser, const std::string& path) {
  parser.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, kFileVersion);
  put_u32(os, static_cast<uint32_t>(parser.recipe_version));
  put_u32(os, static_cast<uint32_t>(parser.feature_dim));
  put_u32(os, static_cast<uint32_t>(parser.num_categories));
  for (double w : parser.weights) put_f64(os, w);
  for (double b : parser.bias) put_f64(os, b);
  if (!os) throw Error("failed writing " + path);

  std::ofstream man(path + ".manifest.txt");
  if (!man) throw Error("cannot write manifest for " + path);
  man << "format=mvparse-toy-parser\n"
      << "file_version=" << kFileVersion << "\n"
      << "feature_recipe=" << parser.recipe_version << "\n"
      << "feature_dim=" << parser.feature_dim << "\n"
      << "num_categories=" << parser.num_categories << "\n"
      << "layout=weights[feature][category] then bias[category], float64 little-endian\n";
  for (int c = 0; c < parser.labels.size(); ++c) man << "category." << c << "=" << parser.labels.names[c] << "\n";
}

ToyParser load_parser(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw Error(path + ": not a toy parser weights file");
  if (get_u32(is) != kFileVersion) throw Error(path + ": unsupported file version");
  ToyParser p;
  p.recipe_version = static_cast<int>(get_u32(is));
  p.feature_dim = static_cast<int>(get_u32(is));
  p.num_categories = static_cast<int>(get_u32(is));
  if (p.num_categories < 2 || p.num_categories > 256 || p.feature_dim <= 0 || p.feature_dim > 4096) {
    throw Error(path + ": implausible header");
  }
  p.weights.resize(static_cast<size_t>(p.feature_dim) * p.num_categories);
  p.bias.resize(p.num_categories);
  for (double& w : p.weights) w = get_f64(is);
  for (double& b : p.bias) b = get_f64(is);

  // Category names come from the manifest when present.
  p.labels.names.assign(p.num_categories, "");
  std::ifstream man(path + ".manifest.txt");
  std::string line;
  while (man && std::getline(man, line)) {
    if (line.rfind("category.", 0) != 0) continue;
    const auto eq = line.find('=');
    const int c = std::stoi(line.substr(9, eq - 9));
    if (c >= 0 && c < p.num_categories) p.labels.names[c] = line.substr(eq + 1);
  }
  const LabelSpace def = LabelSpace::default_space();
  for (int c = 0; c < p.num_categories; ++c) {
    if (p.labels.names[c].empty()) {
      p.labels.names[c] = c < def.size() ? def.names[c] : "part" + std::to_string(c);
    }
  }
  p.validate();
  return p;
}

RegionFeatures compute_features(const ViewData& view, const InstanceRegion& region, const LabelSpace& labels,
                                const std::array<int, kNumLimbs>& limb_parts) {
  if (!view.rgb || !view.depth || !view.calib || !region.skeleton) throw Error("compute_features: incomplete input");
  const CameraCalibration& calib = *view.calib;
  const Box& b = region.box;
  if (b.empty()) throw Error("empty region");
  if (b.x0 < 0 || b.y0 < 0 || b.x1 > calib.width || b.y1 > calib.height) throw Error("region outside image");
  const int num_parts = labels.num_parts();
  RegionFeatures rf;
  rf.instance_id = region.instance_id;
  rf.width = calib.width;
  rf.height = calib.height;
  rf.box = b;
  rf.dim = feature_dim(labels.size());

  std::array<Vec2, kNumJoints> jp;
  std::array<bool, kNumJoints> jvalid{};
  double dref = 0.0;
  int nref = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3 pc = calib.to_camera(region.skeleton->joints[j]);
    jvalid[j] = pc.z() > 0.0;
    if (!jvalid[j]) continue;
    jp[j] = Vec2(calib.fx * pc.x() / pc.z() + calib.cx, calib.fy * pc.y() / pc.z() + calib.cy);
    dref += pc.z();
    ++nref;
  }
  if (nref > 0) dref /= nref;
  const double inv_h = 1.0 / std::max(1, b.height());

  rf.pixels.reserve(b.area());
  rf.features.reserve(b.area() * rf.dim);
  for (int y = b.y0; y < b.y1; ++y) {
    for (int x = b.x0; x < b.x1; ++x) {
      rf.pixels.push_back(static_cast<size_t>(y) * calib.width + x);
      const Rgb& c = view.rgb->at(x, y);
      const double d = view.depth->at(x, y);
      rf.features.push_back(c.r / 255.0);
      rf.features.push_back(c.g / 255.0);
      rf.features.push_back(c.b / 255.0);
      rf.features.push_back((x - b.x0 + 0.5) / b.width());
      rf.features.push_back((y - b.y0 + 0.5) / b.height());
      const bool valid = d > 0.0;
      const double rel = valid ? std::clamp(d - dref, -1.0, 1.0) : 0.0;
      rf.features.push_back(valid ? 1.0 : 0.0);
      rf.features.push_back(rel);
      rf.features.push_back(std::abs(rel));
      int nearest = -1;
      double nearest_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < kNumJoints; ++j) {
        double dist = 2.0;
        if (jvalid[j]) {
          const double e = (jp[j] - Vec2(x, y)).norm();
          if (e < nearest_d) {
            nearest_d = e;
            nearest = j;
          }
          dist = std::min(2.0, e * inv_h);
        }
        rf.features.push_back(dist);
      }
      const int part = nearest >= 0 ? joint_part(nearest, limb_parts) : 0;
      for (int c = 1; c <= num_parts; ++c) rf.features.push_back(c == part ? 1.0 : 0.0);
    }
  }
  return rf;
}

PartProbMaps forward(const ToyParser& parser, const RegionFeatures& rf) {
  if (rf.dim != parser.feature_dim) throw Error("forward: feature dimension mismatch");
  if (rf.pixels.empty()) throw Error("empty region");
  const int k = parser.num_categories;
  PartProbMaps maps(rf.instance_id, rf.width, rf.height, k);
  for (size_t p = 0; p < maps.num_pixels(); ++p) maps.pixel_logits(p)[0] = kOutsideLogit;
  for (size_t i = 0; i < rf.pixels.size(); ++i) {
    double* z = maps.pixel_logits(rf.pixels[i]);
    const double* f = rf.features.data() + i * rf.dim;
    for (int c = 0; c < k; ++c) z[c] = parser.bias[c];
    for (int d = 0; d < rf.dim; ++d) {
      const double fd = f[d];
      if (fd == 0.0) continue;
      const double* w = parser.weights.data() + static_cast<size_t>(d) * k;
      for (int c = 0; c < k; ++c) z[c] += fd * w[c];
    }
  }
  return maps;
}

std::vector<PartProbMaps> forward(const ToyParser& parser, const ViewData& view,
                                  const std::vector<InstanceRegion>& regions) {
  std::vector<PartProbMaps> out;
  for (const auto& r : regions) out.push_back(forward(parser, compute_features(view, r, parser.labels)));
  return out;
}

void backward(const ToyParser& parser, const RegionFeatures& rf, const LogitGrad& grad_logits,
              std::vector<double>& grad_params) {
  const int k = parser.num_categories;
  if (grad_params.size() != parser.num_params()) grad_params.assign(parser.num_params(), 0.0);
  double* gw = grad_params.data();
  double* gb = grad_params.data() + parser.weights.size();
  for (size_t i = 0; i < rf.pixels.size(); ++i) {
    const double* g = grad_logits.data() + rf.pixels[i] * k;
    bool any = false;
    for (int c = 0; c < k; ++c) any = any || g[c] != 0.0;
    if (!any) continue;
    const double* f = rf.features.data() + i * rf.dim;
    for (int c = 0; c < k; ++c) gb[c] += g[c];
    for (int d = 0; d < rf.dim; ++d) {
      const double fd = f[d];
      if (fd == 0.0) continue;
      double* w = gw + static_cast<size_t>(d) * k;
      for (int c = 0; c < k; ++c) w[c] += fd * g[c];
    }
  }
}

InstanceMatching match_instances(const std::vector<PartProbMaps>& predicted, const std::vector<Mask>& ground_truth) {
  std::vector<Mask> pred_masks;
  for (const auto& m : predicted) pred_masks.push_back(binarize(part_union(m).prob, 0.5));
  std::vector<std::vector<double>> iou(pred_masks.size(), std::vector<double>(ground_truth.size(), 0.0));
  for (size_t a = 0; a < pred_masks.size(); ++a) {
    for (size_t b = 0; b < ground_truth.size(); ++b) iou[a][b] = mask_iou(pred_masks[a], ground_truth[b]);
  }
  InstanceMatching out;
  std::vector<bool> pred_used(pred_masks.size(), false), gt_used(ground_truth.size(), false);
  for (auto [a, b] : greedy_match(iou)) {
    out.pairs.emplace_back(a, b);
    out.iou.push_back(iou[a][b]);
    pred_used[a] = gt_used[b] = true;
  }
  for (size_t a = 0; a < pred_used.size(); ++a) {
    if (!pred_used[a]) out.unmatched_pred.push_back(static_cast<int>(a));
  }
  for (size_t b = 0; b < gt_used.size(); ++b) {
    if (!gt_used[b]) out.unmatched_gt.push_back(static_cast<int>(b));
  }
  return out;
}

Box pad_box(const Box& box, int padding, int width, int height) {
  if (box.empty()) return box;
  return Box{std::max(0, box.x0 - padding), std::max(0, box.y0 - padding), std::min(width, box.x1 + padding),
             std::min(height, box.y1 + padding)};
}

TrainingFrame frame_from_scene(const SyntheticScene& scene, const OutlierParams& outliers, int region_padding) {
  TrainingFrame frame;
  frame.skeletons = scene.skeletons;
  std::vector<FusionView> fusion;
  for (size_t v = 0; v < scene.cameras.size(); ++v) {
    TrainingView tv;
    tv.calib = scene.cameras[v];
    tv.rgb = scene.views[v].rgb;
    tv.depth = scene.views[v].depth;
    tv.gt_instance = scene.views[v].instance;
    tv.gt_part = scene.views[v].part;
    for (const auto& sk : scene.skeletons) {
      Mask m(tv.calib.width, tv.calib.height, 0);
      for (size_t i = 0; i < m.size(); ++i) m[i] = tv.gt_instance[i] == sk.instance_id;
      const Box b = bounding_box(m);
      if (b.empty()) continue;
      tv.regions[sk.instance_id] = pad_box(b, region_padding, tv.calib.width, tv.calib.height);
      tv.targets[sk.instance_id] = std::move(m);
    }
    frame.views.push_back(std::move(tv));
  }
  for (const auto& tv : frame.views) fusion.push_back(FusionView{&tv.depth, &tv.calib, &tv.rgb});
  frame.cloud = label_points_by_nearest_joint(fuse_and_clean(fusion, outliers), frame.skeletons);
  return frame;
}

void FinetuneConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("finetune: lambda outside [0,1]");
  if (!(beta > 0.0)) throw Error("finetune: beta must be positive");
  if (n_points < 1 || n_views < 1 || batch_size < 1 || max_epochs < 1) throw Error("finetune: counts must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("finetune: invalid learning rate");
}

namespace {

const Skeleton* find_skeleton(const std::vector<Skeleton>& skeletons, int id) {
  for (const auto& s : skeletons) {
    if (s.instance_id == id) return &s;
  }
  return nullptr;
}

// Region features for every (frame, view, instance), computed once.
struct FeatureBank {
  // [frame][view] -> list of (instance id, features)
  std::vector<std::vector<std::vector<RegionFeatures>>> regions;
};

FeatureBank build_bank(const ToyParser& parser, const std::vector<TrainingFrame>& frames, int threads) {
  FeatureBank bank;
  bank.regions.resize(frames.size());
  parallel_for(frames.size(), threads, [&](size_t f) {
    const TrainingFrame& fr = frames[f];
    bank.regions[f].resize(fr.views.size());
    for (size_t v = 0; v < fr.views.size(); ++v) {
      const TrainingView& tv = fr.views[v];
      const ViewData vd{&tv.rgb, &tv.depth, &tv.calib};
      for (const auto& [id, box] : tv.regions) {
        const Skeleton* sk = find_skeleton(fr.skeletons, id);
        if (!sk) throw Error("training frame: region without skeleton");
        bank.regions[f][v].push_back(compute_features(vd, InstanceRegion{id, box, sk}, parser.labels));
      }
    }
  });
  return bank;
}

struct ItemResult {
  std::vector<double> grad;
  MvigOutput stats;
};

ItemResult run_item(const ToyParser& parser, const TrainingFrame& frame,
                    const std::vector<std::vector<RegionFeatures>>& bank, const std::vector<int>& view_ids,
                    const FinetuneConfig& cfg, Objective mode, uint64_t item_seed) {
  MultiViewSample sample;
  sample.beta = cfg.beta;
  std::vector<std::vector<InstanceTarget>> targets;
  std::vector<std::vector<const RegionFeatures*>> feats;
  for (int v : view_ids) {
    const TrainingView& tv = frame.views[v];
    ViewObservation obs;
    obs.calib = tv.calib;
    obs.depth = tv.depth;
    std::vector<const RegionFeatures*> vf;
    std::vector<int> gt_ids;
    std::vector<Mask> gt_masks;
    for (const auto& [id, mask] : tv.targets) {
      gt_ids.push_back(id);
      gt_masks.push_back(mask);
    }
    for (const auto& rf : bank[v]) {
      obs.maps.push_back(forward(parser, rf));
      vf.push_back(&rf);
    }
    std::vector<InstanceTarget> vt(obs.maps.size());
    std::vector<bool> assigned(obs.maps.size(), false);
    if (!obs.maps.empty() && !gt_masks.empty()) {
      const InstanceMatching m = match_instances(obs.maps, gt_masks);
      for (auto [a, b] : m.pairs) {
        obs.match[gt_ids[b]] = a;
        vt[a] = gt_masks[b];
        assigned[a] = true;
      }
    }
    for (size_t a = 0; a < obs.maps.size(); ++a) {
      if (assigned[a]) continue;
      // Unmatched prediction: supervise with its own region's instance mask, and let the
      // multi-view terms treat it as that instance's map unless another map already is.
      const int id = obs.maps[a].instance_id;
      auto it = tv.targets.find(id);
      vt[a] = it != tv.targets.end() ? it->second : Mask(tv.calib.width, tv.calib.height, 0);
      if (it != tv.targets.end()) obs.match.emplace(id, static_cast<int>(a));
    }
    sample.views.push_back(std::move(obs));
    targets.push_back(std::move(vt));
    feats.push_back(std::move(vf));
  }
  if (mode == Objective::kMVIG && !frame.cloud.empty()) {
    std::mt19937_64 rng(item_seed);
    const size_t n = frame.cloud.size();
    const size_t take = std::min<size_t>(cfg.n_points, n);
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = 0; i < take; ++i) {
      const size_t j = i + static_cast<size_t>(rng() % (n - i));
      std::swap(idx[i], idx[j]);
      const CloudPoint& p = frame.cloud.points[idx[i]];
      sample.points.push_back(SampledPoint{p.position, p.instance_id.value_or(-1)});
    }
  }
  compute_sample_geometry(sample);
  LossOptions opts;
  opts.reduction = cfg.reduction;
  ItemResult res;
  res.stats = mvig_loss(sample, targets, cfg.lambda, mode, opts);
  res.grad.assign(parser.num_params(), 0.0);
  for (size_t i = 0; i < sample.views.size(); ++i) {
    for (size_t k = 0; k < sample.views[i].maps.size(); ++k) {
      backward(parser, *feats[i][k], res.stats.loss.gradient[i][k], res.grad);
    }
  }
  res.stats.loss.gradient.clear();
  return res;
}

}  // namespace

FinetuneResult finetune(const ToyParser& parser, const std::vector<TrainingFrame>& frames,
                        const FinetuneConfig& cfg, Objective mode) {
  cfg.validate();
  parser.validate();
  if (frames.empty()) throw Error("finetune: empty dataset");
  const FeatureBank bank = build_bank(parser, frames, cfg.threads);

  struct Item {
    size_t frame;
    std::vector<int> views;
  };
  std::vector<Item> items;
  for (size_t f = 0; f < frames.size(); ++f) {
    const int nv = static_cast<int>(frames[f].views.size());
    const int arc = std::min(cfg.n_views, nv);
    const int starts = arc < nv ? nv : 1;
    for (int s = 0; s < starts; ++s) {
      Item it{f, {}};
      for (int t = 0; t < arc; ++t) it.views.push_back((s + t) % nv);
      items.push_back(std::move(it));
    }
  }

  FinetuneResult result;
  result.parser = parser;
  std::vector<double> params = parser.params();
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(cfg.rng_seed, static_cast<uint64_t>(epoch)));
    std::vector<size_t> order(items.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    EpochStats stats;
    stats.epoch = epoch + 1;
    std::vector<MvigOutput> item_stats(items.size());
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<ItemResult> results(end - start);
      const ToyParser& current = result.parser;
      parallel_for(end - start, cfg.threads, [&](size_t b) {
        const size_t id = order[start + b];
        const Item& it = items[id];
        // Point samples are fixed per item so that a zero learning rate leaves the history flat.
        const uint64_t item_seed = mix_seed(cfg.rng_seed, id);
        results[b] = run_item(current, frames[it.frame], bank.regions[it.frame], it.views, cfg, mode, item_seed);
      });
      std::vector<double> grad(params.size(), 0.0);
      for (size_t b = 0; b < results.size(); ++b) {
        const ItemResult& r = results[b];
        if (!std::isfinite(r.stats.loss.value)) {
          throw Error("finetune diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
        }
        for (size_t i = 0; i < grad.size(); ++i) grad[i] += r.grad[i];
        item_stats[order[start + b]] = r.stats;
      }
      const double inv = 1.0 / static_cast<double>(results.size());
      for (size_t i = 0; i < params.size(); ++i) {
        params[i] -= cfg.learning_rate * grad[i] * inv;
        if (!std::isfinite(params[i])) throw Error("finetune diverged: non-finite weight at epoch " + std::to_string(epoch + 1));
      }
      result.parser.set_params(params);
    }
    // Summed in item order, independent of the visiting order.
    for (const auto& r : item_stats) {
      stats.fg += r.fg;
      stats.miou += r.miou;
      stats.identity += r.identity;
      stats.part += r.part;
      stats.total += r.loss.value;
    }
    const double inv_items = 1.0 / static_cast<double>(items.size());
    stats.fg *= inv_items;
    stats.miou *= inv_items;
    stats.identity *= inv_items;
    stats.part *= inv_items;
    stats.total *= inv_items;
    result.history.push_back(stats);
  }
  return result;
}

ToyParser pretrain(const ToyParser& init, const std::vector<TrainingFrame>& frames, const PretrainConfig& config,
                   std::vector<double>* loss_history) {
  init.validate();
  if (frames.empty()) throw Error("pretrain: empty dataset");
  const FeatureBank bank = build_bank(init, frames, config.threads);
  struct Job {
    size_t frame, view, region;
  };
  std::vector<Job> jobs;
  size_t total_pixels = 0;
  for (size_t f = 0; f < frames.size(); ++f) {
    for (size_t v = 0; v < bank.regions[f].size(); ++v) {
      if (frames[f].views[v].gt_part.empty()) throw Error("pretrain: ground-truth part maps required");
      for (size_t r = 0; r < bank.regions[f][v].size(); ++r) {
        jobs.push_back({f, v, r});
        total_pixels += bank.regions[f][v][r].pixels.size();
      }
    }
  }
  ToyParser parser = init;
  std::vector<double> params = parser.params();
  const int k = parser.num_categories;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::vector<double>> grads(jobs.size());
    std::vector<double> losses(jobs.size(), 0.0);
    parallel_for(jobs.size(), config.threads, [&](size_t j) {
      const RegionFeatures& rf = bank.regions[jobs[j].frame][jobs[j].view][jobs[j].region];
      const TrainingView& tv = frames[jobs[j].frame].views[jobs[j].view];
      const PartProbMaps maps = forward(parser, rf);
      LogitGrad g(maps.logits.size(), 0.0);
      std::vector<double> probs(k);
      double loss = 0.0;
      for (size_t px : rf.pixels) {
        const int label = tv.gt_instance[px] == rf.instance_id ? tv.gt_part[px] : 0;
        maps.softmax_at(px, probs.data());
        loss -= std::log(std::max(probs[label], 1e-12));
        for (int c = 0; c < k; ++c) g[px * k + c] = probs[c] - (c == label ? 1.0 : 0.0);
      }
      grads[j].assign(parser.num_params(), 0.0);
      backward(parser, rf, g, grads[j]);
      losses[j] = loss;
    });
    std::vector<double> grad(params.size(), 0.0);
    double loss = 0.0;
    for (size_t j = 0; j < jobs.size(); ++j) {
      for (size_t i = 0; i < grad.size(); ++i) grad[i] += grads[j][i];
      loss += losses[j];
    }
    const double inv = 1.0 / static_cast<double>(std::max<size_t>(1, total_pixels));
    for (size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * grad[i] * inv;
    parser.set_params(params);
    if (loss_history) loss_history->push_back(loss * inv);
  }
  return parser;
}

ViewPrediction predict_view(const ToyParser& parser, const TrainingView& view, const std::vector<Skeleton>& skeletons) {
  const ViewData vd{&view.rgb, &view.depth, &view.calib};
  const size_t npx = static_cast<size_t>(view.calib.width) * view.calib.height;
  ViewPrediction out;
  out.parts = LabelMap(view.calib.width, view.calib.height, 0);
  std::vector<PartUnion> unions;
  for (const auto& [id, box] : view.regions) {
    const Skeleton* sk = find_skeleton(skeletons, id);
    if (!sk) throw Error("predict_view: region without skeleton");
    const PartProbMaps maps = forward(parser, compute_features(vd, InstanceRegion{id, box, sk}, parser.labels));
    unions.push_back(part_union(maps));
    out.instance_ids.push_back(id);
  }
  std::vector<int> winner(npx, -1);
  for (size_t p = 0; p < npx; ++p) {
    double best = 0.5;
    for (size_t k = 0; k < unions.size(); ++k) {
      const double ph = unions[k].prob[p];
      if (ph >= best && (winner[p] < 0 || ph > unions[winner[p]].prob[p])) {
        winner[p] = static_cast<int>(k);
        best = ph;
      }
    }
    if (winner[p] >= 0) out.parts[p] = unions[winner[p]].argmax[p];
  }
  for (size_t k = 0; k < unions.size(); ++k) {
    InstanceParsing ip;
    ip.parts = LabelMap(view.calib.width, view.calib.height, 0);
    double sum = 0.0;
    size_t n = 0;
    for (size_t p = 0; p < npx; ++p) {
      if (winner[p] != static_cast<int>(k)) continue;
      ip.parts[p] = unions[k].argmax[p];
      sum += unions[k].prob[p];
      ++n;
    }
    ip.confidence = n ? std::clamp(sum / n, 0.0, 1.0) : 0.0;
    out.instances.push_back(std::move(ip));
  }
  return out;
}

std::vector<FrameEvaluation> evaluate_parser(const ToyParser& parser, const std::vector<TrainingFrame>& frames,
                                             int threads) {
  struct Job {
    size_t frame, view;
  };
  std::vector<Job> jobs;
  for (size_t f = 0; f < frames.size(); ++f) {
    for (size_t v = 0; v < frames[f].views.size(); ++v) jobs.push_back({f, v});
  }
  std::vector<FrameEvaluation> out(jobs.size());
  parallel_for(jobs.size(), threads, [&](size_t j) {
    const TrainingFrame& fr = frames[jobs[j].frame];
    const TrainingView& tv = fr.views[jobs[j].view];
    if (tv.gt_part.empty() || tv.gt_instance.empty()) throw Error("evaluate_parser: ground truth missing");
    const ViewPrediction pred = predict_view(parser, tv, fr.skeletons);
    FrameEvaluation e;
    e.pred_parts = pred.parts;
    e.gt_parts = tv.gt_part;
    e.pred_instances = pred.instances;
    std::vector<Box> boxes;
    for (const auto& sk : fr.skeletons) {
      LabelMap inst(tv.calib.width, tv.calib.height, 0);
      Mask m(tv.calib.width, tv.calib.height, 0);
      bool any = false;
      for (size_t p = 0; p < inst.size(); ++p) {
        if (tv.gt_instance[p] != sk.instance_id) continue;
        inst[p] = tv.gt_part[p];
        m[p] = 1;
        any = true;
      }
      if (!any) continue;
      boxes.push_back(bounding_box(m));
      e.gt_instances.push_back(std::move(inst));
    }
    e.overlap_degree = overlap_degree(boxes);
    out[j] = std::move(e);
  });
  return out;
}

}  // namespace mvparse
