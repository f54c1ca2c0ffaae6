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

#ifndef MVPARSE_TOYPARSER_H_
#define MVPARSE_TOYPARSER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvparse/common.h"
#include "mvparse/geometry.h"
#include "mvparse/losses.h"
#include "mvparse/metrics.h"
#include "mvparse/scene.h"

namespace mvparse {

// Feature recipe v1, per in-region pixel:
//   rgb / 255 (3), region-normalized u, v (2), depth-valid flag, depth relative to the
//   instance's mean joint depth (clipped to [-1, 1]), its magnitude, distance to each of
//   the 14 projected joints over the region height (clipped to 2), and a one-hot of the
//   nearest joint's part (C).
constexpr int kFeatureRecipeVersion = 1;
int feature_dim(int num_categories);

// Logit given to background outside an instance region; parts get 0 there.
constexpr double kOutsideLogit = 30.0;

// Per-instance linear softmax: logits = features * weights + bias.
struct ToyParser {
  int feature_dim = 0;
  int num_categories = 0;        // C + 1
  int recipe_version = kFeatureRecipeVersion;
  std::vector<double> weights;   // feature_dim x num_categories, row-major
  std::vector<double> bias;      // num_categories
  LabelSpace labels;

  static ToyParser zeros(const LabelSpace& labels);
  size_t num_params() const { return weights.size() + bias.size(); }
  std::vector<double> params() const;
  void set_params(const std::vector<double>& flat);
  void validate() const;
  bool operator==(const ToyParser&) const = default;
};

// Binary weights file (little-endian doubles behind a versioned header) plus a text
// manifest at `path + ".manifest.txt"`.
void save_parser(const ToyParser& parser, const std::string& path);
ToyParser load_parser(const std::string& path);

struct InstanceRegion {
  int instance_id = 0;
  Box box;
  const Skeleton* skeleton = nullptr;
};

struct ViewData {
  const RgbImage* rgb = nullptr;
  const DepthMap* depth = nullptr;
  const CameraCalibration* calib = nullptr;
};

// Features of every pixel inside one instance region.
struct RegionFeatures {
  int instance_id = 0;
  int width = 0, height = 0;
  Box box;
  std::vector<size_t> pixels;    // image pixel indices inside the box
  std::vector<double> features;  // pixels.size() x dim
  int dim = 0;
};

RegionFeatures compute_features(const ViewData& view, const InstanceRegion& region, const LabelSpace& labels,
                                const std::array<int, kNumLimbs>& limb_parts = default_limb_parts());

PartProbMaps forward(const ToyParser& parser, const RegionFeatures& features);
std::vector<PartProbMaps> forward(const ToyParser& parser, const ViewData& view,
                                  const std::vector<InstanceRegion>& regions);

// Adds d(loss)/d(params) given d(loss)/d(logits) of one forward output.
void backward(const ToyParser& parser, const RegionFeatures& features, const LogitGrad& grad_logits,
              std::vector<double>& grad_params);

struct InstanceMatching {
  std::vector<std::pair<int, int>> pairs;  // (predicted index, ground-truth index)
  std::vector<double> iou;                 // per pair
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;
};

// Greedy descending-IoU one-to-one matching of binarized (p_h >= 0.5) predictions.
InstanceMatching match_instances(const std::vector<PartProbMaps>& predicted, const std::vector<Mask>& ground_truth);

// Training view: images, per-instance target masks and frozen detection regions.
struct TrainingView {
  CameraCalibration calib;
  RgbImage rgb;
  DepthMap depth;
  std::map<int, Mask> targets;  // instance id -> human mask used as weak supervision
  std::map<int, Box> regions;   // instance id -> region
  LabelMap gt_instance;         // optional (-1 background)
  LabelMap gt_part;             // optional
};

struct TrainingFrame {
  std::vector<TrainingView> views;
  std::vector<Skeleton> skeletons;
  LabeledPointCloud cloud;      // labeled by nearest joint
};

// Ground-truth targets and regions from a rendered scene; the cloud is fused from every
// view and labeled by nearest joint.
TrainingFrame frame_from_scene(const SyntheticScene& scene, const OutlierParams& outliers = {},
                               int region_padding = 2);

Box pad_box(const Box& box, int padding, int width, int height);

struct FinetuneConfig {
  double lambda = 0.5;
  double beta = 0.30;
  int n_points = 50;
  int n_views = 4;
  double learning_rate = 3e-4;
  int batch_size = 8;
  int max_epochs = 20;
  uint64_t rng_seed = 0;
  // Losses summed over pixels and points for the update, matching the learning rate scale.
  Reduction reduction = Reduction::kSum;
  int threads = 1;
  bool operator==(const FinetuneConfig&) const = default;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double fg = 0.0, miou = 0.0, identity = 0.0, part = 0.0, total = 0.0;
};

struct FinetuneResult {
  ToyParser parser;
  std::vector<EpochStats> history;
};

// Plain SGD on the IG or MVIG objective. Each batch item is one frame seen from a
// contiguous arc of `n_views` ring cameras with `n_points` freshly sampled labeled points.
FinetuneResult finetune(const ToyParser& parser, const std::vector<TrainingFrame>& frames,
                        const FinetuneConfig& config, Objective mode);

struct PretrainConfig {
  double learning_rate = 1.0;
  int epochs = 300;
  int threads = 1;
  bool operator==(const PretrainConfig&) const = default;
};

// Full-batch gradient descent on per-pixel part cross-entropy inside each region using the
// ground-truth part maps (stand-in for a parser pre-trained with fine labels).
ToyParser pretrain(const ToyParser& init, const std::vector<TrainingFrame>& frames, const PretrainConfig& config,
                   std::vector<double>* loss_history = nullptr);

// Merged per-image prediction: instance p_h >= 0.5, overlaps go to the larger p_h, parts
// from the winning instance's argmax. Confidence is the mean p_h over the kept pixels.
struct ViewPrediction {
  LabelMap parts;
  std::vector<int> instance_ids;
  std::vector<InstanceParsing> instances;
};
ViewPrediction predict_view(const ToyParser& parser, const TrainingView& view, const std::vector<Skeleton>& skeletons);

// Scores every view of every frame (ground truth must be present).
std::vector<FrameEvaluation> evaluate_parser(const ToyParser& parser, const std::vector<TrainingFrame>& frames,
                                             int threads = 1);

}  // namespace mvparse

#endif  // MVPARSE_TOYPARSER_H_
