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

#ifndef MVPARSE_LOSSES_H_
#define MVPARSE_LOSSES_H_

#include <map>
#include <string>
#include <vector>

#include "mvparse/common.h"
#include "mvparse/geometry.h"

namespace mvparse {

// Per-instance part logits over categories 0..C (0 = background), pixel-major:
// logits[(y * width + x) * channels + c]. Probabilities are the per-pixel softmax.
struct PartProbMaps {
  int instance_id = 0;
  int width = 0;
  int height = 0;
  int channels = 0;  // C + 1
  std::vector<double> logits;

  PartProbMaps() = default;
  PartProbMaps(int instance, int w, int h, int num_categories)
      : instance_id(instance), width(w), height(h), channels(num_categories),
        logits(static_cast<size_t>(w) * h * num_categories, 0.0) {}

  int num_parts() const { return channels - 1; }
  size_t num_pixels() const { return static_cast<size_t>(width) * height; }
  const double* pixel_logits(size_t pixel) const { return logits.data() + pixel * channels; }
  double* pixel_logits(size_t pixel) { return logits.data() + pixel * channels; }
  void validate() const;

  // Softmax of one pixel into `out` (size channels).
  void softmax_at(size_t pixel, double* out) const;
  std::vector<double> probabilities() const;
};

// Binary target per instance: 1 on this human, 0 on background and other humans.
using InstanceTarget = Mask;

using LogitGrad = std::vector<double>;

struct LossOutput {
  double value = 0.0;
  // gradient[view][instance] matches the layout of the corresponding logits.
  std::vector<std::vector<LogitGrad>> gradient;
  std::vector<std::string> warnings;

  const LogitGrad& single() const { return gradient.at(0).at(0); }
};

enum class Reduction { kMean, kSum };

struct LossOptions {
  double eps = 1e-7;
  Reduction reduction = Reduction::kMean;
};

// Foreground probability p_h(x) = max over part channels; argmax ties go to the lowest index.
struct PartUnion {
  Grid<double> prob;
  Grid<int> argmax;  // 1..C
};
PartUnion part_union(const PartProbMaps& maps);

// Loss on a foreground-probability grid with its gradient with respect to that grid.
struct ProbLoss {
  double value = 0.0;
  std::vector<double> grad;
};

ProbLoss bce_on_prob(const Grid<double>& p_h, const InstanceTarget& target, const LossOptions& options = {});

// Binary Lovasz extension of the Jaccard loss, averaged over the two classes
// (background, human). Errors are sorted descending with ties broken by pixel index.
ProbLoss lovasz_on_prob(const Grid<double>& p_h, const InstanceTarget& target);

// Gradient of the Jaccard loss along a sorted ground-truth vector.
std::vector<double> lovasz_grad(const std::vector<uint8_t>& gt_sorted);

LossOutput foreground_bce(const PartProbMaps& maps, const InstanceTarget& target, const LossOptions& options = {});
LossOutput lovasz_miou(const PartProbMaps& maps, const InstanceTarget& target);

struct IgOutput {
  LossOutput loss;
  double fg = 0.0;
  double miou = 0.0;
};
// lambda * foreground_bce + (1 - lambda) * lovasz_miou.
IgOutput ig_loss(const PartProbMaps& maps, const InstanceTarget& target, double lambda,
                 const LossOptions& options = {});

struct SampledPoint {
  Vec3 position = Vec3::Zero();
  int instance_id = 0;
};

struct ViewObservation {
  CameraCalibration calib;
  DepthMap depth;
  std::vector<PartProbMaps> maps;   // predicted instances in this view
  std::map<int, int> match;         // ground-truth instance id -> index into maps
  std::vector<Projection> projections;
  std::vector<uint8_t> in_beta;     // visibility-filter membership per point
};

struct MultiViewSample {
  std::vector<SampledPoint> points;
  std::vector<ViewObservation> views;
  double beta = 0.30;
};

// Fills projections and visibility flags of every view from the points and depth maps.
void compute_sample_geometry(MultiViewSample& sample);

// Non-negative cross-entropy pulling the matched instance channel towards 1 and every other
// instance channel towards 0 at each valid projection.
LossOutput identity_loss(const MultiViewSample& sample, const LossOptions& options = {});

// Category 1..C with the largest summed probability across views where the point projects
// validly onto its matched instance; ties go to the lowest index.
int aggregate_part_label(const MultiViewSample& sample, size_t point_index);

// Categorical cross-entropy between the aggregated label (held constant) and each view's
// prediction, restricted to visibility-filtered points.
LossOutput part_loss(const MultiViewSample& sample, const LossOptions& options = {});

enum class Objective { kIG, kMVIG };

struct MvigOutput {
  LossOutput loss;
  double fg = 0.0;        // averaged over views and instances
  double miou = 0.0;
  double ig = 0.0;
  double identity = 0.0;
  double part = 0.0;
};

// IG term averaged over every (view, instance) pair with a target; for kMVIG the identity
// and part terms are added unweighted. targets[view][instance] aligns with the maps.
MvigOutput mvig_loss(const MultiViewSample& sample, const std::vector<std::vector<InstanceTarget>>& targets,
                     double lambda, Objective objective = Objective::kMVIG, const LossOptions& options = {});

// Shape-matched zero gradient for a sample.
std::vector<std::vector<LogitGrad>> zero_gradient(const MultiViewSample& sample);

}  // namespace mvparse

#endif  // MVPARSE_LOSSES_H_
