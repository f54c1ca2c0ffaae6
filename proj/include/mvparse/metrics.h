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

#ifndef MVPARSE_METRICS_H_
#define MVPARSE_METRICS_H_

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mvparse/common.h"

namespace mvparse {

// Ordered category names (index 0 is background), categories ignored by the `ignore`
// mIoU variant, and a source->target table used by the `mapped` variant.
struct LabelSpace {
  std::vector<std::string> names;
  std::set<int> ignore;
  std::map<int, int> mapping;

  int size() const { return static_cast<int>(names.size()); }
  int num_parts() const { return size() - 1; }
  int id_of(const std::string& name) const;  // -1 if absent
  void validate() const;
  int map(int label) const;

  static LabelSpace default_space();
  bool operator==(const LabelSpace&) const = default;
};

double mask_iou(const Mask& a, const Mask& b);
double box_iou(const Box& a, const Box& b);

// Maximum pairwise box IoU; 0 with fewer than two boxes.
double overlap_degree(const std::vector<Box>& boxes);

struct OverlapPartition {
  std::vector<double> thresholds = {0.20, 0.40, 0.60, 0.80};
  std::vector<double> degrees;                 // per image
  std::vector<std::vector<size_t>> subsets;    // per threshold, image indices

  std::string subset_name(size_t t) const;     // "O20", ...
};

OverlapPartition partition_by_overlap(const std::vector<double>& degrees,
                                      const std::vector<double>& thresholds = {0.20, 0.40, 0.60, 0.80});

enum class MiouVariant { kFull, kIgnore, kMapped };

// Dataset-level mean IoU over the categories present in the ground truth. Intersections
// and unions are accumulated over all images before dividing.
double semantic_miou(std::span<const LabelMap> pred, std::span<const LabelMap> gt, const LabelSpace& labels,
                     MiouVariant variant);

Mask binarize(const Grid<double>& prob, double threshold = 0.5);

// Two-class mean IoU (background, human union), accumulated over the dataset.
// `fg_only`, when given, receives the human-class IoU alone.
double human_miou_global(std::span<const Mask> pred_fg, std::span<const Mask> gt_fg, double* fg_only = nullptr);

// Greedy one-to-one matching by descending score; only positive scores are matched.
// Ties are broken by lower row index, then lower column index.
std::vector<std::pair<int, int>> greedy_match(const std::vector<std::vector<double>>& scores);

// Per image, predicted and ground-truth instance masks are matched greedily by IoU; the
// result averages matched IoU over all ground-truth instances (unmatched count as 0).
double human_miou_instance(const std::vector<std::vector<Mask>>& pred, const std::vector<std::vector<Mask>>& gt);

struct Accuracies {
  double pixel = 0.0;
  double mean = 0.0;
};
Accuracies accuracies(std::span<const LabelMap> pred, std::span<const LabelMap> gt, int num_categories);

// One predicted person: part labels on its pixels (0 elsewhere) and a confidence.
struct InstanceParsing {
  LabelMap parts;
  double confidence = 1.0;
};

// Mean IoU over part categories (1..num_categories-1) present in either map; 0 if none.
double mean_part_iou(const LabelMap& pred, const LabelMap& gt, int num_categories);

// Average precision over part-IoU thresholds 0.1..0.9, averaged. Predictions are visited in
// descending confidence; each picks its best ground-truth instance in the image and counts
// as a true positive when that IoU exceeds the threshold and the instance is still free.
double ap_p_vol(const std::vector<std::vector<InstanceParsing>>& pred, const std::vector<std::vector<LabelMap>>& gt,
                int num_categories, std::vector<std::string>* warnings = nullptr);

// All-point interpolated area under a precision/recall curve.
double average_precision(const std::vector<bool>& is_tp_in_rank_order, size_t num_gt);

struct MetricsReport {
  std::string subset = "all";
  size_t num_images = 0;
  double miou_p = 0.0;
  double miou_p_m = 0.0;
  double miou_p_ig = 0.0;
  double miou_h_i = 0.0;
  double miou_h = 0.0;
  double miou_h_fg = 0.0;  // human-class IoU alone, reported alongside mIoU_h
  double acc_pixel = 0.0;
  double acc_mean = 0.0;
  double ap_p_vol = 0.0;
};

// Everything needed to score one image.
struct FrameEvaluation {
  LabelMap pred_parts;                        // merged semantic prediction
  LabelMap gt_parts;
  std::vector<InstanceParsing> pred_instances;
  std::vector<LabelMap> gt_instances;         // per-instance part maps
  double overlap_degree = 0.0;
};

MetricsReport evaluate_frames(std::span<const FrameEvaluation> frames, const LabelSpace& labels,
                              std::vector<std::string>* warnings = nullptr);

// Reports for "all" followed by each overlap subset.
std::vector<MetricsReport> evaluate_by_overlap(std::span<const FrameEvaluation> frames, const LabelSpace& labels,
                                               std::vector<std::string>* warnings = nullptr);

// `include_fg` adds the foreground-only human IoU next to mIoU_h.
std::string metrics_json(const std::vector<MetricsReport>& reports, bool include_fg = true);
std::string metrics_table(const std::vector<MetricsReport>& reports, bool include_fg = true);

}  // namespace mvparse

#endif  // MVPARSE_METRICS_H_
