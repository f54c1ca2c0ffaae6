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

#ifndef MVPARSE_ANNOTATION_H_
#define MVPARSE_ANNOTATION_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvparse/common.h"
#include "mvparse/geometry.h"
#include "mvparse/scene.h"

namespace mvparse {

enum class SeedSource { kClusterCenter, kKnee, kAnkle };
const char* seed_source_name(SeedSource source);

struct Seed {
  int x = 0;
  int y = 0;
  SeedSource source = SeedSource::kClusterCenter;
  bool operator==(const Seed&) const = default;
};

struct SeedSet {
  int instance_id = 0;
  std::vector<Seed> seeds;
  bool empty_warning = false;  // instance had no projections
};

struct PixelCoord {
  int x = 0;
  int y = 0;
  bool operator==(const PixelCoord&) const = default;
};

struct SeedParams {
  double density = 50.0;  // projected points per seed
  int k_min = 3;
  int k_max = 10;
  int max_iterations = 50;
  uint64_t kmeans_seed = 0;
  bool operator==(const SeedParams&) const = default;
};

// clamp(round(n / density), k_min, k_max), never more than n.
int seed_cluster_count(size_t n, const SeedParams& params);

// Lloyd iterations from a k-means++ initialization; returns the member indices of each
// cluster. Deterministic for a fixed seed.
std::vector<std::vector<size_t>> kmeans_clusters(std::span<const PixelCoord> pixels, int k, uint64_t seed,
                                                 int max_iterations);

// Cluster-center seeds (snapped to the nearest member pixel) plus knee and ankle seeds
// whose projections pass the visibility filter.
SeedSet extract_seeds(std::span<const PixelCoord> projections, const Skeleton& skeleton,
                      const CameraCalibration& calib, const DepthMap& depth, const SeedParams& params, double beta);

struct SegmentResult {
  Mask mask;
  std::vector<std::string> warnings;
};

// A model that turns positive point prompts (and optionally a prior mask) into a mask.
class PromptableSegmenter {
 public:
  virtual ~PromptableSegmenter() = default;
  virtual SegmentResult segment(const RgbImage& image, const DepthMap& depth, std::span<const Seed> seeds,
                                const Mask* prior) = 0;
};

struct RegionGrowParams {
  double tau_color = 30.0;  // RGB L2 between 4-neighbours
  double tau_depth = 0.10;  // meters between 4-neighbours
  int tau_margin = 5;       // prior-mask dilation radius, pixels
  bool operator==(const RegionGrowParams&) const = default;
};

// Seeded region growing over colour and depth continuity.
SegmentResult region_grow(const RgbImage& image, const DepthMap& depth, std::span<const Seed> seeds,
                          const Mask* prior, const RegionGrowParams& params);

class BaselineSegmenter : public PromptableSegmenter {
 public:
  explicit BaselineSegmenter(RegionGrowParams params = {}) : params_(params) {}
  SegmentResult segment(const RgbImage& image, const DepthMap& depth, std::span<const Seed> seeds,
                        const Mask* prior) override {
    return region_grow(image, depth, seeds, prior, params_);
  }

 private:
  RegionGrowParams params_;
};

Mask dilate(const Mask& mask, int radius);

// Every point takes the instance of its globally nearest joint; ties go to the lowest id.
LabeledPointCloud label_points_by_nearest_joint(const LabeledPointCloud& cloud, const std::vector<Skeleton>& skeletons);

struct AnnotationParams {
  SeedParams seeds;
  double beta = 0.30;
  RegionGrowParams region;
  OutlierParams outliers;
  bool operator==(const AnnotationParams&) const = default;
};

struct ViewInput {
  const RgbImage* rgb = nullptr;
  const DepthMap* depth = nullptr;
  const CameraCalibration* calib = nullptr;
};

struct ViewAnnotation {
  std::map<int, Mask> masks;     // instance id -> mask, pairwise disjoint
  std::vector<int> order;        // processing order, farthest first
  std::map<int, double> mean_depth;
  std::vector<SeedSet> seeds;
  std::vector<std::string> warnings;
};

// Segments instances far to near, letting nearer instances overwrite earlier claims, then
// refines every mask once with itself as the prior and resolves overlaps again.
ViewAnnotation annotate_view(const LabeledPointCloud& cloud, const std::vector<Skeleton>& skeletons,
                             const ViewInput& view, PromptableSegmenter& segmenter, const AnnotationParams& params);

}  // namespace mvparse

#endif  // MVPARSE_ANNOTATION_H_
