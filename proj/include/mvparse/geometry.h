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

#ifndef MVPARSE_GEOMETRY_H_
#define MVPARSE_GEOMETRY_H_

#include <optional>
#include <string>
#include <vector>

#include "mvparse/common.h"

namespace mvparse {

// Pinhole camera with world->camera extrinsics: p_cam = rotation * p_world + translation.
// Camera frame follows the usual vision convention (x right, y down, z forward).
struct CameraCalibration {
  std::string view_id;
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  int width = 0, height = 0;

  // Throws Error if the record violates the pinhole invariants.
  void validate() const;
  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 to_world(const Vec3& cam) const { return rotation.transpose() * (cam - translation); }
  Vec3 center() const { return -rotation.transpose() * translation; }
};

// Camera at `eye` looking at `target`, with world `up` mapped to image-up.
CameraCalibration look_at(const std::string& view_id, const Vec3& eye, const Vec3& target,
                          const Vec3& up, double fx, double fy, int width, int height);

// Depth in meters; 0 marks an invalid sample.
using DepthMap = Grid<double>;

struct Projection {
  std::string view_id;
  double u = 0.0, v = 0.0;
  double z = 0.0;
  bool valid = false;
  // Pixel used for lookups when valid: nearest neighbour, halves round up, clamped to the image.
  int px = -1, py = -1;
};

struct CloudPoint {
  Vec3 position = Vec3::Zero();
  std::optional<Rgb> color;
  std::optional<int> instance_id;
  std::optional<int> part_id;
};

struct LabeledPointCloud {
  std::vector<CloudPoint> points;
  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Nearest-neighbour pixel index with round-half-up semantics.
int round_half_up(double x);

Projection project(const Vec3& point, const CameraCalibration& calib);

// World point seen at pixel (u, v) with camera-space depth `depth`.
Vec3 back_project(double u, double v, double depth, const CameraCalibration& calib);

struct FusionView {
  const DepthMap* depth = nullptr;
  const CameraCalibration* calib = nullptr;
  const RgbImage* rgb = nullptr;  // optional
};

struct OutlierParams {
  int k = 20;
  double std_ratio = 2.0;
  bool operator==(const OutlierParams&) const = default;
};

// Mean distance of every point to its k nearest neighbours (brute force for small clouds,
// a uniform hash grid otherwise).
std::vector<double> knn_mean_distances(const std::vector<Vec3>& points, int k);

// Statistical outlier removal; clouds with <= k points are returned unchanged.
LabeledPointCloud remove_statistical_outliers(const LabeledPointCloud& cloud, const OutlierParams& params);

// Back-projects every valid depth pixel of every view into one world-space cloud, then
// removes statistical outliers from the merged cloud.
LabeledPointCloud fuse_and_clean(const std::vector<FusionView>& views, const OutlierParams& params = {});

// Indices j whose projection is valid, lands on a valid depth sample, and lies within
// `beta` meters of that sample.
std::vector<size_t> visibility_filter(const std::vector<Vec3>& points, const DepthMap& depth_map,
                                      const CameraCalibration& calib, double beta);

}  // namespace mvparse

#endif  // MVPARSE_GEOMETRY_H_
