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

#include "mvparse/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <Eigen/Geometry>

namespace mvparse {

Box bounding_box(const Mask& mask) {
  Box box{mask.width, mask.height, 0, 0};
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
    }
  }
  if (box.empty()) return Box{};
  return box;
}

void CameraCalibration::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error("calibration " + view_id + ": focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error("calibration " + view_id + ": image size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error("calibration " + view_id + ": principal point outside image");
  }
  if (!rotation.allFinite() || !translation.allFinite()) throw Error("calibration " + view_id + ": non-finite extrinsics");
  const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw Error("calibration " + view_id + ": rotation is not a proper rotation");
  }
}

CameraCalibration look_at(const std::string& view_id, const Vec3& eye, const Vec3& target, const Vec3& up,
                          double fx, double fy, int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) throw Error("look_at: up vector parallel to viewing direction");
  right.normalize();
  const Vec3 down = forward.cross(right);
  CameraCalibration calib;
  calib.view_id = view_id;
  calib.fx = fx;
  calib.fy = fy;
  calib.cx = 0.5 * (width - 1);
  calib.cy = 0.5 * (height - 1);
  calib.width = width;
  calib.height = height;
  calib.rotation.row(0) = right.transpose();
  calib.rotation.row(1) = down.transpose();
  calib.rotation.row(2) = forward.transpose();
  // Re-orthonormalize so the validation tolerance holds after arithmetic noise.
  Eigen::JacobiSVD<Mat3> svd(calib.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  calib.rotation = svd.matrixU() * svd.matrixV().transpose();
  calib.translation = -calib.rotation * eye;
  return calib;
}

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

Projection project(const Vec3& point, const CameraCalibration& calib) {
  if (!point.allFinite()) throw Error("invalid point");
  Projection p;
  p.view_id = calib.view_id;
  const Vec3 pc = calib.to_camera(point);
  p.z = pc.z();
  if (pc.z() <= 0.0) return p;
  p.u = calib.fx * pc.x() / pc.z() + calib.cx;
  p.v = calib.fy * pc.y() / pc.z() + calib.cy;
  p.valid = p.u >= 0.0 && p.u < calib.width && p.v >= 0.0 && p.v < calib.height;
  if (p.valid) {
    p.px = std::min(round_half_up(p.u), calib.width - 1);
    p.py = std::min(round_half_up(p.v), calib.height - 1);
  }
  return p;
}

Vec3 back_project(double u, double v, double depth, const CameraCalibration& calib) {
  if (!(depth > 0.0) || !std::isfinite(depth)) throw Error("invalid depth");
  if (!(u >= 0.0 && u < calib.width && v >= 0.0 && v < calib.height)) throw Error("pixel outside image");
  const Vec3 pc((u - calib.cx) * depth / calib.fx, (v - calib.cy) * depth / calib.fy, depth);
  return calib.to_world(pc);
}

namespace {

struct CellKey {
  int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  size_t operator()(const CellKey& k) const {
    return static_cast<size_t>(k.x * 73856093LL ^ k.y * 19349663LL ^ k.z * 83492791LL);
  }
};

std::vector<double> knn_brute(const std::vector<Vec3>& pts, int k) {
  const size_t n = pts.size();
  std::vector<double> out(n, 0.0);
  std::vector<double> d;
  for (size_t i = 0; i < n; ++i) {
    d.clear();
    for (size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back((pts[i] - pts[j]).norm());
    }
    const size_t kk = std::min<size_t>(k, d.size());
    std::partial_sort(d.begin(), d.begin() + kk, d.end());
    double s = 0.0;
    for (size_t t = 0; t < kk; ++t) s += d[t];
    out[i] = kk ? s / kk : 0.0;
  }
  return out;
}

}  // namespace

std::vector<double> knn_mean_distances(const std::vector<Vec3>& points, int k) {
  if (k < 1) throw Error("knn: k must be >= 1");
  const size_t n = points.size();
  if (n <= 2048) return knn_brute(points, k);

  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 ext = (hi - lo).cwiseMax(1e-6);
  // Surfaces dominate, so size cells for a 2D density with ~k points per cell.
  const double area = std::max({ext.x() * ext.y(), ext.y() * ext.z(), ext.x() * ext.z()});
  const double cell = std::max(1e-6, std::sqrt(area * k / static_cast<double>(n)));

  std::unordered_map<CellKey, std::vector<uint32_t>, CellHash> grid;
  auto key_of = [&](const Vec3& p) {
    return CellKey{static_cast<int64_t>(std::floor((p.x() - lo.x()) / cell)),
                   static_cast<int64_t>(std::floor((p.y() - lo.y()) / cell)),
                   static_cast<int64_t>(std::floor((p.z() - lo.z()) / cell))};
  };
  for (size_t i = 0; i < n; ++i) grid[key_of(points[i])].push_back(static_cast<uint32_t>(i));
  const int64_t max_ring = static_cast<int64_t>(std::ceil(ext.maxCoeff() / cell)) + 1;

  std::vector<double> out(n, 0.0);
  std::vector<double> best;
  for (size_t i = 0; i < n; ++i) {
    const CellKey c = key_of(points[i]);
    best.clear();
    bool done = false;
    for (int64_t r = 0; r <= std::min<int64_t>(max_ring, 6); ++r) {
      for (int64_t dx = -r; dx <= r; ++dx) {
        for (int64_t dy = -r; dy <= r; ++dy) {
          for (int64_t dz = -r; dz <= r; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
            auto it = grid.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
            if (it == grid.end()) continue;
            for (uint32_t j : it->second) {
              if (j != i) best.push_back((points[i] - points[j]).norm());
            }
          }
        }
      }
      if (static_cast<int>(best.size()) >= k) {
        std::nth_element(best.begin(), best.begin() + (k - 1), best.end());
        // Every point within r*cell of p has been visited.
        if (best[k - 1] <= r * cell) {
          done = true;
          break;
        }
      }
    }
    if (!done) {
      // Isolated point: fall back to a linear scan.
      best.clear();
      for (size_t j = 0; j < n; ++j) {
        if (j != i) best.push_back((points[i] - points[j]).norm());
      }
    }
    const size_t kk = std::min<size_t>(k, best.size());
    std::partial_sort(best.begin(), best.begin() + kk, best.end());
    double s = 0.0;
    for (size_t t = 0; t < kk; ++t) s += best[t];
    out[i] = kk ? s / kk : 0.0;
  }
  return out;
}

LabeledPointCloud remove_statistical_outliers(const LabeledPointCloud& cloud, const OutlierParams& params) {
  if (params.k < 1) throw Error("outlier removal: k must be >= 1");
  if (cloud.size() <= static_cast<size_t>(params.k)) return cloud;
  std::vector<Vec3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points) pts.push_back(p.position);
  const std::vector<double> dist = knn_mean_distances(pts, params.k);

  // Order-independent statistics so the result does not depend on point order.
  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
  std::vector<double> sq(sorted.size());
  for (size_t i = 0; i < sorted.size(); ++i) sq[i] = (sorted[i] - mean) * (sorted[i] - mean);
  std::sort(sq.begin(), sq.end());
  const double var = std::accumulate(sq.begin(), sq.end(), 0.0) / sq.size();
  const double threshold = mean + params.std_ratio * std::sqrt(var);

  LabeledPointCloud out;
  for (size_t i = 0; i < cloud.size(); ++i) {
    if (dist[i] <= threshold) out.points.push_back(cloud.points[i]);
  }
  return out;
}

LabeledPointCloud fuse_and_clean(const std::vector<FusionView>& views, const OutlierParams& params) {
  if (views.empty()) throw Error("fuse_and_clean: no views");
  if (params.k < 1) throw Error("fuse_and_clean: k must be >= 1");
  LabeledPointCloud merged;
  for (const auto& view : views) {
    if (!view.depth || !view.calib) throw Error("fuse_and_clean: view missing depth or calibration");
    const DepthMap& depth = *view.depth;
    const CameraCalibration& calib = *view.calib;
    if (depth.width != calib.width || depth.height != calib.height) {
      throw Error("fuse_and_clean: depth map size does not match calibration " + calib.view_id);
    }
    for (int y = 0; y < depth.height; ++y) {
      for (int x = 0; x < depth.width; ++x) {
        const double d = depth.at(x, y);
        if (!(d > 0.0)) continue;
        CloudPoint p;
        p.position = back_project(x, y, d, calib);
        if (view.rgb) p.color = view.rgb->at(x, y);
        merged.points.push_back(p);
      }
    }
  }
  return remove_statistical_outliers(merged, params);
}

std::vector<size_t> visibility_filter(const std::vector<Vec3>& points, const DepthMap& depth_map,
                                      const CameraCalibration& calib, double beta) {
  if (!(beta > 0.0)) throw Error("visibility_filter: beta must be positive");
  std::vector<size_t> kept;
  for (size_t j = 0; j < points.size(); ++j) {
    const Projection p = project(points[j], calib);
    if (!p.valid) continue;
    const double d = depth_map.at(p.px, p.py);
    if (d > 0.0 && std::abs(p.z - d) <= beta) kept.push_back(j);
  }
  return kept;
}

}  // namespace mvparse
