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

#ifndef MVPARSE_TESTS_TEST_UTIL_H_
#define MVPARSE_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mvparse/annotation.h"
#include "mvparse/geometry.h"
#include "mvparse/losses.h"
#include "mvparse/scene.h"

namespace mvparse::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// fx=fy=500, cx=320, cy=240, identity extrinsics, 640x480.
inline CameraCalibration basic_camera() {
  CameraCalibration c;
  c.view_id = "00";
  c.fx = c.fy = 500.0;
  c.cx = 320.0;
  c.cy = 240.0;
  c.width = 640;
  c.height = 480;
  return c;
}

inline CameraCalibration small_camera(int w, int h, double f = 20.0) {
  CameraCalibration c;
  c.view_id = "00";
  c.fx = c.fy = f;
  c.cx = (w - 1) / 2.0;
  c.cy = (h - 1) / 2.0;
  c.width = w;
  c.height = h;
  return c;
}

inline PartProbMaps random_maps(std::mt19937_64& rng, int instance, int w, int h, int channels, double scale = 2.0) {
  PartProbMaps m(instance, w, h, channels);
  for (double& z : m.logits) z = uniform(rng, -scale, scale);
  return m;
}

inline Mask random_mask(std::mt19937_64& rng, int w, int h, double p = 0.5) {
  Mask m(w, h, 0);
  for (auto& v : m.data) v = uniform(rng, 0, 1) < p;
  return m;
}

// Jaccard loss of the two classes by set counting, averaged.
inline double jaccard_oracle(const std::vector<int>& pred, const std::vector<int>& gt) {
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    int inter = 0, uni = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
      inter += pred[i] == c && gt[i] == c;
      uni += pred[i] == c || gt[i] == c;
    }
    total += uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / uni;
  }
  return 0.5 * total;
}

// Random two-view, two-person sample on 8x8 views with a mix of visible and hidden points.
struct LossFixture {
  MultiViewSample sample;
  std::vector<std::vector<InstanceTarget>> targets;
};

inline LossFixture random_loss_fixture(std::mt19937_64& rng, int n_views = 2, int n_points = 12, int channels = 4) {
  LossFixture f;
  f.sample.beta = 0.3;
  for (int v = 0; v < n_views; ++v) {
    const double th = 2.0 * M_PI * v / n_views + uniform(rng, -0.2, 0.2);
    ViewObservation obs;
    obs.calib = look_at(std::to_string(v), Vec3(2.5 * std::cos(th), 2.5 * std::sin(th), 0.2), Vec3(0, 0, 0),
                        Vec3(0, 0, 1), 8, 8, 8, 8);
    obs.depth = DepthMap(8, 8, 0.0);
    for (auto& d : obs.depth.data) d = uniform(rng, 0, 1) < 0.1 ? 0.0 : uniform(rng, 2.0, 3.0);
    for (int k = 0; k < 2; ++k) obs.maps.push_back(random_maps(rng, k, 8, 8, channels));
    if (v % 2 == 0) {
      obs.match = {{0, 0}, {1, 1}};
    } else {
      obs.match = {{0, 1}, {1, 0}};
    }
    f.sample.views.push_back(std::move(obs));
    f.targets.push_back({random_mask(rng, 8, 8), random_mask(rng, 8, 8)});
  }
  for (int j = 0; j < n_points; ++j) {
    f.sample.points.push_back(
        SampledPoint{Vec3(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)), j % 2});
  }
  compute_sample_geometry(f.sample);
  return f;
}

inline double capsule_sdf(const Vec3& p, const Capsule& c) {
  const Vec3 ab = c.b - c.a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - c.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (c.a + t * ab)).norm() - c.radius;
}

// First sign change of the distance function along the ray, refined by bisection.
inline std::optional<double> march(const Vec3& o, const Vec3& d, const Capsule& c, double t_max) {
  const int steps = 20000;
  double prev_t = 0.0, prev = capsule_sdf(o, c);
  if (prev <= 0) return std::nullopt;  // origin inside: not used by the tests
  for (int i = 1; i <= steps; ++i) {
    const double t = t_max * i / steps;
    const double s = capsule_sdf(o + t * d, c);
    if (s <= 0) {
      double lo = prev_t, hi = t;
      for (int k = 0; k < 80; ++k) {
        const double mid = 0.5 * (lo + hi);
        (capsule_sdf(o + mid * d, c) > 0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev_t = t;
    prev = s;
  }
  return std::nullopt;
}

// Cloud fused from every rendered view and labeled by nearest joint.
inline LabeledPointCloud scene_cloud(const SyntheticScene& scene) {
  std::vector<FusionView> fusion;
  for (size_t v = 0; v < scene.views.size(); ++v) {
    fusion.push_back(FusionView{&scene.views[v].depth, &scene.cameras[v], &scene.views[v].rgb});
  }
  return label_points_by_nearest_joint(fuse_and_clean(fusion), scene.skeletons);
}

}  // namespace mvparse::testing

#endif  // MVPARSE_TESTS_TEST_UTIL_H_
