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

#include "mvparse/scene.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "mvparse/metrics.h"

namespace mvparse {

namespace {

constexpr std::array<const char*, kNumJoints> kJointNames = {
    "Head", "Neck", "LShoulder", "RShoulder", "LElbow", "RElbow", "LWrist",
    "RWrist", "LHip", "RHip", "LKnee", "RKnee", "LAnkle", "RAnkle"};

// Base body radii in meters, per limb slot.
constexpr std::array<double, kNumLimbs> kLimbRadius = {0.11, 0.15, 0.055, 0.055, 0.045, 0.045,
                                                       0.075, 0.075, 0.055, 0.055};

constexpr std::array<Rgb, 6> kPalette = {Rgb{205, 60, 55},  Rgb{55, 165, 70},  Rgb{60, 95, 210},
                                         Rgb{215, 185, 45}, Rgb{165, 70, 190}, Rgb{50, 185, 195}};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // Built from raw engine output so results do not depend on the standard library's
  // distribution implementation.
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

Vec3 rotate_z(const Vec3& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec3(c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z());
}

Skeleton sample_skeleton(int instance_id, const Vec2& ground, double yaw, std::mt19937_64& rng) {
  const double s = uniform(rng, 0.92, 1.08);
  std::array<Vec3, kNumJoints> j;
  // Local frame: +x towards the person's left, +y forward, +z up.
  j[kHead] = Vec3(0, 0, 1.62);
  j[kNeck] = Vec3(0, 0, 1.45);
  j[kLShoulder] = Vec3(0.19, 0, 1.42);
  j[kRShoulder] = Vec3(-0.19, 0, 1.42);
  j[kLHip] = Vec3(0.10, 0, 0.92);
  j[kRHip] = Vec3(-0.10, 0, 0.92);
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    const int sh = side == 0 ? kLShoulder : kRShoulder;
    const int el = side == 0 ? kLElbow : kRElbow;
    const int wr = side == 0 ? kLWrist : kRWrist;
    const double abduct = uniform(rng, 0.15, 0.6);
    const double swing = uniform(rng, -0.4, 0.4);
    const double bend = uniform(rng, 0.0, 0.9);
    const Vec3 upper(sign * std::sin(abduct), std::sin(swing) * std::cos(abduct), -std::cos(abduct) * std::cos(swing));
    j[el] = j[sh] + 0.30 * upper.normalized();
    const Vec3 lower = (upper.normalized() + Vec3(0, std::sin(bend), std::sin(bend) * 0.5)).normalized();
    j[wr] = j[el] + 0.27 * lower;

    const int hip = side == 0 ? kLHip : kRHip;
    const int knee = side == 0 ? kLKnee : kRKnee;
    const int ankle = side == 0 ? kLAnkle : kRAnkle;
    const double stride = uniform(rng, -0.3, 0.3);
    const double spread = uniform(rng, 0.0, 0.12);
    const Vec3 thigh(sign * spread, std::sin(stride), -std::cos(stride));
    j[knee] = j[hip] + 0.42 * thigh.normalized();
    const double knee_bend = uniform(rng, 0.0, 0.35);
    const Vec3 shin(sign * spread * 0.5, std::sin(stride - knee_bend), -std::cos(stride - knee_bend));
    j[ankle] = j[knee] + 0.42 * shin.normalized();
  }
  // Keep the lowest ankle on the floor.
  const double lowest = std::min(j[kLAnkle].z(), j[kRAnkle].z());
  Skeleton sk;
  sk.instance_id = instance_id;
  for (int k = 0; k < kNumJoints; ++k) {
    Vec3 p = j[k];
    p.z() += 0.08 - lowest;
    p *= s;
    sk.joints[k] = rotate_z(p, yaw) + Vec3(ground.x(), ground.y(), 0.0);
  }
  return sk;
}

double min_body_distance(const Skeleton& a, const Skeleton& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : a.joints) {
    for (const auto& q : b.joints) best = std::min(best, (p - q).norm());
  }
  return best;
}

}  // namespace

const char* joint_name(int joint) {
  if (joint < 0 || joint >= kNumJoints) return "?";
  return kJointNames[joint];
}

int joint_from_name(const std::string& name) {
  for (int k = 0; k < kNumJoints; ++k) {
    if (name == kJointNames[k]) return k;
  }
  return -1;
}

std::array<int, kNumLimbs> default_limb_parts() { return {1, 2, 3, 3, 4, 4, 5, 5, 6, 6}; }

int joint_part(int joint, const std::array<int, kNumLimbs>& limb_parts) {
  switch (joint) {
    case kHead: return limb_parts[kLimbHead];
    case kNeck: return limb_parts[kLimbTorso];
    case kLShoulder: return limb_parts[kLimbLUpperArm];
    case kRShoulder: return limb_parts[kLimbRUpperArm];
    case kLElbow: return limb_parts[kLimbLLowerArm];
    case kRElbow: return limb_parts[kLimbRLowerArm];
    case kLWrist: return limb_parts[kLimbLLowerArm];
    case kRWrist: return limb_parts[kLimbRLowerArm];
    case kLHip: return limb_parts[kLimbLUpperLeg];
    case kRHip: return limb_parts[kLimbRUpperLeg];
    case kLKnee: return limb_parts[kLimbLLowerLeg];
    case kRKnee: return limb_parts[kLimbRLowerLeg];
    case kLAnkle: return limb_parts[kLimbLLowerLeg];
    case kRAnkle: return limb_parts[kLimbRLowerLeg];
    default: return 0;
  }
}

std::optional<double> intersect_capsule(const Vec3& origin, const Vec3& dir, const Capsule& cap) {
  const double r2 = cap.radius * cap.radius;
  auto sphere = [&](const Vec3& center) -> std::optional<double> {
    const Vec3 oc = origin - center;
    const double b = dir.dot(oc);
    const double c = oc.squaredNorm() - r2;
    const double h = b * b - c;
    if (h < 0.0) return std::nullopt;
    const double sq = std::sqrt(h);
    double t = -b - sq;
    if (t <= 0.0) t = -b + sq;
    if (t <= 0.0) return std::nullopt;
    return t;
  };
  const Vec3 ba = cap.b - cap.a;
  const double baba = ba.squaredNorm();
  if (baba < 1e-18) return sphere(cap.a);

  const Vec3 oa = origin - cap.a;
  const double bard = ba.dot(dir);
  const double baoa = ba.dot(oa);
  const double rdoa = dir.dot(oa);
  const double oaoa = oa.squaredNorm();
  const double a = baba - bard * bard;
  const double b = baba * rdoa - baoa * bard;
  const double c = baba * oaoa - baoa * baoa - r2 * baba;
  std::optional<double> best;
  if (a > 1e-15) {
    const double h = b * b - a * c;
    if (h >= 0.0) {
      const double t = (-b - std::sqrt(h)) / a;
      const double y = baoa + t * bard;
      if (t > 0.0 && y > 0.0 && y < baba) best = t;
    }
  }
  for (const Vec3* end : {&cap.a, &cap.b}) {
    auto t = sphere(*end);
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

Vec3 capsule_normal(const Vec3& p, const Capsule& cap) {
  const Vec3 ab = cap.b - cap.a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - cap.a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec3 n = p - (cap.a + t * ab);
  const double norm = n.norm();
  return norm > 0 ? Vec3(n / norm) : Vec3(0, 0, 1);
}

std::vector<CameraCalibration> ring_cameras(int n_views, int width, int height, double ring_radius,
                                            double camera_height, double horizontal_fov_deg, const Vec3& target) {
  if (n_views < 1) throw Error("ring_cameras: need at least one view");
  const double fov = horizontal_fov_deg * std::numbers::pi / 180.0;
  const double f = 0.5 * width / std::tan(0.5 * fov);
  std::vector<CameraCalibration> cams;
  for (int i = 0; i < n_views; ++i) {
    const double angle = 2.0 * std::numbers::pi * i / n_views;
    const Vec3 eye(ring_radius * std::cos(angle), ring_radius * std::sin(angle), camera_height);
    char id[16];
    std::snprintf(id, sizeof(id), "%02d", i);
    cams.push_back(look_at(id, eye, target, Vec3(0, 0, 1), f, f, width, height));
  }
  return cams;
}

std::vector<Capsule> body_capsules(const Skeleton& sk, double radius_scale, const std::array<int, kNumLimbs>& parts) {
  const auto& j = sk.joints;
  const Vec3 pelvis = 0.5 * (j[kLHip] + j[kRHip]);
  const std::array<std::pair<Vec3, Vec3>, kNumLimbs> ends = {{
      {j[kHead], j[kHead]},
      {j[kNeck], pelvis},
      {j[kLShoulder], j[kLElbow]},
      {j[kRShoulder], j[kRElbow]},
      {j[kLElbow], j[kLWrist]},
      {j[kRElbow], j[kRWrist]},
      {j[kLHip], j[kLKnee]},
      {j[kRHip], j[kRKnee]},
      {j[kLKnee], j[kLAnkle]},
      {j[kRKnee], j[kRAnkle]},
  }};
  std::vector<Capsule> out;
  for (int l = 0; l < kNumLimbs; ++l) {
    out.push_back(Capsule{ends[l].first, ends[l].second, kLimbRadius[l] * radius_scale, sk.instance_id, parts[l]});
  }
  return out;
}

namespace {

Vec3 pixel_ray(const CameraCalibration& calib, double u, double v) {
  const Vec3 dc((u - calib.cx) / calib.fx, (v - calib.cy) / calib.fy, 1.0);
  return calib.rotation.transpose() * dc;  // not normalized: t along it is camera depth
}

}  // namespace

RenderedView render_view(const std::vector<Capsule>& capsules, const std::vector<Rgb>& albedo,
                         const CameraCalibration& calib) {
  RenderedView out;
  out.rgb = RgbImage(calib.width, calib.height);
  out.depth = DepthMap(calib.width, calib.height, 0.0);
  out.instance = LabelMap(calib.width, calib.height, -1);
  out.part = LabelMap(calib.width, calib.height, 0);
  const Vec3 origin = calib.center();
  for (int y = 0; y < calib.height; ++y) {
    for (int x = 0; x < calib.width; ++x) {
      const Vec3 ray = pixel_ray(calib, x, y);
      const double len = ray.norm();
      const Vec3 dir = ray / len;
      double best_t = std::numeric_limits<double>::infinity();
      int best = -1;
      for (size_t c = 0; c < capsules.size(); ++c) {
        auto t = intersect_capsule(origin, dir, capsules[c]);
        if (t && *t < best_t) {
          best_t = *t;
          best = static_cast<int>(c);
        }
      }
      if (best < 0) continue;
      const Capsule& cap = capsules[best];
      const Vec3 hit = origin + best_t * dir;
      out.depth.at(x, y) = best_t / len;
      out.instance.at(x, y) = cap.instance_id;
      out.part.at(x, y) = cap.part_id;
      const double shade = 0.7 + 0.3 * std::abs(capsule_normal(hit, cap).dot(dir));
      const Rgb base = cap.instance_id >= 0 && cap.instance_id < static_cast<int>(albedo.size())
                           ? albedo[cap.instance_id]
                           : Rgb{128, 128, 128};
      auto ch = [&](uint8_t v) { return static_cast<uint8_t>(std::clamp(std::lround(v * shade), 0L, 255L)); };
      out.rgb.at(x, y) = Rgb{ch(base.r), ch(base.g), ch(base.b)};
    }
  }
  return out;
}

RenderedView render_view(const SyntheticScene& scene, const CameraCalibration& calib) {
  return render_view(scene.capsules, scene.albedo, calib);
}

double instance_depth_at(const std::vector<Capsule>& capsules, int instance_id, const CameraCalibration& calib,
                         double u, double v) {
  const Vec3 ray = pixel_ray(calib, u, v);
  const double len = ray.norm();
  const Vec3 dir = ray / len;
  const Vec3 origin = calib.center();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& cap : capsules) {
    if (cap.instance_id != instance_id) continue;
    if (auto t = intersect_capsule(origin, dir, cap)) best = std::min(best, *t);
  }
  return std::isfinite(best) ? best / len : 0.0;
}

std::vector<Box> instance_boxes(const LabelMap& instance, int n_instances) {
  std::vector<Box> boxes;
  for (int k = 0; k < n_instances; ++k) {
    Mask m(instance.width, instance.height, 0);
    for (size_t i = 0; i < instance.size(); ++i) m[i] = instance[i] == k;
    boxes.push_back(bounding_box(m));
  }
  return boxes;
}

SyntheticScene generate_scene(const SceneConfig& config) {
  if (config.n_people < 1) throw Error("generate_scene: n_people must be >= 1");
  if (config.n_views < 1) throw Error("generate_scene: n_views must be >= 1");
  if (config.width < 8 || config.height < 8) throw Error("generate_scene: image too small");
  if (config.overlap_target < 0.0 || config.overlap_target > 1.0) throw Error("generate_scene: overlap_target outside [0,1]");

  std::mt19937_64 rng(config.seed);
  const Vec3 target(0.0, 0.0, 1.0);
  SyntheticScene scene;
  scene.seed = config.seed;
  scene.cameras = ring_cameras(config.n_views, config.width, config.height, config.ring_radius,
                               config.camera_height, config.horizontal_fov_deg, target);
  const CameraCalibration& ref = scene.cameras[0];
  const Vec3 eye = ref.center();
  const Vec2 to_center = Vec2(-eye.x(), -eye.y()).normalized();
  const Vec2 lateral(-to_center.y(), to_center.x());
  const double placement_radius = 0.45 * config.ring_radius;
  const bool enforce_overlap = config.n_people >= 2;

  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    std::vector<Skeleton> skeletons;
    std::vector<double> radius_scale;
    std::vector<Vec2> grounds;
    // The first pair is aimed at the target overlap along the reference view; any
    // further people are scattered.
    const Vec2 first(uniform(rng, -0.35, 0.35), uniform(rng, -0.35, 0.35));
    grounds.push_back(first);
    if (config.n_people >= 2) {
      const double t = config.overlap_target;
      const double width_m = 0.6;
      const double shift = width_m * (1.0 - t) / (1.0 + t) * uniform(rng, 0.6, 1.4);
      const double depth_gap = uniform(rng, 0.7, 1.3) * (uniform(rng, 0, 1) < 0.5 ? -1.0 : 1.0);
      const double side = uniform(rng, 0, 1) < 0.5 ? -1.0 : 1.0;
      grounds.push_back(first + depth_gap * to_center + side * shift * lateral);
    }
    for (int p = 2; p < config.n_people; ++p) {
      grounds.push_back(Vec2(uniform(rng, -placement_radius, placement_radius),
                             uniform(rng, -placement_radius, placement_radius)));
    }
    for (int p = 0; p < config.n_people; ++p) {
      const double yaw = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      skeletons.push_back(sample_skeleton(p, grounds[p], yaw, rng));
      radius_scale.push_back(uniform(rng, 0.9, 1.1));
    }

    bool ok = true;
    for (int p = 0; p < config.n_people && ok; ++p) {
      if (grounds[p].norm() > placement_radius) ok = false;
      for (int q = 0; q < p && ok; ++q) {
        if (min_body_distance(skeletons[p], skeletons[q]) < 0.5) ok = false;
      }
    }
    if (!ok) continue;

    std::vector<Capsule> capsules;
    for (int p = 0; p < config.n_people; ++p) {
      auto c = body_capsules(skeletons[p], radius_scale[p], config.limb_parts);
      capsules.insert(capsules.end(), c.begin(), c.end());
    }
    std::vector<Rgb> albedo;
    for (int p = 0; p < config.n_people; ++p) {
      Rgb base = kPalette[p % kPalette.size()];
      auto jitter = [&](uint8_t v) {
        return static_cast<uint8_t>(std::clamp(static_cast<int>(v) + static_cast<int>(uniform(rng, -12, 12)), 0, 255));
      };
      albedo.push_back(Rgb{jitter(base.r), jitter(base.g), jitter(base.b)});
    }

    if (enforce_overlap) {
      const RenderedView ref_view = render_view(capsules, albedo, ref);
      const auto boxes = instance_boxes(ref_view.instance, config.n_people);
      if (std::any_of(boxes.begin(), boxes.end(), [](const Box& b) { return b.empty(); })) continue;
      const double degree = overlap_degree(boxes);
      if (std::abs(degree - config.overlap_target) > config.overlap_tolerance) continue;
    }

    scene.skeletons = std::move(skeletons);
    scene.capsules = std::move(capsules);
    scene.albedo = std::move(albedo);
    for (const auto& cam : scene.cameras) scene.views.push_back(render_view(scene, cam));
    return scene;
  }
  throw Error("placement failed");
}

}  // namespace mvparse
