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

#ifndef MVPARSE_SCENE_H_
#define MVPARSE_SCENE_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvparse/common.h"
#include "mvparse/geometry.h"

namespace mvparse {

enum Joint : int {
  kHead = 0,
  kNeck,
  kLShoulder,
  kRShoulder,
  kLElbow,
  kRElbow,
  kLWrist,
  kRWrist,
  kLHip,
  kRHip,
  kLKnee,
  kRKnee,
  kLAnkle,
  kRAnkle,
  kNumJoints
};

const char* joint_name(int joint);
// Returns -1 for unknown names.
int joint_from_name(const std::string& name);

struct Skeleton {
  int instance_id = 0;
  std::array<Vec3, kNumJoints> joints;
};

// Limb slots of the stick figure, in capsule order: head sphere first, then nine limbs.
enum Limb : int {
  kLimbHead = 0,
  kLimbTorso,
  kLimbLUpperArm,
  kLimbRUpperArm,
  kLimbLLowerArm,
  kLimbRLowerArm,
  kLimbLUpperLeg,
  kLimbRUpperLeg,
  kLimbLLowerLeg,
  kLimbRLowerLeg,
  kNumLimbs
};

// Default part label per limb: head, torso, upper-arm, lower-arm, upper-leg, lower-leg.
std::array<int, kNumLimbs> default_limb_parts();

// Part label attached to a joint's nearest limb; used for per-joint features.
int joint_part(int joint, const std::array<int, kNumLimbs>& limb_parts);

// Segment a-b swept by `radius`; a == b gives a sphere.
struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
  int instance_id = 0;
  int part_id = 0;
};

// Smallest t > 0 with origin + t*dir on the capsule surface (dir unit length).
std::optional<double> intersect_capsule(const Vec3& origin, const Vec3& dir, const Capsule& capsule);
// Outward unit normal at a surface point.
Vec3 capsule_normal(const Vec3& point, const Capsule& capsule);

struct RenderedView {
  RgbImage rgb;
  DepthMap depth;
  LabelMap instance;  // -1 background
  LabelMap part;      // 0 background
};

struct SceneConfig {
  int n_people = 2;
  int n_views = 10;
  double overlap_target = 0.0;
  double overlap_tolerance = 0.1;
  int width = 96;
  int height = 96;
  uint64_t seed = 0;
  double ring_radius = 3.5;
  double camera_height = 1.3;
  double horizontal_fov_deg = 60.0;
  int max_retries = 1000;
  std::array<int, kNumLimbs> limb_parts = default_limb_parts();
};

struct SyntheticScene {
  std::vector<Skeleton> skeletons;
  std::vector<Capsule> capsules;
  std::vector<Rgb> albedo;  // per instance
  std::vector<CameraCalibration> cameras;
  std::vector<RenderedView> views;
  uint64_t seed = 0;
};

// Cameras evenly spaced on a horizontal ring, all facing `target`.
std::vector<CameraCalibration> ring_cameras(int n_views, int width, int height, double ring_radius,
                                            double camera_height, double horizontal_fov_deg, const Vec3& target);

// The ten capsules (head sphere + nine limbs) of one person.
std::vector<Capsule> body_capsules(const Skeleton& skeleton, double radius_scale,
                                   const std::array<int, kNumLimbs>& limb_parts);

// Analytic ray casting of every pixel; nearest hit wins.
RenderedView render_view(const std::vector<Capsule>& capsules, const std::vector<Rgb>& albedo,
                         const CameraCalibration& calib);
RenderedView render_view(const SyntheticScene& scene, const CameraCalibration& calib);

// Camera-space depth of the nearest surface of one instance along the ray through pixel
// (x, y), ignoring every other instance; 0 when the ray misses it.
double instance_depth_at(const std::vector<Capsule>& capsules, int instance_id, const CameraCalibration& calib,
                         double u, double v);

// Bounding boxes of the visible instance masks; empty boxes for invisible instances.
std::vector<Box> instance_boxes(const LabelMap& instance, int n_instances);

// Places people by rejection sampling so that the reference view (view 0) overlap degree
// lands within tolerance of the target, then renders every view.
SyntheticScene generate_scene(const SceneConfig& config);

}  // namespace mvparse

#endif  // MVPARSE_SCENE_H_
