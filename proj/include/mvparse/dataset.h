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

#ifndef MVPARSE_DATASET_H_
#define MVPARSE_DATASET_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvparse/geometry.h"
#include "mvparse/scene.h"
#include "mvparse/toyparser.h"

namespace mvparse {

// On-disk layout under a dataset root:
//   calibration.json                           array of pinhole records
//   views/<id>/rgb_<frame>.png                 8-bit RGB
//   views/<id>/depth_<frame>.png               16-bit, millimeters, 0 = invalid
//   views/<id>/gt_instance_<frame>.png         8-bit, instance id + 1, 0 = background
//   views/<id>/gt_part_<frame>.png             8-bit part label
//   skeletons/<frame>.json                     named joints per instance, meters
//   masks/<id>/<frame>/instance_<k>.png        annotation output, 0/255
//   masks/<id>/<frame>/provenance.json
std::string frame_name(int index);

void write_calibration(const std::string& path, const std::vector<CameraCalibration>& cameras);
std::vector<CameraCalibration> read_calibration(const std::string& path);

void write_skeletons(const std::string& path, const std::vector<Skeleton>& skeletons);
std::vector<Skeleton> read_skeletons(const std::string& path);

// Writes one rendered frame (images, ground truth and skeletons). Calibration is written
// separately because it is shared by every frame.
void write_scene_frame(const std::string& root, const std::string& frame, const SyntheticScene& scene);

// Frame names found under skeletons/, sorted.
std::vector<std::string> list_frames(const std::string& root);

struct DatasetView {
  CameraCalibration calib;
  RgbImage rgb;
  DepthMap depth;
  std::optional<LabelMap> gt_instance;  // -1 background
  std::optional<LabelMap> gt_part;
};

struct DatasetFrame {
  std::string name;
  std::vector<Skeleton> skeletons;
  std::vector<DatasetView> views;
};

DatasetFrame read_frame(const std::string& root, const std::vector<CameraCalibration>& cameras,
                        const std::string& frame);

std::string mask_dir(const std::string& root, const std::string& view_id, const std::string& frame);

enum class MaskSource {
  kGroundTruth,  // targets from the ground-truth instance maps
  kAnnotated,    // targets from masks/
  kAuto,         // annotated when present for the frame, else ground truth
};

// Builds a training frame: targets from `source`, frozen regions from the ground-truth
// instance boxes (annotated masks when no ground truth exists), cloud fused from every
// view and labeled by nearest joint.
TrainingFrame to_training_frame(const std::string& root, const DatasetFrame& frame, MaskSource source,
                                const OutlierParams& outliers, int region_padding = 2);

}  // namespace mvparse

#endif  // MVPARSE_DATASET_H_
