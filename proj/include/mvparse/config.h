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

#ifndef MVPARSE_CONFIG_H_
#define MVPARSE_CONFIG_H_

#include <cstdint>
#include <string>

#include "mvparse/annotation.h"
#include "mvparse/metrics.h"
#include "mvparse/toyparser.h"

namespace mvparse {

struct SynthSettings {
  int people = 3;
  int views = 10;
  int frames = 5;
  int width = 96;
  int height = 96;
  double overlap_target = 0.0;
  double overlap_tolerance = 0.1;
  double ring_radius = 3.5;
  double camera_height = 1.3;
  double horizontal_fov_deg = 60.0;
  bool operator==(const SynthSettings&) const = default;
};

struct Paths {
  std::string dataset;
  std::string output;
  std::string weights;
  bool operator==(const Paths&) const = default;
};

// Everything a run can be configured with. Loaded from JSON with every key optional but
// unknown keys rejected; command-line flags override loaded values.
struct RunConfig {
  uint64_t rng_seed = 0;
  int threads = 1;
  SynthSettings synth;
  AnnotationParams annotation;
  std::string segmenter = "baseline";  // or "external:<command>"
  FinetuneConfig finetune;             // rng_seed/threads mirror the top level
  PretrainConfig pretrain;
  LabelSpace labels = LabelSpace::default_space();
  bool report_foreground_iou = true;
  Paths paths;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

}  // namespace mvparse

#endif  // MVPARSE_CONFIG_H_
