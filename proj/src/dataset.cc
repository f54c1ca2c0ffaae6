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

#include "mvparse/dataset.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "mvparse/annotation.h"
#include "mvparse/image_io.h"

namespace mvparse {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  try {
    return ordered_json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os << text;
  if (!os) throw Error("failed writing " + path);
}

ordered_json vec3_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec3(const ordered_json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw Error(what + ": expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

std::string view_dir(const std::string& root, const std::string& view_id) {
  return (fs::path(root) / "views" / view_id).string();
}

}  // namespace

std::string frame_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", index);
  return buf;
}

void write_calibration(const std::string& path, const std::vector<CameraCalibration>& cameras) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : cameras) {
    c.validate();
    ordered_json rot = ordered_json::array();
    for (int r = 0; r < 3; ++r) rot.push_back(ordered_json::array({c.rotation(r, 0), c.rotation(r, 1), c.rotation(r, 2)}));
    arr.push_back(ordered_json{{"view_id", c.view_id}, {"width", c.width},   {"height", c.height},
                               {"fx", c.fx},           {"fy", c.fy},         {"cx", c.cx},
                               {"cy", c.cy},           {"rotation", rot},    {"translation", vec3_json(c.translation)}});
  }
  write_text(path, arr.dump(2) + "\n");
}

std::vector<CameraCalibration> read_calibration(const std::string& path) {
  const ordered_json j = read_json(path);
  if (!j.is_array() || j.empty()) throw Error(path + ": expected a non-empty array of cameras");
  std::vector<CameraCalibration> out;
  try {
    for (const auto& r : j) {
      CameraCalibration c;
      c.view_id = r.at("view_id").get<std::string>();
      c.width = r.at("width").get<int>();
      c.height = r.at("height").get<int>();
      c.fx = r.at("fx").get<double>();
      c.fy = r.at("fy").get<double>();
      c.cx = r.at("cx").get<double>();
      c.cy = r.at("cy").get<double>();
      const auto& rot = r.at("rotation");
      if (!rot.is_array() || rot.size() != 3) throw Error(path + ": rotation must be 3x3");
      for (int i = 0; i < 3; ++i) c.rotation.row(i) = json_vec3(rot[i], path).transpose();
      c.translation = json_vec3(r.at("translation"), path);
      c.validate();
      out.push_back(c);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return out;
}

void write_skeletons(const std::string& path, const std::vector<Skeleton>& skeletons) {
  ordered_json inst = ordered_json::array();
  for (const auto& s : skeletons) {
    ordered_json joints;
    for (int j = 0; j < kNumJoints; ++j) joints[joint_name(j)] = vec3_json(s.joints[j]);
    inst.push_back(ordered_json{{"instance_id", s.instance_id}, {"joints", joints}});
  }
  write_text(path, ordered_json{{"units", "meters"}, {"instances", inst}}.dump(2) + "\n");
}

std::vector<Skeleton> read_skeletons(const std::string& path) {
  const ordered_json j = read_json(path);
  std::vector<Skeleton> out;
  try {
    for (const auto& r : j.at("instances")) {
      Skeleton s;
      s.instance_id = r.at("instance_id").get<int>();
      std::vector<bool> seen(kNumJoints, false);
      for (const auto& [name, v] : r.at("joints").items()) {
        const int jt = joint_from_name(name);
        s.joints[jt] = json_vec3(v, path);
        seen[jt] = true;
      }
      if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw Error(path + ": missing joints");
      out.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return out;
}

void write_scene_frame(const std::string& root, const std::string& frame, const SyntheticScene& scene) {
  fs::create_directories(fs::path(root) / "skeletons");
  for (size_t v = 0; v < scene.cameras.size(); ++v) {
    const std::string dir = view_dir(root, scene.cameras[v].view_id);
    fs::create_directories(dir);
    const RenderedView& rv = scene.views[v];
    write_rgb_png(dir + "/rgb_" + frame + ".png", rv.rgb);
    write_depth_png(dir + "/depth_" + frame + ".png", rv.depth);
    Grid<uint8_t> inst(rv.instance.width, rv.instance.height, 0), part(rv.part.width, rv.part.height, 0);
    for (size_t i = 0; i < inst.size(); ++i) {
      if (rv.instance[i] >= 255) throw Error("too many instances for the 8-bit instance map");
      inst[i] = static_cast<uint8_t>(rv.instance[i] + 1);
      part[i] = static_cast<uint8_t>(rv.part[i]);
    }
    write_gray8_png(dir + "/gt_instance_" + frame + ".png", inst);
    write_gray8_png(dir + "/gt_part_" + frame + ".png", part);
  }
  write_skeletons((fs::path(root) / "skeletons" / (frame + ".json")).string(), scene.skeletons);
}

std::vector<std::string> list_frames(const std::string& root) {
  const fs::path dir = fs::path(root) / "skeletons";
  if (!fs::is_directory(dir)) throw Error("missing skeleton directory " + dir.string());
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetFrame read_frame(const std::string& root, const std::vector<CameraCalibration>& cameras,
                        const std::string& frame) {
  DatasetFrame out;
  out.name = frame;
  out.skeletons = read_skeletons((fs::path(root) / "skeletons" / (frame + ".json")).string());
  for (const auto& c : cameras) {
    const std::string dir = view_dir(root, c.view_id);
    DatasetView v;
    v.calib = c;
    v.rgb = read_rgb_png(dir + "/rgb_" + frame + ".png");
    v.depth = read_depth_png(dir + "/depth_" + frame + ".png");
    if (v.rgb.width != c.width || v.rgb.height != c.height || !v.depth.same_shape(v.rgb)) {
      throw Error(dir + ": image size does not match calibration for frame " + frame);
    }
    const std::string gi = dir + "/gt_instance_" + frame + ".png", gp = dir + "/gt_part_" + frame + ".png";
    if (fs::exists(gi) && fs::exists(gp)) {
      const Grid<uint8_t> inst = read_gray8_png(gi), part = read_gray8_png(gp);
      if (!inst.same_shape(v.rgb) || !part.same_shape(v.rgb)) throw Error(dir + ": ground-truth size mismatch");
      LabelMap i(c.width, c.height, -1), p(c.width, c.height, 0);
      for (size_t k = 0; k < i.size(); ++k) {
        i[k] = static_cast<int>(inst[k]) - 1;
        p[k] = part[k];
      }
      v.gt_instance = std::move(i);
      v.gt_part = std::move(p);
    }
    out.views.push_back(std::move(v));
  }
  return out;
}

std::string mask_dir(const std::string& root, const std::string& view_id, const std::string& frame) {
  return (fs::path(root) / "masks" / view_id / frame).string();
}

TrainingFrame to_training_frame(const std::string& root, const DatasetFrame& frame, MaskSource source,
                                const OutlierParams& outliers, int region_padding) {
  TrainingFrame tf;
  tf.skeletons = frame.skeletons;
  for (const auto& dv : frame.views) {
    TrainingView tv;
    tv.calib = dv.calib;
    tv.rgb = dv.rgb;
    tv.depth = dv.depth;
    if (dv.gt_instance) tv.gt_instance = *dv.gt_instance;
    if (dv.gt_part) tv.gt_part = *dv.gt_part;

    std::map<int, Mask> gt;
    if (dv.gt_instance) {
      for (const auto& s : tf.skeletons) {
        Mask m(tv.calib.width, tv.calib.height, 0);
        bool any = false;
        for (size_t i = 0; i < m.size(); ++i) {
          m[i] = (*dv.gt_instance)[i] == s.instance_id;
          any = any || m[i];
        }
        if (any) gt[s.instance_id] = std::move(m);
      }
    }
    std::map<int, Mask> annotated;
    const std::string mdir = mask_dir(root, tv.calib.view_id, frame.name);
    const bool have_annotated = fs::is_directory(mdir);
    if (source == MaskSource::kAnnotated && !have_annotated) throw Error("missing annotation masks in " + mdir);
    if (source != MaskSource::kGroundTruth && have_annotated) {
      for (const auto& s : tf.skeletons) {
        const std::string p = mdir + "/instance_" + std::to_string(s.instance_id) + ".png";
        if (!fs::exists(p)) continue;
        Mask m = read_mask_png(p);
        if (!m.same_shape(tv.rgb)) throw Error(p + ": size mismatch");
        if (!bounding_box(m).empty()) annotated[s.instance_id] = std::move(m);
      }
    }
    const bool use_annotated = source != MaskSource::kGroundTruth && have_annotated;
    if (!use_annotated && !dv.gt_instance) throw Error("frame " + frame.name + ": no masks for view " + tv.calib.view_id);
    tv.targets = use_annotated ? annotated : gt;
    const std::map<int, Mask>& region_src = dv.gt_instance ? gt : annotated;
    for (const auto& [id, m] : region_src) {
      tv.regions[id] = pad_box(bounding_box(m), region_padding, tv.calib.width, tv.calib.height);
    }
    tf.views.push_back(std::move(tv));
  }
  std::vector<FusionView> fusion;
  for (const auto& tv : tf.views) fusion.push_back(FusionView{&tv.depth, &tv.calib, &tv.rgb});
  tf.cloud = label_points_by_nearest_joint(fuse_and_clean(fusion, outliers), tf.skeletons);
  return tf;
}

}  // namespace mvparse
