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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mvparse/commands.h"
#include "mvparse/config.h"
#include "mvparse/dataset.h"
#include "mvparse/external_segmenter.h"
#include "mvparse/image_io.h"
#include "json.hpp"
#include "test_util.h"

using namespace mvparse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mvparse_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mvparse");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string fake_segmenter(const std::string& mode) {
  return "python3 " MVPARSE_TEST_SOURCE_DIR "/fake_segmenter.py " + mode;
}

}  // namespace

TEST_CASE("PNG round trips") {
  TempDir d("png");
  std::mt19937_64 rng(1);
  RgbImage rgb(7, 5);
  for (auto& p : rgb.data) p = Rgb{static_cast<uint8_t>(rng()), static_cast<uint8_t>(rng()), static_cast<uint8_t>(rng())};
  write_rgb_png(d / "a.png", rgb);
  CHECK(read_rgb_png(d / "a.png") == rgb);

  Grid<uint16_t> g16(3, 4);
  for (auto& v : g16.data) v = static_cast<uint16_t>(rng());
  write_gray16_png(d / "b.png", g16);
  CHECK(read_gray16_png(d / "b.png") == g16);

  Mask m = mvparse::testing::random_mask(rng, 9, 6);
  write_mask_png(d / "m.png", m);
  CHECK(read_mask_png(d / "m.png") == m);
  CHECK(read_gray8_png(d / "m.png").data[std::find(m.data.begin(), m.data.end(), 1) - m.data.begin()] == 255);

  DepthMap depth(3, 1, 0.0);
  depth[0] = 1.2344;
  depth[1] = 0.0001;
  write_depth_png(d / "d.png", depth);
  const DepthMap back = read_depth_png(d / "d.png");
  CHECK(back[0] == doctest::Approx(1.234));
  CHECK(back[1] == doctest::Approx(0.001));
  CHECK(back[2] == 0.0);
  depth[2] = 70.0;
  CHECK_THROWS_AS(write_depth_png(d / "e.png", depth), Error);

  {
    std::ofstream bad(d / "bad.png");
    bad << "not a png";
  }
  CHECK_THROWS_AS(read_rgb_png(d / "bad.png"), Error);
  CHECK_THROWS_AS(read_rgb_png(d / "none.png"), Error);
  CHECK_THROWS_AS(read_gray16_png(d / "a.png"), Error);
}

TEST_CASE("calibration and skeleton files round trip") {
  TempDir d("calib");
  const auto cams = ring_cameras(3, 40, 30, 3.0, 1.2, 60.0, Vec3(0, 0, 1));
  write_calibration(d / "c.json", cams);
  const auto back = read_calibration(d / "c.json");
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back[i].view_id == cams[i].view_id);
    CHECK((back[i].rotation - cams[i].rotation).norm() < 1e-12);
    CHECK((back[i].translation - cams[i].translation).norm() < 1e-12);
    CHECK(back[i].fx == cams[i].fx);
  }
  SceneConfig sc;
  sc.n_people = 2;
  sc.n_views = 2;
  sc.width = sc.height = 24;
  const SyntheticScene s = generate_scene(sc);
  write_skeletons(d / "s.json", s.skeletons);
  const auto sk = read_skeletons(d / "s.json");
  REQUIRE(sk.size() == 2);
  CHECK(sk[1].instance_id == s.skeletons[1].instance_id);
  CHECK((sk[1].joints[kLAnkle] - s.skeletons[1].joints[kLAnkle]).norm() < 1e-12);
}

TEST_CASE("config round trip and strict schema") {
  RunConfig c;
  CHECK(config_from_json(config_to_json(c)) == c);
  c.rng_seed = 42;
  c.threads = 3;
  c.synth.people = 4;
  c.annotation.beta = 0.2;
  c.annotation.region.tau_color = 12.5;
  c.finetune.lambda = 0.25;
  c.finetune.n_views = 2;
  c.finetune.reduction = Reduction::kMean;
  c.pretrain.epochs = 7;
  c.labels.ignore = {3};
  c.labels.mapping = {{4, 3}};
  c.segmenter = "external:python3 seg.py";
  c.report_foreground_iou = false;
  c.paths.dataset = "/data";
  const RunConfig back = config_from_json(config_to_json(c));
  CHECK(back.annotation.seeds.kmeans_seed == 42);
  CHECK(back.finetune.rng_seed == 42);
  CHECK(back.finetune.threads == 3);
  c.annotation.seeds.kmeans_seed = 42;
  c.finetune.rng_seed = 42;
  c.finetune.threads = 3;
  c.pretrain.threads = 3;
  CHECK(back == c);
  CHECK(config_to_json(back) == config_to_json(c));

  TempDir d("config");
  save_config(c, d / "c.json");
  CHECK(load_config(d / "c.json") == c);

  CHECK_THROWS_AS(config_from_json(R"({"finetune": {"lamda": 0.5}})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"bogus": 1})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"finetune": {"lambda": 1.5}})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"annotation": {"beta": -1}})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"finetune": {"reduction": "max"}})"), Error);
  CHECK_THROWS_AS(config_from_json("[1, 2"), Error);
}

TEST_CASE("external segmenter protocol") {
  RgbImage img(12, 10, Rgb{10, 10, 10});
  DepthMap depth(12, 10, 2.0);
  const Seed seeds[] = {{3, 3, SeedSource::kClusterCenter}, {10, 8, SeedSource::kKnee}};
  {
    ExternalSegmenter seg(fake_segmenter("ok"));
    for (int rep = 0; rep < 2; ++rep) {
      const SegmentResult r = seg.segment(img, depth, seeds, nullptr);
      int n = 0;
      for (uint8_t v : r.mask.data) n += v;
      CHECK(n == 25 + 16);  // second square clipped at the corner
      CHECK(r.mask.at(3, 3) == 1);
      CHECK(r.mask.at(11, 9) == 1);
      CHECK(r.mask.at(0, 9) == 0);
    }
    Mask prior(12, 10, 1);
    CHECK(seg.segment(img, depth, seeds, &prior).mask.at(3, 3) == 1);
  }
  {
    ExternalSegmenter seg(fake_segmenter("error"));
    CHECK_THROWS_WITH_AS(seg.segment(img, depth, seeds, nullptr), doctest::Contains("no model"), Error);
  }
  {
    ExternalSegmenter seg(fake_segmenter("hang"), 300);
    CHECK_THROWS_WITH_AS(seg.segment(img, depth, seeds, nullptr), doctest::Contains("timed out"), Error);
  }
  {
    ExternalSegmenter seg("exit 0");
    CHECK_THROWS_AS(seg.segment(img, depth, seeds, nullptr), Error);
  }
}

TEST_CASE("cli exit codes") {
  TempDir d("cli_codes");
  CHECK(cli({}) == 2);
  CHECK(cli({"--help"}) == 0);
  CHECK(cli({"frobnicate"}) == 2);
  CHECK(cli({"synth", d / "x", "--views", "0"}) == 2);
  CHECK(cli({"synth", d / "x", "--people", "abc"}) == 2);
  CHECK(cli({"finetune", d / "x", "--mode", "sideways"}) == 2);
  CHECK(cli({"evaluate", d / "nope", d / "nope"}) == 1);
  CHECK(cli({"annotate", d / "nope"}) == 1);
  {
    std::ofstream bad(d / "bad.json");
    bad << R"({"synth": {"peeple": 2}})";
  }
  CHECK(cli({"--config", d / "bad.json", "synth", d / "x"}) == 2);
}

TEST_CASE("synth writes the dataset layout; evaluating ground truth scores 1") {
  TempDir d("cli_synth");
  const std::string ds = d / "ds";
  REQUIRE(cli({"--seed", "3", "synth", ds, "--people", "2", "--views", "3", "--frames", "2", "--width", "32",
               "--height", "32"}) == 0);
  CHECK(fs::exists(ds + "/calibration.json"));
  for (const char* v : {"00", "01", "02"}) {
    for (const char* f : {"0000", "0001"}) {
      const std::string base = ds + "/views/" + v + "/";
      CHECK(fs::exists(base + "rgb_" + f + ".png"));
      CHECK(fs::exists(base + "depth_" + f + ".png"));
      CHECK(fs::exists(base + "gt_instance_" + f + ".png"));
      CHECK(fs::exists(base + "gt_part_" + f + ".png"));
    }
  }
  CHECK(fs::exists(ds + "/skeletons/0000.json"));
  CHECK(list_frames(ds) == std::vector<std::string>{"0000", "0001"});

  const auto cams = read_calibration(ds + "/calibration.json");
  const std::string pred = d / "pred";
  for (const auto& name : list_frames(ds)) {
    const DatasetFrame frame = read_frame(ds, cams, name);
    for (const auto& v : frame.views) {
      const std::string dir = pred + "/" + v.calib.view_id + "/" + name;
      fs::create_directories(dir);
      Grid<uint8_t> parts(v.gt_part->width, v.gt_part->height, 0);
      for (size_t i = 0; i < parts.size(); ++i) parts[i] = static_cast<uint8_t>((*v.gt_part)[i]);
      write_gray8_png(dir + "/parts.png", parts);
      nlohmann::json scores = {{"instances", nlohmann::json::array()}};
      for (const auto& sk : frame.skeletons) {
        Grid<uint8_t> g(parts.width, parts.height, 0);
        bool any = false;
        for (size_t i = 0; i < g.size(); ++i) {
          if ((*v.gt_instance)[i] == sk.instance_id) {
            g[i] = parts[i];
            any = true;
          }
        }
        if (!any) continue;
        write_gray8_png(dir + "/instance_" + std::to_string(sk.instance_id) + ".png", g);
        scores["instances"].push_back({{"instance_id", sk.instance_id}, {"confidence", 0.9}});
      }
      std::ofstream(dir + "/scores.json") << scores.dump();
    }
  }
  RunConfig cfg;
  std::ostringstream log;
  CHECK(cmd_evaluate(cfg, pred, ds, d / "m.json", log) == 0.0);
  const auto m = nlohmann::json::parse(std::ifstream(d / "m.json"));
  const auto& all = m.at("subsets").at(0);
  CHECK(all.at("subset") == "all");
  for (const char* k : {"miou_p", "miou_p_m", "miou_p_ig", "miou_h_i", "miou_h", "acc_pixel", "acc_mean", "ap_p_vol"}) {
    CHECK_MESSAGE(all.at(k).get<double>() == 1.0, k);
  }

  // Dropping one view's prediction is reported and counted as empty.
  fs::remove_all(pred + "/00/0000");
  const double missing = cmd_evaluate(cfg, pred, ds, "", log);
  CHECK(missing == doctest::Approx(1.0 / 6.0));
  CHECK(log.str().find("missing prediction: view 00 frame 0000") != std::string::npos);
  CHECK(cli({"evaluate", pred, ds}) == 1);  // more than 10% missing
}
