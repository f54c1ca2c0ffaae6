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

#include <cmath>
#include <random>

#include "doctest.h"
#include "metric_oracles.h"
#include "mvparse/metrics.h"

using namespace mvparse;
using namespace mvparse::testing;

namespace {

LabelMap labels2x2(std::initializer_list<int> v) {
  LabelMap m(2, 2, 0);
  std::copy(v.begin(), v.end(), m.data.begin());
  return m;
}

LabelSpace test_space() {
  LabelSpace s = LabelSpace::default_space();
  s.ignore = {3};
  s.mapping = {{4, 3}, {6, 5}};
  return s;
}

}  // namespace

TEST_CASE("mask and box IoU examples") {
  Mask a(4, 4, 0);
  a.at(1, 1) = a.at(2, 1) = 1;
  CHECK(mask_iou(a, a) == 1.0);
  CHECK(mask_iou(Mask(4, 4, 0), Mask(4, 4, 0)) == 0.0);
  Mask b(4, 4, 0);
  b.at(3, 3) = 1;
  CHECK(mask_iou(a, b) == 0.0);
  CHECK_THROWS_AS(mask_iou(a, Mask(3, 4, 0)), Error);
  CHECK(box_iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(box_iou({5, 0, 1, 1}, {0, 0, 1, 1}), Error);
}

TEST_CASE("overlap degree and partition") {
  CHECK(overlap_degree({{0, 0, 4, 4}}) == 0.0);
  CHECK(overlap_degree({{0, 0, 4, 4}, {0, 0, 4, 4}}) == 1.0);
  // Pairwise IoUs 0.5 (A,B), ~0 (A,C), and 0.2-ish (B,C): the max wins.
  const std::vector<Box> three = {{0, 0, 10, 10}, {0, 0, 10, 5}, {0, 4, 10, 5}};
  CHECK(overlap_degree(three) == doctest::Approx(0.5));
  std::vector<Box> rev(three.rbegin(), three.rend());
  CHECK(overlap_degree(rev) == overlap_degree(three));

  const OverlapPartition p = partition_by_overlap({0.15, 0.25, 0.45, 0.85});
  CHECK(p.subsets[0].size() == 3);
  CHECK(p.subsets[1].size() == 2);
  CHECK(p.subsets[2].size() == 1);
  CHECK(p.subsets[3].size() == 1);
  CHECK(p.subset_name(0) == "O20");
  CHECK(p.subset_name(3) == "O80");
  const OverlapPartition z = partition_by_overlap({0, 0, 0});
  for (const auto& s : z.subsets) CHECK(s.empty());
}

TEST_CASE("semantic mIoU examples") {
  const LabelSpace labels = LabelSpace::default_space();
  const std::vector<LabelMap> gt = {labels2x2({1, 1, 2, 0})}, pred = {labels2x2({1, 2, 2, 0})};
  CHECK(semantic_miou(pred, gt, labels, MiouVariant::kFull) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  for (auto v : {MiouVariant::kFull, MiouVariant::kIgnore, MiouVariant::kMapped}) {
    CHECK(semantic_miou(gt, gt, labels, v) == 1.0);
  }
  // Mapping 2 -> 1: the mismatched pixel becomes correct.
  LabelSpace mapped = labels;
  mapped.mapping = {{2, 1}};
  CHECK(semantic_miou(pred, gt, mapped, MiouVariant::kMapped) == 1.0);
  // Empty ignore set equals the full variant.
  CHECK(semantic_miou(pred, gt, labels, MiouVariant::kIgnore) == semantic_miou(pred, gt, labels, MiouVariant::kFull));
  const std::vector<LabelMap> bad = {labels2x2({9, 0, 0, 0})};
  CHECK_THROWS_AS(semantic_miou(bad, gt, labels, MiouVariant::kFull), Error);
}

TEST_CASE("human mIoU examples") {
  // gt foreground: top row; prediction covers half of it.
  Mask gt(2, 2, 0), pred(2, 2, 0);
  gt.at(0, 0) = gt.at(1, 0) = 1;
  pred.at(0, 0) = 1;
  double fg = 0.0;
  const std::vector<Mask> p = {pred}, g = {gt};
  CHECK(human_miou_global(p, g, &fg) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK(fg == doctest::Approx(0.5));
  CHECK(human_miou_global(g, g) == 1.0);

  // One gt matched at IoU 0.8, one unmatched.
  Mask g1(5, 2, 0), p1(5, 2, 0), g2(5, 2, 0);
  for (int x = 0; x < 5; ++x) g1.at(x, 0) = 1;
  for (int x = 0; x < 4; ++x) p1.at(x, 0) = 1;
  for (int x = 0; x < 5; ++x) g2.at(x, 1) = 1;
  CHECK(human_miou_instance({{p1}}, {{g1, g2}}) == doctest::Approx(0.4).epsilon(1e-15));

  // Half-overlap example: |pred| = |gt|, sharing half -> 1/3.
  Mask a(4, 1, 0), b(4, 1, 0);
  a.at(0, 0) = a.at(1, 0) = 1;
  b.at(1, 0) = b.at(2, 0) = 1;
  CHECK(human_miou_instance({{a}}, {{b}}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // Relabeling predicted instances does not matter.
  CHECK(human_miou_instance({{a, b}}, {{b, a}}) == human_miou_instance({{b, a}}, {{b, a}}));
}

TEST_CASE("greedy_match ordering and ties") {
  const auto m = greedy_match({{0.5, 0.9}, {0.9, 0.1}});
  REQUIRE(m.size() == 2);
  CHECK(m[0] == std::pair<int, int>(0, 1));
  CHECK(m[1] == std::pair<int, int>(1, 0));
  CHECK(greedy_match({{0.0, 0.0}}).empty());
}

TEST_CASE("accuracy examples") {
  const std::vector<LabelMap> gt = {labels2x2({1, 1, 2, 2})}, pred = {labels2x2({1, 2, 2, 2})};
  const Accuracies a = accuracies(pred, gt, 7);
  CHECK(a.pixel == doctest::Approx(0.75));
  CHECK(a.mean == doctest::Approx(0.75));
  const std::vector<LabelMap> none = {labels2x2({0, 0, 0, 0})}, people = {labels2x2({0, 1, 1, 1})};
  const Accuracies bg = accuracies(none, people, 7);
  CHECK(bg.mean == doctest::Approx(0.5));
}

TEST_CASE("AP^p_vol examples") {
  // Part IoUs 1 (head) and 0.1 (torso: 1 shared of 10) -> mean 0.55.
  LabelMap gt(20, 1, 0), pred(20, 1, 0);
  gt.at(0, 0) = pred.at(0, 0) = 1;
  gt.at(1, 0) = pred.at(1, 0) = 2;
  for (int x = 2; x < 6; ++x) gt.at(x, 0) = 2;
  for (int x = 6; x < 11; ++x) pred.at(x, 0) = 2;
  CHECK(mean_part_iou(pred, gt, 7) == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(std::abs(ap_p_vol({{{pred, 0.9}}}, {{gt}}, 7) - 5.0 / 9.0) <= 1e-12);
  CHECK(ap_p_vol({{{gt, 0.3}}}, {{gt}}, 7) == 1.0);
  CHECK(ap_p_vol({{}}, {{gt}}, 7) == 0.0);
  std::vector<std::string> warnings;
  CHECK(ap_p_vol({{}}, {{}}, 7, &warnings) == 0.0);
  CHECK(warnings.size() == 1);
  CHECK_THROWS_AS(ap_p_vol({{{gt, 1.5}}}, {{gt}}, 7), Error);
}

TEST_CASE("average_precision all-point interpolation") {
  CHECK(average_precision({true, false, true}, 2) == doctest::Approx(0.5 * 1.0 + 0.5 * 2.0 / 3.0));
  CHECK(average_precision({}, 3) == 0.0);
  CHECK(average_precision({true}, 0) == 0.0);
}

TEST_CASE("every metric matches its counting oracle on random 16x16 problems") {
  std::mt19937_64 rng(31);
  const LabelSpace labels = test_space();
  for (int trial = 0; trial < 25; ++trial) {
    const RandomMetricsCase c = random_metrics_case(rng, labels.size());
    std::vector<LabelMap> pred, gt;
    std::vector<Mask> pf, gf;
    std::vector<std::vector<Mask>> pi, gi;
    std::vector<std::vector<InstanceParsing>> pp;
    std::vector<std::vector<LabelMap>> gp;
    for (const auto& f : c.frames) {
      pred.push_back(f.pred_parts);
      gt.push_back(f.gt_parts);
      Mask a(16, 16, 0), b(16, 16, 0);
      for (size_t p = 0; p < a.size(); ++p) {
        a[p] = f.pred_parts[p] != 0;
        b[p] = f.gt_parts[p] != 0;
      }
      pf.push_back(a);
      gf.push_back(b);
      std::vector<Mask> x, y;
      for (const auto& inst : f.pred_instances) {
        Mask m(16, 16, 0);
        for (size_t p = 0; p < m.size(); ++p) m[p] = inst.parts[p] != 0;
        x.push_back(m);
      }
      for (const auto& inst : f.gt_instances) {
        Mask m(16, 16, 0);
        for (size_t p = 0; p < m.size(); ++p) m[p] = inst[p] != 0;
        y.push_back(m);
      }
      pi.push_back(x);
      gi.push_back(y);
      pp.push_back(f.pred_instances);
      gp.push_back(f.gt_instances);
    }
    for (auto v : {MiouVariant::kFull, MiouVariant::kIgnore, MiouVariant::kMapped}) {
      CHECK(std::abs(semantic_miou(pred, gt, labels, v) - naive_semantic_miou(pred, gt, labels, v)) <= 1e-12);
    }
    CHECK(std::abs(human_miou_global(pf, gf) - naive_human_global(pf, gf)) <= 1e-12);
    CHECK(std::abs(human_miou_instance(pi, gi) - naive_human_instance(pi, gi)) <= 1e-12);
    const Accuracies a = accuracies(pred, gt, labels.size()), b = naive_accuracies(pred, gt, labels.size());
    CHECK(std::abs(a.pixel - b.pixel) <= 1e-12);
    CHECK(std::abs(a.mean - b.mean) <= 1e-12);
    CHECK(std::abs(ap_p_vol(pp, gp, labels.size()) - naive_ap_p_vol(pp, gp, labels.size())) <= 1e-12);
    for (size_t i = 0; i < c.frames.size(); ++i) {
      CHECK(std::abs(overlap_degree(c.boxes[i]) - c.frames[i].overlap_degree) <= 1e-12);
    }
    const MetricsReport r = evaluate_frames(c.frames, labels);
    for (double v : {r.miou_p, r.miou_p_m, r.miou_p_ig, r.miou_h, r.miou_h_i, r.miou_h_fg, r.acc_pixel, r.acc_mean,
                     r.ap_p_vol}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("evaluate_by_overlap emits nested subsets in order") {
  std::mt19937_64 rng(5);
  std::vector<FrameEvaluation> frames;
  for (int i = 0; i < 10; ++i) {
    auto c = random_metrics_case(rng, 7);
    for (auto& f : c.frames) frames.push_back(std::move(f));
  }
  const auto reports = evaluate_by_overlap(frames, LabelSpace::default_space());
  REQUIRE(reports.size() == 5);
  CHECK(reports[0].subset == "all");
  CHECK(reports[0].num_images == frames.size());
  for (size_t t = 2; t < 5; ++t) CHECK(reports[t].num_images <= reports[t - 1].num_images);
  const std::string json = metrics_json(reports);
  CHECK(json.find("\"O80\"") != std::string::npos);
  CHECK(json.find("miou_h_fg") != std::string::npos);
  CHECK(metrics_json(reports, false).find("miou_h_fg") == std::string::npos);
  CHECK(metrics_table(reports).find("IoU_fg") != std::string::npos);
}

TEST_CASE("perfect predictions score 1 on every metric") {
  std::mt19937_64 rng(9);
  std::vector<FrameEvaluation> frames;
  while (frames.empty() || frames[0].gt_instances.empty()) {
    frames = random_metrics_case(rng, 7).frames;
  }
  for (auto& f : frames) {
    f.pred_parts = f.gt_parts;
    f.pred_instances.clear();
    for (const auto& g : f.gt_instances) f.pred_instances.push_back({g, 0.5});
  }
  // Drop frames whose people are fully occluded; an empty instance cannot be matched.
  std::erase_if(frames, [](const FrameEvaluation& f) {
    for (const auto& g : f.gt_instances) {
      if (std::none_of(g.data.begin(), g.data.end(), [](int v) { return v != 0; })) return true;
    }
    return false;
  });
  REQUIRE_FALSE(frames.empty());
  const MetricsReport r = evaluate_frames(frames, LabelSpace::default_space());
  CHECK(r.miou_p == 1.0);
  CHECK(r.miou_h == 1.0);
  CHECK(r.acc_pixel == 1.0);
  CHECK(r.acc_mean == 1.0);
  if (frames[0].gt_instances.size() > 0) {
    CHECK(r.miou_h_i == 1.0);
    CHECK(r.ap_p_vol == 1.0);
  }
}
