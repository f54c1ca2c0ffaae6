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

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <Eigen/Geometry>

#include "doctest.h"
#include "mvparse/geometry.h"
#include "test_util.h"

using namespace mvparse;
using mvparse::testing::uniform;

TEST_CASE("project: principal ray and closed-form offsets") {
  const CameraCalibration c = mvparse::testing::basic_camera();
  Projection p = project(Vec3(0, 0, 2), c);
  CHECK(p.valid);
  CHECK(p.u == doctest::Approx(320));
  CHECK(p.v == doctest::Approx(240));
  CHECK(p.z == doctest::Approx(2));

  p = project(Vec3(0.1, 0, 2), c);
  CHECK(p.u == doctest::Approx(345));
  CHECK(p.v == doctest::Approx(240));

  CHECK_FALSE(project(Vec3(0, 0, -1), c).valid);
  CHECK_THROWS_AS(project(Vec3(NAN, 0, 1), c), Error);
}

TEST_CASE("back_project inverts project") {
  const CameraCalibration c = mvparse::testing::basic_camera();
  const Vec3 p = back_project(345, 240, 2.0, c);
  CHECK((p - Vec3(0.1, 0, 2)).norm() < 1e-12);
  CHECK((back_project(c.cx, c.cy, 3.5, c) - Vec3(0, 0, 3.5)).norm() < 1e-12);
  CHECK_THROWS_AS(back_project(10, 10, 0.0, c), Error);
  CHECK_THROWS_AS(back_project(-5, 10, 1.0, c), Error);
}

TEST_CASE("round trip under random extrinsics") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 eye(uniform(rng, -4, 4), uniform(rng, -4, 4), uniform(rng, 0.5, 3));
    const CameraCalibration c = look_at("x", eye, Vec3(0, 0, 1), Vec3(0, 0, 1), 300, 310, 320, 240);
    const double u = uniform(rng, 0, 319), v = uniform(rng, 0, 239), d = uniform(rng, 0.2, 20);
    const Projection p = project(back_project(u, v, d, c), c);
    REQUIRE(p.valid);
    CHECK(std::abs(p.u - u) < 1e-6);
    CHECK(std::abs(p.v - v) < 1e-6);
    CHECK(std::abs(p.z - d) < 1e-9);
  }
}

TEST_CASE("rigid transform of world and extrinsics leaves projections unchanged") {
  std::mt19937_64 rng(5);
  const CameraCalibration c = look_at("x", Vec3(3, 1, 1.5), Vec3(0, 0, 1), Vec3(0, 0, 1), 300, 300, 320, 240);
  const Mat3 r = Eigen::AngleAxisd(0.7, Vec3(0.2, 0.9, -0.3).normalized()).toRotationMatrix();
  const Vec3 t(0.4, -1.2, 2.0);
  CameraCalibration moved = c;
  // p' = r p + t  =>  R' = R r^T, t' = t_c - R r^T t
  moved.rotation = c.rotation * r.transpose();
  moved.translation = c.translation - moved.rotation * t;
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0, 2));
    const Projection a = project(p, c), b = project(r * p + t, moved);
    CHECK(a.valid == b.valid);
    CHECK(std::abs(a.u - b.u) < 1e-9);
    CHECK(std::abs(a.v - b.v) < 1e-9);
    CHECK(std::abs(a.z - b.z) < 1e-9);
  }
}

TEST_CASE("round_half_up and pixel clamping") {
  CHECK(round_half_up(2.5) == 3);
  CHECK(round_half_up(2.4999) == 2);
  CHECK(round_half_up(-0.5) == 0);
  CHECK(round_half_up(-0.51) == -1);
  CameraCalibration c = mvparse::testing::small_camera(10, 10, 10);
  // u = 9.7 rounds to 10, clamped to the last column.
  const Projection p = project(Vec3((9.7 - c.cx) / c.fx, 0, 1), c);
  CHECK(p.valid);
  CHECK(p.px == 9);
}

TEST_CASE("visibility_filter decisions") {
  const CameraCalibration c = mvparse::testing::basic_camera();
  DepthMap d(640, 480, 2.2);
  const std::vector<Vec3> pts = {Vec3(0, 0, 2)};
  CHECK(visibility_filter(pts, d, c, 0.3).size() == 1);
  d = DepthMap(640, 480, 1.5);
  CHECK(visibility_filter(pts, d, c, 0.3).empty());
  d = DepthMap(640, 480, 0.0);
  CHECK(visibility_filter(pts, d, c, 0.3).empty());
  CHECK_THROWS_AS(visibility_filter(pts, d, c, 0.0), Error);
}

TEST_CASE("visibility_filter is monotone in beta and saturates") {
  std::mt19937_64 rng(3);
  const CameraCalibration c = mvparse::testing::small_camera(32, 24, 20);
  DepthMap d(32, 24, 0.0);
  for (auto& v : d.data) v = uniform(rng, 0, 1) < 0.2 ? 0.0 : uniform(rng, 1, 5);
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) pts.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -0.5, 6));
  std::vector<size_t> prev;
  for (double beta : {0.05, 0.1, 0.3, 0.8, 2.0, 1e9}) {
    const auto cur = visibility_filter(pts, d, c, beta);
    CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    prev = cur;
  }
  size_t expected = 0;
  for (const auto& p : pts) {
    const Projection pr = project(p, c);
    expected += pr.valid && d.at(pr.px, pr.py) > 0;
  }
  CHECK(prev.size() == expected);
}

TEST_CASE("statistical outlier removal: far point dropped") {
  std::mt19937_64 rng(9);
  LabeledPointCloud cloud;
  for (int i = 0; i < 10; ++i) {
    CloudPoint p;
    p.position = Vec3(uniform(rng, 0, 0.01), uniform(rng, 0, 0.01), uniform(rng, 0, 0.01));
    cloud.points.push_back(p);
  }
  CloudPoint far;
  far.position = Vec3(5, 0, 0);
  cloud.points.push_back(far);
  const auto out = remove_statistical_outliers(cloud, OutlierParams{5, 1.0});
  CHECK(out.size() == 10);
  for (const auto& p : out.points) CHECK(p.position.norm() < 0.1);

  LabeledPointCloud tiny;
  tiny.points.assign(cloud.points.begin(), cloud.points.begin() + 5);
  tiny.points.push_back(far);
  CHECK(remove_statistical_outliers(tiny, OutlierParams{6, 1.0}).size() == 6);
}

TEST_CASE("knn mean distances: grid path equals brute force") {
  std::mt19937_64 rng(21);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2600; ++i) pts.emplace_back(uniform(rng, 0, 2), uniform(rng, 0, 1), uniform(rng, 0, 0.5));
  pts.emplace_back(40, 40, 40);  // isolated point far outside the cluster
  const int k = 7;
  const auto fast = knn_mean_distances(pts, k);
  for (size_t i = 0; i < pts.size(); i += 97) {
    std::vector<double> d;
    for (size_t j = 0; j < pts.size(); ++j) {
      if (j != i) d.push_back((pts[i] - pts[j]).norm());
    }
    std::sort(d.begin(), d.end());
    double s = 0;
    for (int q = 0; q < k; ++q) s += d[q];
    CHECK(fast[i] == doctest::Approx(s / k).epsilon(1e-12));
  }
  std::vector<double> d;
  for (size_t j = 0; j + 1 < pts.size(); ++j) d.push_back((pts.back() - pts[j]).norm());
  std::sort(d.begin(), d.end());
  double s = 0;
  for (int q = 0; q < k; ++q) s += d[q];
  CHECK(fast.back() == doctest::Approx(s / k).epsilon(1e-12));
}

TEST_CASE("fuse_and_clean concatenates views and is order-insensitive") {
  CameraCalibration a = mvparse::testing::small_camera(4, 4, 4), b = a;
  b.view_id = "01";
  b.translation = Vec3(0.5, 0, 0);
  DepthMap da(4, 4, 0.0), db(4, 4, 0.0);
  da.at(1, 1) = 2.0;
  db.at(2, 3) = 3.0;
  const auto two = fuse_and_clean({FusionView{&da, &a, nullptr}, FusionView{&db, &b, nullptr}});
  CHECK(two.size() == 2);
  CHECK_THROWS_AS(fuse_and_clean({}), Error);

  // Larger random views, permuted.
  std::mt19937_64 rng(4);
  std::vector<DepthMap> depth(3, DepthMap(16, 16, 0.0));
  std::vector<CameraCalibration> cams(3, mvparse::testing::small_camera(16, 16, 12));
  for (int v = 0; v < 3; ++v) {
    cams[v].translation = Vec3(0.3 * v, 0, 0);
    for (auto& x : depth[v].data) x = uniform(rng, 0, 1) < 0.3 ? 0.0 : uniform(rng, 2, 2.2);
  }
  auto run = [&](std::vector<int> order) {
    std::vector<FusionView> views;
    for (int v : order) views.push_back(FusionView{&depth[v], &cams[v], nullptr});
    std::set<std::tuple<double, double, double>> s;
    for (const auto& p : fuse_and_clean(views, OutlierParams{8, 1.0}).points) s.insert({p.position.x(), p.position.y(), p.position.z()});
    return s;
  };
  CHECK(run({0, 1, 2}) == run({2, 0, 1}));
}

TEST_CASE("calibration validation") {
  CameraCalibration c = mvparse::testing::basic_camera();
  CHECK_NOTHROW(c.validate());
  c.fx = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = mvparse::testing::basic_camera();
  c.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(c.validate(), Error);
}
