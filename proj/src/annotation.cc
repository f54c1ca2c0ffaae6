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

#include "mvparse/annotation.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>

namespace mvparse {

const char* seed_source_name(SeedSource source) {
  switch (source) {
    case SeedSource::kClusterCenter: return "cluster-center";
    case SeedSource::kKnee: return "knee";
    case SeedSource::kAnkle: return "ankle";
  }
  return "?";
}

int seed_cluster_count(size_t n, const SeedParams& params) {
  if (!(params.density >= 1.0)) throw Error("seed density must be >= 1");
  if (params.k_min < 1 || params.k_max < params.k_min) throw Error("seed cluster bounds invalid");
  if (n == 0) return 0;
  const long k = std::lround(static_cast<double>(n) / params.density);
  const long clamped = std::clamp<long>(k, params.k_min, params.k_max);
  return static_cast<int>(std::min<long>(clamped, static_cast<long>(n)));
}

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double sq_dist(const PixelCoord& p, const Vec2& c) {
  const double dx = p.x - c.x(), dy = p.y - c.y();
  return dx * dx + dy * dy;
}

}  // namespace

std::vector<std::vector<size_t>> kmeans_clusters(std::span<const PixelCoord> pixels, int k, uint64_t seed,
                                                 int max_iterations) {
  const size_t n = pixels.size();
  if (k <= 0 || n == 0) return {};
  k = std::min<int>(k, static_cast<int>(n));
  std::mt19937_64 rng(seed);
  std::vector<Vec2> centers;
  const size_t first = std::min(n - 1, static_cast<size_t>(unit(rng) * n));
  centers.emplace_back(pixels[first].x, pixels[first].y);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, sq_dist(pixels[i], c));
      d2[i] = best;
      total += best;
    }
    size_t pick = 0;
    if (total <= 0.0) {
      pick = std::min(n - 1, static_cast<size_t>(unit(rng) * n));
    } else {
      double r = unit(rng) * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        r -= d2[pick];
        if (r < 0.0) break;
      }
    }
    centers.emplace_back(pixels[pick].x, pixels[pick].y);
  }

  std::vector<int> assign(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = sq_dist(pixels[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(pixels[i], centers[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Vec2> sum(k, Vec2::Zero());
    std::vector<size_t> count(k, 0);
    for (size_t i = 0; i < n; ++i) {
      sum[assign[i]] += Vec2(pixels[i].x, pixels[i].y);
      ++count[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) centers[c] = sum[c] / static_cast<double>(count[c]);
    }
  }
  std::vector<std::vector<size_t>> clusters(k);
  for (size_t i = 0; i < n; ++i) clusters[assign[i]].push_back(i);
  std::erase_if(clusters, [](const auto& c) { return c.empty(); });
  return clusters;
}

SeedSet extract_seeds(std::span<const PixelCoord> projections, const Skeleton& skeleton,
                      const CameraCalibration& calib, const DepthMap& depth, const SeedParams& params, double beta) {
  SeedSet set;
  set.instance_id = skeleton.instance_id;
  if (projections.empty()) {
    set.empty_warning = true;
    return set;
  }
  auto add = [&](int x, int y, SeedSource src) {
    if (x < 0 || y < 0 || x >= calib.width || y >= calib.height) return;
    for (const auto& s : set.seeds) {
      if (s.x == x && s.y == y) return;
    }
    set.seeds.push_back(Seed{x, y, src});
  };
  const int k = seed_cluster_count(projections.size(), params);
  for (const auto& members : kmeans_clusters(projections, k, params.kmeans_seed, params.max_iterations)) {
    Vec2 mean = Vec2::Zero();
    for (size_t i : members) mean += Vec2(projections[i].x, projections[i].y);
    mean /= static_cast<double>(members.size());
    size_t best = members.front();
    for (size_t i : members) {
      if (sq_dist(projections[i], mean) < sq_dist(projections[best], mean)) best = i;
    }
    add(projections[best].x, projections[best].y, SeedSource::kClusterCenter);
  }
  const std::pair<int, SeedSource> leg_joints[] = {
      {kLKnee, SeedSource::kKnee}, {kRKnee, SeedSource::kKnee}, {kLAnkle, SeedSource::kAnkle}, {kRAnkle, SeedSource::kAnkle}};
  for (const auto& [joint, src] : leg_joints) {
    const std::vector<Vec3> pt = {skeleton.joints[joint]};
    if (visibility_filter(pt, depth, calib, beta).empty()) continue;
    const Projection p = project(pt[0], calib);
    add(p.px, p.py, src);
  }
  return set;
}

Mask dilate(const Mask& mask, int radius) {
  if (radius <= 0) return mask;
  Mask out(mask.width, mask.height, 0);
  const int r2 = radius * radius;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > r2 || !mask.contains(x + dx, y + dy)) continue;
          out.at(x + dx, y + dy) = 1;
        }
      }
    }
  }
  return out;
}

SegmentResult region_grow(const RgbImage& image, const DepthMap& depth, std::span<const Seed> seeds, const Mask* prior,
                          const RegionGrowParams& params) {
  if (!image.same_shape(depth)) throw Error("region_grow: image/depth shape mismatch");
  if (prior && !prior->same_shape(image)) throw Error("region_grow: prior mask shape mismatch");
  SegmentResult res;
  res.mask = Mask(image.width, image.height, 0);
  Mask allowed;
  if (prior) allowed = dilate(*prior, params.tau_margin);

  auto ok = [&](int x, int y) {
    return image.contains(x, y) && depth.at(x, y) > 0.0 && (!prior || allowed.at(x, y));
  };
  std::deque<PixelCoord> queue;
  auto push = [&](int x, int y) {
    res.mask.at(x, y) = 1;
    queue.push_back({x, y});
  };
  size_t used = 0;
  for (const auto& s : seeds) {
    if (!ok(s.x, s.y)) {
      res.warnings.push_back("seed (" + std::to_string(s.x) + "," + std::to_string(s.y) + ") skipped: invalid depth");
      continue;
    }
    ++used;
    if (!res.mask.at(s.x, s.y)) push(s.x, s.y);
  }
  if (prior) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        if (prior->at(x, y) && ok(x, y) && !res.mask.at(x, y)) push(x, y);
      }
    }
  }
  if (used == 0 && queue.empty()) {
    res.warnings.push_back("all seeds skipped; empty mask");
    return res;
  }
  const double tc2 = params.tau_color * params.tau_color;
  constexpr int kDx[4] = {1, -1, 0, 0};
  constexpr int kDy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const PixelCoord p = queue.front();
    queue.pop_front();
    const Rgb& c = image.at(p.x, p.y);
    const double d = depth.at(p.x, p.y);
    for (int n = 0; n < 4; ++n) {
      const int x = p.x + kDx[n], y = p.y + kDy[n];
      if (!ok(x, y) || res.mask.at(x, y)) continue;
      if (std::abs(depth.at(x, y) - d) > params.tau_depth) continue;
      const Rgb& o = image.at(x, y);
      const double dr = c.r - o.r, dg = c.g - o.g, db = c.b - o.b;
      if (dr * dr + dg * dg + db * db > tc2) continue;
      push(x, y);
    }
  }
  return res;
}

LabeledPointCloud label_points_by_nearest_joint(const LabeledPointCloud& cloud, const std::vector<Skeleton>& skeletons) {
  if (skeletons.empty()) throw Error("no skeletons");
  std::vector<const Skeleton*> sorted;
  for (const auto& s : skeletons) sorted.push_back(&s);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Skeleton* a, const Skeleton* b) { return a->instance_id < b->instance_id; });
  LabeledPointCloud out = cloud;
  for (auto& p : out.points) {
    double best = std::numeric_limits<double>::infinity();
    int owner = sorted.front()->instance_id;
    for (const Skeleton* s : sorted) {
      for (const auto& j : s->joints) {
        const double d = (p.position - j).squaredNorm();
        if (d < best) {
          best = d;
          owner = s->instance_id;
        }
      }
    }
    p.instance_id = owner;
  }
  return out;
}

ViewAnnotation annotate_view(const LabeledPointCloud& cloud, const std::vector<Skeleton>& skeletons,
                             const ViewInput& view, PromptableSegmenter& segmenter, const AnnotationParams& params) {
  if (!view.rgb || !view.depth || !view.calib) throw Error("annotate_view: incomplete view");
  const CameraCalibration& calib = *view.calib;
  const DepthMap& depth = *view.depth;
  ViewAnnotation out;

  struct Work {
    const Skeleton* skeleton;
    std::vector<PixelCoord> pixels;
    double mean_depth;
    std::vector<Seed> seeds;
  };
  std::vector<Work> work;
  for (const auto& sk : skeletons) {
    std::vector<Vec3> pts;
    for (const auto& p : cloud.points) {
      if (!p.instance_id) throw Error("annotate_view: cloud is not labeled");
      if (*p.instance_id == sk.instance_id) pts.push_back(p.position);
    }
    const std::vector<size_t> visible = visibility_filter(pts, depth, calib, params.beta);
    if (visible.empty()) {
      out.warnings.push_back("instance " + std::to_string(sk.instance_id) + ": no visible points; omitted");
      continue;
    }
    Work w{&sk, {}, 0.0, {}};
    for (size_t j : visible) {
      const Projection p = project(pts[j], calib);
      w.pixels.push_back({p.px, p.py});
      w.mean_depth += p.z;
    }
    w.mean_depth /= static_cast<double>(visible.size());
    work.push_back(std::move(w));
  }
  std::stable_sort(work.begin(), work.end(), [](const Work& a, const Work& b) {
    if (a.mean_depth != b.mean_depth) return a.mean_depth > b.mean_depth;
    return a.skeleton->instance_id < b.skeleton->instance_id;
  });

  LabelMap owner(calib.width, calib.height, -1);
  std::vector<size_t> active;
  for (size_t w = 0; w < work.size(); ++w) {
    SeedSet seeds = extract_seeds(work[w].pixels, *work[w].skeleton, calib, depth, params.seeds, params.beta);
    const int id = work[w].skeleton->instance_id;
    out.seeds.push_back(seeds);
    if (seeds.seeds.empty()) {
      out.warnings.push_back("instance " + std::to_string(id) + ": no seeds; omitted");
      continue;
    }
    work[w].seeds = seeds.seeds;
    SegmentResult seg = segmenter.segment(*view.rgb, depth, seeds.seeds, nullptr);
    if (!seg.mask.same_shape(owner)) throw Error("segmenter returned a mask of the wrong size");
    for (auto& msg : seg.warnings) out.warnings.push_back("instance " + std::to_string(id) + ": " + msg);
    for (size_t i = 0; i < owner.size(); ++i) {
      if (seg.mask[i]) owner[i] = id;
    }
    active.push_back(w);
    out.order.push_back(id);
    out.mean_depth[id] = work[w].mean_depth;
  }

  // One refinement pass, painted far to near again.
  LabelMap refined(calib.width, calib.height, -1);
  std::vector<size_t> kept;
  for (size_t w : active) {
    const int id = work[w].skeleton->instance_id;
    Mask prior(calib.width, calib.height, 0);
    for (size_t i = 0; i < owner.size(); ++i) prior[i] = owner[i] == id;
    if (std::none_of(prior.data.begin(), prior.data.end(), [](uint8_t v) { return v != 0; })) {
      out.warnings.push_back("instance " + std::to_string(id) + ": fully overwritten by nearer instances");
      continue;
    }
    kept.push_back(w);
    SegmentResult seg = segmenter.segment(*view.rgb, depth, work[w].seeds, &prior);
    if (!seg.mask.same_shape(owner)) throw Error("segmenter returned a mask of the wrong size");
    for (size_t i = 0; i < refined.size(); ++i) {
      if (seg.mask[i]) refined[i] = id;
    }
  }
  for (size_t w : kept) {
    const int id = work[w].skeleton->instance_id;
    Mask m(calib.width, calib.height, 0);
    for (size_t i = 0; i < refined.size(); ++i) m[i] = refined[i] == id;
    if (std::none_of(m.data.begin(), m.data.end(), [](uint8_t v) { return v != 0; })) {
      out.warnings.push_back("instance " + std::to_string(id) + ": empty after refinement; omitted");
      continue;
    }
    out.masks[id] = std::move(m);
  }
  return out;
}

}  // namespace mvparse
