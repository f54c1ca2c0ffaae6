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

#ifndef MVPARSE_TESTS_METRIC_ORACLES_H_
#define MVPARSE_TESTS_METRIC_ORACLES_H_

// Straightforward per-class / per-pair counting versions of the metrics, written
// independently of src/metrics.cc.

#include <algorithm>
#include <random>
#include <vector>

#include "mvparse/metrics.h"

namespace mvparse::testing {

inline double naive_semantic_miou(const std::vector<LabelMap>& pred, const std::vector<LabelMap>& gt,
                                  const LabelSpace& labels, MiouVariant variant) {
  auto conv = [&](int l) { return variant == MiouVariant::kMapped ? labels.map(l) : l; };
  auto dropped = [&](int a, int b) {
    return variant == MiouVariant::kIgnore && (labels.ignore.count(a) || labels.ignore.count(b));
  };
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < labels.size(); ++c) {
    if (variant == MiouVariant::kIgnore && labels.ignore.count(c)) continue;
    bool present = false;
    long long inter = 0, uni = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
      for (int y = 0; y < gt[i].height; ++y) {
        for (int x = 0; x < gt[i].width; ++x) {
          const int a0 = pred[i].at(x, y), b0 = gt[i].at(x, y);
          if (dropped(a0, b0)) continue;
          const int a = conv(a0), b = conv(b0);
          present |= b == c;
          if (a == c && b == c) ++inter;
          if (a == c || b == c) ++uni;
        }
      }
    }
    if (!present) continue;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

inline double naive_iou(const Mask& a, const Mask& b) {
  long long i = 0, u = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      i += a.at(x, y) && b.at(x, y);
      u += a.at(x, y) || b.at(x, y);
    }
  }
  return u == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(u);
}

inline double naive_human_global(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  double sum = 0.0;
  for (int c = 0; c < 2; ++c) {
    long long i = 0, u = 0;
    for (size_t k = 0; k < gt.size(); ++k) {
      for (size_t p = 0; p < gt[k].size(); ++p) {
        const bool a = (pred[k][p] != 0) == (c == 1), b = (gt[k][p] != 0) == (c == 1);
        i += a && b;
        u += a || b;
      }
    }
    sum += u == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(u);
  }
  return sum / 2.0;
}

// Repeatedly takes the best remaining pair (first in row-major order on ties).
inline double naive_human_instance(const std::vector<std::vector<Mask>>& pred,
                                   const std::vector<std::vector<Mask>>& gt) {
  double sum = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < gt.size(); ++i) {
    n += gt[i].size();
    std::vector<bool> pu(pred[i].size(), false), gu(gt[i].size(), false);
    while (true) {
      double best = 0.0;
      int ba = -1, bb = -1;
      for (size_t a = 0; a < pred[i].size(); ++a) {
        for (size_t b = 0; b < gt[i].size(); ++b) {
          if (pu[a] || gu[b]) continue;
          const double v = naive_iou(pred[i][a], gt[i][b]);
          if (v > best) {
            best = v;
            ba = static_cast<int>(a);
            bb = static_cast<int>(b);
          }
        }
      }
      if (ba < 0) break;
      pu[ba] = gu[bb] = true;
      sum += best;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

inline Accuracies naive_accuracies(const std::vector<LabelMap>& pred, const std::vector<LabelMap>& gt, int k) {
  long long correct = 0, total = 0;
  double recall_sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    long long hit = 0, cnt = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
      for (size_t p = 0; p < gt[i].size(); ++p) {
        if (gt[i][p] != c) continue;
        ++cnt;
        hit += pred[i][p] == c;
      }
    }
    correct += hit;
    total += cnt;
    if (cnt > 0) {
      recall_sum += static_cast<double>(hit) / static_cast<double>(cnt);
      ++present;
    }
  }
  Accuracies a;
  a.pixel = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  a.mean = present == 0 ? 0.0 : recall_sum / present;
  return a;
}

inline double naive_part_iou(const LabelMap& a, const LabelMap& b, int k) {
  double s = 0.0;
  int n = 0;
  for (int c = 1; c < k; ++c) {
    long long i = 0, u = 0;
    for (size_t p = 0; p < a.size(); ++p) {
      i += a[p] == c && b[p] == c;
      u += a[p] == c || b[p] == c;
    }
    if (u == 0) continue;
    s += static_cast<double>(i) / static_cast<double>(u);
    ++n;
  }
  return n == 0 ? 0.0 : s / n;
}

// AP as sum over recall steps of the best precision at any later rank.
inline double naive_ap_p_vol(const std::vector<std::vector<InstanceParsing>>& pred,
                             const std::vector<std::vector<LabelMap>>& gt, int k) {
  size_t num_gt = 0;
  for (const auto& g : gt) num_gt += g.size();
  if (num_gt == 0) return 0.0;
  std::vector<std::pair<size_t, size_t>> order;
  for (size_t i = 0; i < pred.size(); ++i) {
    for (size_t a = 0; a < pred[i].size(); ++a) order.emplace_back(i, a);
  }
  std::stable_sort(order.begin(), order.end(), [&](const auto& x, const auto& y) {
    return pred[x.first][x.second].confidence > pred[y.first][y.second].confidence;
  });
  double total = 0.0;
  for (int s = 1; s <= 9; ++s) {
    const double t = s / 10.0;
    std::vector<std::vector<bool>> used(gt.size());
    for (size_t i = 0; i < gt.size(); ++i) used[i].assign(gt[i].size(), false);
    std::vector<double> prec, rec;
    size_t tp = 0;
    for (size_t r = 0; r < order.size(); ++r) {
      const auto [i, a] = order[r];
      int best = -1;
      double bv = -1.0;
      for (size_t b = 0; b < gt[i].size(); ++b) {
        const double v = naive_part_iou(pred[i][a].parts, gt[i][b], k);
        if (v > bv) {
          bv = v;
          best = static_cast<int>(b);
        }
      }
      if (best >= 0 && bv > t && !used[i][best]) {
        used[i][best] = true;
        ++tp;
      }
      prec.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
      rec.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
    }
    double ap = 0.0, last = 0.0;
    for (size_t r = 0; r < rec.size(); ++r) {
      if (rec[r] <= last) continue;
      ap += (rec[r] - last) * *std::max_element(prec.begin() + r, prec.end());
      last = rec[r];
    }
    total += ap;
  }
  return total / 9.0;
}

// Rasterizes both boxes on a pixel grid and counts.
inline double naive_box_iou(const Box& a, const Box& b) {
  const int w = std::max({a.x1, b.x1, 1}), h = std::max({a.y1, b.y1, 1});
  Mask ma(w, h, 0), mb(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      ma.at(x, y) = x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1;
      mb.at(x, y) = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
    }
  }
  return naive_iou(ma, mb);
}

inline double naive_overlap_degree(const std::vector<Box>& boxes) {
  double best = 0.0;
  for (size_t i = 0; i < boxes.size(); ++i) {
    for (size_t j = 0; j < boxes.size(); ++j) {
      if (i != j) best = std::max(best, naive_box_iou(boxes[i], boxes[j]));
    }
  }
  return best;
}

// One random evaluation problem: a few images with instance part maps, merged semantic
// maps and predictions that partly agree with the ground truth.
struct RandomMetricsCase {
  std::vector<FrameEvaluation> frames;
  std::vector<std::vector<Box>> boxes;
};

inline LabelMap random_person(std::mt19937_64& rng, int w, int h, int k, Box* box) {
  LabelMap m(w, h, 0);
  const int x0 = static_cast<int>(rng() % (w - 4)), y0 = static_cast<int>(rng() % (h - 4));
  const int x1 = x0 + 2 + static_cast<int>(rng() % (w - x0 - 2)), y1 = y0 + 2 + static_cast<int>(rng() % (h - y0 - 2));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.at(x, y) = 1 + static_cast<int>(rng() % (k - 1));
  }
  *box = Box{x0, y0, x1, y1};
  return m;
}

inline RandomMetricsCase random_metrics_case(std::mt19937_64& rng, int k, int size = 16) {
  RandomMetricsCase out;
  const int n_images = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n_images; ++i) {
    FrameEvaluation f;
    f.gt_parts = LabelMap(size, size, 0);
    f.pred_parts = LabelMap(size, size, 0);
    std::vector<Box> boxes;
    const int n_gt = static_cast<int>(rng() % 4);
    for (int g = 0; g < n_gt; ++g) {
      Box b;
      LabelMap inst = random_person(rng, size, size, k, &b);
      // Later people occlude earlier ones.
      for (size_t p = 0; p < inst.size(); ++p) {
        if (inst[p]) {
          for (auto& other : f.gt_instances) other[p] = 0;
          f.gt_parts[p] = inst[p];
        }
      }
      f.gt_instances.push_back(inst);
      boxes.push_back(b);
    }
    const int n_pred = static_cast<int>(rng() % 4);
    for (int a = 0; a < n_pred; ++a) {
      InstanceParsing ip;
      Box b;
      if (a < n_gt && rng() % 3 != 0) {
        ip.parts = f.gt_instances[a];
        for (auto& v : ip.parts.data) {
          if (rng() % 4 == 0) v = static_cast<int>(rng() % k);
        }
      } else {
        ip.parts = random_person(rng, size, size, k, &b);
      }
      ip.confidence = std::uniform_real_distribution<double>(0, 1)(rng);
      for (size_t p = 0; p < ip.parts.size(); ++p) {
        if (ip.parts[p]) f.pred_parts[p] = ip.parts[p];
      }
      f.pred_instances.push_back(std::move(ip));
    }
    // Sprinkle label noise into the merged map as well.
    for (auto& v : f.pred_parts.data) {
      if (rng() % 10 == 0) v = static_cast<int>(rng() % k);
    }
    f.overlap_degree = naive_overlap_degree(boxes);
    out.boxes.push_back(boxes);
    out.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace mvparse::testing

#endif  // MVPARSE_TESTS_METRIC_ORACLES_H_
