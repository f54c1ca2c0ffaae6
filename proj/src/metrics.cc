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

#include "mvparse/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace mvparse {

int LabelSpace::id_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i) {
    if (names[i] == name) return i;
  }
  return -1;
}

void LabelSpace::validate() const {
  if (names.size() < 2) throw Error("label space needs background and at least one part");
  for (int c : ignore) {
    if (c <= 0 || c >= size()) throw Error("label space: ignore entry out of range or background");
  }
  for (const auto& [from, to] : mapping) {
    if (from <= 0 || from >= size() || to < 0 || to >= size()) throw Error("label space: mapping entry out of range");
    if (to == 0) throw Error("label space: parts may not be mapped to background");
  }
}

int LabelSpace::map(int label) const {
  auto it = mapping.find(label);
  return it == mapping.end() ? label : it->second;
}

LabelSpace LabelSpace::default_space() {
  LabelSpace s;
  s.names = {"background", "head", "torso", "upper-arm", "lower-arm", "upper-leg", "lower-leg"};
  return s;
}

double mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw Error("mask_iou: shape mismatch");
  long long inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double box_iou(const Box& a, const Box& b) {
  if (a.x1 < a.x0 || a.y1 < a.y0 || b.x1 < b.x0 || b.y1 < b.y0) throw Error("box_iou: invalid box");
  const Box i{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  const long long inter = i.area();
  const long long uni = a.area() + b.area() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double overlap_degree(const std::vector<Box>& boxes) {
  double best = 0.0;
  for (size_t i = 0; i < boxes.size(); ++i) {
    for (size_t j = i + 1; j < boxes.size(); ++j) best = std::max(best, box_iou(boxes[i], boxes[j]));
  }
  return best;
}

std::string OverlapPartition::subset_name(size_t t) const {
  return "O" + std::to_string(static_cast<int>(std::lround(thresholds.at(t) * 100)));
}

OverlapPartition partition_by_overlap(const std::vector<double>& degrees, const std::vector<double>& thresholds) {
  OverlapPartition p;
  p.thresholds = thresholds;
  p.degrees = degrees;
  p.subsets.resize(thresholds.size());
  for (size_t t = 0; t < thresholds.size(); ++t) {
    for (size_t i = 0; i < degrees.size(); ++i) {
      if (degrees[i] >= thresholds[t]) p.subsets[t].push_back(i);
    }
  }
  return p;
}

namespace {

void check_pairs(std::span<const LabelMap> pred, std::span<const LabelMap> gt) {
  if (pred.size() != gt.size()) throw Error("metrics: prediction/ground-truth count mismatch");
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i].same_shape(gt[i])) throw Error("metrics: shape mismatch");
  }
}

void check_label(int label, int k) {
  if (label < 0 || label >= k) throw Error("metrics: label " + std::to_string(label) + " outside label space");
}

}  // namespace

double semantic_miou(std::span<const LabelMap> pred, std::span<const LabelMap> gt, const LabelSpace& labels,
                     MiouVariant variant) {
  check_pairs(pred, gt);
  const int k = labels.size();
  std::vector<long long> inter(k, 0), uni(k, 0), gt_count(k, 0);
  for (size_t i = 0; i < pred.size(); ++i) {
    for (size_t p = 0; p < pred[i].size(); ++p) {
      int a = pred[i][p], b = gt[i][p];
      check_label(a, k);
      check_label(b, k);
      if (variant == MiouVariant::kMapped) {
        a = labels.map(a);
        b = labels.map(b);
      } else if (variant == MiouVariant::kIgnore) {
        if (labels.ignore.count(a) || labels.ignore.count(b)) continue;
      }
      ++gt_count[b];
      if (a == b) {
        ++inter[a];
        ++uni[a];
      } else {
        ++uni[a];
        ++uni[b];
      }
    }
  }
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < k; ++c) {
    if (gt_count[c] == 0) continue;
    if (variant == MiouVariant::kIgnore && labels.ignore.count(c)) continue;
    sum += static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

Mask binarize(const Grid<double>& prob, double threshold) {
  Mask m(prob.width, prob.height, 0);
  for (size_t i = 0; i < prob.size(); ++i) m[i] = prob[i] >= threshold;
  return m;
}

double human_miou_global(std::span<const Mask> pred_fg, std::span<const Mask> gt_fg, double* fg_only) {
  if (pred_fg.size() != gt_fg.size()) throw Error("human_miou: count mismatch");
  long long inter[2] = {0, 0}, uni[2] = {0, 0};
  for (size_t i = 0; i < pred_fg.size(); ++i) {
    if (!pred_fg[i].same_shape(gt_fg[i])) throw Error("human_miou: shape mismatch");
    for (size_t p = 0; p < pred_fg[i].size(); ++p) {
      const int a = pred_fg[i][p] != 0, b = gt_fg[i][p] != 0;
      for (int c = 0; c < 2; ++c) {
        inter[c] += (a == c) && (b == c);
        uni[c] += (a == c) || (b == c);
      }
    }
  }
  auto iou = [&](int c) { return uni[c] == 0 ? 0.0 : static_cast<double>(inter[c]) / static_cast<double>(uni[c]); };
  if (fg_only) *fg_only = iou(1);
  return 0.5 * (iou(0) + iou(1));
}

std::vector<std::pair<int, int>> greedy_match(const std::vector<std::vector<double>>& scores) {
  struct Cand {
    double s;
    int r, c;
  };
  std::vector<Cand> cands;
  for (size_t r = 0; r < scores.size(); ++r) {
    for (size_t c = 0; c < scores[r].size(); ++c) {
      if (scores[r][c] > 0.0) cands.push_back({scores[r][c], static_cast<int>(r), static_cast<int>(c)});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.s != b.s) return a.s > b.s;
    if (a.r != b.r) return a.r < b.r;
    return a.c < b.c;
  });
  std::vector<bool> row_used(scores.size(), false);
  size_t ncols = 0;
  for (const auto& row : scores) ncols = std::max(ncols, row.size());
  std::vector<bool> col_used(ncols, false);
  std::vector<std::pair<int, int>> out;
  for (const auto& c : cands) {
    if (row_used[c.r] || col_used[c.c]) continue;
    row_used[c.r] = col_used[c.c] = true;
    out.emplace_back(c.r, c.c);
  }
  return out;
}

double human_miou_instance(const std::vector<std::vector<Mask>>& pred, const std::vector<std::vector<Mask>>& gt) {
  if (pred.size() != gt.size()) throw Error("human_miou_instance: image count mismatch");
  double sum = 0.0;
  size_t n_gt = 0;
  for (size_t i = 0; i < gt.size(); ++i) {
    n_gt += gt[i].size();
    std::vector<std::vector<double>> m(pred[i].size(), std::vector<double>(gt[i].size(), 0.0));
    for (size_t a = 0; a < pred[i].size(); ++a) {
      for (size_t b = 0; b < gt[i].size(); ++b) m[a][b] = mask_iou(pred[i][a], gt[i][b]);
    }
    for (auto [a, b] : greedy_match(m)) sum += m[a][b];
  }
  return n_gt == 0 ? 0.0 : sum / static_cast<double>(n_gt);
}

Accuracies accuracies(std::span<const LabelMap> pred, std::span<const LabelMap> gt, int num_categories) {
  check_pairs(pred, gt);
  std::vector<long long> hit(num_categories, 0), total(num_categories, 0);
  long long correct = 0, all = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    for (size_t p = 0; p < pred[i].size(); ++p) {
      const int a = pred[i][p], b = gt[i][p];
      check_label(a, num_categories);
      check_label(b, num_categories);
      ++all;
      ++total[b];
      if (a == b) {
        ++correct;
        ++hit[b];
      }
    }
  }
  Accuracies acc;
  acc.pixel = all == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(all);
  double s = 0.0;
  int n = 0;
  for (int c = 0; c < num_categories; ++c) {
    if (total[c] == 0) continue;
    s += static_cast<double>(hit[c]) / static_cast<double>(total[c]);
    ++n;
  }
  acc.mean = n == 0 ? 0.0 : s / n;
  return acc;
}

double mean_part_iou(const LabelMap& pred, const LabelMap& gt, int num_categories) {
  if (!pred.same_shape(gt)) throw Error("mean_part_iou: shape mismatch");
  std::vector<long long> inter(num_categories, 0), uni(num_categories, 0);
  for (size_t p = 0; p < pred.size(); ++p) {
    const int a = pred[p], b = gt[p];
    check_label(a, num_categories);
    check_label(b, num_categories);
    if (a == b) {
      if (a > 0) ++inter[a], ++uni[a];
    } else {
      if (a > 0) ++uni[a];
      if (b > 0) ++uni[b];
    }
  }
  double s = 0.0;
  int n = 0;
  for (int c = 1; c < num_categories; ++c) {
    if (uni[c] == 0) continue;
    s += static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    ++n;
  }
  return n == 0 ? 0.0 : s / n;
}

double average_precision(const std::vector<bool>& tp, size_t num_gt) {
  if (num_gt == 0) return 0.0;
  const size_t n = tp.size();
  std::vector<double> prec(n), rec(n);
  size_t ctp = 0;
  for (size_t i = 0; i < n; ++i) {
    ctp += tp[i];
    prec[i] = static_cast<double>(ctp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(ctp) / static_cast<double>(num_gt);
  }
  // Precision envelope, then sum over recall steps.
  for (size_t i = n; i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0, prev_rec = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (rec[i] > prev_rec) {
      ap += (rec[i] - prev_rec) * prec[i];
      prev_rec = rec[i];
    }
  }
  return ap;
}

double ap_p_vol(const std::vector<std::vector<InstanceParsing>>& pred, const std::vector<std::vector<LabelMap>>& gt,
                int num_categories, std::vector<std::string>* warnings) {
  if (pred.size() != gt.size()) throw Error("ap_p_vol: image count mismatch");
  size_t num_gt = 0;
  for (const auto& g : gt) num_gt += g.size();
  if (num_gt == 0) {
    if (warnings) warnings->push_back("ap_p_vol: no ground-truth instances; reporting 0");
    return 0.0;
  }
  struct Det {
    double conf;
    size_t image, index;
  };
  std::vector<Det> dets;
  std::vector<std::vector<std::vector<double>>> ious(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    ious[i].assign(pred[i].size(), std::vector<double>(gt[i].size(), 0.0));
    for (size_t a = 0; a < pred[i].size(); ++a) {
      const double conf = pred[i][a].confidence;
      if (!(conf >= 0.0 && conf <= 1.0)) throw Error("ap_p_vol: confidence outside [0,1]");
      dets.push_back({conf, i, a});
      for (size_t b = 0; b < gt[i].size(); ++b) ious[i][a][b] = mean_part_iou(pred[i][a].parts, gt[i][b], num_categories);
    }
  }
  std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) { return a.conf > b.conf; });

  double total = 0.0;
  for (int step = 1; step <= 9; ++step) {
    const double thr = step / 10.0;
    std::vector<std::vector<bool>> used(gt.size());
    for (size_t i = 0; i < gt.size(); ++i) used[i].assign(gt[i].size(), false);
    std::vector<bool> tp;
    tp.reserve(dets.size());
    for (const auto& d : dets) {
      const auto& row = ious[d.image][d.index];
      int best = -1;
      for (size_t b = 0; b < row.size(); ++b) {
        if (best < 0 || row[b] > row[best]) best = static_cast<int>(b);
      }
      const bool hit = best >= 0 && row[best] > thr && !used[d.image][best];
      if (hit) used[d.image][best] = true;
      tp.push_back(hit);
    }
    total += average_precision(tp, num_gt);
  }
  return total / 9.0;
}

MetricsReport evaluate_frames(std::span<const FrameEvaluation> frames, const LabelSpace& labels,
                              std::vector<std::string>* warnings) {
  MetricsReport r;
  r.num_images = frames.size();
  if (frames.empty()) return r;
  std::vector<LabelMap> pred, gt;
  std::vector<Mask> pred_fg, gt_fg;
  std::vector<std::vector<Mask>> pred_inst, gt_inst;
  std::vector<std::vector<InstanceParsing>> pred_parse;
  std::vector<std::vector<LabelMap>> gt_parse;
  for (const auto& f : frames) {
    pred.push_back(f.pred_parts);
    gt.push_back(f.gt_parts);
    Mask pf(f.pred_parts.width, f.pred_parts.height, 0), gf(f.gt_parts.width, f.gt_parts.height, 0);
    for (size_t p = 0; p < pf.size(); ++p) {
      pf[p] = f.pred_parts[p] != 0;
      gf[p] = f.gt_parts[p] != 0;
    }
    pred_fg.push_back(std::move(pf));
    gt_fg.push_back(std::move(gf));
    auto to_mask = [](const LabelMap& m) {
      Mask out(m.width, m.height, 0);
      for (size_t p = 0; p < m.size(); ++p) out[p] = m[p] != 0;
      return out;
    };
    std::vector<Mask> pi, gi;
    for (const auto& inst : f.pred_instances) pi.push_back(to_mask(inst.parts));
    for (const auto& inst : f.gt_instances) gi.push_back(to_mask(inst));
    pred_inst.push_back(std::move(pi));
    gt_inst.push_back(std::move(gi));
    pred_parse.push_back(f.pred_instances);
    gt_parse.push_back(f.gt_instances);
  }
  r.miou_p = semantic_miou(pred, gt, labels, MiouVariant::kFull);
  r.miou_p_m = semantic_miou(pred, gt, labels, MiouVariant::kMapped);
  r.miou_p_ig = semantic_miou(pred, gt, labels, MiouVariant::kIgnore);
  r.miou_h = human_miou_global(pred_fg, gt_fg, &r.miou_h_fg);
  r.miou_h_i = human_miou_instance(pred_inst, gt_inst);
  const Accuracies acc = accuracies(pred, gt, labels.size());
  r.acc_pixel = acc.pixel;
  r.acc_mean = acc.mean;
  r.ap_p_vol = ap_p_vol(pred_parse, gt_parse, labels.size(), warnings);
  return r;
}

std::vector<MetricsReport> evaluate_by_overlap(std::span<const FrameEvaluation> frames, const LabelSpace& labels,
                                               std::vector<std::string>* warnings) {
  std::vector<double> degrees;
  for (const auto& f : frames) degrees.push_back(f.overlap_degree);
  const OverlapPartition part = partition_by_overlap(degrees);
  std::vector<MetricsReport> out;
  out.push_back(evaluate_frames(frames, labels, warnings));
  for (size_t t = 0; t < part.thresholds.size(); ++t) {
    std::vector<FrameEvaluation> subset;
    for (size_t i : part.subsets[t]) subset.push_back(frames[i]);
    MetricsReport r = evaluate_frames(subset, labels, warnings);
    r.subset = part.subset_name(t);
    out.push_back(r);
  }
  return out;
}

std::string metrics_json(const std::vector<MetricsReport>& reports, bool include_fg) {
  nlohmann::ordered_json j;
  j["conventions"] = {
      {"miou", "dataset-level intersection/union, averaged over categories present in ground truth"},
      {"miou_h", "mean of background and human-union IoU"},
      {"miou_h_i", "greedy IoU matching per image, unmatched ground truth scores 0"},
      {"ap_p_vol", "confidence-ordered greedy matching on mean part IoU, all-point PR area, thresholds 0.1:0.1:0.9"},
      {"empty_iou", "IoU of two empty sets is 0"}};
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json o = {{"subset", r.subset},     {"num_images", r.num_images}, {"miou_p", r.miou_p},
                                {"miou_p_m", r.miou_p_m}, {"miou_p_ig", r.miou_p_ig},   {"miou_h_i", r.miou_h_i},
                                {"miou_h", r.miou_h}};
    if (include_fg) o["miou_h_fg"] = r.miou_h_fg;
    o["acc_pixel"] = r.acc_pixel;
    o["acc_mean"] = r.acc_mean;
    o["ap_p_vol"] = r.ap_p_vol;
    arr.push_back(o);
  }
  j["subsets"] = arr;
  return j.dump(2) + "\n";
}

std::string metrics_table(const std::vector<MetricsReport>& reports, bool include_fg) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %6s %8s %8s %9s %8s %8s", "subset", "images", "mIoU_p", "mIoU_p,m",
                "mIoU_p,ig", "mIoU_h,i", "mIoU_h");
  os << line;
  if (include_fg) os << "  IoU_fg";
  std::snprintf(line, sizeof(line), " %9s %8s %8s\n", "acc_pixel", "acc_mean", "AP^p_vol");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-8s %6zu %8.2f %8.2f %9.2f %8.2f %8.2f", r.subset.c_str(), r.num_images,
                  100 * r.miou_p, 100 * r.miou_p_m, 100 * r.miou_p_ig, 100 * r.miou_h_i, 100 * r.miou_h);
    os << line;
    if (include_fg) {
      std::snprintf(line, sizeof(line), " %7.2f", 100 * r.miou_h_fg);
      os << line;
    }
    std::snprintf(line, sizeof(line), " %9.2f %8.2f %8.2f\n", 100 * r.acc_pixel, 100 * r.acc_mean, 100 * r.ap_p_vol);
    os << line;
  }
  return os.str();
}

}  // namespace mvparse
