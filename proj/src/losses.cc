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

#include "mvparse/losses.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mvparse {

void PartProbMaps::validate() const {
  if (channels < 2) throw Error("PartProbMaps: need background and at least one part channel");
  if (width <= 0 || height <= 0) throw Error("PartProbMaps: empty grid");
  if (logits.size() != num_pixels() * channels) throw Error("PartProbMaps: logits size mismatch");
}

void PartProbMaps::softmax_at(size_t pixel, double* out) const {
  const double* z = pixel_logits(pixel);
  const double m = *std::max_element(z, z + channels);
  double s = 0.0;
  for (int c = 0; c < channels; ++c) {
    out[c] = std::exp(z[c] - m);
    s += out[c];
  }
  for (int c = 0; c < channels; ++c) out[c] /= s;
}

std::vector<double> PartProbMaps::probabilities() const {
  std::vector<double> p(logits.size());
  for (size_t i = 0; i < num_pixels(); ++i) softmax_at(i, p.data() + i * channels);
  return p;
}

namespace {

// Per-pixel softmax that reuses the previous result when a pixel repeats the previous
// pixel's logits (the constant outside-region rows).
class SoftmaxCursor {
 public:
  explicit SoftmaxCursor(const PartProbMaps& maps) : maps_(maps), probs_(maps.channels), last_(maps.channels) {}

  const double* at(size_t pixel) {
    const double* z = maps_.pixel_logits(pixel);
    if (!valid_ || !std::equal(z, z + maps_.channels, last_.begin())) {
      maps_.softmax_at(pixel, probs_.data());
      std::copy(z, z + maps_.channels, last_.begin());
      valid_ = true;
    }
    return probs_.data();
  }

 private:
  const PartProbMaps& maps_;
  std::vector<double> probs_, last_;
  bool valid_ = false;
};

// Index of the largest part probability (channels 1..C), lowest index on ties.
int part_argmax(const double* probs, int channels) {
  int best = 1;
  for (int c = 2; c < channels; ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  return best;
}

// Adds d(loss)/d(p_h) * d(p_h)/d(z) for one pixel, where p_h = probs[a].
void chain_part_union(const double* probs, int channels, int a, double grad_ph, double* grad_z) {
  const double pa = probs[a];
  for (int c = 0; c < channels; ++c) grad_z[c] += grad_ph * pa * ((c == a ? 1.0 : 0.0) - probs[c]);
}

void check_target(const PartProbMaps& maps, const InstanceTarget& target) {
  maps.validate();
  if (target.width != maps.width || target.height != maps.height) throw Error("loss: target shape mismatch");
}

LossOutput chain_from_prob(const PartProbMaps& maps, const ProbLoss& pl) {
  LossOutput out;
  out.value = pl.value;
  LogitGrad g(maps.logits.size(), 0.0);
  SoftmaxCursor softmax(maps);
  for (size_t i = 0; i < maps.num_pixels(); ++i) {
    if (pl.grad[i] == 0.0) continue;
    const double* probs = softmax.at(i);
    const int a = part_argmax(probs, maps.channels);
    chain_part_union(probs, maps.channels, a, pl.grad[i], g.data() + i * maps.channels);
  }
  out.gradient = {{std::move(g)}};
  return out;
}

double clamp_prob(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }
bool inside_clamp(double p, double eps) { return p > eps && p < 1.0 - eps; }

// -[t log p + (1-t) log(1-p)] and its derivative in p (zero where clamped).
std::pair<double, double> bce_term(double p, double t, double eps) {
  const double pc = clamp_prob(p, eps);
  const double value = -(t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc));
  const double grad = inside_clamp(p, eps) ? (-t / pc + (1.0 - t) / (1.0 - pc)) : 0.0;
  return {value, grad};
}

}  // namespace

PartUnion part_union(const PartProbMaps& maps) {
  maps.validate();
  PartUnion u{Grid<double>(maps.width, maps.height, 0.0), Grid<int>(maps.width, maps.height, 1)};
  SoftmaxCursor softmax(maps);
  for (size_t i = 0; i < maps.num_pixels(); ++i) {
    const double* probs = softmax.at(i);
    const int a = part_argmax(probs, maps.channels);
    u.prob[i] = probs[a];
    u.argmax[i] = a;
  }
  return u;
}

ProbLoss bce_on_prob(const Grid<double>& p_h, const InstanceTarget& target, const LossOptions& options) {
  if (!p_h.same_shape(target)) throw Error("foreground_bce: shape mismatch");
  ProbLoss out;
  out.grad.assign(p_h.size(), 0.0);
  const double norm = options.reduction == Reduction::kMean && !p_h.empty() ? 1.0 / p_h.size() : 1.0;
  double sum = 0.0;
  for (size_t i = 0; i < p_h.size(); ++i) {
    const auto [v, g] = bce_term(p_h[i], target[i] ? 1.0 : 0.0, options.eps);
    sum += v;
    out.grad[i] = g * norm;
  }
  out.value = sum * norm;
  return out;
}

std::vector<double> lovasz_grad(const std::vector<uint8_t>& gt_sorted) {
  const size_t n = gt_sorted.size();
  std::vector<double> g(n, 0.0);
  if (n == 0) return g;
  const double gts = std::accumulate(gt_sorted.begin(), gt_sorted.end(), 0.0);
  double cum_fg = 0.0, cum_bg = 0.0, prev = 0.0;
  for (size_t k = 0; k < n; ++k) {
    cum_fg += gt_sorted[k] ? 1.0 : 0.0;
    cum_bg += gt_sorted[k] ? 0.0 : 1.0;
    const double jac = 1.0 - (gts - cum_fg) / (gts + cum_bg);
    g[k] = jac - prev;
    prev = jac;
  }
  return g;
}

ProbLoss lovasz_on_prob(const Grid<double>& p_h, const InstanceTarget& target) {
  if (!p_h.same_shape(target)) throw Error("lovasz_miou: shape mismatch");
  const size_t n = p_h.size();
  ProbLoss out;
  out.grad.assign(n, 0.0);
  if (n == 0) return out;
  std::vector<double> err(n);
  std::vector<size_t> order(n);
  std::vector<uint8_t> gt_sorted(n);
  for (int cls = 0; cls < 2; ++cls) {
    for (size_t i = 0; i < n; ++i) {
      const bool fg = (target[i] != 0) == (cls == 1);
      const double q = cls == 1 ? p_h[i] : 1.0 - p_h[i];
      err[i] = fg ? 1.0 - q : q;
    }
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return err[a] > err[b]; });
    for (size_t k = 0; k < n; ++k) gt_sorted[k] = ((target[order[k]] != 0) == (cls == 1)) ? 1 : 0;
    const std::vector<double> g = lovasz_grad(gt_sorted);
    double loss = 0.0;
    for (size_t k = 0; k < n; ++k) {
      const size_t i = order[k];
      loss += err[i] * g[k];
      // d err / d p_h is -1 on human pixels and +1 elsewhere, for both classes.
      out.grad[i] += 0.5 * g[k] * (target[i] ? -1.0 : 1.0);
    }
    out.value += 0.5 * loss;
  }
  return out;
}

LossOutput foreground_bce(const PartProbMaps& maps, const InstanceTarget& target, const LossOptions& options) {
  check_target(maps, target);
  return chain_from_prob(maps, bce_on_prob(part_union(maps).prob, target, options));
}

LossOutput lovasz_miou(const PartProbMaps& maps, const InstanceTarget& target) {
  check_target(maps, target);
  return chain_from_prob(maps, lovasz_on_prob(part_union(maps).prob, target));
}

IgOutput ig_loss(const PartProbMaps& maps, const InstanceTarget& target, double lambda, const LossOptions& options) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("ig_loss: lambda outside [0,1]");
  check_target(maps, target);
  const Grid<double> ph = part_union(maps).prob;
  const ProbLoss fg = bce_on_prob(ph, target, options);
  const ProbLoss iou = lovasz_on_prob(ph, target);
  ProbLoss mix;
  mix.value = lambda * fg.value + (1.0 - lambda) * iou.value;
  mix.grad.resize(ph.size());
  for (size_t i = 0; i < ph.size(); ++i) mix.grad[i] = lambda * fg.grad[i] + (1.0 - lambda) * iou.grad[i];
  IgOutput out;
  out.loss = chain_from_prob(maps, mix);
  out.fg = fg.value;
  out.miou = iou.value;
  return out;
}

void compute_sample_geometry(MultiViewSample& sample) {
  if (!(sample.beta > 0.0)) throw Error("multi-view sample: beta must be positive");
  std::vector<Vec3> pts;
  for (const auto& p : sample.points) pts.push_back(p.position);
  for (auto& view : sample.views) {
    view.projections.clear();
    for (const auto& p : pts) view.projections.push_back(project(p, view.calib));
    view.in_beta.assign(pts.size(), 0);
    for (size_t j : visibility_filter(pts, view.depth, view.calib, sample.beta)) view.in_beta[j] = 1;
  }
}

std::vector<std::vector<LogitGrad>> zero_gradient(const MultiViewSample& sample) {
  std::vector<std::vector<LogitGrad>> g(sample.views.size());
  for (size_t i = 0; i < sample.views.size(); ++i) {
    for (const auto& m : sample.views[i].maps) g[i].emplace_back(m.logits.size(), 0.0);
  }
  return g;
}

namespace {

void check_sample(const MultiViewSample& sample) {
  if (sample.views.empty()) throw Error("multi-view loss: no views");
  for (const auto& v : sample.views) {
    if (v.projections.size() != sample.points.size() || v.in_beta.size() != sample.points.size()) {
      throw Error("multi-view loss: sample geometry not computed");
    }
    for (const auto& m : v.maps) {
      m.validate();
      if (m.width != v.calib.width || m.height != v.calib.height) throw Error("multi-view loss: map/view size mismatch");
    }
    for (const auto& [gt, idx] : v.match) {
      if (idx < 0 || idx >= static_cast<int>(v.maps.size())) throw Error("multi-view loss: match index out of range");
    }
  }
}

int owner_index(const ViewObservation& view, int instance_id) {
  auto it = view.match.find(instance_id);
  return it == view.match.end() ? -1 : it->second;
}

size_t pixel_of(const Projection& p, int width) { return static_cast<size_t>(p.py) * width + p.px; }

}  // namespace

LossOutput identity_loss(const MultiViewSample& sample, const LossOptions& options) {
  check_sample(sample);
  LossOutput out;
  out.gradient = zero_gradient(sample);
  double sum = 0.0;
  size_t pairs = 0;
  std::vector<double> probs;
  // First pass counts contributing (view, point) pairs for mean normalization.
  for (const auto& view : sample.views) {
    for (const auto& p : view.projections) pairs += p.valid && !view.maps.empty();
  }
  const double norm = options.reduction == Reduction::kMean && pairs > 0 ? 1.0 / pairs : 1.0;
  for (size_t i = 0; i < sample.views.size(); ++i) {
    const auto& view = sample.views[i];
    for (size_t j = 0; j < sample.points.size(); ++j) {
      const Projection& proj = view.projections[j];
      if (!proj.valid) continue;
      const int owner = owner_index(view, sample.points[j].instance_id);
      const size_t px = pixel_of(proj, view.calib.width);
      for (size_t k = 0; k < view.maps.size(); ++k) {
        const auto& m = view.maps[k];
        probs.resize(m.channels);
        m.softmax_at(px, probs.data());
        const int a = part_argmax(probs.data(), m.channels);
        const auto [v, g] = bce_term(probs[a], static_cast<int>(k) == owner ? 1.0 : 0.0, options.eps);
        sum += v;
        if (g != 0.0) chain_part_union(probs.data(), m.channels, a, g * norm, out.gradient[i][k].data() + px * m.channels);
      }
    }
  }
  if (pairs == 0) out.warnings.push_back("identity_loss: no valid projections");
  out.value = sum * norm;
  return out;
}

int aggregate_part_label(const MultiViewSample& sample, size_t point_index) {
  if (point_index >= sample.points.size()) throw Error("aggregate_part_label: point index out of range");
  std::vector<double> total;
  std::vector<double> probs;
  bool any = false;
  for (const auto& view : sample.views) {
    if (view.projections.size() != sample.points.size()) throw Error("aggregate_part_label: geometry not computed");
    const Projection& proj = view.projections[point_index];
    if (!proj.valid) continue;
    const int owner = owner_index(view, sample.points[point_index].instance_id);
    if (owner < 0) continue;
    const auto& m = view.maps[owner];
    probs.resize(m.channels);
    total.resize(m.channels, 0.0);
    m.softmax_at(pixel_of(proj, view.calib.width), probs.data());
    for (int c = 1; c < m.channels; ++c) total[c] += probs[c];
    any = true;
  }
  if (!any) throw Error("point invisible everywhere");
  int best = 1;
  for (int c = 2; c < static_cast<int>(total.size()); ++c) {
    if (total[c] > total[best]) best = c;
  }
  return best;
}

LossOutput part_loss(const MultiViewSample& sample, const LossOptions& options) {
  check_sample(sample);
  LossOutput out;
  out.gradient = zero_gradient(sample);

  // Aggregated labels are constants; points without any matched projection get 0.
  std::vector<int> label(sample.points.size(), 0);
  for (size_t j = 0; j < sample.points.size(); ++j) {
    bool visible = false;
    for (const auto& view : sample.views) {
      visible = visible || (view.projections[j].valid && owner_index(view, sample.points[j].instance_id) >= 0);
    }
    if (visible) label[j] = aggregate_part_label(sample, j);
  }

  size_t pairs = 0;
  for (const auto& view : sample.views) {
    for (size_t j = 0; j < sample.points.size(); ++j) {
      pairs += label[j] > 0 && view.in_beta[j] && view.projections[j].valid &&
               owner_index(view, sample.points[j].instance_id) >= 0;
    }
  }
  if (pairs == 0) {
    out.warnings.push_back("part_loss: no visibility-filtered points; loss is 0");
    return out;
  }
  const double norm = options.reduction == Reduction::kMean ? 1.0 / pairs : 1.0;
  double sum = 0.0;
  std::vector<double> probs;
  for (size_t i = 0; i < sample.views.size(); ++i) {
    const auto& view = sample.views[i];
    for (size_t j = 0; j < sample.points.size(); ++j) {
      if (label[j] == 0 || !view.in_beta[j] || !view.projections[j].valid) continue;
      const int owner = owner_index(view, sample.points[j].instance_id);
      if (owner < 0) continue;
      const auto& m = view.maps[owner];
      const size_t px = pixel_of(view.projections[j], view.calib.width);
      probs.resize(m.channels);
      m.softmax_at(px, probs.data());
      const double pk = probs[label[j]];
      sum += -std::log(clamp_prob(pk, options.eps));
      if (inside_clamp(pk, options.eps)) {
        double* g = out.gradient[i][owner].data() + px * m.channels;
        for (int c = 0; c < m.channels; ++c) g[c] += norm * (probs[c] - (c == label[j] ? 1.0 : 0.0));
      }
    }
  }
  out.value = sum * norm;
  return out;
}

MvigOutput mvig_loss(const MultiViewSample& sample, const std::vector<std::vector<InstanceTarget>>& targets,
                     double lambda, Objective objective, const LossOptions& options) {
  check_sample(sample);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("mvig_loss: lambda outside [0,1]");
  if (targets.size() != sample.views.size()) throw Error("mvig_loss: targets/views mismatch");
  MvigOutput out;
  out.loss.gradient = zero_gradient(sample);

  size_t n_ig = 0;
  for (size_t i = 0; i < sample.views.size(); ++i) {
    if (targets[i].size() != sample.views[i].maps.size()) throw Error("mvig_loss: targets/instances mismatch");
    n_ig += targets[i].size();
  }
  if (n_ig > 0) {
    const double inv = 1.0 / static_cast<double>(n_ig);
    for (size_t i = 0; i < sample.views.size(); ++i) {
      for (size_t k = 0; k < targets[i].size(); ++k) {
        const IgOutput ig = ig_loss(sample.views[i].maps[k], targets[i][k], lambda, options);
        out.fg += inv * ig.fg;
        out.miou += inv * ig.miou;
        out.ig += inv * ig.loss.value;
        const LogitGrad& g = ig.loss.single();
        LogitGrad& acc = out.loss.gradient[i][k];
        for (size_t t = 0; t < g.size(); ++t) acc[t] += inv * g[t];
      }
    }
  }

  auto accumulate = [&](const LossOutput& part) {
    for (size_t i = 0; i < part.gradient.size(); ++i) {
      for (size_t k = 0; k < part.gradient[i].size(); ++k) {
        const LogitGrad& g = part.gradient[i][k];
        LogitGrad& acc = out.loss.gradient[i][k];
        for (size_t t = 0; t < g.size(); ++t) acc[t] += g[t];
      }
    }
    out.loss.warnings.insert(out.loss.warnings.end(), part.warnings.begin(), part.warnings.end());
  };
  if (objective == Objective::kMVIG) {
    const LossOutput id = identity_loss(sample, options);
    const LossOutput pt = part_loss(sample, options);
    out.identity = id.value;
    out.part = pt.value;
    accumulate(id);
    accumulate(pt);
  }
  out.loss.value = out.identity + out.part + out.ig;
  return out;
}

}  // namespace mvparse
