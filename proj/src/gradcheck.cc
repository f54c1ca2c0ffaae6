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

#include "mvparse/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace mvparse {

GradCheckResult finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> x, std::span<const double> analytic, double h,
                                        double tol) {
  if (!(h > 0.0)) throw Error("finite_difference_check: step must be positive");
  if (x.size() != analytic.size()) throw Error("finite_difference_check: gradient size mismatch");
  GradCheckResult r;
  std::vector<double> xw(x.begin(), x.end());
  const double f0 = f(xw);
  for (size_t i = 0; i < xw.size(); ++i) {
    const double orig = xw[i];
    xw[i] = orig + h;
    const double fp = f(xw);
    xw[i] = orig - h;
    const double fm = f(xw);
    xw[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double scale = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double err = std::abs(a - numeric) / scale;
    ++r.checked;
    r.max_rel_error_all = std::max(r.max_rel_error_all, err);
    if (err > tol) {
      const double fwd = (fp - f0) / h;
      const double bwd = (f0 - fm) / h;
      const bool slopes_disagree = std::abs(fwd - bwd) > 2.0 * tol * scale;
      const bool matches_one_side = std::min(std::abs(a - fwd), std::abs(a - bwd)) <= 1e-3 * scale;
      if (slopes_disagree && matches_one_side) {
        r.nonsmooth.push_back(i);
        continue;
      }
    }
    r.max_rel_error = std::max(r.max_rel_error, err);
  }
  return r;
}

std::vector<double> flatten_logits(const MultiViewSample& sample) {
  std::vector<double> out;
  for (const auto& v : sample.views) {
    for (const auto& m : v.maps) out.insert(out.end(), m.logits.begin(), m.logits.end());
  }
  return out;
}

void unflatten_logits(std::span<const double> flat, MultiViewSample& sample) {
  size_t pos = 0;
  for (auto& v : sample.views) {
    for (auto& m : v.maps) {
      if (pos + m.logits.size() > flat.size()) throw Error("unflatten_logits: size mismatch");
      std::copy(flat.begin() + pos, flat.begin() + pos + m.logits.size(), m.logits.begin());
      pos += m.logits.size();
    }
  }
  if (pos != flat.size()) throw Error("unflatten_logits: size mismatch");
}

std::vector<double> flatten_gradient(const std::vector<std::vector<LogitGrad>>& gradient) {
  std::vector<double> out;
  for (const auto& v : gradient) {
    for (const auto& g : v) out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

}  // namespace mvparse
