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

#ifndef MVPARSE_GRADCHECK_H_
#define MVPARSE_GRADCHECK_H_

#include <functional>
#include <span>
#include <vector>

#include "mvparse/losses.h"

namespace mvparse {

struct GradCheckResult {
  double max_rel_error = 0.0;        // over coordinates that count towards pass/fail
  double max_rel_error_all = 0.0;    // including excluded non-smooth coordinates
  size_t checked = 0;
  std::vector<size_t> nonsmooth;     // coordinates excluded as kinks

  bool passed(double tol) const { return max_rel_error <= tol; }
};

// Central differences per coordinate against `analytic`, relative error with denominator
// max(|analytic|, |numeric|, 1e-8). A coordinate whose error exceeds `tol` is excluded as
// non-smooth when its one-sided slopes disagree and the analytic value agrees with one of
// them (a kink such as a sorting or argmax tie within the step).
GradCheckResult finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> x, std::span<const double> analytic, double h = 1e-5,
                                        double tol = 1e-4);

// Flattening helpers so sample-level losses can be checked coordinate by coordinate.
std::vector<double> flatten_logits(const MultiViewSample& sample);
void unflatten_logits(std::span<const double> flat, MultiViewSample& sample);
std::vector<double> flatten_gradient(const std::vector<std::vector<LogitGrad>>& gradient);

}  // namespace mvparse

#endif  // MVPARSE_GRADCHECK_H_
