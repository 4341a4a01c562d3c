// xmodal/core/posterior_grid.cc

// Copyright 2026  The xmodal authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xmodal/core/posterior_grid.h"

#include <cmath>

#include "xmodal/core/errors.h"
#include "xmodal/core/log_math.h"

namespace xmodal {

namespace {
constexpr double kRowTolerance = 1e-9;

void check_shape(const Alphabet& alphabet, const Matrix& log_probs) {
  if (log_probs.cols() != static_cast<size_t>(alphabet.num_classes()))
    throw ShapeMismatchError("posterior grid has " + std::to_string(log_probs.cols()) +
                             " columns, alphabet expects " +
                             std::to_string(alphabet.num_classes()));
  if (!log_probs.is_log_domain_valid())
    throw FormatError("posterior grid contains NaN or positive-infinite entries");
}
}  // namespace

PosteriorGrid::PosteriorGrid(Alphabet alphabet, Matrix log_probs)
    : alphabet_(std::move(alphabet)), log_probs_(std::move(log_probs)) {
  check_shape(alphabet_, log_probs_);
  for (size_t t = 0; t < log_probs_.rows(); ++t) {
    const double lse = log_sum_exp(log_probs_.row(t));
    if (std::abs(lse) > kRowTolerance)
      throw FormatError("posterior row " + std::to_string(t) +
                        " is not normalized (log-sum-exp = " + std::to_string(lse) + ")");
  }
}

PosteriorGrid PosteriorGrid::with_renormalization(Alphabet alphabet, Matrix log_probs,
                                                  double tolerance) {
  check_shape(alphabet, log_probs);
  for (size_t t = 0; t < log_probs.rows(); ++t) {
    const double lse = log_sum_exp(log_probs.row(t));
    if (std::abs(lse) > tolerance)
      throw FormatError("posterior row " + std::to_string(t) +
                        " drifts beyond tolerance (log-sum-exp = " + std::to_string(lse) +
                        ")");
    for (double& v : log_probs.row(t)) v -= lse;
  }
  return PosteriorGrid(std::move(alphabet), std::move(log_probs), unchecked_tag{});
}

}  // namespace xmodal
