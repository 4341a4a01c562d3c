// xmodal/core/log_math.h

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

#pragma once

#include <limits>
#include <span>
#include <vector>

#include "xmodal/core/matrix.h"

namespace xmodal {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)), stable for any mix of finite and -inf inputs.
double log_add(double a, double b);

// log sum_i exp(v_i) with max shift. Empty input is log of an empty sum: -inf.
double log_sum_exp(std::span<const double> values);

// Writes the log-softmax of `logits` into `out` (may alias `logits`).
void log_softmax(std::span<const double> logits, std::span<double> out);

std::vector<double> log_softmax(std::span<const double> logits);

// Row-wise log-softmax.
Matrix log_softmax_rows(const Matrix& logits);

}  // namespace xmodal
