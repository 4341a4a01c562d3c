// xmodal/core/log_math.cc

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

#include "xmodal/core/log_math.h"

#include <algorithm>
#include <cmath>

#include "xmodal/core/errors.h"

namespace xmodal {

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  double m = kNegInf;
  for (double v : values) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;  // all terms are zero probability
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

void log_softmax(std::span<const double> logits, std::span<double> out) {
  if (logits.size() != out.size()) throw ShapeMismatchError("log_softmax: size mismatch");
  if (logits.empty()) return;
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double acc = 0.0;
  for (double v : logits) acc += std::exp(v - m);
  const double lz = std::log(acc);
  for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - m - lz;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  log_softmax(logits, out);
  return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (size_t t = 0; t < logits.rows(); ++t) log_softmax(logits.row(t), out.row(t));
  return out;
}

}  // namespace xmodal
