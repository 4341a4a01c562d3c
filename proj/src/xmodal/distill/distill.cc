// xmodal/distill/distill.cc

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

#include "xmodal/distill/distill.h"

#include <cmath>

#include "xmodal/core/errors.h"
#include "xmodal/core/log_math.h"
#include "xmodal/ctc/ctc.h"

namespace xmodal {

KdLossResult kd_loss(const PosteriorGrid& teacher, const Matrix& student_logits) {
  const size_t num_frames = teacher.frames();
  const size_t num_classes = static_cast<size_t>(teacher.alphabet().num_classes());
  if (student_logits.rows() != num_frames)
    throw ShapeMismatchError("teacher has " + std::to_string(num_frames) +
                             " frames, student logits have " +
                             std::to_string(student_logits.rows()));
  if (student_logits.cols() != num_classes)
    throw ShapeMismatchError("teacher alphabet has " + std::to_string(num_classes) +
                             " classes, student logits have " +
                             std::to_string(student_logits.cols()));
  if (!student_logits.all_finite()) throw Error("kd_loss requires finite student logits");

  const Matrix student_logp = log_softmax_rows(student_logits);
  KdLossResult result;
  result.grad_logits = Matrix(num_frames, num_classes, 0.0);
  for (size_t t = 0; t < num_frames; ++t) {
    for (size_t c = 0; c < num_classes; ++c) {
      const double p_teacher = std::exp(teacher.log_prob(t, static_cast<int>(c)));
      if (p_teacher > 0.0) result.loss -= p_teacher * student_logp.at(t, c);
      result.grad_logits.at(t, c) = std::exp(student_logp.at(t, c)) - p_teacher;
    }
  }
  return result;
}

CombinedLossResult combined_loss(const PosteriorGrid& teacher, const Matrix& student_logits,
                                 std::span<const int> target, const LossWeights& weights) {
  if (weights.lambda_ctc < 0.0 || weights.lambda_kd < 0.0)
    throw ConfigError("loss weights must be nonnegative");
  if (weights.lambda_ctc == 0.0 && weights.lambda_kd == 0.0)
    throw ConfigError("at least one loss weight must be positive");

  const CtcLossResult ctc = ctc_loss(student_logits, target);
  const KdLossResult kd = kd_loss(teacher, student_logits);

  CombinedLossResult result;
  result.ctc_part = ctc.loss;
  result.kd_part = kd.loss;
  result.total = weights.lambda_ctc * ctc.loss + weights.lambda_kd * kd.loss;
  result.grad_logits = Matrix(student_logits.rows(), student_logits.cols());
  for (size_t t = 0; t < student_logits.rows(); ++t)
    for (size_t c = 0; c < student_logits.cols(); ++c)
      result.grad_logits.at(t, c) = weights.lambda_ctc * ctc.grad_logits.at(t, c) +
                                    weights.lambda_kd * kd.grad_logits.at(t, c);
  return result;
}

}  // namespace xmodal
