// xmodal/distill/distill.h

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

#include <span>

#include "xmodal/core/matrix.h"
#include "xmodal/core/posterior_grid.h"
#include "xmodal/defaults.h"

namespace xmodal {

// Mixing weights of the combined objective. The defaults balance the
// gradient norms of the two terms.
struct LossWeights {
  double lambda_ctc = kDefaultLambdaCtc;
  double lambda_kd = kDefaultLambdaKd;
};

struct KdLossResult {
  double loss = 0.0;   // sum over frames of H(teacher_t, student_t)
  Matrix grad_logits;  // per row exactly softmax(student) - teacher
};

// Frame-wise cross-entropy between the teacher posterior grid and the
// student's per-frame softmax. Summed over frames. Throws ShapeMismatch
// when T or |C'| differ.
KdLossResult kd_loss(const PosteriorGrid& teacher, const Matrix& student_logits);

struct CombinedLossResult {
  double total = 0.0;
  double ctc_part = 0.0;
  double kd_part = 0.0;
  Matrix grad_logits;  // lambda_ctc * grad_ctc + lambda_kd * grad_kd
};

// total = lambda_ctc * L_CTC(student_logits, target)
//       + lambda_kd  * L_KD(teacher, student_logits).
// Propagates InfeasibleTarget from the CTC term; callers that want to keep
// the sample fall back to kd_loss alone. Throws ConfigError on negative
// weights or both weights zero.
CombinedLossResult combined_loss(const PosteriorGrid& teacher, const Matrix& student_logits,
                                 std::span<const int> target, const LossWeights& weights);

}  // namespace xmodal
