// xmodal/ctc/ctc.h

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
#include <vector>

#include "xmodal/core/matrix.h"
#include "xmodal/core/posterior_grid.h"

namespace xmodal {

// Connectionist temporal classification. The label inventory follows the
// Alphabet convention throughout: non-blank ids in [0, |C|), blank = |C|,
// so a grid or logits matrix with |C'| columns has blank in the last one.

// The collapse function B: merges adjacent repeats, then removes blanks.
// A repeat separated by a blank survives ("ab-b" keeps both b's).
std::vector<int> collapse(std::span<const int> path, int blank_id);

// Smallest T that can carry `target` (length plus separating blanks).
size_t min_frames_for_target(std::span<const int> target);

// log p(target | grid) by summing every path with B(path) == target.
// Test oracle only: throws InstanceTooLarge beyond T=12 or |C'|=5.
// Returns -inf when no path collapses to the target.
double ctc_logprob_bruteforce(const PosteriorGrid& grid, std::span<const int> target);

struct CtcLossResult {
  double loss = 0.0;    // -log p(target | softmax(logits))
  Matrix grad_logits;   // T x |C'|, d loss / d logits, rows sum to 0
  Matrix occupancy;     // T x |C'|, per-frame posterior over symbols, rows sum to 1
};

// Forward-backward CTC loss in the log domain with analytic gradients.
// `logits` are pre-softmax scores, T x |C'|. Throws InfeasibleTarget when
// the target cannot be aligned within T frames; throws on non-finite
// logits or label ids outside [0, |C'|-1).
CtcLossResult ctc_loss(const Matrix& logits, std::span<const int> target);

}  // namespace xmodal
