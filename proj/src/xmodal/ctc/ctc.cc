// xmodal/ctc/ctc.cc

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

#include "xmodal/ctc/ctc.h"

#include <cmath>
#include <cstdlib>

#include "xmodal/core/errors.h"
#include "xmodal/core/log_math.h"

namespace xmodal {

std::vector<int> collapse(std::span<const int> path, int blank_id) {
  std::vector<int> out;
  out.reserve(path.size());
  for (size_t i = 0; i < path.size(); ++i) {
    if (path[i] == blank_id) continue;
    if (i > 0 && path[i] == path[i - 1]) continue;
    out.push_back(path[i]);
  }
  return out;
}

size_t min_frames_for_target(std::span<const int> target) {
  size_t frames = target.size();
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++frames;
  return frames;
}

double ctc_logprob_bruteforce(const PosteriorGrid& grid, std::span<const int> target) {
  const size_t num_frames = grid.frames();
  const int num_classes = grid.alphabet().num_classes();
  if (num_frames > 12 || num_classes > 5)
    throw InstanceTooLargeError("brute-force path enumeration capped at T=12, |C'|=5, got T=" +
                                std::to_string(num_frames) + ", |C'|=" +
                                std::to_string(num_classes));
  const int blank = grid.alphabet().blank_id();
  if (num_frames == 0) return target.empty() ? 0.0 : kNegInf;

  std::vector<int> path(num_frames, 0);
  double total = 0.0;
  // Odometer over all |C'|^T paths.
  while (true) {
    const std::vector<int> collapsed = collapse(path, blank);
    if (collapsed.size() == target.size() &&
        std::equal(collapsed.begin(), collapsed.end(), target.begin())) {
      double logp = 0.0;
      for (size_t t = 0; t < num_frames; ++t) logp += grid.log_prob(t, path[t]);
      total += std::exp(logp);
    }
    size_t pos = 0;
    while (pos < num_frames && ++path[pos] == num_classes) path[pos++] = 0;
    if (pos == num_frames) break;
  }
  return total > 0.0 ? std::log(total) : kNegInf;
}

namespace {

// Symbol of slot s in the augmented target: blanks at even slots,
// target labels at odd slots.
inline int augmented_symbol(std::span<const int> target, int blank, size_t s) {
  return (s % 2 == 0) ? blank : target[s / 2];
}

}  // namespace

CtcLossResult ctc_loss(const Matrix& logits, std::span<const int> target) {
  const size_t num_frames = logits.rows();
  const size_t num_classes = logits.cols();
  if (num_classes < 2) throw ShapeMismatchError("logits need at least two classes");
  if (!logits.all_finite()) throw Error("ctc_loss requires finite logits");
  const int blank = static_cast<int>(num_classes) - 1;
  for (int id : target)
    if (id < 0 || id >= blank)
      throw Error("target label id " + std::to_string(id) + " outside [0, " +
                  std::to_string(blank) + ")");

  const size_t min_frames = min_frames_for_target(target);
  if (min_frames > num_frames)
    throw InfeasibleTargetError(target.size(), min_frames, num_frames);

  const Matrix logp = log_softmax_rows(logits);
  const size_t S = 2 * target.size() + 1;

  auto sym = [&](size_t s) { return augmented_symbol(target, blank, s); };

  // Both lattices include the emission at their own frame, so a node's
  // path posterior is alpha + beta minus the doubly counted emission.
  Matrix alpha(num_frames, S, kNegInf);
  alpha.at(0, 0) = logp.at(0, static_cast<size_t>(sym(0)));
  if (S > 1) alpha.at(0, 1) = logp.at(0, static_cast<size_t>(sym(1)));
  for (size_t t = 1; t < num_frames; ++t) {
    for (size_t s = 0; s < S; ++s) {
      double acc = alpha.at(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha.at(t - 1, s - 1));
      if (s >= 2 && sym(s) != blank && sym(s) != sym(s - 2))
        acc = log_add(acc, alpha.at(t - 1, s - 2));
      alpha.at(t, s) = acc + logp.at(t, static_cast<size_t>(sym(s)));
    }
  }

  double log_p_target = alpha.at(num_frames - 1, S - 1);
  if (S > 1) log_p_target = log_add(log_p_target, alpha.at(num_frames - 1, S - 2));
  // Feasible targets always have at least one positive-probability path
  // under a softmax grid, so this cannot be -inf here.

  Matrix beta(num_frames, S, kNegInf);
  beta.at(num_frames - 1, S - 1) = logp.at(num_frames - 1, static_cast<size_t>(sym(S - 1)));
  if (S > 1)
    beta.at(num_frames - 1, S - 2) = logp.at(num_frames - 1, static_cast<size_t>(sym(S - 2)));
  for (size_t t = num_frames - 1; t-- > 0;) {
    for (size_t s = 0; s < S; ++s) {
      double acc = beta.at(t + 1, s);
      if (s + 1 < S) acc = log_add(acc, beta.at(t + 1, s + 1));
      if (s + 2 < S && sym(s) != blank && sym(s) != sym(s + 2))
        acc = log_add(acc, beta.at(t + 1, s + 2));
      beta.at(t, s) = acc + logp.at(t, static_cast<size_t>(sym(s)));
    }
  }

  CtcLossResult result;
  result.loss = -log_p_target;
  result.occupancy = Matrix(num_frames, num_classes, 0.0);
  result.grad_logits = Matrix(num_frames, num_classes, 0.0);
  for (size_t t = 0; t < num_frames; ++t) {
    for (size_t s = 0; s < S; ++s) {
      const size_t c = static_cast<size_t>(sym(s));
      const double node = alpha.at(t, s) + beta.at(t, s) - logp.at(t, c) - log_p_target;
      result.occupancy.at(t, c) += std::exp(node);
    }
    for (size_t c = 0; c < num_classes; ++c)
      result.grad_logits.at(t, c) = std::exp(logp.at(t, c)) - result.occupancy.at(t, c);
  }
  return result;
}

}  // namespace xmodal
