// xmodal/core/posterior_grid.h

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

#include <utility>

#include "xmodal/core/alphabet.h"
#include "xmodal/core/matrix.h"

namespace xmodal {

// T x |C'| grid of per-frame log-probability distributions over the
// augmented alphabet. Every row log-normalizes to 0.
class PosteriorGrid {
 public:
  // Validates each row to 1e-9; use with_renormalization for file input
  // that may carry rounding drift.
  PosteriorGrid(Alphabet alphabet, Matrix log_probs);

  // Accepts rows whose log-sum-exp is within `tolerance` of 0 and
  // renormalizes them exactly; beyond tolerance throws FormatError.
  static PosteriorGrid with_renormalization(Alphabet alphabet, Matrix log_probs,
                                            double tolerance);

  const Alphabet& alphabet() const { return alphabet_; }
  size_t frames() const { return log_probs_.rows(); }
  const Matrix& log_probs() const { return log_probs_; }
  double log_prob(size_t t, int c) const { return log_probs_.at(t, static_cast<size_t>(c)); }

 private:
  struct unchecked_tag {};
  PosteriorGrid(Alphabet alphabet, Matrix log_probs, unchecked_tag)
      : alphabet_(std::move(alphabet)), log_probs_(std::move(log_probs)) {}

  Alphabet alphabet_;
  Matrix log_probs_;
};

}  // namespace xmodal
