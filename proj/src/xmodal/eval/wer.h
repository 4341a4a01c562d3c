// xmodal/eval/wer.h

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
#include <string>

namespace xmodal {

struct WerBreakdown {
  size_t substitutions = 0;
  size_t insertions = 0;
  size_t deletions = 0;
  size_t ref_words = 0;
  double wer = 0.0;  // (S + I + D) / ref_words

  size_t edits() const { return substitutions + insertions + deletions; }
};

// Word-level Levenshtein alignment, unit costs. The reference must be
// nonempty (EmptyReference otherwise); the hypothesis may be empty. The
// breakdown comes from one minimal-cost alignment (substitution preferred
// over deletion over insertion on ties); the total edit count is unique.
WerBreakdown wer(std::span<const std::string> reference,
                 std::span<const std::string> hypothesis);

// Whitespace-tokenizing convenience overload.
WerBreakdown wer(const std::string& reference, const std::string& hypothesis);

}  // namespace xmodal
