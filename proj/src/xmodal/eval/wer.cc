// xmodal/eval/wer.cc

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

#include "xmodal/eval/wer.h"

#include <vector>

#include "xmodal/core/alphabet.h"
#include "xmodal/core/errors.h"

namespace xmodal {

WerBreakdown wer(std::span<const std::string> reference,
                 std::span<const std::string> hypothesis) {
  if (reference.empty()) throw EmptyReferenceError("WER reference must be nonempty");
  const size_t R = reference.size();
  const size_t H = hypothesis.size();

  // dist[i][j]: minimal edits aligning reference[0,i) to hypothesis[0,j).
  std::vector<std::vector<size_t>> dist(R + 1, std::vector<size_t>(H + 1));
  for (size_t i = 0; i <= R; ++i) dist[i][0] = i;
  for (size_t j = 0; j <= H; ++j) dist[0][j] = j;
  for (size_t i = 1; i <= R; ++i)
    for (size_t j = 1; j <= H; ++j) {
      const size_t diag = dist[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      const size_t del = dist[i - 1][j] + 1;
      const size_t ins = dist[i][j - 1] + 1;
      dist[i][j] = std::min({diag, del, ins});
    }

  WerBreakdown result;
  result.ref_words = R;
  // Backtrace one optimal alignment; preference order fixes the breakdown.
  size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        dist[i][j] == dist[i - 1][j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1)) {
      if (reference[i - 1] != hypothesis[j - 1]) ++result.substitutions;
      --i;
      --j;
    } else if (i > 0 && dist[i][j] == dist[i - 1][j] + 1) {
      ++result.deletions;
      --i;
    } else {
      ++result.insertions;
      --j;
    }
  }
  result.wer = double(result.edits()) / double(R);
  return result;
}

WerBreakdown wer(const std::string& reference, const std::string& hypothesis) {
  return wer(split_words(reference), split_words(hypothesis));
}

}  // namespace xmodal
