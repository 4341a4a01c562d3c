// xmodal/eval/filter.h

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

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xmodal/defaults.h"
#include "xmodal/eval/manifest.h"

namespace xmodal {

// Two-stage corpus filter. Stage 1 is a dictionary proxy for "is this
// English": the share of words with >= 4 characters that appear in a word
// list must reach min_valid_ratio (inclusive). Stage 2 keeps an utterance
// only when two independent transcriptions agree: their WER must stay
// strictly below max_agreement_wer.
struct FilterThresholds {
  double min_valid_ratio = kDefaultMinValidRatio;
  double max_agreement_wer = kDefaultMaxAgreementWer;
};

// Share of qualifying words (length >= 4) found in `dictionary`. Words
// shorter than 4 characters are ignored; a transcript with no qualifying
// word carries no evidence of being English and scores 0.0.
double valid_word_ratio(const std::string& transcript,
                        const std::set<std::string>& dictionary);

// Threshold predicates for the two stages. filter_corpus routes every
// decision through these, so their boundary semantics (stage 1 inclusive,
// stage 2 strict) hold corpus-wide by construction.
bool ratio_keep(double ratio, double min_valid_ratio = kDefaultMinValidRatio);
bool wer_keep(double agreement_wer,
              double max_agreement_wer = kDefaultMaxAgreementWer);

// Keep iff wer(primary, secondary) < threshold. The primary transcript is
// the reference; it must be nonempty (EmptyReferenceError otherwise).
bool agreement_keep(const std::string& primary_transcript,
                    const std::string& secondary_transcript,
                    double threshold = kDefaultMaxAgreementWer);

struct FilterDecision {
  std::string id;
  double valid_word_ratio = 0.0;
  // WER between the two transcriptions; absent when stage 1 already
  // rejected the utterance and stage 2 never ran.
  std::optional<double> agreement_wer;
  bool kept = false;
  std::string rejection_reason;  // empty when kept
};

struct FilterReport {
  std::vector<FilterDecision> decisions;  // input order
  size_t kept = 0;
  size_t discarded = 0;
};

// Rejection reason tags, one per stage.
inline constexpr const char* kReasonLowValidWordRatio = "low_valid_word_ratio";
inline constexpr const char* kReasonHighAgreementWer = "high_agreement_wer";

// Applies stage 1 to transcript_asr and stage 2 to the
// (transcript_asr, transcript_asr2) pair of every record. Pure per record:
// the decision for an utterance depends only on its own fields.
FilterReport filter_corpus(std::span<const ManifestRecord> records,
                           const std::set<std::string>& dictionary,
                           const FilterThresholds& thresholds = {});

// The records marked kept by `report`, in input order.
std::vector<ManifestRecord> kept_subset(std::span<const ManifestRecord> records,
                                        const FilterReport& report);

// One lower-case word per line; blank lines ignored, input case-folded.
std::set<std::string> load_dictionary(const std::string& path);

// JSON Lines, one object per decision.
void write_filter_report(const FilterReport& report, const std::string& path);

// Single human-readable line with kept/discarded counts per stage.
std::string summarize_filter_report(const FilterReport& report);

}  // namespace xmodal
