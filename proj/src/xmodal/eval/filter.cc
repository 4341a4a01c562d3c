// xmodal/eval/filter.cc

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

#include "xmodal/eval/filter.h"

#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xmodal/core/alphabet.h"
#include "xmodal/core/errors.h"
#include "xmodal/eval/wer.h"

namespace xmodal {

namespace {

constexpr size_t kMinQualifyingLength = 4;

std::string fold_lower(const std::string& word) {
  std::string out;
  out.reserve(word.size());
  for (char c : word) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

double valid_word_ratio(const std::string& transcript,
                        const std::set<std::string>& dictionary) {
  size_t qualifying = 0;
  size_t valid = 0;
  for (const std::string& word : split_words(transcript)) {
    if (word.size() < kMinQualifyingLength) continue;
    ++qualifying;
    if (dictionary.count(word)) ++valid;
  }
  if (qualifying == 0) return 0.0;
  return static_cast<double>(valid) / static_cast<double>(qualifying);
}

bool ratio_keep(double ratio, double min_valid_ratio) {
  return ratio >= min_valid_ratio;
}

bool wer_keep(double agreement_wer, double max_agreement_wer) {
  return agreement_wer < max_agreement_wer;
}

bool agreement_keep(const std::string& primary_transcript,
                    const std::string& secondary_transcript, double threshold) {
  return wer_keep(wer(primary_transcript, secondary_transcript).wer, threshold);
}

FilterReport filter_corpus(std::span<const ManifestRecord> records,
                           const std::set<std::string>& dictionary,
                           const FilterThresholds& thresholds) {
  if (thresholds.min_valid_ratio < 0.0 || thresholds.min_valid_ratio > 1.0) {
    throw ConfigError("min_valid_ratio must lie in [0, 1], got " +
                      std::to_string(thresholds.min_valid_ratio));
  }
  if (thresholds.max_agreement_wer < 0.0) {
    throw ConfigError("max_agreement_wer must be non-negative, got " +
                      std::to_string(thresholds.max_agreement_wer));
  }

  FilterReport report;
  report.decisions.reserve(records.size());
  for (const ManifestRecord& record : records) {
    FilterDecision decision;
    decision.id = record.id;
    decision.valid_word_ratio = valid_word_ratio(record.transcript_asr, dictionary);
    if (!ratio_keep(decision.valid_word_ratio, thresholds.min_valid_ratio)) {
      decision.kept = false;
      decision.rejection_reason = kReasonLowValidWordRatio;
    } else {
      double agreement = wer(record.transcript_asr, record.transcript_asr2).wer;
      decision.agreement_wer = agreement;
      if (wer_keep(agreement, thresholds.max_agreement_wer)) {
        decision.kept = true;
      } else {
        decision.kept = false;
        decision.rejection_reason = kReasonHighAgreementWer;
      }
    }
    if (decision.kept) {
      ++report.kept;
    } else {
      ++report.discarded;
    }
    report.decisions.push_back(std::move(decision));
  }
  return report;
}

std::vector<ManifestRecord> kept_subset(std::span<const ManifestRecord> records,
                                        const FilterReport& report) {
  if (records.size() != report.decisions.size()) {
    throw ShapeMismatchError("filter report covers " +
                             std::to_string(report.decisions.size()) +
                             " records, manifest has " + std::to_string(records.size()));
  }
  std::vector<ManifestRecord> kept;
  kept.reserve(report.kept);
  for (size_t i = 0; i < records.size(); ++i) {
    if (report.decisions[i].kept) kept.push_back(records[i]);
  }
  return kept;
}

std::set<std::string> load_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open dictionary: " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string word;
    while (fields >> word) words.insert(fold_lower(word));
  }
  if (words.empty()) throw ConfigError("dictionary is empty: " + path);
  return words;
}

void write_filter_report(const FilterReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write filter report: " + path);
  for (const FilterDecision& decision : report.decisions) {
    nlohmann::json object;
    object["id"] = decision.id;
    object["valid_word_ratio"] = decision.valid_word_ratio;
    if (decision.agreement_wer.has_value()) {
      object["agreement_wer"] = *decision.agreement_wer;
    }
    object["kept"] = decision.kept;
    if (!decision.kept) object["rejection_reason"] = decision.rejection_reason;
    out << object.dump() << "\n";
  }
  if (!out) throw FileError("failed while writing filter report: " + path);
}

std::string summarize_filter_report(const FilterReport& report) {
  size_t stage1 = 0;
  size_t stage2 = 0;
  for (const FilterDecision& decision : report.decisions) {
    if (decision.rejection_reason == kReasonLowValidWordRatio) ++stage1;
    if (decision.rejection_reason == kReasonHighAgreementWer) ++stage2;
  }
  std::ostringstream out;
  out << "kept " << report.kept << " of " << report.decisions.size()
      << " utterances (" << stage1 << " rejected by the dictionary gate, "
      << stage2 << " by the agreement gate)";
  return out.str();
}

}  // namespace xmodal
