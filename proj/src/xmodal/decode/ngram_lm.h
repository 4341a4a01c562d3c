// xmodal/decode/ngram_lm.h

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

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xmodal/defaults.h"

namespace xmodal {

struct LmTrainOptions {
  double backoff_factor = kDefaultLmBackoff;  // per backoff step, in (0,1]
  double unk_log_prob = kDefaultUnkLogProb;   // words outside the vocabulary
};

// Word n-gram model with Stupid-backoff scoring. Stored probabilities are
// maximum-likelihood conditionals, so within every observed context they
// sum to exactly 1; the backoff factor enters only at query time. Line
// starts are padded with a sentence-start token; no end-of-sentence event
// is modeled. Immutable after training and safe to share across threads.
class NGramLM {
 public:
  static constexpr const char* kSentenceStart = "<s>";

  // Trains on whitespace-tokenized lines. Throws EmptyCorpus when no line
  // contains a word, ConfigError on a bad order or options.
  static NGramLM train(std::span<const std::string> lines, int order,
                       const LmTrainOptions& options = {});

  int order() const { return order_; }
  double backoff_factor() const { return backoff_factor_; }
  double unk_log_prob() const { return unk_log_prob_; }
  const std::set<std::string>& vocabulary() const { return vocabulary_; }

  // log S(word | context) under Stupid backoff. Uses the last order-1
  // context words; shorter contexts are padded with kSentenceStart.
  double score_word(std::span<const std::string> context, const std::string& word) const;

  // Sum of score_word over the words with sentence-start padding.
  double score_words(std::span<const std::string> words) const;

  // Stored n-grams keyed by space-joined tokens, log conditional prob.
  // Exposed for the normalization property tests.
  const std::map<std::string, double>& ngrams() const { return logp_; }

  // Text format: header lines, then one line per n-gram
  // "logp<TAB>tokens<TAB>backoff", sorted by order then tokens.
  void save(const std::string& path) const;
  static NGramLM load(const std::string& path);

 private:
  NGramLM() = default;

  int order_ = 0;
  double backoff_factor_ = kDefaultLmBackoff;
  double unk_log_prob_ = kDefaultUnkLogProb;
  std::set<std::string> vocabulary_;
  std::map<std::string, double> logp_;
};

}  // namespace xmodal
