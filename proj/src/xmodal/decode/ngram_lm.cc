// xmodal/decode/ngram_lm.cc

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

#include "xmodal/decode/ngram_lm.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "xmodal/core/alphabet.h"
#include "xmodal/core/errors.h"

namespace xmodal {

namespace {

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

size_t token_count(const std::string& joined) {
  if (joined.empty()) return 0;
  size_t n = 1;
  for (char c : joined)
    if (c == ' ') ++n;
  return n;
}

}  // namespace

NGramLM NGramLM::train(std::span<const std::string> lines, int order,
                       const LmTrainOptions& options) {
  if (order < 1) throw ConfigError("n-gram order must be >= 1");
  if (options.backoff_factor <= 0.0 || options.backoff_factor > 1.0)
    throw ConfigError("backoff factor must be in (0, 1]");
  if (options.unk_log_prob >= 0.0)
    throw ConfigError("unknown-word log-probability must be negative");

  NGramLM lm;
  lm.order_ = order;
  lm.backoff_factor_ = options.backoff_factor;
  lm.unk_log_prob_ = options.unk_log_prob;

  // counts[ngram] and context_totals[context] over the start-padded lines.
  std::map<std::string, uint64_t> counts;
  std::map<std::string, uint64_t> context_totals;
  uint64_t total_words = 0;

  for (const std::string& line : lines) {
    const std::vector<std::string> words = split_words(line);
    if (words.empty()) continue;
    for (const std::string& w : words) {
      if (w == kSentenceStart)
        throw ConfigError(std::string("corpus contains the reserved token ") + kSentenceStart);
      lm.vocabulary_.insert(w);
    }
    total_words += words.size();

    std::vector<std::string> padded(size_t(order - 1), kSentenceStart);
    padded.insert(padded.end(), words.begin(), words.end());
    for (size_t i = size_t(order - 1); i < padded.size(); ++i) {
      for (int o = 1; o <= order; ++o) {
        std::span<const std::string> gram(&padded[i + 1 - size_t(o)], size_t(o));
        ++counts[join(gram)];
        ++context_totals[join(gram.subspan(0, size_t(o - 1)))];
      }
    }
  }
  if (total_words == 0) throw EmptyCorpusError("no words in the language model corpus");

  for (const auto& [gram, count] : counts) {
    const size_t last_space = gram.rfind(' ');
    const std::string context = last_space == std::string::npos ? "" : gram.substr(0, last_space);
    lm.logp_[gram] = std::log(double(count)) - std::log(double(context_totals.at(context)));
  }
  return lm;
}

double NGramLM::score_word(std::span<const std::string> context,
                           const std::string& word) const {
  // Pad short contexts so every query starts at the full order.
  std::vector<std::string> padded;
  const size_t want = size_t(order_ - 1);
  if (context.size() < want) {
    padded.assign(want - context.size(), kSentenceStart);
    padded.insert(padded.end(), context.begin(), context.end());
    context = padded;
  } else if (context.size() > want) {
    context = context.subspan(context.size() - want);
  }

  double backoff = 0.0;
  for (size_t o = context.size() + 1; o >= 1; --o) {
    std::string key = join(context.subspan(context.size() + 1 - o, o - 1));
    if (!key.empty()) key.push_back(' ');
    key += word;
    if (auto it = logp_.find(key); it != logp_.end()) return backoff + it->second;
    backoff += std::log(backoff_factor_);
  }
  // One backoff step below the unigram level lands on the unknown word.
  return backoff + unk_log_prob_ - std::log(backoff_factor_);
}

double NGramLM::score_words(std::span<const std::string> words) const {
  double total = 0.0;
  for (size_t i = 0; i < words.size(); ++i)
    total += score_word(words.subspan(0, i), words[i]);
  return total;
}

void NGramLM::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot write language model file: " + path);
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  f << "xmodal-ngram-lm 1\n";
  f << "order\t" << order_ << "\n";
  f << "backoff\t" << fmt(backoff_factor_) << "\n";
  f << "unk_logp\t" << fmt(unk_log_prob_) << "\n";
  f << "ngrams\t" << logp_.size() << "\n";
  // Data lines sorted by order then tokens. Context n-grams (orders below
  // the model order) carry the backoff log-factor, leaves carry 0.
  for (int o = 1; o <= order_; ++o) {
    for (const auto& [gram, logp] : logp_) {
      if (token_count(gram) != size_t(o)) continue;
      const double bo = o < order_ ? std::log(backoff_factor_) : 0.0;
      f << fmt(logp) << "\t" << gram << "\t" << fmt(bo) << "\n";
    }
  }
  if (!f) throw FileError("failed writing language model file: " + path);
}

NGramLM NGramLM::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot read language model file: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "xmodal-ngram-lm 1")
    throw FormatError("bad language model header in " + path);

  NGramLM lm;
  size_t expected = 0;
  auto header_value = [&](const char* key) {
    if (!std::getline(f, line)) throw FormatError("truncated language model header");
    std::istringstream ss(line);
    std::string k, v;
    if (!std::getline(ss, k, '\t') || !std::getline(ss, v) || k != key)
      throw FormatError("expected header line '" + std::string(key) + "' in " + path);
    return v;
  };
  lm.order_ = std::stoi(header_value("order"));
  lm.backoff_factor_ = std::stod(header_value("backoff"));
  lm.unk_log_prob_ = std::stod(header_value("unk_logp"));
  expected = std::stoull(header_value("ngrams"));
  if (lm.order_ < 1) throw FormatError("bad order in " + path);

  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const size_t tab1 = line.find('\t');
    const size_t tab2 = line.rfind('\t');
    if (tab1 == std::string::npos || tab2 == tab1)
      throw FormatError("malformed n-gram line: " + line);
    const double logp = std::stod(line.substr(0, tab1));
    const std::string gram = line.substr(tab1 + 1, tab2 - tab1 - 1);
    if (gram.empty()) throw FormatError("empty n-gram line in " + path);
    lm.logp_[gram] = logp;
    if (token_count(gram) == 1 && gram != kSentenceStart) lm.vocabulary_.insert(gram);
  }
  if (lm.logp_.size() != expected)
    throw FormatError("n-gram count mismatch in " + path + ": header says " +
                      std::to_string(expected) + ", file has " + std::to_string(lm.logp_.size()));
  return lm;
}

}  // namespace xmodal
