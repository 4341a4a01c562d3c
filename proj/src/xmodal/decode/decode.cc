// xmodal/decode/decode.cc

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

#include "xmodal/decode/decode.h"

#include <algorithm>
#include <map>
#include <vector>

#include "xmodal/core/errors.h"
#include "xmodal/core/log_math.h"
#include "xmodal/ctc/ctc.h"

namespace xmodal {

std::string greedy_decode(const PosteriorGrid& grid) {
  const int blank = grid.alphabet().blank_id();
  std::vector<int> path(grid.frames());
  for (size_t t = 0; t < grid.frames(); ++t) {
    int best = 0;
    for (int c = 1; c < grid.alphabet().num_classes(); ++c)
      if (grid.log_prob(t, c) > grid.log_prob(t, best)) best = c;
    path[t] = best;
  }
  return grid.alphabet().render(collapse(path, blank));
}

namespace {

// One beam hypothesis. The language model terms are functions of the
// prefix alone, so merging path mass into an existing entry never has to
// reconcile them.
struct Hyp {
  double log_pb = kNegInf;   // paths ending in blank
  double log_pnb = kNegInf;  // paths ending in the prefix's last symbol
  double lm_sum = 0.0;       // raw LM log-probs of completed words
  int num_words = 0;

  double acoustic() const { return log_add(log_pb, log_pnb); }
};

using Beam = std::map<std::vector<int>, Hyp>;

// Words completed so far and the trailing partial word of a prefix.
void split_prefix(std::span<const int> prefix, const Alphabet& alphabet,
                  std::vector<std::string>& words, std::string& partial) {
  words.clear();
  partial.clear();
  for (int id : prefix) {
    const char c = alphabet.grapheme(id);
    if (c == ' ') {
      if (!partial.empty()) words.push_back(partial);
      partial.clear();
    } else {
      partial.push_back(c);
    }
  }
}

}  // namespace

DecodeResult beam_search(const PosteriorGrid& grid, const BeamConfig& config,
                         const NGramLM* lm) {
  if (config.width < 1) throw ConfigError("beam width must be >= 1");
  if (config.lm_weight < 0.0) throw ConfigError("lm weight must be >= 0");
  const Alphabet& alphabet = grid.alphabet();
  const int blank = alphabet.blank_id();
  const auto space_id = alphabet.id_of(' ');

  Beam beam;
  {
    Hyp root;
    root.log_pb = 0.0;
    beam.emplace(std::vector<int>{}, root);
  }

  std::vector<std::string> words;
  std::string partial;
  std::vector<std::pair<const std::vector<int>*, const Hyp*>> ranked;

  for (size_t t = 0; t < grid.frames(); ++t) {
    Beam next;
    for (const auto& [prefix, hyp] : beam) {
      for (int c = 0; c < alphabet.num_classes(); ++c) {
        const double lp = grid.log_prob(t, c);
        if (lp == kNegInf || lp < config.prune_logp) continue;

        if (c == blank) {
          Hyp& h = next[prefix];
          if (h.log_pb == kNegInf && h.log_pnb == kNegInf) {
            h.lm_sum = hyp.lm_sum;
            h.num_words = hyp.num_words;
          }
          h.log_pb = log_add(h.log_pb, hyp.acoustic() + lp);
          continue;
        }

        const bool repeat = !prefix.empty() && prefix.back() == c;
        if (repeat) {
          // Same symbol without a blank in between extends the last
          // emission, keeping the prefix.
          Hyp& h = next[prefix];
          if (h.log_pb == kNegInf && h.log_pnb == kNegInf) {
            h.lm_sum = hyp.lm_sum;
            h.num_words = hyp.num_words;
          }
          h.log_pnb = log_add(h.log_pnb, hyp.log_pnb + lp);
        }

        // Mass that may grow the prefix: everything for a new symbol, only
        // blank-terminated paths for a repeated one.
        const double grow = repeat ? hyp.log_pb : hyp.acoustic();
        if (grow == kNegInf) continue;
        std::vector<int> extended = prefix;
        extended.push_back(c);
        Hyp& h = next[extended];
        if (h.log_pb == kNegInf && h.log_pnb == kNegInf) {
          h.lm_sum = hyp.lm_sum;
          h.num_words = hyp.num_words;
          if (lm != nullptr && space_id && c == *space_id) {
            split_prefix(prefix, alphabet, words, partial);
            if (!partial.empty()) {
              h.lm_sum += lm->score_word(words, partial);
              h.num_words += 1;
            }
          }
        }
        h.log_pnb = log_add(h.log_pnb, grow + lp);
      }
    }

    // Prune to the configured width; ties break toward the smaller prefix
    // (the map iterates prefixes in ascending order and the sort is stable).
    ranked.clear();
    ranked.reserve(next.size());
    for (const auto& [prefix, hyp] : next) ranked.emplace_back(&prefix, &hyp);
    auto rank_score = [&](const Hyp& h) {
      return h.acoustic() +
             (lm != nullptr ? config.lm_weight * h.lm_sum + config.word_bonus * h.num_words : 0.0);
    };
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](const auto& a, const auto& b) {
                       return rank_score(*a.second) > rank_score(*b.second);
                     });
    if (ranked.size() > config.width) ranked.resize(config.width);

    Beam pruned;
    for (const auto& [prefix, hyp] : ranked) pruned.emplace(*prefix, *hyp);
    beam = std::move(pruned);
  }

  // Final scores include the trailing partial word.
  DecodeResult best;
  best.score = kNegInf;
  const std::vector<int>* best_prefix = nullptr;
  for (const auto& [prefix, hyp] : beam) {
    double score = hyp.acoustic();
    if (lm != nullptr) {
      double lm_sum = hyp.lm_sum;
      int num_words = hyp.num_words;
      split_prefix(prefix, alphabet, words, partial);
      if (!partial.empty()) {
        lm_sum += lm->score_word(words, partial);
        num_words += 1;
      }
      score += config.lm_weight * lm_sum + config.word_bonus * num_words;
    }
    if (score > best.score) {
      best.score = score;
      best_prefix = &prefix;
    }
  }
  if (best_prefix != nullptr) best.transcript = alphabet.render(*best_prefix);
  return best;
}

DecodeResult exhaustive_decode(const PosteriorGrid& grid) {
  const size_t num_frames = grid.frames();
  const int num_labels = grid.alphabet().size();
  if (num_frames > 6 || num_labels > 3)
    throw InstanceTooLargeError("exhaustive decoding capped at T=6, |C|=3, got T=" +
                                std::to_string(num_frames) + ", |C|=" +
                                std::to_string(num_labels));

  DecodeResult best;
  best.score = kNegInf;
  std::vector<int> target;
  // Lexicographic depth-first enumeration; strict improvement keeps the
  // lexicographically smallest maximizer.
  auto visit = [&](auto&& self) -> void {
    const double logp = ctc_logprob_bruteforce(grid, target);
    if (logp > best.score) {
      best.score = logp;
      best.transcript = grid.alphabet().render(target);
    }
    if (target.size() == num_frames) return;
    for (int id = 0; id < num_labels; ++id) {
      target.push_back(id);
      self(self);
      target.pop_back();
    }
  };
  visit(visit);
  return best;
}

}  // namespace xmodal
