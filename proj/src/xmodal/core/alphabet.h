// xmodal/core/alphabet.h

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

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xmodal {

// Grapheme inventory plus the blank symbol. Graphemes occupy ids
// [0, size()); blank is always the last id, size(). Immutable after
// construction and safe to share across threads.
class Alphabet {
 public:
  // `graphemes` in index order; must be unique lower-case characters.
  // `ignorable` characters are silently dropped when encoding.
  explicit Alphabet(std::string_view graphemes, std::string_view ignorable = "");

  // a-z, space, apostrophe: 28 graphemes, 29 classes with blank.
  static Alphabet default_english();

  int size() const { return static_cast<int>(graphemes_.size()); }  // |C|
  int num_classes() const { return size() + 1; }                    // |C'|
  int blank_id() const { return size(); }

  char grapheme(int id) const;  // id must be a non-blank id
  std::optional<int> id_of(char c) const;

  // Lower-cases, then maps each character to its id.
  // Throws OutOfAlphabetError for characters that are neither in C nor
  // ignorable.
  std::vector<int> encode(std::string_view text) const;

  // Inverse of encode for non-blank id sequences.
  std::string render(std::span<const int> ids) const;

  bool operator==(const Alphabet& other) const { return graphemes_ == other.graphemes_; }

  // Single-line text file of the graphemes in index order; blank implicit.
  void save(const std::string& path) const;
  static Alphabet load(const std::string& path);

 private:
  std::string graphemes_;
  std::string ignorable_;
  std::array<int, 256> id_table_;  // -1 when absent
};

// Whitespace tokenization used by the word-level metrics and the LM.
std::vector<std::string> split_words(std::string_view text);

}  // namespace xmodal
