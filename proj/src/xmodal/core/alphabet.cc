// xmodal/core/alphabet.cc

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

#include "xmodal/core/alphabet.h"

#include <cctype>
#include <fstream>
#include <sstream>

#include "xmodal/core/errors.h"

namespace xmodal {

namespace {
char fold(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
}  // namespace

Alphabet::Alphabet(std::string_view graphemes, std::string_view ignorable)
    : graphemes_(graphemes), ignorable_(ignorable) {
  if (graphemes_.empty()) throw ConfigError("alphabet must contain at least one grapheme");
  id_table_.fill(-1);
  for (size_t i = 0; i < graphemes_.size(); ++i) {
    const char c = fold(graphemes_[i]);
    graphemes_[i] = c;
    auto& slot = id_table_[static_cast<unsigned char>(c)];
    if (slot != -1) throw ConfigError("duplicate grapheme in alphabet");
    slot = static_cast<int>(i);
  }
}

Alphabet Alphabet::default_english() {
  return Alphabet("abcdefghijklmnopqrstuvwxyz '");
}

char Alphabet::grapheme(int id) const {
  if (id < 0 || id >= size()) throw Error("grapheme id " + std::to_string(id) + " out of range");
  return graphemes_[static_cast<size_t>(id)];
}

std::optional<int> Alphabet::id_of(char c) const {
  const int id = id_table_[static_cast<unsigned char>(fold(c))];
  if (id < 0) return std::nullopt;
  return id;
}

std::vector<int> Alphabet::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = fold(text[i]);
    const int id = id_table_[static_cast<unsigned char>(c)];
    if (id >= 0) {
      ids.push_back(id);
    } else if (ignorable_.find(c) == std::string::npos) {
      throw OutOfAlphabetError(text[i], i);
    }
  }
  return ids;
}

std::string Alphabet::render(std::span<const int> ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(grapheme(id));
  return out;
}

void Alphabet::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot write alphabet file: " + path);
  f << graphemes_ << "\n";
}

Alphabet Alphabet::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot read alphabet file: " + path);
  std::string line;
  std::getline(f, line);
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
  if (line.empty()) throw FormatError("empty alphabet file: " + path);
  return Alphabet(line);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace xmodal
