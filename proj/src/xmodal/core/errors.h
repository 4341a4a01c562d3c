// xmodal/core/errors.h

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

#include <stdexcept>
#include <string>
#include <vector>

namespace xmodal {

// Base class for all toolkit errors. Everything user-facing derives from
// this so the CLI can map failures onto exit codes in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A character in a transcript that the alphabet does not contain.
class OutOfAlphabetError : public Error {
 public:
  OutOfAlphabetError(char c, size_t position)
      : Error("character '" + std::string(1, c) + "' at position " +
              std::to_string(position) + " is not in the alphabet"),
        character(c),
        position(position) {}
  char character;
  size_t position;
};

// Enumeration guard tripped (brute-force / exhaustive oracles only).
class InstanceTooLargeError : public Error {
 public:
  using Error::Error;
};

// The target cannot be aligned to the given number of frames.
class InfeasibleTargetError : public Error {
 public:
  InfeasibleTargetError(size_t target_len, size_t min_frames, size_t frames)
      : Error("target of length " + std::to_string(target_len) +
              " needs at least " + std::to_string(min_frames) +
              " frames, got " + std::to_string(frames)),
        target_len(target_len),
        min_frames(min_frames),
        frames(frames) {}
  size_t target_len;
  size_t min_frames;
  size_t frames;
};

class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

// Bad magic, truncated payload, or out-of-tolerance contents in a binary or
// text interchange file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

class EmptyReferenceError : public Error {
 public:
  using Error::Error;
};

class ManifestError : public Error {
 public:
  using Error::Error;
};

class StaleCacheError : public Error {
 public:
  using Error::Error;
};

class FileError : public Error {
 public:
  using Error::Error;
};

// Invalid training data; carries the offending utterance ids.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::vector<std::string> ids)
      : Error(what), utterance_ids(std::move(ids)) {}
  explicit DataError(const std::string& what) : Error(what) {}
  std::vector<std::string> utterance_ids;
};

}  // namespace xmodal
