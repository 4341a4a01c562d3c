// xmodal/core/binary_io.h

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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "xmodal/core/errors.h"

// Little-endian primitives shared by the binary file formats (posterior
// grids, feature matrices, model checkpoints).
namespace xmodal::binary {

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u32(out, bits);
}

inline void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

// Sequential parser over an in-memory file image. Throws FormatError with
// the file path on any underrun, so callers need no bounds bookkeeping.
class Reader {
 public:
  Reader(const std::string& buf, std::string path)
      : buf_(buf), path_(std::move(path)) {}

  void expect_magic(const char* magic) {
    if (buf_.size() < pos_ + 4 || buf_.compare(pos_, 4, magic, 4) != 0) {
      throw FormatError(path_ + ": bad magic, expected " + std::string(magic, 4));
    }
    pos_ += 4;
  }

  uint32_t u32() {
    require(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte(i)) << (8 * i);
    pos_ += 4;
    return v;
  }

  uint64_t u64() {
    require(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(byte(i)) << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  // Call once parsing is complete; trailing bytes indicate corruption.
  void expect_end() {
    if (pos_ != buf_.size()) {
      throw FormatError(path_ + ": trailing bytes beyond declared contents");
    }
  }

  const std::string& path() const { return path_; }

 private:
  unsigned char byte(int i) const {
    return static_cast<unsigned char>(buf_[pos_ + static_cast<size_t>(i)]);
  }
  void require(size_t n) {
    if (buf_.size() < pos_ + n) throw FormatError(path_ + ": truncated");
  }

  const std::string& buf_;
  size_t pos_ = 0;
  std::string path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open: " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("failed while writing: " + path);
}

}  // namespace xmodal::binary
