// xmodal/eval/manifest.cc

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

#include "xmodal/eval/manifest.h"

#include <fstream>
#include <set>

#include "json.hpp"
#include "xmodal/core/errors.h"

namespace xmodal {

namespace {

using nlohmann::json;

const std::set<std::string> kKnownKeys = {
    "id",             "features_path",  "posteriors_path",
    "transcript_gt",  "transcript_asr", "transcript_asr2",
};

std::string get_string(const json& object, const char* key, size_t line_no) {
  auto it = object.find(key);
  if (it == object.end()) return "";
  if (!it->is_string()) {
    throw ManifestError("manifest line " + std::to_string(line_no) + ": field '" +
                        key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open manifest: " + path);

  std::vector<ManifestRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json object;
    try {
      object = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ManifestError("manifest line " + std::to_string(line_no) +
                          ": invalid JSON: " + e.what());
    }
    if (!object.is_object()) {
      throw ManifestError("manifest line " + std::to_string(line_no) +
                          ": expected a JSON object");
    }
    for (const auto& item : object.items()) {
      if (!kKnownKeys.count(item.key())) {
        throw ManifestError("manifest line " + std::to_string(line_no) +
                            ": unknown field '" + item.key() + "'");
      }
    }

    ManifestRecord record;
    record.id = get_string(object, "id", line_no);
    if (record.id.empty()) {
      throw ManifestError("manifest line " + std::to_string(line_no) +
                          ": missing or empty 'id'");
    }
    record.features_path = get_string(object, "features_path", line_no);
    record.posteriors_path = get_string(object, "posteriors_path", line_no);
    record.transcript_gt = get_string(object, "transcript_gt", line_no);
    record.transcript_asr = get_string(object, "transcript_asr", line_no);
    record.transcript_asr2 = get_string(object, "transcript_asr2", line_no);
    records.push_back(std::move(record));
  }
  return records;
}

void write_manifest(std::span<const ManifestRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write manifest: " + path);
  for (const ManifestRecord& record : records) {
    json object;
    object["id"] = record.id;
    if (!record.features_path.empty()) object["features_path"] = record.features_path;
    if (!record.posteriors_path.empty()) object["posteriors_path"] = record.posteriors_path;
    if (!record.transcript_gt.empty()) object["transcript_gt"] = record.transcript_gt;
    if (!record.transcript_asr.empty()) object["transcript_asr"] = record.transcript_asr;
    if (!record.transcript_asr2.empty()) object["transcript_asr2"] = record.transcript_asr2;
    out << object.dump() << "\n";
  }
  if (!out) throw FileError("failed while writing manifest: " + path);
}

}  // namespace xmodal
