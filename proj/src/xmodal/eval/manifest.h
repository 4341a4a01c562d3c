// xmodal/eval/manifest.h

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

#include <span>
#include <string>
#include <vector>

namespace xmodal {

// One corpus utterance as recorded on disk. Only `id` is mandatory;
// scenarios differ in which of the remaining fields they require.
struct ManifestRecord {
  std::string id;
  std::string features_path;
  std::string posteriors_path;
  std::string transcript_gt;    // ground truth y*
  std::string transcript_asr;   // teacher-decoded transcript
  std::string transcript_asr2;  // second transcription for the agreement gate
};

// JSON Lines, one object per utterance. Unknown keys are rejected so typos
// in hand-edited manifests fail loudly (ManifestError).
std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(std::span<const ManifestRecord> records, const std::string& path);

}  // namespace xmodal
