// xmodal/defaults.h

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

#include <cstddef>

namespace xmodal {

// Method-level defaults. Each lives here exactly once; modules pick them
// up as field initializers and the CLI surfaces them in --help.

// Combined objective mixing weights, chosen to balance gradient norms.
inline constexpr double kDefaultLambdaCtc = 0.1;
inline constexpr double kDefaultLambdaKd = 10.0;

// Corpus filter gates: valid-word ratio is inclusive ("90% or more"),
// transcription agreement is strict ("below 28%").
inline constexpr double kDefaultMinValidRatio = 0.90;
inline constexpr double kDefaultMaxAgreementWer = 0.28;

// Word language model.
inline constexpr int kDefaultLmOrder = 6;
inline constexpr double kDefaultLmBackoff = 0.4;
inline constexpr double kDefaultUnkLogProb = -10.0;

// Beam search. The reference width suits full-size grapheme inventories;
// the desk default is plenty below a few dozen classes.
inline constexpr size_t kReferenceBeamWidth = 8192;
inline constexpr size_t kDefaultBeamWidth = 64;
inline constexpr double kDefaultLmWeight = 0.5;
inline constexpr double kDefaultWordBonus = 1.0;

// Synthetic teacher shape.
inline constexpr double kDefaultTeacherPeakiness = 0.9;
inline constexpr int kDefaultSpikeJitter = 1;

// Optimizer: Adam with decoupled weight decay, linear warmup, polynomial
// decay. Moments are kept in double precision.
inline constexpr double kDefaultAdamBeta1 = 0.9;
inline constexpr double kDefaultAdamBeta2 = 0.98;
inline constexpr double kDefaultAdamEpsilon = 1e-8;
inline constexpr double kDefaultLearningRate = 1e-3;
inline constexpr unsigned kDefaultWarmupSteps = 200;
inline constexpr double kDefaultDecayPower = 2.0;
inline constexpr double kDefaultClipNorm = 5.0;

// Training loop.
inline constexpr size_t kDefaultBatchSize = 8;
inline constexpr unsigned kDefaultEvalCadence = 50;
inline constexpr double kDefaultFinetuneFraction = 0.1;

}  // namespace xmodal
