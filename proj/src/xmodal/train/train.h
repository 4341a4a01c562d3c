// xmodal/train/train.h

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
#include <cstdint>
#include <string>
#include <vector>

#include "xmodal/core/alphabet.h"
#include "xmodal/defaults.h"
#include "xmodal/distill/distill.h"
#include "xmodal/model/model.h"
#include "xmodal/teacher/teacher.h"

namespace xmodal {

// Adam with decoupled weight decay over the trainable tensors. Moments are
// double regardless of the parameter precision. `total_steps == 0` keeps the
// rate constant after warmup; otherwise it decays polynomially to zero over
// (warmup_steps, total_steps].
struct OptimState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  uint64_t step = 0;
  double base_lr = kDefaultLearningRate;
  uint64_t warmup_steps = kDefaultWarmupSteps;
  uint64_t total_steps = 0;
  double decay_power = kDefaultDecayPower;
  double weight_decay = 0.0;
  double clip_norm = kDefaultClipNorm;  // global grad norm; 0 disables
};

template <typename Real>
OptimState init_optimizer(const ModelParamsT<Real>& params);

// Learning rate the optimizer would use at `step` (1-based).
double scheduled_lr(const OptimState& state, uint64_t step);

// One update. `grads` must share shapes with `params` (running-stat slots
// are ignored); ShapeMismatchError otherwise. Clips by global norm first,
// then per element: m and v recursions, bias correction, epsilon outside the
// square root, decoupled weight decay, all scaled by the scheduled rate.
template <typename Real>
void optimizer_step(ModelParamsT<Real>& params, const ModelParamsT<Real>& grads,
                    OptimState& state);

struct TrainFlags {
  bool targets_from_gt = true;        // false: CTC targets from transcript_asr
  bool use_teacher_posteriors = false;  // enables the distillation term
  size_t batch_size = kDefaultBatchSize;
  uint64_t shuffle_seed = 0;
};

struct BatchStat {
  uint64_t step = 0;        // optimizer step that consumed this batch
  double ctc_loss = 0.0;    // mean raw per-sample parts, unweighted
  double kd_loss = 0.0;
  double grad_norm_ctc = 0.0;  // mean norm of the lambda-weighted logit grads
  double grad_norm_kd = 0.0;
  size_t kd_only_fallbacks = 0;  // samples trained without their CTC term
};

struct EpochMetrics {
  std::vector<BatchStat> batches;
  double mean_ctc_loss = 0.0;  // per-sample means over the whole epoch
  double mean_kd_loss = 0.0;
};

// One pass: validate, shuffle, then per batch accumulate sample gradients in
// index order, average, and step. Samples whose target cannot fit the frame
// budget fall back to the distillation term alone when it is available.
// Utterances missing a required field (or infeasible with no fallback) are
// all collected into one DataError before any update. ConfigError for
// negative weights, a zero effective objective, or batch_size == 0;
// DataError for an empty utterance list.
EpochMetrics train_epoch(ModelParams& params, OptimState& state,
                         const Alphabet& alphabet,
                         const std::vector<Utterance>& utterances,
                         const LossWeights& weights, const TrainFlags& flags);

enum class Scenario { kFullSupervision, kNoSupervision, kPretrainFinetune };

// "full_supervision", "no_supervision", "pretrain_finetune"; ConfigError
// otherwise.
Scenario parse_scenario(const std::string& name);
const char* scenario_name(Scenario scenario);

struct ScenarioConfig {
  Scenario scenario = Scenario::kFullSupervision;
  ModelConfig model;
  Alphabet alphabet = Alphabet::default_english();
  LossWeights weights;           // used by the distillation phases
  int epochs = 1;                // main phase
  int finetune_epochs = 0;       // pretrain_finetune second phase
  double finetune_fraction = kDefaultFinetuneFraction;  // when finetune_set empty
  size_t batch_size = kDefaultBatchSize;
  uint64_t eval_cadence = kDefaultEvalCadence;  // optimizer steps between evals
  double base_lr = kDefaultLearningRate;
  uint64_t warmup_steps = kDefaultWarmupSteps;
  double decay_power = kDefaultDecayPower;
  double weight_decay = 0.0;
  double clip_norm = kDefaultClipNorm;
  uint64_t seed = 0;
  std::vector<Utterance> train_set;
  std::vector<Utterance> finetune_set;  // optional explicit labeled subset
  std::vector<Utterance> dev_set;
  std::string curve_path;        // CSV written when nonempty
  std::string checkpoint_path;   // final weights written when nonempty
};

struct CurvePoint {
  uint64_t step = 0;
  double epoch = 0.0;
  double ctc_loss = 0.0;  // eval-mode means over the active training data
  double kd_loss = 0.0;
  double dev_greedy_wer = 0.0;
};

struct TrainingCurve {
  std::vector<CurvePoint> points;  // steps strictly increasing, first is 0
};

struct ScenarioResult {
  TrainingCurve curve;
  ModelParams params;
};

// full_supervision: CTC on ground-truth transcripts, weights {1, 0}.
// no_supervision: combined objective on ASR transcripts plus teacher
// posteriors. pretrain_finetune: the latter, then CTC fine-tuning with a
// fresh optimizer on finetune_set (or a seeded finetune_fraction subset of
// the labeled train utterances). Evaluates at step 0, every eval_cadence
// steps, and after the last step of each phase.
ScenarioResult run_scenario(const ScenarioConfig& config);

// Corpus-level greedy word error rate: total edits over total reference
// words. Every utterance needs a nonempty transcript_gt (DataError listing
// offenders); EmptyCorpusError when `dev_set` is empty.
double dev_greedy_wer(ModelParams& params, const Alphabet& alphabet,
                      const std::vector<Utterance>& dev_set);

// Header "step,epoch,ctc_loss,kd_loss,dev_greedy_wer"; doubles printed with
// %.17g so identical curves serialize to identical bytes.
void write_training_curve(const TrainingCurve& curve, const std::string& path);

}  // namespace xmodal
