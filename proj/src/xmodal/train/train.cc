// xmodal/train/train.cc

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

#include "xmodal/train/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <utility>

#include "xmodal/core/binary_io.h"
#include "xmodal/core/errors.h"
#include "xmodal/core/log_math.h"
#include "xmodal/core/posterior_grid.h"
#include "xmodal/core/rng.h"
#include "xmodal/ctc/ctc.h"
#include "xmodal/decode/decode.h"
#include "xmodal/eval/wer.h"

namespace xmodal {

namespace {

template <typename Real>
std::vector<std::vector<Real>*> trainable_views(ModelParamsT<Real>& params) {
  std::vector<std::vector<Real>*> views;
  for_each_tensor<Real>(params,
                        [&](const std::string&, TensorKind kind, std::vector<Real>& values) {
                          if (is_trainable(kind)) views.push_back(&values);
                        });
  return views;
}

template <typename Real>
std::vector<const std::vector<Real>*> trainable_views(const ModelParamsT<Real>& params) {
  std::vector<const std::vector<Real>*> views;
  for_each_tensor<Real>(
      params, [&](const std::string&, TensorKind kind, const std::vector<Real>& values) {
        if (is_trainable(kind)) views.push_back(&values);
      });
  return views;
}

double l2_norm(const Matrix& m) {
  double sq = 0.0;
  for (double x : m.data()) sq += x * x;
  return std::sqrt(sq);
}

// Objective configurations with nothing to optimize (or contradictory
// settings) are rejected up front.
void check_objective(const LossWeights& weights, const TrainFlags& flags) {
  if (weights.lambda_ctc < 0.0 || weights.lambda_kd < 0.0)
    throw ConfigError("loss weights must be nonnegative");
  if (flags.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!flags.use_teacher_posteriors && weights.lambda_kd > 0.0)
    throw ConfigError("distillation weight is positive but teacher posteriors are disabled");
  if (weights.lambda_ctc == 0.0 && !(flags.use_teacher_posteriors && weights.lambda_kd > 0.0))
    throw ConfigError("objective has no positive term");
}

struct SamplePlan {
  std::vector<int> target;
  bool kd_only = false;  // target infeasible; train on the distillation term
};

// Validates every utterance before any parameter update and collects all
// offenders into one DataError.
std::vector<SamplePlan> preflight(const std::vector<Utterance>& utterances,
                                  const Alphabet& alphabet, size_t input_dim,
                                  const LossWeights& weights, const TrainFlags& flags) {
  std::vector<SamplePlan> plans;
  plans.reserve(utterances.size());
  std::vector<std::string> bad;
  for (const Utterance& u : utterances) {
    if (u.features.rows() == 0 || u.features.cols() != input_dim) {
      bad.push_back(u.id);
      continue;
    }
    const std::optional<std::string>& text =
        flags.targets_from_gt ? u.transcript_gt : u.transcript_asr;
    if (!text.has_value()) {
      bad.push_back(u.id);
      continue;
    }
    SamplePlan plan;
    try {
      plan.target = alphabet.encode(*text);
    } catch (const OutOfAlphabetError&) {
      bad.push_back(u.id);
      continue;
    }
    if (flags.use_teacher_posteriors) {
      if (!u.teacher_posteriors.has_value()) {
        bad.push_back(u.id);
        continue;
      }
      const PosteriorGrid& grid = *u.teacher_posteriors;
      if (grid.frames() != 2 * u.features.rows() ||
          grid.log_probs().cols() != static_cast<size_t>(alphabet.num_classes()) ||
          !(grid.alphabet() == alphabet)) {
        bad.push_back(u.id);
        continue;
      }
    }
    if (min_frames_for_target(plan.target) > 2 * u.features.rows()) {
      if (flags.use_teacher_posteriors && weights.lambda_kd > 0.0) {
        plan.kd_only = true;
      } else {
        bad.push_back(u.id);
        continue;
      }
    }
    plans.push_back(std::move(plan));
  }
  if (!bad.empty())
    throw DataError("utterances unusable for this objective (missing fields, "
                    "alphabet mismatch, or target longer than the frame budget)",
                    std::move(bad));
  return plans;
}

struct SampleTerms {
  double ctc = 0.0;
  double kd = 0.0;
  bool kd_only = false;
  double grad_norm_ctc = 0.0;  // norms of the weighted per-term logit grads
  double grad_norm_kd = 0.0;
  Matrix grad_logits;
};

// Weighted objective on one sample's logits. Matches combined_loss term by
// term; computed from the primitives so each term's gradient norm is
// observable.
SampleTerms sample_terms(const Matrix& logits, const PosteriorGrid* teacher,
                         std::span<const int> target, bool kd_only,
                         const LossWeights& weights) {
  SampleTerms terms;
  terms.kd_only = kd_only;
  terms.grad_logits = Matrix(logits.rows(), logits.cols());
  if (teacher == nullptr) {
    const CtcLossResult ctc = ctc_loss(logits, target);
    terms.ctc = ctc.loss;
    terms.grad_norm_ctc = weights.lambda_ctc * l2_norm(ctc.grad_logits);
    for (size_t t = 0; t < logits.rows(); ++t)
      for (size_t c = 0; c < logits.cols(); ++c)
        terms.grad_logits.at(t, c) = weights.lambda_ctc * ctc.grad_logits.at(t, c);
    return terms;
  }
  const KdLossResult kd = kd_loss(*teacher, logits);
  terms.kd = kd.loss;
  terms.grad_norm_kd = weights.lambda_kd * l2_norm(kd.grad_logits);
  if (kd_only) {
    for (size_t t = 0; t < logits.rows(); ++t)
      for (size_t c = 0; c < logits.cols(); ++c)
        terms.grad_logits.at(t, c) = weights.lambda_kd * kd.grad_logits.at(t, c);
    return terms;
  }
  const CtcLossResult ctc = ctc_loss(logits, target);
  terms.ctc = ctc.loss;
  terms.grad_norm_ctc = weights.lambda_ctc * l2_norm(ctc.grad_logits);
  for (size_t t = 0; t < logits.rows(); ++t)
    for (size_t c = 0; c < logits.cols(); ++c)
      terms.grad_logits.at(t, c) = weights.lambda_ctc * ctc.grad_logits.at(t, c) +
                                   weights.lambda_kd * kd.grad_logits.at(t, c);
  return terms;
}

// Forward, loss, backward for each index in `slice`; gradients accumulated
// in slice order (double precision), averaged, then one optimizer step.
BatchStat run_batch(ModelParams& params, OptimState& state,
                    const std::vector<Utterance>& utterances,
                    const std::vector<SamplePlan>& plans, std::span<const size_t> slice,
                    const LossWeights& weights, bool use_kd) {
  ModelParams batch_grads = zero_like(params);
  const std::vector<std::vector<float>*> grad_views = trainable_views(batch_grads);
  size_t total = 0;
  for (const auto* v : grad_views) total += v->size();
  std::vector<double> acc(total, 0.0);

  BatchStat stat;
  for (size_t index : slice) {
    const Utterance& u = utterances[index];
    const uint64_t dropout_seed = params.dropout_stream;
    params.dropout_stream += 1;
    ForwardResult<float> fwd = forward(params, u.features, true, dropout_seed);
    const SampleTerms terms =
        sample_terms(fwd.logits, use_kd ? &*u.teacher_posteriors : nullptr,
                     plans[index].target, plans[index].kd_only, weights);
    stat.ctc_loss += terms.ctc;
    stat.kd_loss += terms.kd;
    stat.grad_norm_ctc += terms.grad_norm_ctc;
    stat.grad_norm_kd += terms.grad_norm_kd;
    if (terms.kd_only) stat.kd_only_fallbacks += 1;

    const BackwardResult<float> back = backward(params, fwd.cache, terms.grad_logits);
    const std::vector<const std::vector<float>*> sample_views = trainable_views(back.grads);
    size_t offset = 0;
    for (const auto* v : sample_views)
      for (float g : *v) acc[offset++] += static_cast<double>(g);
  }

  const double inv_n = 1.0 / static_cast<double>(slice.size());
  stat.ctc_loss *= inv_n;
  stat.kd_loss *= inv_n;
  stat.grad_norm_ctc *= inv_n;
  stat.grad_norm_kd *= inv_n;

  size_t offset = 0;
  for (auto* v : grad_views)
    for (float& g : *v) g = static_cast<float>(acc[offset++] * inv_n);

  optimizer_step(params, batch_grads, state);
  stat.step = state.step;
  return stat;
}

std::vector<size_t> shuffled_order(size_t n, uint64_t seed) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// Eval-mode mean raw loss parts over a utterance set.
std::pair<double, double> eval_losses(ModelParams& params, const Alphabet& alphabet,
                                      const std::vector<Utterance>& utterances,
                                      const LossWeights& weights, const TrainFlags& flags) {
  const std::vector<SamplePlan> plans =
      preflight(utterances, alphabet, params.config.input_dim, weights, flags);
  double ctc = 0.0;
  double kd = 0.0;
  for (size_t i = 0; i < utterances.size(); ++i) {
    const Utterance& u = utterances[i];
    ForwardResult<float> fwd = forward(params, u.features, false, 0);
    const SampleTerms terms =
        sample_terms(fwd.logits, flags.use_teacher_posteriors ? &*u.teacher_posteriors : nullptr,
                     plans[i].target, plans[i].kd_only, weights);
    ctc += terms.ctc;
    kd += terms.kd;
  }
  const double n = static_cast<double>(utterances.size());
  return {ctc / n, kd / n};
}

// Seeded selection of ground-truth labeled utterances for fine-tuning,
// returned in corpus order.
std::vector<Utterance> labeled_subset(const std::vector<Utterance>& train_set,
                                      double fraction, uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ConfigError("finetune fraction must be in (0, 1]");
  std::vector<size_t> labeled;
  for (size_t i = 0; i < train_set.size(); ++i) {
    const Utterance& u = train_set[i];
    if (u.transcript_gt.has_value() && !split_words(*u.transcript_gt).empty())
      labeled.push_back(i);
  }
  if (labeled.empty())
    throw EmptyCorpusError("no ground-truth labeled utterances available for fine-tuning");
  std::mt19937_64 rng(mix_seed(seed, 0xf17e));
  std::shuffle(labeled.begin(), labeled.end(), rng);
  size_t take = static_cast<size_t>(
      std::ceil(fraction * static_cast<double>(labeled.size())));
  take = std::clamp<size_t>(take, 1, labeled.size());
  labeled.resize(take);
  std::sort(labeled.begin(), labeled.end());
  std::vector<Utterance> subset;
  subset.reserve(take);
  for (size_t i : labeled) subset.push_back(train_set[i]);
  return subset;
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

template <typename Real>
OptimState init_optimizer(const ModelParamsT<Real>& params) {
  OptimState state;
  size_t total = 0;
  for (const auto* v : trainable_views(params)) total += v->size();
  state.first_moment.assign(total, 0.0);
  state.second_moment.assign(total, 0.0);
  return state;
}

double scheduled_lr(const OptimState& state, uint64_t step) {
  if (state.warmup_steps > 0 && step <= state.warmup_steps)
    return state.base_lr * static_cast<double>(step) / static_cast<double>(state.warmup_steps);
  if (state.total_steps > state.warmup_steps) {
    const double span = static_cast<double>(state.total_steps - state.warmup_steps);
    const double progress =
        std::min(1.0, static_cast<double>(step - state.warmup_steps) / span);
    return state.base_lr * std::pow(1.0 - progress, state.decay_power);
  }
  return state.base_lr;
}

template <typename Real>
void optimizer_step(ModelParamsT<Real>& params, const ModelParamsT<Real>& grads,
                    OptimState& state) {
  const std::vector<std::vector<Real>*> param_views = trainable_views(params);
  const std::vector<const std::vector<Real>*> grad_views = trainable_views(grads);
  if (param_views.size() != grad_views.size())
    throw ShapeMismatchError("parameter and gradient tensor counts differ");
  size_t total = 0;
  for (size_t i = 0; i < param_views.size(); ++i) {
    if (param_views[i]->size() != grad_views[i]->size())
      throw ShapeMismatchError("gradient tensor shape does not match its parameter");
    total += param_views[i]->size();
  }
  if (state.first_moment.size() != total || state.second_moment.size() != total)
    throw ShapeMismatchError("optimizer moments sized for a different model");

  double grad_sq = 0.0;
  for (const auto* v : grad_views)
    for (Real g : *v) grad_sq += static_cast<double>(g) * static_cast<double>(g);
  const double grad_norm = std::sqrt(grad_sq);
  const double grad_scale =
      (state.clip_norm > 0.0 && grad_norm > state.clip_norm) ? state.clip_norm / grad_norm
                                                             : 1.0;

  state.step += 1;
  const double lr = scheduled_lr(state, state.step);
  const double bias1 = 1.0 - std::pow(kDefaultAdamBeta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(kDefaultAdamBeta2, static_cast<double>(state.step));

  size_t offset = 0;
  for (size_t i = 0; i < param_views.size(); ++i) {
    std::vector<Real>& p = *param_views[i];
    const std::vector<Real>& g = *grad_views[i];
    for (size_t j = 0; j < p.size(); ++j, ++offset) {
      const double grad = grad_scale * static_cast<double>(g[j]);
      double& m = state.first_moment[offset];
      double& v = state.second_moment[offset];
      m = kDefaultAdamBeta1 * m + (1.0 - kDefaultAdamBeta1) * grad;
      v = kDefaultAdamBeta2 * v + (1.0 - kDefaultAdamBeta2) * grad * grad;
      const double m_hat = m / bias1;
      const double v_hat = v / bias2;
      const double theta = static_cast<double>(p[j]);
      const double update =
          m_hat / (std::sqrt(v_hat) + kDefaultAdamEpsilon) + state.weight_decay * theta;
      p[j] = static_cast<Real>(theta - lr * update);
    }
  }
}

EpochMetrics train_epoch(ModelParams& params, OptimState& state, const Alphabet& alphabet,
                         const std::vector<Utterance>& utterances,
                         const LossWeights& weights, const TrainFlags& flags) {
  if (utterances.empty()) throw DataError("cannot train on an empty utterance list");
  check_objective(weights, flags);
  const std::vector<SamplePlan> plans =
      preflight(utterances, alphabet, params.config.input_dim, weights, flags);

  const size_t n = utterances.size();
  const std::vector<size_t> order = shuffled_order(n, flags.shuffle_seed);

  EpochMetrics metrics;
  double sum_ctc = 0.0;
  double sum_kd = 0.0;
  for (size_t start = 0; start < n; start += flags.batch_size) {
    const size_t count = std::min(flags.batch_size, n - start);
    const std::span<const size_t> slice(order.data() + start, count);
    BatchStat stat = run_batch(params, state, utterances, plans, slice, weights,
                               flags.use_teacher_posteriors);
    sum_ctc += stat.ctc_loss * static_cast<double>(count);
    sum_kd += stat.kd_loss * static_cast<double>(count);
    metrics.batches.push_back(stat);
  }
  metrics.mean_ctc_loss = sum_ctc / static_cast<double>(n);
  metrics.mean_kd_loss = sum_kd / static_cast<double>(n);
  return metrics;
}

Scenario parse_scenario(const std::string& name) {
  if (name == "full_supervision") return Scenario::kFullSupervision;
  if (name == "no_supervision") return Scenario::kNoSupervision;
  if (name == "pretrain_finetune") return Scenario::kPretrainFinetune;
  throw ConfigError("unknown scenario: " + name);
}

const char* scenario_name(Scenario scenario) {
  switch (scenario) {
    case Scenario::kFullSupervision: return "full_supervision";
    case Scenario::kNoSupervision: return "no_supervision";
    case Scenario::kPretrainFinetune: return "pretrain_finetune";
  }
  throw ConfigError("unknown scenario value");
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  config.model.validate();
  if (config.alphabet.num_classes() != config.model.num_classes)
    throw ConfigError("alphabet classes do not match the model output width");
  if (config.epochs < 0 || config.finetune_epochs < 0)
    throw ConfigError("epoch counts must be nonnegative");
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  if (config.eval_cadence == 0) throw ConfigError("eval cadence must be positive");
  if (!(config.base_lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (config.decay_power < 0.0 || config.weight_decay < 0.0 || config.clip_norm < 0.0)
    throw ConfigError("decay power, weight decay, and clip norm must be nonnegative");
  if (config.train_set.empty()) throw EmptyCorpusError("training set is empty");
  if (config.dev_set.empty()) throw EmptyCorpusError("dev set is empty");

  struct Phase {
    const std::vector<Utterance>* data;
    LossWeights weights;
    TrainFlags flags;
    int epochs;
  };

  TrainFlags gt_flags;
  gt_flags.targets_from_gt = true;
  gt_flags.use_teacher_posteriors = false;
  gt_flags.batch_size = config.batch_size;
  TrainFlags kd_flags;
  kd_flags.targets_from_gt = false;
  kd_flags.use_teacher_posteriors = true;
  kd_flags.batch_size = config.batch_size;
  const LossWeights ctc_only{1.0, 0.0};

  std::vector<Phase> phases;
  std::vector<Utterance> finetune;
  switch (config.scenario) {
    case Scenario::kFullSupervision:
      phases.push_back({&config.train_set, ctc_only, gt_flags, config.epochs});
      break;
    case Scenario::kNoSupervision:
      phases.push_back({&config.train_set, config.weights, kd_flags, config.epochs});
      break;
    case Scenario::kPretrainFinetune:
      phases.push_back({&config.train_set, config.weights, kd_flags, config.epochs});
      if (config.finetune_epochs > 0) {
        if (config.finetune_set.empty()) {
          finetune = labeled_subset(config.train_set, config.finetune_fraction, config.seed);
        } else {
          finetune = config.finetune_set;
        }
        phases.push_back({&finetune, ctc_only, gt_flags, config.finetune_epochs});
      }
      break;
  }
  for (const Phase& phase : phases) check_objective(phase.weights, phase.flags);

  ModelParams params = model_init<float>(config.model, config.seed);
  params.dropout_stream = mix_seed(config.seed, 1);

  TrainingCurve curve;
  uint64_t global_step = 0;
  double epochs_done = 0.0;
  const auto add_point = [&](const Phase& phase) {
    CurvePoint point;
    point.step = global_step;
    point.epoch = epochs_done;
    const auto [ctc, kd] =
        eval_losses(params, config.alphabet, *phase.data, phase.weights, phase.flags);
    point.ctc_loss = ctc;
    point.kd_loss = kd;
    point.dev_greedy_wer = dev_greedy_wer(params, config.alphabet, config.dev_set);
    curve.points.push_back(point);
  };

  add_point(phases.front());

  uint64_t last_eval = 0;
  size_t phase_index = 0;
  for (const Phase& phase : phases) {
    ++phase_index;
    if (phase.epochs == 0) continue;
    const size_t n = phase.data->size();
    if (n == 0) throw EmptyCorpusError("fine-tuning set is empty");
    const std::vector<SamplePlan> plans = preflight(*phase.data, config.alphabet,
                                                    config.model.input_dim, phase.weights,
                                                    phase.flags);
    const size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    OptimState state = init_optimizer(params);
    state.base_lr = config.base_lr;
    state.warmup_steps = config.warmup_steps;
    state.decay_power = config.decay_power;
    state.weight_decay = config.weight_decay;
    state.clip_norm = config.clip_norm;
    state.total_steps = static_cast<uint64_t>(phase.epochs) * steps_per_epoch;

    for (int epoch = 1; epoch <= phase.epochs; ++epoch) {
      const std::vector<size_t> order =
          shuffled_order(n, mix_seed(mix_seed(config.seed, phase_index),
                                     static_cast<uint64_t>(epoch)));
      for (size_t start = 0; start < n; start += config.batch_size) {
        const size_t count = std::min(config.batch_size, n - start);
        const std::span<const size_t> slice(order.data() + start, count);
        run_batch(params, state, *phase.data, plans, slice, phase.weights,
                  phase.flags.use_teacher_posteriors);
        global_step += 1;
        epochs_done += static_cast<double>(count) / static_cast<double>(n);
        if (global_step - last_eval >= config.eval_cadence) {
          add_point(phase);
          last_eval = global_step;
        }
      }
    }
    if (curve.points.back().step != global_step) {
      add_point(phase);
      last_eval = global_step;
    }
  }

  if (!config.checkpoint_path.empty()) save_checkpoint(params, config.checkpoint_path);
  if (!config.curve_path.empty()) write_training_curve(curve, config.curve_path);
  return {std::move(curve), std::move(params)};
}

double dev_greedy_wer(ModelParams& params, const Alphabet& alphabet,
                      const std::vector<Utterance>& dev_set) {
  if (dev_set.empty()) throw EmptyCorpusError("dev set is empty");
  std::vector<std::string> missing;
  for (const Utterance& u : dev_set)
    if (!u.transcript_gt.has_value() || split_words(*u.transcript_gt).empty())
      missing.push_back(u.id);
  if (!missing.empty())
    throw DataError("dev utterances need nonempty ground-truth transcripts",
                    std::move(missing));

  size_t edits = 0;
  size_t ref_words = 0;
  for (const Utterance& u : dev_set) {
    ForwardResult<float> fwd = forward(params, u.features, false, 0);
    const PosteriorGrid grid(alphabet, log_softmax_rows(fwd.logits));
    const WerBreakdown breakdown = wer(*u.transcript_gt, greedy_decode(grid));
    edits += breakdown.edits();
    ref_words += breakdown.ref_words;
  }
  return static_cast<double>(edits) / static_cast<double>(ref_words);
}

void write_training_curve(const TrainingCurve& curve, const std::string& path) {
  std::string out = "step,epoch,ctc_loss,kd_loss,dev_greedy_wer\n";
  for (const CurvePoint& p : curve.points) {
    out += std::to_string(p.step);
    out += ',';
    out += fmt_double(p.epoch);
    out += ',';
    out += fmt_double(p.ctc_loss);
    out += ',';
    out += fmt_double(p.kd_loss);
    out += ',';
    out += fmt_double(p.dev_greedy_wer);
    out += '\n';
  }
  binary::write_file(path, out);
}

template OptimState init_optimizer<float>(const ModelParamsT<float>&);
template OptimState init_optimizer<double>(const ModelParamsT<double>&);
template void optimizer_step<float>(ModelParamsT<float>&, const ModelParamsT<float>&,
                                    OptimState&);
template void optimizer_step<double>(ModelParamsT<double>&, const ModelParamsT<double>&,
                                     OptimState&);

}  // namespace xmodal
