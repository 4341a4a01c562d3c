// xmodal/cli/cli.cc

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

#include "xmodal/cli/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "xmodal/core/binary_io.h"
#include "xmodal/core/errors.h"
#include "xmodal/core/finite_diff.h"
#include "xmodal/core/log_math.h"
#include "xmodal/core/posterior_grid.h"
#include "xmodal/core/rng.h"
#include "xmodal/ctc/ctc.h"
#include "xmodal/decode/decode.h"
#include "xmodal/decode/ngram_lm.h"
#include "xmodal/distill/distill.h"
#include "xmodal/eval/filter.h"
#include "xmodal/eval/manifest.h"
#include "xmodal/eval/wer.h"
#include "xmodal/model/model.h"
#include "xmodal/train/train.h"

namespace xmodal {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used == value.size()) return parsed;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key " + key + ": cannot parse '" + value + "' as a number");
}

uint64_t parse_u64(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    const unsigned long long parsed = std::stoull(value, &used);
    if (used == value.size() && value.find('-') == std::string::npos)
      return static_cast<uint64_t>(parsed);
  } catch (const std::exception&) {
  }
  throw ConfigError("config key " + key + ": cannot parse '" + value +
                    "' as a nonnegative integer");
}

int parse_int(const std::string& value, const std::string& key) {
  try {
    size_t used = 0;
    const int parsed = std::stoi(value, &used);
    if (used == value.size()) return parsed;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key " + key + ": cannot parse '" + value + "' as an integer");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

Setter set_double(double RunConfig::* field) {
  return [field](RunConfig& rc, const std::string& v, const std::string& key) {
    rc.*field = parse_double(v, key);
  };
}
Setter set_u64(uint64_t RunConfig::* field) {
  return [field](RunConfig& rc, const std::string& v, const std::string& key) {
    rc.*field = parse_u64(v, key);
  };
}
Setter set_size(size_t RunConfig::* field) {
  return [field](RunConfig& rc, const std::string& v, const std::string& key) {
    rc.*field = static_cast<size_t>(parse_u64(v, key));
  };
}
Setter set_int(int RunConfig::* field) {
  return [field](RunConfig& rc, const std::string& v, const std::string& key) {
    rc.*field = parse_int(v, key);
  };
}
Setter set_string(std::string RunConfig::* field) {
  return [field](RunConfig& rc, const std::string& v, const std::string&) {
    rc.*field = v;
  };
}

const std::map<std::string, std::map<std::string, Setter>>& config_schema() {
  static const std::map<std::string, std::map<std::string, Setter>> schema = {
      {"data",
       {{"alphabet", set_string(&RunConfig::alphabet)},
        {"num_utterances", set_size(&RunConfig::num_utterances)},
        {"words_min", set_int(&RunConfig::words_min)},
        {"words_max", set_int(&RunConfig::words_max)},
        {"frames_min", set_int(&RunConfig::frames_min)},
        {"frames_max", set_int(&RunConfig::frames_max)},
        {"feature_dim", set_size(&RunConfig::feature_dim)},
        {"noise_sigma", set_double(&RunConfig::noise_sigma)},
        {"peakiness", set_double(&RunConfig::peakiness)},
        {"jitter", set_int(&RunConfig::jitter)},
        {"asr2_noise_sigma", set_double(&RunConfig::asr2_noise_sigma)},
        {"dev_fraction", set_double(&RunConfig::dev_fraction)},
        {"seed", set_u64(&RunConfig::data_seed)},
        {"vocabulary", set_string(&RunConfig::vocabulary)}}},
      {"model", {{"preset", set_string(&RunConfig::preset)}}},
      {"loss",
       {{"lambda_ctc", set_double(&RunConfig::lambda_ctc)},
        {"lambda_kd", set_double(&RunConfig::lambda_kd)}}},
      {"optim",
       {{"lr", set_double(&RunConfig::lr)},
        {"warmup_steps", set_u64(&RunConfig::warmup_steps)},
        {"decay_power", set_double(&RunConfig::decay_power)},
        {"weight_decay", set_double(&RunConfig::weight_decay)},
        {"clip_norm", set_double(&RunConfig::clip_norm)},
        {"batch_size", set_size(&RunConfig::batch_size)},
        {"epochs", set_int(&RunConfig::epochs)},
        {"finetune_epochs", set_int(&RunConfig::finetune_epochs)},
        {"finetune_fraction", set_double(&RunConfig::finetune_fraction)},
        {"eval_cadence", set_u64(&RunConfig::eval_cadence)},
        {"seed", set_u64(&RunConfig::seed)}}},
      {"decode",
       {{"mode", set_string(&RunConfig::mode)},
        {"beam_width", set_size(&RunConfig::beam_width)},
        {"lm_weight", set_double(&RunConfig::lm_weight)},
        {"word_bonus", set_double(&RunConfig::word_bonus)},
        {"lm", set_string(&RunConfig::lm)}}},
      {"filter",
       {{"min_valid_ratio", set_double(&RunConfig::min_valid_ratio)},
        {"max_wer", set_double(&RunConfig::max_wer)}}},
  };
  return schema;
}

std::string trim(const std::string& s) {
  const size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

void apply_config_text(RunConfig& config, const std::string& text) {
  const auto& schema = config_schema();
  const std::map<std::string, Setter>* section = nullptr;
  std::string section_name;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      section_name = trim(stripped.substr(1, stripped.size() - 2));
      const auto it = schema.find(section_name);
      if (it == schema.end())
        throw ConfigError("unknown config section: [" + section_name + "]");
      section = &it->second;
      continue;
    }
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    if (section == nullptr)
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside any section");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = section->find(key);
    if (it == section->end())
      throw ConfigError("unknown config key: " + section_name + "." + key);
    it->second(config, value, section_name + "." + key);
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& path) {
  RunConfig config;
  apply_config_text(config, binary::read_file(path));
  return config;
}

std::string render_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "# resolved xmodal run configuration\n";
  out << "[data]\n";
  out << "alphabet = " << c.alphabet << "\n";
  out << "num_utterances = " << c.num_utterances << "\n";
  out << "words_min = " << c.words_min << "\n";
  out << "words_max = " << c.words_max << "\n";
  out << "frames_min = " << c.frames_min << "\n";
  out << "frames_max = " << c.frames_max << "\n";
  out << "feature_dim = " << c.feature_dim << "\n";
  out << "noise_sigma = " << fmt_double(c.noise_sigma) << "\n";
  out << "peakiness = " << fmt_double(c.peakiness) << "\n";
  out << "jitter = " << c.jitter << "\n";
  out << "asr2_noise_sigma = " << fmt_double(c.asr2_noise_sigma) << "\n";
  out << "dev_fraction = " << fmt_double(c.dev_fraction) << "\n";
  out << "seed = " << c.data_seed << "\n";
  out << "vocabulary = " << c.vocabulary << "\n";
  out << "[model]\n";
  out << "preset = " << c.preset << "\n";
  out << "[loss]\n";
  out << "lambda_ctc = " << fmt_double(c.lambda_ctc) << "\n";
  out << "lambda_kd = " << fmt_double(c.lambda_kd) << "\n";
  out << "[optim]\n";
  out << "lr = " << fmt_double(c.lr) << "\n";
  out << "warmup_steps = " << c.warmup_steps << "\n";
  out << "decay_power = " << fmt_double(c.decay_power) << "\n";
  out << "weight_decay = " << fmt_double(c.weight_decay) << "\n";
  out << "clip_norm = " << fmt_double(c.clip_norm) << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "finetune_epochs = " << c.finetune_epochs << "\n";
  out << "finetune_fraction = " << fmt_double(c.finetune_fraction) << "\n";
  out << "eval_cadence = " << c.eval_cadence << "\n";
  out << "seed = " << c.seed << "\n";
  out << "[decode]\n";
  out << "mode = " << c.mode << "\n";
  out << "beam_width = " << c.beam_width << "\n";
  out << "lm_weight = " << fmt_double(c.lm_weight) << "\n";
  out << "word_bonus = " << fmt_double(c.word_bonus) << "\n";
  out << "lm = " << c.lm << "\n";
  out << "[filter]\n";
  out << "min_valid_ratio = " << fmt_double(c.min_valid_ratio) << "\n";
  out << "max_wer = " << fmt_double(c.max_wer) << "\n";
  return out.str();
}

Alphabet alphabet_from(const std::string& spec) {
  if (spec == "english") return Alphabet::default_english();
  std::string graphemes;
  for (size_t i = 0; i < spec.size(); ++i) {
    if (spec[i] == '\\' && i + 1 < spec.size() && spec[i + 1] == 's') {
      graphemes.push_back(' ');
      ++i;
    } else {
      graphemes.push_back(spec[i]);
    }
  }
  return Alphabet(graphemes);
}

std::vector<Utterance> load_utterances(const std::string& manifest_path,
                                       const Alphabet& alphabet) {
  const std::vector<ManifestRecord> records = read_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  const auto resolve = [&](const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q.string() : (base / q).string();
  };
  std::vector<Utterance> utterances;
  utterances.reserve(records.size());
  for (const ManifestRecord& r : records) {
    Utterance u;
    u.id = r.id;
    if (!r.features_path.empty()) u.features = read_features(resolve(r.features_path));
    if (!r.posteriors_path.empty())
      u.teacher_posteriors = read_posteriors(resolve(r.posteriors_path), alphabet);
    if (!r.transcript_gt.empty()) u.transcript_gt = r.transcript_gt;
    if (!r.transcript_asr.empty()) u.transcript_asr = r.transcript_asr;
    utterances.push_back(std::move(u));
  }
  return utterances;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  binary::write_file(path, text);
}

void echo_config(const RunConfig& config, const std::string& out_dir) {
  write_text((fs::path(out_dir) / "config.txt").string(), render_run_config(config));
}

std::vector<std::string> read_word_lines(const std::string& path) {
  std::istringstream in(binary::read_file(path));
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const std::string word = trim(line);
    if (!word.empty()) words.push_back(word);
  }
  return words;
}

int cmd_gen_data(const RunConfig& rc, const std::string& out_dir) {
  if (rc.dev_fraction < 0.0 || rc.dev_fraction >= 1.0)
    throw ConfigError("data.dev_fraction must be in [0, 1)");
  GenConfig gen;
  gen.alphabet = alphabet_from(rc.alphabet);
  gen.num_utterances = rc.num_utterances;
  gen.transcript_words = {rc.words_min, rc.words_max};
  gen.frames_per_grapheme = {rc.frames_min, rc.frames_max};
  gen.feature_dim = rc.feature_dim;
  gen.feature_noise_sigma = rc.noise_sigma;
  gen.teacher_peakiness = rc.peakiness;
  gen.spike_jitter = rc.jitter;
  gen.seed = rc.data_seed;
  if (!rc.vocabulary.empty()) gen.vocabulary = read_word_lines(rc.vocabulary);

  const std::vector<Utterance> corpus = generate_corpus(gen);
  fs::create_directories(fs::path(out_dir) / "features");
  fs::create_directories(fs::path(out_dir) / "posteriors");

  std::vector<ManifestRecord> records;
  records.reserve(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    const Utterance& u = corpus[i];
    ManifestRecord record;
    record.id = u.id;
    record.features_path = "features/" + u.id + ".ctcf";
    record.posteriors_path = "posteriors/" + u.id + ".ctcp";
    write_features(u.features, (fs::path(out_dir) / record.features_path).string());
    write_posteriors(*u.teacher_posteriors,
                     (fs::path(out_dir) / record.posteriors_path).string());
    record.transcript_gt = *u.transcript_gt;
    record.transcript_asr = teacher_transcribe(*u.teacher_posteriors);
    // A seed stream disjoint from the generator's own per-utterance streams.
    const PosteriorGrid second = perturb_grid(*u.teacher_posteriors, rc.asr2_noise_sigma,
                                              mix_seed(mix_seed(rc.data_seed, 2), i));
    record.transcript_asr2 = teacher_transcribe(second);
    records.push_back(std::move(record));
  }

  write_manifest(records, (fs::path(out_dir) / "manifest.jsonl").string());
  size_t dev_count = static_cast<size_t>(
      std::llround(rc.dev_fraction * static_cast<double>(records.size())));
  if (rc.dev_fraction > 0.0 && records.size() >= 2)
    dev_count = std::clamp<size_t>(dev_count, 1, records.size() - 1);
  else
    dev_count = 0;
  const size_t train_count = records.size() - dev_count;
  const std::vector<ManifestRecord> train_records(records.begin(),
                                                  records.begin() + train_count);
  const std::vector<ManifestRecord> dev_records(records.begin() + train_count,
                                                records.end());
  write_manifest(train_records, (fs::path(out_dir) / "train.jsonl").string());
  write_manifest(dev_records, (fs::path(out_dir) / "dev.jsonl").string());

  gen.alphabet.save((fs::path(out_dir) / "alphabet.txt").string());
  std::string dictionary;
  if (gen.vocabulary.empty()) {
    for (const std::string& word : english_word_bank()) dictionary += word + "\n";
  } else {
    for (const std::string& word : gen.vocabulary) dictionary += word + "\n";
  }
  write_text((fs::path(out_dir) / "words.txt").string(), dictionary);
  echo_config(rc, out_dir);
  std::cout << "generated " << records.size() << " utterances (" << train_count
            << " train, " << dev_count << " dev) under " << out_dir << "\n";
  return 0;
}

int cmd_filter(const RunConfig& rc, const std::string& manifest_path,
               const std::string& dict_path, const std::string& out_dir) {
  const std::vector<ManifestRecord> records = read_manifest(manifest_path);
  const std::set<std::string> dictionary = load_dictionary(dict_path);
  const FilterThresholds thresholds{rc.min_valid_ratio, rc.max_wer};
  const FilterReport report = filter_corpus(records, dictionary, thresholds);
  const std::vector<ManifestRecord> kept = kept_subset(records, report);

  const std::string dir =
      out_dir.empty() ? fs::path(manifest_path).parent_path().string() : out_dir;
  fs::create_directories(dir.empty() ? "." : dir);
  write_manifest(kept, (fs::path(dir) / "filtered.jsonl").string());
  write_filter_report(report, (fs::path(dir) / "filter_report.jsonl").string());
  if (!out_dir.empty()) echo_config(rc, dir);
  std::cout << summarize_filter_report(report) << "\n";
  return 0;
}

int cmd_train_lm(const RunConfig& rc, const std::string& manifest_path, int order,
                 const std::string& field, const std::string& out_dir) {
  const std::vector<ManifestRecord> records = read_manifest(manifest_path);
  std::vector<std::string> lines;
  for (const ManifestRecord& r : records) {
    if (field == "gt") {
      if (!r.transcript_gt.empty()) lines.push_back(r.transcript_gt);
    } else if (field == "asr") {
      if (!r.transcript_asr.empty()) lines.push_back(r.transcript_asr);
    } else {
      throw ConfigError("--field must be gt or asr");
    }
  }
  const NGramLM lm = NGramLM::train(lines, order);
  fs::create_directories(out_dir);
  lm.save((fs::path(out_dir) / "lm.txt").string());
  echo_config(rc, out_dir);
  std::cout << "trained order-" << order << " lm on " << lines.size() << " lines, "
            << lm.vocabulary().size() << " words\n";
  return 0;
}

ModelConfig preset_model(const std::string& preset, size_t input_dim, int num_classes) {
  if (preset == "desk") return ModelConfig::desk_preset(input_dim, num_classes);
  if (preset == "paper") return ModelConfig::paper_preset(input_dim, num_classes);
  throw ConfigError("model.preset must be desk or paper");
}

int cmd_train(const RunConfig& rc, const std::string& scenario_str,
              const std::string& manifest_path, const std::string& dev_manifest,
              const std::string& alphabet_path, const std::string& out_dir) {
  const fs::path manifest_dir = fs::path(manifest_path).parent_path();
  const std::string resolved_alphabet =
      alphabet_path.empty() ? (manifest_dir / "alphabet.txt").string() : alphabet_path;
  const Alphabet alphabet = Alphabet::load(resolved_alphabet);

  ScenarioConfig sc;
  sc.scenario = parse_scenario(scenario_str);
  sc.train_set = load_utterances(manifest_path, alphabet);
  if (sc.train_set.empty()) throw EmptyCorpusError("training manifest is empty");
  if (!dev_manifest.empty()) {
    sc.dev_set = load_utterances(dev_manifest, alphabet);
  } else if (fs::exists(manifest_dir / "dev.jsonl")) {
    sc.dev_set = load_utterances((manifest_dir / "dev.jsonl").string(), alphabet);
  } else {
    // Hold out the manifest tail when no dev set is provided.
    if (sc.train_set.size() < 2)
      throw ConfigError("need a --dev-manifest or at least 2 training utterances");
    const size_t dev_count = std::max<size_t>(
        1, static_cast<size_t>(std::llround(0.1 * static_cast<double>(sc.train_set.size()))));
    sc.dev_set.assign(sc.train_set.end() - dev_count, sc.train_set.end());
    sc.train_set.resize(sc.train_set.size() - dev_count);
  }

  sc.model = preset_model(rc.preset, sc.train_set.front().features.cols(),
                          alphabet.num_classes());
  sc.alphabet = alphabet;
  sc.weights = {rc.lambda_ctc, rc.lambda_kd};
  sc.epochs = rc.epochs;
  sc.finetune_epochs = rc.finetune_epochs;
  sc.finetune_fraction = rc.finetune_fraction;
  sc.batch_size = rc.batch_size;
  sc.eval_cadence = rc.eval_cadence;
  sc.base_lr = rc.lr;
  sc.warmup_steps = rc.warmup_steps;
  sc.decay_power = rc.decay_power;
  sc.weight_decay = rc.weight_decay;
  sc.clip_norm = rc.clip_norm;
  sc.seed = rc.seed;
  fs::create_directories(out_dir);
  sc.curve_path = (fs::path(out_dir) / "curve.csv").string();
  sc.checkpoint_path = (fs::path(out_dir) / "model.jlip").string();

  const ScenarioResult result = run_scenario(sc);
  echo_config(rc, out_dir);
  const CurvePoint& last = result.curve.points.back();
  std::cout << "scenario " << scenario_str << ": " << last.step << " steps, final dev WER "
            << fmt_double(last.dev_greedy_wer) << " (artifacts under " << out_dir << ")\n";
  return 0;
}

struct DecodeSettings {
  std::string mode = "greedy";
  BeamConfig beam;
  std::optional<NGramLM> lm;
};

DecodeSettings decode_settings(const RunConfig& rc) {
  DecodeSettings settings;
  if (rc.mode != "greedy" && rc.mode != "beam")
    throw ConfigError("decode.mode must be greedy or beam");
  settings.mode = rc.mode;
  settings.beam.width = rc.beam_width;
  settings.beam.lm_weight = rc.lm_weight;
  settings.beam.word_bonus = rc.word_bonus;
  if (!rc.lm.empty()) settings.lm = NGramLM::load(rc.lm);
  return settings;
}

std::string settings_line(const RunConfig& rc, const std::string& checkpoint) {
  std::ostringstream out;
  out << "# checkpoint=" << checkpoint << " mode=" << rc.mode << " beam_width="
      << rc.beam_width << " lm=" << (rc.lm.empty() ? "none" : rc.lm)
      << " lm_weight=" << fmt_double(rc.lm_weight)
      << " word_bonus=" << fmt_double(rc.word_bonus);
  return out.str();
}

std::string decode_one(ModelParams& params, const Alphabet& alphabet,
                       const Matrix& features, const DecodeSettings& settings) {
  const ForwardResult<float> fwd = forward(params, features, false, 0);
  const PosteriorGrid grid(alphabet, log_softmax_rows(fwd.logits));
  if (settings.mode == "greedy") return greedy_decode(grid);
  return beam_search(grid, settings.beam, settings.lm ? &*settings.lm : nullptr).transcript;
}

int cmd_decode(const RunConfig& rc, const std::string& manifest_path,
               const std::string& checkpoint_path, const std::string& alphabet_path,
               const std::string& out_dir) {
  ModelParams params = load_checkpoint(checkpoint_path);
  const fs::path manifest_dir = fs::path(manifest_path).parent_path();
  const std::string resolved_alphabet =
      alphabet_path.empty() ? (manifest_dir / "alphabet.txt").string() : alphabet_path;
  const Alphabet alphabet = Alphabet::load(resolved_alphabet);
  if (alphabet.num_classes() != params.config.num_classes)
    throw ConfigError("alphabet classes do not match the checkpoint");
  const DecodeSettings settings = decode_settings(rc);

  std::vector<Utterance> utterances = load_utterances(manifest_path, alphabet);
  std::string csv = settings_line(rc, checkpoint_path) + "\nid,transcript\n";
  for (Utterance& u : utterances) {
    csv += u.id + "," + decode_one(params, alphabet, u.features, settings) + "\n";
  }
  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "hypotheses.csv").string(), csv);
  echo_config(rc, out_dir);
  std::cout << "decoded " << utterances.size() << " utterances into " << out_dir << "\n";
  return 0;
}

int cmd_eval_wer(const RunConfig& rc, const std::string& manifest_path,
                 const std::string& checkpoint_path, const std::string& alphabet_path,
                 const std::string& out_dir) {
  ModelParams params = load_checkpoint(checkpoint_path);
  const fs::path manifest_dir = fs::path(manifest_path).parent_path();
  const std::string resolved_alphabet =
      alphabet_path.empty() ? (manifest_dir / "alphabet.txt").string() : alphabet_path;
  const Alphabet alphabet = Alphabet::load(resolved_alphabet);
  if (alphabet.num_classes() != params.config.num_classes)
    throw ConfigError("alphabet classes do not match the checkpoint");
  const DecodeSettings settings = decode_settings(rc);

  std::vector<Utterance> utterances = load_utterances(manifest_path, alphabet);
  if (utterances.empty()) throw EmptyCorpusError("manifest is empty");
  std::vector<std::string> missing;
  for (const Utterance& u : utterances)
    if (!u.transcript_gt.has_value() || split_words(*u.transcript_gt).empty())
      missing.push_back(u.id);
  if (!missing.empty())
    throw DataError("utterances need nonempty ground-truth transcripts", std::move(missing));

  std::string csv = settings_line(rc, checkpoint_path) +
                    "\nid,ref_words,edits,wer,reference,hypothesis\n";
  size_t edits = 0;
  size_t ref_words = 0;
  for (Utterance& u : utterances) {
    const std::string hyp = decode_one(params, alphabet, u.features, settings);
    const WerBreakdown b = wer(*u.transcript_gt, hyp);
    edits += b.edits();
    ref_words += b.ref_words;
    csv += u.id + "," + std::to_string(b.ref_words) + "," + std::to_string(b.edits()) +
           "," + fmt_double(b.wer) + "," + *u.transcript_gt + "," + hyp + "\n";
  }
  const double corpus_wer =
      static_cast<double>(edits) / static_cast<double>(ref_words);
  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "wer_report.csv").string(), csv);
  echo_config(rc, out_dir);
  std::cout << "corpus WER " << fmt_double(corpus_wer) << " over " << utterances.size()
            << " utterances (" << edits << " edits / " << ref_words << " words)\n";
  return 0;
}

// Minimal edit distance by exhaustive recursion; oracle for the check
// subcommand only (lengths stay tiny).
size_t brute_edit_count(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  size_t best = brute_edit_count(a.subspan(1), b.subspan(1)) + (a[0] == b[0] ? 0 : 1);
  best = std::min(best, brute_edit_count(a.subspan(1), b) + 1);
  best = std::min(best, brute_edit_count(a, b.subspan(1)) + 1);
  return best;
}

Matrix random_log_grid(std::mt19937_64& rng, size_t rows, size_t cols) {
  Matrix logits(rows, cols);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (double& x : logits.data()) x = dist(rng);
  return log_softmax_rows(logits);
}

int cmd_check() {
  bool all_ok = true;
  const auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    all_ok = all_ok && ok;
    std::cout << "check " << name << ": " << (ok ? "ok" : "FAIL") << " (" << detail << ")\n";
  };
  std::mt19937_64 rng(1234);

  {  // CTC forward-backward against path enumeration
    const Alphabet alphabet("ab");
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      std::uniform_int_distribution<size_t> t_dist(1, 5);
      const size_t frames = t_dist(rng);
      Matrix logits(frames, 3);
      std::uniform_real_distribution<double> dist(-2.0, 2.0);
      for (double& x : logits.data()) x = dist(rng);
      std::uniform_int_distribution<int> len_dist(0, 3);
      std::uniform_int_distribution<int> sym_dist(0, 1);
      std::vector<int> target(static_cast<size_t>(len_dist(rng)));
      for (int& s : target) s = sym_dist(rng);
      if (min_frames_for_target(target) > frames) continue;
      const double loss = ctc_loss(logits, target).loss;
      const PosteriorGrid grid(alphabet, log_softmax_rows(logits));
      const double oracle = -ctc_logprob_bruteforce(grid, target);
      worst = std::max(worst, std::abs(loss - oracle));
    }
    report("ctc-oracle", worst <= 1e-9, "max |loss - bruteforce| = " + fmt_double(worst));
  }

  {  // loss gradients against central differences
    const size_t frames = 6, classes = 4;
    Matrix logits(frames, classes);
    std::uniform_real_distribution<double> dist(-1.5, 1.5);
    for (double& x : logits.data()) x = dist(rng);
    const std::vector<int> target = {0, 2, 1};
    const PosteriorGrid teacher(Alphabet("abc"), random_log_grid(rng, frames, classes));
    const LossWeights weights{0.1, 10.0};

    const auto check_grad = [&](const std::function<double(const Matrix&)>& f,
                                const Matrix& analytic) {
      const auto wrap = [&](std::span<const double> point) {
        Matrix candidate(frames, classes);
        std::copy(point.begin(), point.end(), candidate.data().begin());
        return f(candidate);
      };
      const std::vector<double> fd = finite_diff_grad(wrap, logits.data(), 1e-6);
      double worst = 0.0;
      const std::span<const double> a = analytic.data();
      for (size_t i = 0; i < fd.size(); ++i) {
        const double scale = std::max({1.0, std::abs(fd[i]), std::abs(a[i])});
        worst = std::max(worst, std::abs(fd[i] - a[i]) / scale);
      }
      return worst;
    };

    const double w_ctc = check_grad(
        [&](const Matrix& m) { return ctc_loss(m, target).loss; },
        ctc_loss(logits, target).grad_logits);
    const double w_kd = check_grad(
        [&](const Matrix& m) { return kd_loss(teacher, m).loss; },
        kd_loss(teacher, logits).grad_logits);
    const double w_comb = check_grad(
        [&](const Matrix& m) { return combined_loss(teacher, m, target, weights).total; },
        combined_loss(teacher, logits, target, weights).grad_logits);
    const double worst = std::max({w_ctc, w_kd, w_comb});
    report("loss-gradients", worst <= 1e-5, "max relative error = " + fmt_double(worst));
  }

  {  // model gradient (double precision) against central differences
    ModelConfig config;
    config.input_dim = 3;
    config.num_classes = 4;
    config.upsample_kernel = 3;
    config.upsample_channels = 4;
    config.upsample_dropout = 0.1;
    config.blocks = {{3, 5, 1, 0.1}};
    config.dilated_kernel = 3;
    config.dilation = 2;
    config.dilated_channels = 5;
    config.dilated_dropout = 0.1;
    config.head_channels = 6;
    config.head_dropout = 0.1;

    ModelParamsT<double> params = model_init<double>(config, 11);
    Matrix features(4, 3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& x : features.data()) x = dist(rng);
    Matrix probe(8, 4);
    for (double& x : probe.data()) x = dist(rng);

    std::vector<double> point;
    for_each_tensor<double>(
        params, [&](const std::string&, TensorKind kind, const std::vector<double>& v) {
          if (is_trainable(kind)) point.insert(point.end(), v.begin(), v.end());
        });
    const auto loss_at = [&](std::span<const double> values) {
      ModelParamsT<double> candidate = model_init<double>(config, 11);
      size_t offset = 0;
      for_each_tensor<double>(candidate,
                              [&](const std::string&, TensorKind kind, std::vector<double>& v) {
                                if (!is_trainable(kind)) return;
                                for (double& x : v) x = values[offset++];
                              });
      const ForwardResult<double> fwd = forward(candidate, features, true, 77);
      double loss = 0.0;
      for (size_t i = 0; i < fwd.logits.data().size(); ++i)
        loss += probe.data()[i] * fwd.logits.data()[i];
      return loss;
    };
    const std::vector<double> fd = finite_diff_grad(loss_at, point, 1e-6);

    ModelParamsT<double> work = params;
    const ForwardResult<double> fwd = forward(work, features, true, 77);
    const BackwardResult<double> back = backward(work, fwd.cache, probe);
    std::vector<double> analytic;
    for_each_tensor<double>(
        back.grads, [&](const std::string&, TensorKind kind, const std::vector<double>& v) {
          if (is_trainable(kind)) analytic.insert(analytic.end(), v.begin(), v.end());
        });
    double worst = 0.0;
    for (size_t i = 0; i < fd.size(); ++i) {
      const double scale = std::max({1.0, std::abs(fd[i]), std::abs(analytic[i])});
      worst = std::max(worst, std::abs(fd[i] - analytic[i]) / scale);
    }
    report("model-gradient", worst <= 1e-6, "max relative error = " + fmt_double(worst));
  }

  {  // beam search against exhaustive decoding
    const Alphabet alphabet("ab");
    double worst = 0.0;
    bool transcripts_match = true;
    for (int i = 0; i < 25; ++i) {
      std::uniform_int_distribution<size_t> t_dist(1, 4);
      const PosteriorGrid grid(alphabet, random_log_grid(rng, t_dist(rng), 3));
      BeamConfig config;
      config.width = 4096;
      config.lm_weight = 0.0;
      config.word_bonus = 0.0;
      const DecodeResult beam = beam_search(grid, config);
      const DecodeResult exact = exhaustive_decode(grid);
      transcripts_match = transcripts_match && beam.transcript == exact.transcript;
      worst = std::max(worst, std::abs(beam.score - exact.score));
    }
    report("beam-oracle", transcripts_match && worst <= 1e-9,
           "max |score delta| = " + fmt_double(worst));
  }

  {  // WER against exhaustive edit distance
    const std::vector<std::string> lexicon = {"a", "b", "c"};
    bool exact = true;
    std::uniform_int_distribution<size_t> len_dist(0, 5);
    std::uniform_int_distribution<size_t> word_dist(0, lexicon.size() - 1);
    for (int i = 0; i < 50 && exact; ++i) {
      std::vector<std::string> ref(std::max<size_t>(1, len_dist(rng)));
      std::vector<std::string> hyp(len_dist(rng));
      for (std::string& w : ref) w = lexicon[word_dist(rng)];
      for (std::string& w : hyp) w = lexicon[word_dist(rng)];
      exact = wer(ref, hyp).edits() == brute_edit_count(ref, hyp);
    }
    report("wer-oracle", exact, "50 random pairs");
  }

  {  // doubled output length under the desk preset
    ModelParams params = model_init<float>(ModelConfig::desk_preset(4, 5), 3);
    bool ok = true;
    for (const size_t frames : {size_t{1}, size_t{2}, size_t{7}}) {
      const Matrix features(frames, 4, 0.25);
      ok = ok && forward(params, features, false, 0).logits.rows() == 2 * frames;
    }
    report("shape-contract", ok, "output rows = 2x input frames");
  }

  return all_ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"xmodal: cross-modal CTC distillation at desk scale"};
  app.require_subcommand(1);

  std::string config_path, out_dir, manifest, dev_manifest, alphabet_path;
  std::string checkpoint, dict_path, scenario, lm_field = "asr";
  int lm_order = kDefaultLmOrder;
  bool deterministic = false;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  RunConfig flags;  // flag values land here, then override the file config

  app.add_flag("--deterministic", deterministic,
               "force single-threaded execution for bit-identical reruns");
  app.add_option("--workers", workers, "worker count (processing is serial either way)")
      ->capture_default_str();

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen->add_option("--config", config_path, "run config file (INI sections)");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--num-utterances", flags.num_utterances, "corpus size")
      ->capture_default_str();
  gen->add_option("--seed", flags.data_seed, "generation seed")->capture_default_str();
  gen->add_option("--peakiness", flags.peakiness, "teacher spike mass")
      ->capture_default_str();
  gen->add_option("--jitter", flags.jitter, "teacher spike jitter, frames")
      ->capture_default_str();
  gen->add_option("--feature-dim", flags.feature_dim, "feature dimension")
      ->capture_default_str();

  CLI::App* filter = app.add_subcommand("filter", "two-stage corpus filter");
  filter->add_option("--config", config_path, "run config file");
  filter->add_option("--manifest", manifest, "input manifest")->required();
  filter->add_option("--dict", dict_path, "dictionary word list")->required();
  filter->add_option("--min-valid", flags.min_valid_ratio,
                     "stage 1: minimum valid-word ratio, inclusive")
      ->capture_default_str();
  filter->add_option("--max-wer", flags.max_wer,
                     "stage 2: agreement WER upper bound, exclusive")
      ->capture_default_str();
  filter->add_option("--out", out_dir, "output directory (default: manifest directory)");

  CLI::App* trainlm = app.add_subcommand("train-lm", "train the word n-gram model");
  trainlm->add_option("--config", config_path, "run config file");
  trainlm->add_option("--manifest", manifest, "transcript source manifest")->required();
  trainlm->add_option("--order", lm_order, "n-gram order")->capture_default_str();
  trainlm->add_option("--field", lm_field, "transcript field: gt or asr")
      ->capture_default_str();
  trainlm->add_option("--out", out_dir, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "run a training scenario");
  train->add_option("--config", config_path, "run config file");
  train->add_option("--scenario", scenario,
                    "full_supervision | no_supervision | pretrain_finetune")
      ->required();
  train->add_option("--manifest", manifest, "training manifest")->required();
  train->add_option("--dev-manifest", dev_manifest,
                    "dev manifest (default: sibling dev.jsonl, else a 10% holdout)");
  train->add_option("--alphabet", alphabet_path,
                    "alphabet file (default: alphabet.txt beside the manifest)");
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--lambda-ctc", flags.lambda_ctc, "CTC weight in the combined loss")
      ->capture_default_str();
  train->add_option("--lambda-kd", flags.lambda_kd,
                    "distillation weight in the combined loss")
      ->capture_default_str();
  train->add_option("--epochs", flags.epochs, "training epochs")->capture_default_str();
  train->add_option("--finetune-epochs", flags.finetune_epochs,
                    "fine-tuning epochs (pretrain_finetune)")
      ->capture_default_str();
  train->add_option("--batch-size", flags.batch_size, "utterances per optimizer step")
      ->capture_default_str();
  train->add_option("--lr", flags.lr, "base learning rate")->capture_default_str();
  train->add_option("--warmup-steps", flags.warmup_steps, "linear warmup steps")
      ->capture_default_str();
  train->add_option("--eval-cadence", flags.eval_cadence, "steps between dev evals")
      ->capture_default_str();
  train->add_option("--seed", flags.seed, "training seed")->capture_default_str();
  train->add_option("--preset", flags.preset, "model preset: desk or paper")
      ->capture_default_str();

  CLI::App* decode = app.add_subcommand("decode", "decode a manifest with a checkpoint");
  decode->add_option("--config", config_path, "run config file");
  decode->add_option("--manifest", manifest, "input manifest")->required();
  decode->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  decode->add_option("--alphabet", alphabet_path, "alphabet file");
  decode->add_option("--out", out_dir, "output directory")->required();
  decode->add_option("--mode", flags.mode, "greedy or beam")->capture_default_str();
  decode->add_option("--beam", flags.beam_width, "beam width")->capture_default_str();
  decode->add_option("--lm", flags.lm, "n-gram LM for shallow fusion");
  decode->add_option("--lm-weight", flags.lm_weight, "LM score weight")
      ->capture_default_str();
  decode->add_option("--word-bonus", flags.word_bonus, "per-word insertion bonus")
      ->capture_default_str();

  CLI::App* evalwer = app.add_subcommand("eval-wer", "decode and score against ground truth");
  evalwer->add_option("--config", config_path, "run config file");
  evalwer->add_option("--manifest", manifest, "input manifest")->required();
  evalwer->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  evalwer->add_option("--alphabet", alphabet_path, "alphabet file");
  evalwer->add_option("--out", out_dir, "output directory")->required();
  evalwer->add_option("--mode", flags.mode, "greedy or beam")->capture_default_str();
  evalwer->add_option("--beam", flags.beam_width, "beam width")->capture_default_str();
  evalwer->add_option("--lm", flags.lm, "n-gram LM for shallow fusion");
  evalwer->add_option("--lm-weight", flags.lm_weight, "LM score weight")
      ->capture_default_str();
  evalwer->add_option("--word-bonus", flags.word_bonus, "per-word insertion bonus")
      ->capture_default_str();

  CLI::App* check = app.add_subcommand("check", "run the oracle and gradient self-test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig rc;
    if (!config_path.empty()) rc = parse_run_config(config_path);
    // Explicitly passed flags override file values.
    const auto override_if = [&](const CLI::App* cmd, const std::string& name, auto member) {
      if (cmd->count(name) > 0) rc.*member = flags.*member;
    };
    if (gen->parsed()) {
      override_if(gen, "--num-utterances", &RunConfig::num_utterances);
      override_if(gen, "--seed", &RunConfig::data_seed);
      override_if(gen, "--peakiness", &RunConfig::peakiness);
      override_if(gen, "--jitter", &RunConfig::jitter);
      override_if(gen, "--feature-dim", &RunConfig::feature_dim);
      return cmd_gen_data(rc, out_dir);
    }
    if (filter->parsed()) {
      override_if(filter, "--min-valid", &RunConfig::min_valid_ratio);
      override_if(filter, "--max-wer", &RunConfig::max_wer);
      return cmd_filter(rc, manifest, dict_path, out_dir);
    }
    if (trainlm->parsed()) return cmd_train_lm(rc, manifest, lm_order, lm_field, out_dir);
    if (train->parsed()) {
      override_if(train, "--lambda-ctc", &RunConfig::lambda_ctc);
      override_if(train, "--lambda-kd", &RunConfig::lambda_kd);
      override_if(train, "--epochs", &RunConfig::epochs);
      override_if(train, "--finetune-epochs", &RunConfig::finetune_epochs);
      override_if(train, "--batch-size", &RunConfig::batch_size);
      override_if(train, "--lr", &RunConfig::lr);
      override_if(train, "--warmup-steps", &RunConfig::warmup_steps);
      override_if(train, "--eval-cadence", &RunConfig::eval_cadence);
      override_if(train, "--seed", &RunConfig::seed);
      override_if(train, "--preset", &RunConfig::preset);
      return cmd_train(rc, scenario, manifest, dev_manifest, alphabet_path, out_dir);
    }
    const auto decode_overrides = [&](const CLI::App* cmd) {
      override_if(cmd, "--mode", &RunConfig::mode);
      override_if(cmd, "--beam", &RunConfig::beam_width);
      override_if(cmd, "--lm", &RunConfig::lm);
      override_if(cmd, "--lm-weight", &RunConfig::lm_weight);
      override_if(cmd, "--word-bonus", &RunConfig::word_bonus);
    };
    if (decode->parsed()) {
      decode_overrides(decode);
      return cmd_decode(rc, manifest, checkpoint, alphabet_path, out_dir);
    }
    if (evalwer->parsed()) {
      decode_overrides(evalwer);
      return cmd_eval_wer(rc, manifest, checkpoint, alphabet_path, out_dir);
    }
    if (check->parsed()) return cmd_check();
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const std::string& id : e.utterance_ids) std::cerr << "  " << id << "\n";
    return 1;
  } catch (const ManifestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const EmptyCorpusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const EmptyReferenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const OutOfAlphabetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InfeasibleTargetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InstanceTooLargeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace xmodal
