// Copyright 2026 The respkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Experiment lifecycle behind the command-line tool: prepare, train,
// evaluate, fuse and report.

#ifndef RESPKIT_EXPERIMENT_HPP_
#define RESPKIT_EXPERIMENT_HPP_

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "respkit/audio.hpp"
#include "respkit/augment.hpp"
#include "respkit/checkpoint.hpp"
#include "respkit/dataio.hpp"
#include "respkit/embedding.hpp"
#include "respkit/errors.hpp"
#include "respkit/feature_cache.hpp"
#include "respkit/features.hpp"
#include "respkit/fusion.hpp"
#include "respkit/metrics.hpp"
#include "respkit/models.hpp"
#include "respkit/random.hpp"
#include "respkit/train.hpp"

namespace respkit {

namespace fs = std::filesystem;
using nlohmann::json;

struct ExperimentConfig {
  fs::path dataset_dir;
  fs::path split_file;
  fs::path cache_dir = "cache";
  fs::path output_dir = "out";
  std::vector<SpectrogramKind> feature_kinds = {SpectrogramKind::kLogMel, SpectrogramKind::kWavelet};
  /// {"type": "inception"|"backbone"|"mlp"|"fusion_early"|"fusion_middle", ...}
  json model = {{"type", "inception"}, {"name", "Inc-03"}};
  TrainConfig train;
  /// Absent: kind-specific defaults. {"enabled": false} disables augmentation.
  json augment = json::object();
  std::uint64_t seed = 0;
  int workers = 1;

  bool has_kind(SpectrogramKind k) const {
    return std::find(feature_kinds.begin(), feature_kinds.end(), k) != feature_kinds.end();
  }
};

inline json config_to_json(const ExperimentConfig& c) {
  json kinds = json::array();
  for (auto k : c.feature_kinds) kinds.push_back(kind_name(k));
  return {{"dataset_dir", c.dataset_dir.string()},
          {"split_file", c.split_file.string()},
          {"cache_dir", c.cache_dir.string()},
          {"output_dir", c.output_dir.string()},
          {"feature_kinds", kinds},
          {"model", c.model},
          {"train",
           {{"epochs", c.train.epochs},
            {"batch_size", c.train.batch_size},
            {"lambda_reg", c.train.lambda_reg},
            {"learning_rate", c.train.learning_rate},
            {"optimizer", c.train.optimizer},
            {"kl_reduction", c.train.kl_reduction == Reduction::kMean ? "mean" : "sum"}}},
          {"augment", c.augment},
          {"seed", c.seed},
          {"workers", c.workers}};
}

/// Relative paths resolve against `base` (the config file's directory).
inline ExperimentConfig config_from_json(const json& j, const fs::path& base = {}) {
  ExperimentConfig c;
  auto path_of = [&](const char* key, const fs::path& fallback) {
    if (!j.contains(key)) return fallback;
    fs::path p = j.at(key).get<std::string>();
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    c.dataset_dir = path_of("dataset_dir", {});
    c.split_file = path_of("split_file", {});
    c.cache_dir = path_of("cache_dir", base.empty() ? c.cache_dir : base / c.cache_dir);
    c.output_dir = path_of("output_dir", base.empty() ? c.output_dir : base / c.output_dir);
    if (j.contains("feature_kinds")) {
      c.feature_kinds.clear();
      for (const auto& k : j.at("feature_kinds")) c.feature_kinds.push_back(parse_kind(k.get<std::string>()));
    }
    if (j.contains("model")) c.model = j.at("model");
    if (!c.model.is_object() || !c.model.contains("type")) throw ConfigError("model needs a 'type'");
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.lambda_reg = t.value("lambda_reg", c.train.lambda_reg);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.optimizer = t.value("optimizer", c.train.optimizer);
      const auto red = t.value("kl_reduction", std::string("mean"));
      if (red != "mean" && red != "sum") throw ConfigError("kl_reduction must be 'mean' or 'sum'");
      c.train.kl_reduction = red == "mean" ? Reduction::kMean : Reduction::kSum;
    }
    if (j.contains("augment")) c.augment = j.at("augment");
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  c.train.validate();
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j, path.parent_path());
  if (const char* env = std::getenv("RESPKIT_CACHE_DIR"); env && *env) c.cache_dir = env;
  return c;
}

/// Augmentation for training on `kind`, with streams seeded from the root seed.
inline AugmentConfig resolve_augment(const ExperimentConfig& c, SpectrogramKind kind) {
  AugmentConfig a = AugmentConfig::defaults_for(kind);
  const json& j = c.augment;
  if (j.is_object()) {
    if (!j.value("enabled", true)) {
      a = AugmentConfig::disabled();
    } else {
      a.mixup_alpha = j.value("mixup_alpha", a.mixup_alpha);
      a.time_masks = j.value("time_masks", a.time_masks);
      a.time_width = j.value("time_width", a.time_width);
      a.freq_masks = j.value("freq_masks", a.freq_masks);
      a.freq_width = j.value("freq_width", a.freq_width);
    }
  }
  if (a.mixup_alpha < 0 || a.time_masks < 0 || a.time_width < 0 || a.freq_masks < 0 || a.freq_width < 0) {
    throw ConfigError("augmentation parameters must be non-negative");
  }
  a.augment_seed = j.is_object() && j.contains("augment_seed") ? j.at("augment_seed").get<std::uint64_t>()
                                                               : derive_seed(c.seed, "augment");
  return a;
}

// ---------------------------------------------------------------------------
// Manifest.

struct ManifestRow {
  std::string cycle_id;
  std::string recording_id;
  std::string patient_id;
  CycleLabel label = CycleLabel::kNormal;
  SplitSide split = SplitSide::kTrain;
};

inline constexpr const char* kManifestHeader = "cycle_id,recording_id,patient_id,label,split";

inline CycleLabel parse_label(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (s == kLabelNames[i]) return static_cast<CycleLabel>(i);
  }
  throw ConfigError("unknown label '" + std::string(s) + "'");
}

inline std::string manifest_to_csv(const std::vector<ManifestRow>& rows) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& r : rows) {
    out += r.cycle_id + "," + r.recording_id + "," + r.patient_id + "," + label_name(r.label) + "," +
           side_name(r.split) + "\n";
  }
  return out;
}

inline std::vector<ManifestRow> manifest_from_csv(const std::string& text) {
  std::vector<ManifestRow> rows;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kManifestHeader) throw ParseError(line_no, "unexpected manifest header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (cols.size() != 5) throw ParseError(line_no, "expected 5 columns");
    try {
      rows.push_back({cols[0], cols[1], cols[2], parse_label(cols[3]), parse_side(cols[4])});
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return rows;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

inline fs::path manifest_path(const ExperimentConfig& c) { return c.cache_dir / "manifest.csv"; }

inline std::vector<ManifestRow> load_manifest(const ExperimentConfig& c) {
  const auto path = manifest_path(c);
  if (!fs::exists(path)) throw ConfigError("no prepared cache at " + c.cache_dir.string() + "; run 'prepare' first");
  return manifest_from_csv(read_text(path));
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareSummary {
  std::size_t recordings = 0;
  std::size_t cycles = 0;
  std::size_t extracted = 0;
  double train_fraction = 0;
};

namespace experiment_detail {

/// Runs fn(i) for i in [0, n) on `workers` threads; rethrows the first error.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const int extra = std::min<int>(workers, static_cast<int>(n)) - 1;
  std::vector<std::thread> pool;
  for (int t = 0; t < extra; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::string cycle_id(const std::string& recording, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_c%03zu", index);
  return recording + buf;
}

}  // namespace experiment_detail

/// Scans dataset_dir for <stem>.txt annotation files with matching
/// <stem>.wav audio, applies the split table, writes the manifest and one
/// feature file per cycle and configured kind.
inline PrepareSummary cmd_prepare(const ExperimentConfig& c) {
  if (c.dataset_dir.empty() || !fs::is_directory(c.dataset_dir)) {
    throw ConfigError("dataset_dir '" + c.dataset_dir.string() + "' is not a directory");
  }
  if (c.split_file.empty() || !fs::exists(c.split_file)) {
    throw ConfigError("split file '" + c.split_file.string() + "' not found");
  }
  const SplitTable table = parse_split_table(read_text(c.split_file));

  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(c.dataset_dir)) {
    if (entry.path().extension() != ".txt") continue;
    if (fs::exists(c.split_file) && fs::equivalent(entry.path(), c.split_file)) continue;
    stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) throw ConfigError("no annotation files in " + c.dataset_dir.string());

  struct Job {
    std::size_t recording;
    CycleRecord record;
    std::string id;
  };
  std::vector<CycleRecord> all;
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < stems.size(); ++r) {
    const fs::path wav = c.dataset_dir / (stems[r] + ".wav");
    if (!fs::exists(wav)) throw ConfigError("missing audio " + wav.string());
    std::vector<CycleRecord> recs;
    try {
      recs = parse_annotations(read_text(c.dataset_dir / (stems[r] + ".txt")), stems[r]);
    } catch (const ParseError& e) {
      throw ParseError(e.line(), stems[r] + ".txt: " + e.what());
    }
    for (std::size_t i = 0; i < recs.size(); ++i) {
      jobs.push_back({r, recs[i], experiment_detail::cycle_id(stems[r], i)});
      all.push_back(recs[i]);
    }
  }
  const SplitAssignment split = make_split(all, table);

  std::vector<ManifestRow> rows;
  for (const auto& j : jobs) {
    rows.push_back({j.id, j.record.recording_id, j.record.patient_id, j.record.label,
                    split.side_of(j.record.recording_id)});
  }
  write_text(manifest_path(c), manifest_to_csv(rows));

  // Decode and resample each recording once, then extract cycles in parallel.
  std::vector<AudioClip> audio(stems.size());
  experiment_detail::parallel_for(stems.size(), c.workers, [&](std::size_t r) {
    AudioClip clip = read_wav(c.dataset_dir / (stems[r] + ".wav"));
    audio[r] = clip.sample_rate == kPipelineRate ? std::move(clip) : resample(clip, kPipelineRate);
  });
  std::atomic<std::size_t> extracted{0};
  experiment_detail::parallel_for(jobs.size(), c.workers, [&](std::size_t i) {
    const Job& j = jobs[i];
    const AudioClip cycle = fix_duration(extract_cycle(audio[j.recording], j.record), kCycleSeconds);
    const json meta = {{"cycle_id", j.id},
                       {"recording_id", j.record.recording_id},
                       {"onset", j.record.onset},
                       {"offset", j.record.offset},
                       {"sample_rate", kPipelineRate}};
    for (auto kind : c.feature_kinds) {
      const fs::path path = feature_path(c.cache_dir, kind, j.id);
      if (fs::exists(path)) {
        try {
          if (read_feature(path).metadata == meta) continue;
        } catch (const Error&) {
          // Unreadable cache entry: regenerate.
        }
      }
      write_feature(path, extract_features(cycle, kind), meta);
      ++extracted;
    }
  });
  return {stems.size(), jobs.size(), extracted.load(), split.train_fraction()};
}

// ---------------------------------------------------------------------------
// Loading cached features.

inline Spectrogram load_cached(const ExperimentConfig& c, SpectrogramKind kind, const std::string& id) {
  const auto path = feature_path(c.cache_dir, kind, id);
  if (!fs::exists(path)) throw IntegrityError("cycle " + id + " has no cached " + kind_name(kind) + " features");
  auto f = read_feature(path);
  if (f.spectrogram.kind != kind) throw IntegrityError(path.string() + " holds the wrong feature kind");
  validate_spectrogram(f.spectrogram);
  return std::move(f.spectrogram);
}

inline std::vector<ManifestRow> rows_of(const std::vector<ManifestRow>& rows, SplitSide side) {
  std::vector<ManifestRow> out;
  for (const auto& r : rows) {
    if (r.split == side) out.push_back(r);
  }
  return out;
}

inline std::vector<Spectrogram> load_many(const ExperimentConfig& c, SpectrogramKind kind,
                                          const std::vector<ManifestRow>& rows) {
  std::vector<Spectrogram> out(rows.size());
  experiment_detail::parallel_for(rows.size(), c.workers,
                                  [&](std::size_t i) { out[i] = load_cached(c, kind, rows[i].cycle_id); });
  return out;
}

// ---------------------------------------------------------------------------
// Model plumbing.

inline const std::string& model_type(const ExperimentConfig& c) { return c.model.at("type").get_ref<const std::string&>(); }

/// Feature kinds a model type consumes.
inline std::vector<SpectrogramKind> required_kinds(const json& model) {
  const auto type = model.at("type").get<std::string>();
  if (type == "inception" || type == "backbone") return {SpectrogramKind::kWavelet};
  if (type == "mlp") return {SpectrogramKind::kLogMel};
  if (type == "fusion_early" || type == "fusion_middle") return {SpectrogramKind::kLogMel, SpectrogramKind::kWavelet};
  throw ConfigError("unknown model type '" + type + "'");
}

inline void check_kinds(const ExperimentConfig& c) {
  const auto type = model_type(c);
  for (auto k : required_kinds(c.model)) {
    if (!c.has_kind(k)) {
      throw ConfigError("model type '" + type + "' needs " + kind_name(k) + " features but the cache holds " +
                        (c.feature_kinds.empty() ? std::string("none") : kind_name(c.feature_kinds.front())));
    }
  }
  if (c.model.contains("input_kind")) {
    const auto declared = parse_kind(c.model.at("input_kind").get<std::string>());
    const auto needed = required_kinds(c.model).back();
    if (type != "mlp" && declared != needed) {
      throw ConfigError("model type '" + type + "' expects " + kind_name(needed) + " input, config says " +
                        kind_name(declared));
    }
  }
}

/// Provider for framework III / fusion: {"provider": ...} in the model block,
/// defaulting to the 2048-wide fixture.
inline std::unique_ptr<EmbeddingProvider> model_provider(const json& model, std::uint64_t root_seed) {
  json m = model.value("provider", json{{"provider", "fixture"}, {"dim", 2048}});
  if (m.value("provider", std::string()) == "fixture" && !m.contains("seed")) m["seed"] = derive_seed(root_seed, "provider");
  return make_embedding_provider(m);
}

/// Framework-specific feature rows for the MLP-based model types.
struct VectorPipeline {
  std::unique_ptr<EmbeddingProvider> provider;
  std::optional<NetworkTapProvider> tap;
  json metadata;

  int dim() const { return provider->dim() + (tap ? tap->dim() : 0); }

  Tensor vectors(const ExperimentConfig& c, const std::vector<ManifestRow>& rows) const {
    const Tensor a = provider->embed_batch(load_many(c, provider->input_kind(), rows));
    if (!tap) return a;
    const Tensor b = tap->embed_batch(load_many(c, SpectrogramKind::kWavelet, rows));
    Tensor out({static_cast<int>(rows.size()), dim()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto row = concat_embeddings(std::span<const float>(a.data() + i * a.dim(1), a.dim(1)),
                                         std::span<const float>(b.data() + i * b.dim(1), b.dim(1)));
      std::copy(row.begin(), row.end(), out.data() + i * dim());
    }
    return out;
  }
};

inline VectorPipeline make_vector_pipeline(const json& model, std::uint64_t root_seed, const fs::path& base = {}) {
  VectorPipeline p;
  p.provider = model_provider(model, root_seed);
  p.metadata = {{"type", model.at("type")}, {"provider", p.provider->manifest()}};
  const auto type = model.at("type").get<std::string>();
  if (type == "fusion_early" || type == "fusion_middle") {
    if (!model.contains("inception_checkpoint")) throw ConfigError(type + " needs 'inception_checkpoint'");
    fs::path ckpt = model.at("inception_checkpoint").get<std::string>();
    if (ckpt.is_relative() && !base.empty()) ckpt = base / ckpt;
    if (!fs::exists(ckpt)) throw ConfigError("inception checkpoint " + ckpt.string() + " not found");
    auto loaded = load_checkpoint(ckpt);
    const std::string tap = model.value("tap", type == "fusion_early" ? std::string("GMP") : std::string("FC2"));
    p.tap.emplace(std::move(loaded.net), tap);
    p.metadata["inception_checkpoint"] = fs::absolute(ckpt).string();
    p.metadata["tap"] = tap;
  }
  return p;
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  fs::path checkpoint;
  TrainHistory history;
};

inline TrainOutcome cmd_train(const ExperimentConfig& c) {
  check_kinds(c);
  const auto manifest = load_manifest(c);
  // Only Train rows are ever read here.
  const auto rows = rows_of(manifest, SplitSide::kTrain);
  if (rows.empty()) throw ConfigError("the Train split is empty");
  TrainConfig tc = c.train;
  tc.seed = derive_seed(c.seed, "train");
  const std::uint64_t init_seed = derive_seed(c.seed, "init");
  const auto type = model_type(c);

  std::vector<SoftLabel> labels;
  for (const auto& r : rows) labels.push_back(SoftLabel::one_hot(r.label));

  std::optional<TrainResult> result;
  json meta = {{"model", c.model}, {"seed", c.seed}};
  if (type == "inception" || type == "backbone") {
    const auto name = c.model.value("name", std::string(type == "inception" ? "Inc-03" : "VGG16"));
    Network net = type == "inception" ? build_inception_net(name, init_seed) : build_backbone(name, init_seed);
    std::vector<LabeledSpectrogram> set;
    const auto xs = load_many(c, SpectrogramKind::kWavelet, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) set.push_back({xs[i], labels[i]});
    result.emplace(train_model(net, set, tc, resolve_augment(c, SpectrogramKind::kWavelet)));
    meta["input_kind"] = "wavelet";
  } else {
    const VectorPipeline pipe = make_vector_pipeline(c.model, c.seed);
    result.emplace(train_mlp_on_vectors(pipe.vectors(c, rows), labels, tc, resolve_augment(c, SpectrogramKind::kLogMel)));
    meta["pipeline"] = pipe.metadata;
    meta["input_kind"] = type == "mlp" ? "logmel" : "logmel+wavelet";
  }
  fs::create_directories(c.output_dir);
  TrainOutcome out{c.output_dir / "model.ckpt", std::move(result->history)};
  save_checkpoint(out.checkpoint, result->net, meta);
  json extra = {{"input_kind", meta["input_kind"]}, {"model", c.model}};
  if (meta.contains("pipeline")) extra["pipeline"] = meta["pipeline"];
  write_manifest(c.output_dir / "model.json", result->net, extra);
  write_text(c.output_dir / "history.csv", out.history.to_csv());
  write_text(c.output_dir / "config.json", config_to_json(c).dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// evaluate

inline std::array<double, 4> row_of(const Tensor& probs, int i) {
  return {probs.at(i, 0), probs.at(i, 1), probs.at(i, 2), probs.at(i, 3)};
}

/// Truth labels for `set`'s cycles, in the set's (sorted) order.
inline std::vector<int> truth_for(const PredictionSet& set, const std::vector<ManifestRow>& manifest) {
  std::map<std::string, int> truth;
  for (const auto& r : manifest) truth[r.cycle_id] = static_cast<int>(r.label);
  std::vector<int> out;
  for (const auto& [id, p] : set.probs) {
    auto it = truth.find(id);
    if (it == truth.end()) throw IntegrityError("cycle " + id + " is not in the manifest");
    out.push_back(it->second);
  }
  return out;
}

inline void write_report(const fs::path& dir, const std::string& stem, const MetricsReport& r, const std::string& title) {
  write_text(dir / (stem + ".json"), report_to_json(r).dump(2) + "\n");
  write_text(dir / (stem + ".md"), report_to_markdown(r, title));
}

struct EvaluateOutcome {
  PredictionSet predictions;
  MetricsReport report;
};

inline EvaluateOutcome cmd_evaluate(const ExperimentConfig& c, const fs::path& checkpoint,
                                    SplitSide side = SplitSide::kTest) {
  const auto manifest = load_manifest(c);
  const auto rows = rows_of(manifest, side);
  if (rows.empty()) throw ConfigError(std::string("the ") + side_name(side) + " split is empty");
  auto loaded = load_checkpoint(checkpoint);
  const json& meta = loaded.metadata;
  Tensor probs;
  if (meta.contains("pipeline")) {
    const VectorPipeline pipe = make_vector_pipeline(meta.at("pipeline"), c.seed);
    probs = loaded.net.predict(pipe.vectors(c, rows));
  } else {
    const auto xs = load_many(c, SpectrogramKind::kWavelet, rows);
    const auto& in = loaded.net.input_shape();
    Tensor batch({static_cast<int>(rows.size()), in[0], in[1], in[2]});
    for (std::size_t i = 0; i < xs.size(); ++i) std::copy(xs[i].values.begin(), xs[i].values.end(), batch.data() + i * batch.stride0());
    probs = loaded.net.predict(batch);
  }
  EvaluateOutcome out;
  out.predictions.framework_id = loaded.net.descriptor().name;
  for (std::size_t i = 0; i < rows.size(); ++i) out.predictions.add(rows[i].cycle_id, row_of(probs, static_cast<int>(i)));
  const auto truth = truth_for(out.predictions, manifest);
  out.report = icbhi_scores(confusion(truth, out.predictions.labels()));
  const std::string split = side_name(side);
  write_text(c.output_dir / ("predictions_" + split + ".csv"), predictions_to_csv(out.predictions));
  write_report(c.output_dir, "report_" + split, out.report, out.predictions.framework_id);
  return out;
}

// ---------------------------------------------------------------------------
// fuse / report

struct FuseOutcome {
  PredictionSet fused;
  std::optional<MetricsReport> report;
};

/// Late PROD fusion. Scores against the manifest when one is available.
inline FuseOutcome cmd_fuse(const std::vector<fs::path>& inputs, const fs::path& out_dir,
                            const std::optional<ExperimentConfig>& c = std::nullopt) {
  if (inputs.size() < 2) throw ConfigError("fuse needs at least two prediction files");
  std::vector<PredictionSet> sets;
  for (const auto& p : inputs) sets.push_back(read_predictions(p.string()));
  FuseOutcome out;
  out.fused = fuse_predictions(sets);
  write_text(out_dir / "fused.csv", predictions_to_csv(out.fused));
  std::string labels = "cycle_id,label\n";
  for (const auto& [id, p] : out.fused.probs) labels += id + "," + kLabelNames[predict_label(p)] + "\n";
  write_text(out_dir / "labels.csv", labels);
  if (c && fs::exists(manifest_path(*c))) {
    const auto manifest = load_manifest(*c);
    out.report = icbhi_scores(confusion(truth_for(out.fused, manifest), out.fused.labels()));
    write_report(out_dir, "report_fused", *out.report, "Late fusion (PROD)");
  }
  return out;
}

/// One markdown table over several report JSON files.
inline std::string cmd_report(const std::vector<fs::path>& reports) {
  if (reports.empty()) throw ConfigError("report needs at least one report file");
  std::string out = "| System | Spec. | Sen. | ICB. |\n|---|---|---|---|\n";
  for (const auto& p : reports) {
    json j;
    try {
      j = json::parse(read_text(p));
    } catch (const json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
    const auto r = report_from_json(j);
    out += "| " + p.stem().string() + " | " + one_decimal(r.spec) + " | " + one_decimal(r.sen) + " | " +
           one_decimal(r.icb) + " |\n";
  }
  return out;
}

}  // namespace respkit

#endif  // RESPKIT_EXPERIMENT_HPP_
