// Copyright 2026 The SAF Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// Experiment configuration and the gen / train / attack / eval / sweep
// commands behind the `saf` tool. The document grammar and every output
// file are described in docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "saf/attack.hpp"
#include "saf/metrics.hpp"
#include "saf/models.hpp"
#include "saf/scenes.hpp"
#include "saf/transforms.hpp"

namespace saf {

struct ModelRef {
  std::string name;
  std::filesystem::path checkpoint;
  uint64_t seed = 1;  // initialization and data-order seed for training
};

struct DefenseConfig {
  int bits = 0;  // 0 = no defense, otherwise bit-depth reduction

  std::string name() const;
  Tensor apply(const Tensor& x) const;
};

enum class AlphaRule { kFixed, kEpsilonOverIterations, kTwoEpsilonOverIterations };

struct SweepAxes {
  std::vector<double> epsilon;
  std::vector<int> iterations;
  std::vector<bool> aligned;
  int cap = 64;
};

/// One attack setting of a sweep.
struct SweepCell {
  double epsilon = 0;
  int iterations = 0;
  bool aligned = true;
  double alpha = 0;
};

struct ExperimentConfig {
  Task task = Task::kSegmentation;
  uint64_t seed = 1;
  std::filesystem::path output;

  std::filesystem::path dataset_root;
  uint64_t dataset_seed = 7;
  GeneratorConfig generator;
  std::vector<std::pair<std::string, int>> splits;  // name, count
  std::string eval_split = "test";
  int samples = 32;

  ModelRef surrogate;
  std::vector<ModelRef> targets;
  int model_width = 16;
  int model_depth = 4;
  TrainConfig train;

  AttackConfig attack;
  std::string pipeline_name;
  double magnitude = 1.0;
  AlphaRule alpha_rule = AlphaRule::kFixed;

  DefenseConfig defense;
  SweepAxes sweep;

  /// The effective document (seed override applied), serialized with
  /// sorted keys; its FNV-1a hash is the provenance key of every artifact.
  std::string canonical_json;
  uint64_t config_hash = 0;

  ModelArch arch() const;
  /// The cross product of the sweep axes; missing axes fall back to the
  /// attack block. Throws ConfigError above the cap.
  std::vector<SweepCell> cells() const;
  /// The attack block as a single cell.
  SweepCell base_cell() const;
  AttackConfig attack_for(const SweepCell& cell) const;
};

/// Relative paths resolve against `base`.
ExperimentConfig parse_experiment(std::string_view json_text, const std::filesystem::path& base,
                                  std::optional<uint64_t> seed_override = std::nullopt);
/// Reads a config file; relative paths resolve against $SAF_OUTPUT_ROOT when
/// set, else the current directory.
ExperimentConfig load_experiment(const std::filesystem::path& file,
                                 std::optional<uint64_t> seed_override = std::nullopt);

std::string hash_hex(uint64_t hash);

/// Parses "0.1", "10/255" or a number held in a string.
double parse_fraction(std::string_view text);

using Logger = std::function<void(const std::string&)>;

// ---------------------------------------------------------------------------
// Building blocks, shared by the commands and the acceptance suite.

/// Attacks every scene with seed derive_seed({cfg.seed, scene index}).
std::vector<Scene> attack_scenes(const Model& surrogate, const std::vector<Scene>& scenes,
                                 const AttackConfig& cfg,
                                 std::vector<std::vector<IterationRecord>>* traces = nullptr);

/// Metrics of `model` on `scenes` after the defense. Segmentation compares
/// with the scene masks, or with `reference` when given (targeted runs).
EvalReport evaluate(const Model& model, const std::vector<Scene>& scenes,
                    const DefenseConfig& defense = {},
                    const std::optional<LabelMap>& reference = std::nullopt);

struct CsvRow {
  uint64_t config_hash = 0;
  uint64_t seed = 0;
  std::string task;
  std::string surrogate;
  std::string target;
  std::string attack;
  std::string mode;
  std::optional<bool> aligned;  // empty for clean rows
  double epsilon = 0;
  int iterations = 0;
  double alpha = 0;
  int counterparts = 0;
  std::string defense;
  int64_t samples = 0;
  std::optional<double> miou, map, map50;
  std::string timestamp;
};

std::string csv_header();
std::string csv_line(const CsvRow& row);
/// The row without its timestamp field, for determinism checks.
std::string csv_line_without_timestamp(const CsvRow& row);

// ---------------------------------------------------------------------------
// Commands. Each returns the paths it wrote.

std::vector<std::filesystem::path> cmd_gen(const ExperimentConfig& cfg, const Logger& log = {});
std::vector<std::filesystem::path> cmd_train(const ExperimentConfig& cfg, const Logger& log = {});
std::vector<std::filesystem::path> cmd_attack(const ExperimentConfig& cfg, const Logger& log = {});
std::vector<std::filesystem::path> cmd_eval(const ExperimentConfig& cfg, const Logger& log = {});
std::vector<std::filesystem::path> cmd_sweep(const ExperimentConfig& cfg, const Logger& log = {});

}  // namespace saf
