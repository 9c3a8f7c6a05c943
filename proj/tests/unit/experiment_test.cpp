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
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "saf/errors.hpp"
#include "saf/experiment.hpp"

namespace saf {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("saf_exp_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every CSV line without its final (timestamp) field.
std::string without_timestamps(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

json tiny_doc() {
  return json::parse(R"({
    "task": "segmentation", "seed": 3, "output": "runs/tiny",
    "dataset": {"root": "data", "seed": 5, "splits": {"train": 12, "val": 4, "test": 4}},
    "models": {"width": 6, "depth": 2,
               "surrogate": {"name": "s", "checkpoint": "models/s.ckpt", "seed": 1},
               "targets": [{"name": "t", "checkpoint": "models/t.ckpt", "seed": 2}]},
    "train": {"epochs": 1, "batch_size": 4},
    "attack": {"pipeline": "bsr_like", "epsilon": "8/255", "iterations": 2, "alpha": "eps/L",
               "counterparts": 2},
    "eval": {"split": "test", "samples": 4},
    "sweep": {"aligned": [true, false]}
  })");
}

TEST(Parse, DefaultsAndFractions) {
  const ExperimentConfig c = parse_experiment(tiny_doc().dump(), "/base");
  EXPECT_EQ(c.task, Task::kSegmentation);
  EXPECT_EQ(c.output, fs::path("/base/runs/tiny"));
  EXPECT_EQ(c.dataset_root, fs::path("/base/data"));
  EXPECT_DOUBLE_EQ(c.attack.epsilon, 8.0 / 255);
  EXPECT_EQ(c.alpha_rule, AlphaRule::kEpsilonOverIterations);
  EXPECT_DOUBLE_EQ(c.base_cell().alpha, 4.0 / 255);
  EXPECT_EQ(c.targets.size(), 1u);
  EXPECT_EQ(c.model_width, 6);
  EXPECT_EQ(c.pipeline_name, "bsr_like");
  EXPECT_EQ(c.defense.name(), "none");
  EXPECT_DOUBLE_EQ(parse_fraction("10/255"), 10.0 / 255);
  EXPECT_DOUBLE_EQ(parse_fraction("0.25"), 0.25);
  EXPECT_THROW(parse_fraction("1/0"), ConfigError);
  EXPECT_THROW(parse_fraction("abc"), ConfigError);
}

TEST(Parse, TargetsDefaultToSurrogate) {
  json d = tiny_doc();
  d["models"].erase("targets");
  const ExperimentConfig c = parse_experiment(d.dump(), "/b");
  ASSERT_EQ(c.targets.size(), 1u);
  EXPECT_EQ(c.targets[0].name, "s");
}

TEST(Parse, TargetedDefaults) {
  json d = tiny_doc();
  d["attack"] = {{"mode", "targeted"}};
  const ExperimentConfig c = parse_experiment(d.dump(), "/b");
  EXPECT_DOUBLE_EQ(c.attack.epsilon, 16.0 / 255);
  EXPECT_EQ(c.attack.iterations, 100);
  EXPECT_DOUBLE_EQ(c.base_cell().alpha, 2 * (16.0 / 255) / 100);
  ASSERT_TRUE(c.attack.target.has_value());
  EXPECT_EQ(c.attack.target->mask,
            block_target_map(c.generator.height, c.generator.width, c.generator.categories));
  d["task"] = "detection";
  EXPECT_THROW(parse_experiment(d.dump(), "/b"), ConfigError);
}

TEST(Parse, InlinePipelineAndDefense) {
  json d = tiny_doc();
  d["attack"]["pipeline"] = json::parse(serialize_pipeline(preset_pipeline("ic_like", 0.5)));
  d["defense"] = {{"kind", "bit_depth"}, {"bits", 6}};
  const ExperimentConfig c = parse_experiment(d.dump(), "/b");
  EXPECT_EQ(c.attack.pipeline, preset_pipeline("ic_like", 0.5));
  EXPECT_EQ(c.defense.name(), "bit_depth_6");
}

TEST(Parse, Errors) {
  EXPECT_THROW(parse_experiment("{not json", "/b"), ConfigError);
  EXPECT_THROW(parse_experiment("[1, 2]", "/b"), ConfigError);
  for (auto mutate : std::vector<std::function<void(json&)>>{
           [](json& d) { d["task"] = "classification"; },
           [](json& d) { d["attack"]["pipeline"] = "unknown_like"; },
           [](json& d) { d["attack"]["epsilon"] = "x/255"; },
           [](json& d) { d["attack"]["counterparts"] = 0; },
           [](json& d) { d["attack"]["mode"] = "sideways"; },
           [](json& d) { d["defense"] = {{"kind", "jpeg"}}; },
           [](json& d) { d["defense"] = {{"kind", "bit_depth"}, {"bits", 12}}; },
           [](json& d) { d["eval"]["samples"] = 0; },
           [](json& d) { d["train"]["epochs"] = -1; },
           [](json& d) { d["models"]["targets"] = json::array(); },
           [](json& d) { d["dataset"]["height"] = "tall"; },
       }) {
    json d = tiny_doc();
    mutate(d);
    EXPECT_THROW(parse_experiment(d.dump(), "/b"), ConfigError) << d.dump();
  }
}

TEST(Parse, SeedOverrideChangesHash) {
  const std::string text = tiny_doc().dump();
  const ExperimentConfig a = parse_experiment(text, "/b");
  const ExperimentConfig b = parse_experiment(text, "/b", 99);
  EXPECT_EQ(b.seed, 99u);
  EXPECT_EQ(b.attack.seed, 99u);
  EXPECT_NE(a.config_hash, b.config_hash);
  EXPECT_EQ(parse_experiment(text, "/b").config_hash, a.config_hash);
  EXPECT_EQ(parse_experiment(tiny_doc().dump(2), "/b").config_hash, a.config_hash);
  EXPECT_EQ(hash_hex(a.config_hash).size(), 16u);
}

TEST(Cells, CrossProductAndCap) {
  json d = tiny_doc();
  d["sweep"] = {{"epsilon", {"4/255", "7/255", "10/255", "13/255", "16/255"}}, {"iterations", {10}}};
  const auto cells = parse_experiment(d.dump(), "/b").cells();
  ASSERT_EQ(cells.size(), 5u);
  EXPECT_DOUBLE_EQ(cells[4].epsilon, 16.0 / 255);
  EXPECT_DOUBLE_EQ(cells[4].alpha, 1.6 / 255);
  d["sweep"]["aligned"] = {true, false};
  d["sweep"]["cap"] = 8;
  EXPECT_THROW(parse_experiment(d.dump(), "/b").cells(), ConfigError);
}

TEST(Csv, HeaderAndRowFormat) {
  EXPECT_EQ(csv_header(),
            "config_hash,seed,task,surrogate,target,attack,mode,aligned,epsilon,iterations,alpha,counterparts,"
            "defense,samples,miou,map,map50,timestamp");
  CsvRow r;
  r.config_hash = 0xabc;
  r.seed = 4;
  r.task = "segmentation";
  r.surrogate = "s";
  r.target = "t";
  r.attack = "bsr_like";
  r.mode = "non_targeted";
  r.aligned = true;
  r.epsilon = 0.5;
  r.iterations = 10;
  r.alpha = 0.25;
  r.counterparts = 10;
  r.defense = "none";
  r.samples = 32;
  r.miou = 0.5;
  r.timestamp = "2026-01-01T00:00:00Z";
  const std::string line = csv_line(r);
  EXPECT_EQ(line.substr(0, line.rfind(',')), csv_line_without_timestamp(r));
  EXPECT_NE(line.find(",0.500000,nan,nan,"), std::string::npos) << line;
  EXPECT_EQ(line.substr(0, 17), "0000000000000abc,");
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(scratch("pipeline"));
    const ExperimentConfig c = parse_experiment(tiny_doc().dump(), *root_);
    cmd_gen(c);
    cmd_train(c);
  }
  static void TearDownTestSuite() { delete root_; }
  static ExperimentConfig config(json d = tiny_doc()) { return parse_experiment(d.dump(), *root_); }
  static fs::path* root_;
};
fs::path* Pipeline::root_ = nullptr;

TEST_F(Pipeline, TrainWritesCheckpointsAndLogs) {
  EXPECT_TRUE(fs::exists(*root_ / "models/s.ckpt"));
  EXPECT_TRUE(fs::exists(*root_ / "models/t.ckpt"));
  const json log = json::parse(slurp(*root_ / "models/s.ckpt.log.json"));
  EXPECT_EQ(log["epochs"].size(), 1u);
}

TEST_F(Pipeline, SweepOverAlignmentEmitsTwoRowsAndIsReproducible) {
  const ExperimentConfig c = config();
  cmd_sweep(c);
  const std::string first = slurp(c.output / "sweep.csv");
  std::istringstream in(first);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 3);  // header + 2 rows
  cmd_sweep(c);
  EXPECT_EQ(without_timestamps(slurp(c.output / "sweep.csv")), without_timestamps(first));
}

TEST_F(Pipeline, EpsilonSweepEmitsFiveRows) {
  json d = tiny_doc();
  d["output"] = "runs/eps";
  d["sweep"] = {{"epsilon", {"4/255", "7/255", "10/255", "13/255", "16/255"}}};
  const ExperimentConfig c = config(d);
  cmd_sweep(c);
  const json rows = json::parse(slurp(c.output / "sweep.json"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_DOUBLE_EQ(rows[2]["epsilon"].get<double>(), 10.0 / 255);
}

TEST_F(Pipeline, AttackThenEvalWritesCleanAndAttackedRows) {
  const ExperimentConfig c = config();
  cmd_attack(c);
  EXPECT_TRUE(fs::exists(c.output / "attack" / "manifest.json"));
  EXPECT_TRUE(fs::exists(c.output / "attack" / "traces"));
  cmd_eval(c);
  const std::string csv = slurp(c.output / "eval.csv");
  EXPECT_NE(csv.find(",clean,"), std::string::npos);
  EXPECT_NE(csv.find(",bsr_like,"), std::string::npos);
}

TEST_F(Pipeline, MissingCheckpointIsConfigError) {
  json d = tiny_doc();
  d["models"]["surrogate"]["checkpoint"] = "models/absent.ckpt";
  EXPECT_THROW(cmd_sweep(config(d)), ConfigError);
}

}  // namespace
}  // namespace saf
