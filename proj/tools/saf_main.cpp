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

// saf: experiment front end.
//
//   saf gen    --config exp.json      generate the dataset splits
//   saf train  --config exp.json      train surrogate and target models
//   saf attack --config exp.json      attack the eval split on the surrogate
//   saf eval   --config exp.json      score clean and attacked scenes
//   saf sweep  --config exp.json      attack + score every sweep cell
//
// Exit codes: 0 success, 2 configuration or input error, 3 divergence,
// 1 anything else.

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "saf/errors.hpp"
#include "saf/experiment.hpp"

namespace {

int run(const std::string& command, const std::string& config, std::optional<uint64_t> seed) {
  const saf::ExperimentConfig cfg = saf::load_experiment(config, seed);
  std::fprintf(stderr, "[saf] %s config_hash=%s seed=%llu\n", command.c_str(),
               saf::hash_hex(cfg.config_hash).c_str(), static_cast<unsigned long long>(cfg.seed));
  const saf::Logger log = [](const std::string& msg) { std::fprintf(stderr, "[saf] %s\n", msg.c_str()); };
  std::vector<std::filesystem::path> written;
  if (command == "gen") written = saf::cmd_gen(cfg, log);
  if (command == "train") written = saf::cmd_train(cfg, log);
  if (command == "attack") written = saf::cmd_attack(cfg, log);
  if (command == "eval") written = saf::cmd_eval(cfg, log);
  if (command == "sweep") written = saf::cmd_sweep(cfg, log);
  for (const auto& p : written) std::printf("%s\n", p.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially aligned transformation attacks on toy segmentation and detection models"};
  app.require_subcommand(1);
  std::string config;
  std::optional<uint64_t> seed;
  for (const char* name : {"gen", "train", "attack", "eval", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", config, "experiment config (JSON)")->required();
    sub->add_option("-s,--seed", seed, "override the config seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, config, seed);
  } catch (const saf::ConfigError& e) {
    std::fprintf(stderr, "saf %s: configuration error: %s\n", command.c_str(), e.what());
    return 2;
  } catch (const saf::CodecError& e) {
    std::fprintf(stderr, "saf %s: input error: %s\n", command.c_str(), e.what());
    return 2;
  } catch (const saf::DivergenceError& e) {
    std::fprintf(stderr, "saf %s: %s\n", command.c_str(), e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "saf %s: error: %s\n", command.c_str(), e.what());
    return 1;
  }
}
