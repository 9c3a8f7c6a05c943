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
// Acceptance suite: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Datasets and models come from the shipped configs and are built
// under the work directory. Exit status 0 only when every criterion passes
// within the total time limit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grad_check.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "reference.hpp"
#include "saf/attack.hpp"
#include "saf/experiment.hpp"
#include "saf/metrics.hpp"
#include "saf/models.hpp"
#include "saf/transforms.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace saf;
using Clock = std::chrono::steady_clock;

constexpr double kTotalLimitSeconds = 30 * 60;
constexpr int kSeeds = 5;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void progress(const std::string& msg) { std::fprintf(stderr, "[acceptance] %s\n", msg.c_str()); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  if (!o.pass) ++failures;
  std::printf("%s  %2d  %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

/// Runs one criterion; an exception fails it without stopping the others.
template <typename Fn>
void run(int id, const std::string& name, Fn&& fn) {
  try {
    report(id, name, fn());
  } catch (const std::exception& e) {
    report(id, name, {false, std::string("error: ") + e.what()});
  }
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.data().size_bytes()) == 0;
}

// ---------------------------------------------------------------------------
// Gradient fidelity.

struct GradTally {
  double worst = 0;
  std::string worst_name;
  int checks = 0;
  void add(const std::string& name, double rel) {
    ++checks;
    if (rel > worst || std::isnan(rel)) worst = rel, worst_name = name;
  }
};

Tensor uniform_grid(int64_t ho, int64_t wo, uint64_t seed) {
  return testing::random_tensor({1, ho, wo, 2}, seed, -0.95f, 0.95f);
}

std::vector<int32_t> permutation_of(int64_t n, uint64_t seed) {
  std::vector<int32_t> p(static_cast<size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  Rng rng(seed);
  for (int64_t i = n - 1; i > 0; --i) std::swap(p[size_t(i)], p[size_t(rng.uniform_int(0, i))]);
  return p;
}

Outcome gradient_fidelity() {
  const auto start = Clock::now();
  GradTally tally;
  using testing::check_gradient;
  using testing::random_tensor;
  using testing::weighted_sum;

  const Tensor x = random_tensor({2, 3, 8, 8}, 1);
  const Tensor kernel = random_tensor({4, 3, 3, 3}, 2);
  const Tensor bias = random_tensor({4}, 3);
  for (int stride : {1, 2}) {
    const std::string tag = "conv2d/s" + std::to_string(stride);
    tally.add(tag + "/input", check_gradient([&](Tape& t, Var v) {
                return weighted_sum(t, conv2d(v, t.constant(kernel), t.constant(bias), stride, 1), 4);
              }, x).rel_error);
    tally.add(tag + "/kernel", check_gradient([&](Tape& t, Var v) {
                return weighted_sum(t, conv2d(t.constant(x), v, t.constant(bias), stride, 1), 4);
              }, kernel).rel_error);
    tally.add(tag + "/bias", check_gradient([&](Tape& t, Var v) {
                return weighted_sum(t, conv2d(t.constant(x), t.constant(kernel), v, stride, 1), 4);
              }, bias).rel_error);
  }
  const Tensor smooth_x = testing::away_from_zero(x);
  tally.add("relu", check_gradient([](Tape& t, Var v) { return weighted_sum(t, relu(v), 5); }, smooth_x).rel_error);
  const Tensor grid = uniform_grid(7, 9, 6);
  tally.add("bilinear_sample",
            check_gradient([&](Tape& t, Var v) { return weighted_sum(t, bilinear_sample(v, grid), 7); }, x).rel_error);
  const auto perm = permutation_of(64, 8);
  tally.add("gather_pixels",
            check_gradient([&](Tape& t, Var v) { return weighted_sum(t, gather_pixels(v, perm), 9); }, x).rel_error);
  std::vector<int32_t> index_map(perm);
  for (size_t i = 0; i < index_map.size(); i += 5) index_map[i] = -1;
  for (size_t i = 1; i < index_map.size(); i += 7) index_map[i] = 3;
  tally.add("remap_pixels",
            check_gradient([&](Tape& t, Var v) { return weighted_sum(t, remap_pixels(v, index_map), 10); }, x).rel_error);
  LabelMap labels(8, 8);
  Rng rng(11);
  for (auto& l : labels.values) l = static_cast<uint8_t>(rng.uniform_int(0, 3));
  labels.values[5] = LabelMap::kIgnore;
  const Tensor logits = random_tensor({1, 4, 8, 8}, 12, -3, 3);
  // A mean over pixels is too flat for float32 differences; the quotient
  // comes from an independent double-precision loss.
  tally.add("softmax_cross_entropy",
            testing::check_against_reference([&](Tape&, Var v) { return softmax_cross_entropy(v, labels); },
                                             [&](const testing::DTensor& v) { return testing::ref_seg_loss(v, labels); },
                                             logits)
                .rel_error);
  const Tensor other = random_tensor(x.shape(), 13);
  tally.add("add", check_gradient([&](Tape& t, Var v) { return weighted_sum(t, add(v, t.constant(other)), 14); }, x).rel_error);
  tally.add("add_constant", check_gradient([&](Tape& t, Var v) { return weighted_sum(t, add(v, other), 14); }, x).rel_error);
  tally.add("mul", check_gradient([&](Tape& t, Var v) { return weighted_sum(t, mul(v, t.constant(other)), 15); }, x).rel_error);
  tally.add("mul_self", check_gradient([&](Tape& t, Var v) { return weighted_sum(t, mul(v, v), 15); }, x).rel_error);
  tally.add("scale", check_gradient([&](Tape& t, Var v) { return weighted_sum(t, scale(v, -2.5f), 16); }, x).rel_error);
  // Reductions of many elements are too flat for float32 differences.
  const Tensor small = random_tensor({1, 2, 3, 3}, 20);
  tally.add("sum", check_gradient([&](Tape&, Var v) { return sum(mul(v, v)); }, small).rel_error);
  tally.add("mean", check_gradient([&](Tape&, Var v) { return mean(mul(v, v)); }, small).rel_error);
  tally.add("relu_scale_channels", check_gradient([&](Tape& t, Var v) {
              return weighted_sum(t, relu_scale_channels(v, 1, 2, 4.0f), 17);
            }, smooth_x).rel_error);

  const Tensor image = random_tensor({1, 3, 16, 16}, 18, 0, 1);
  for (const auto& chain : testing::composite_chains()) {
    if (chain.size() != 1) continue;
    tally.add("apply_image/" + chain[0].describe(), check_gradient([&](Tape& t, Var v) {
                return weighted_sum(t, apply_image(chain[0], v), 19);
              }, image).rel_error);
  }

  // Model losses through transform chains, against an independent
  // double-precision forward.
  const Model seg(ModelArch::segmenter(4, 6, 3), 21);
  const Model det(ModelArch::detector(4, 6), 23);
  const Scene scene = generate_scene(GeneratorConfig{}, 3, "test", 1).scene;
  LabelMap mask(16, 16);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) mask.at(i, j) = scene.mask.at(i + 8, j + 8);
  }
  const BoxSet boxes{{1, 2, 9, 8, 1, {}}, {8, 7, 15, 15, 3, {}}};
  double worst_forward = 0;
  for (bool aligned : {true, false}) {
    for (const auto& chain : testing::composite_chains()) {
      const std::string tag = std::string(aligned ? "SA/" : "noSA/") + testing::describe(chain);
      const LabelMap label = aligned ? align_label({mask, {}, {}}, spatial_part(chain)).mask : mask;
      const auto s = testing::check_against_reference(
          [&](Tape& t, Var v) { return seg_loss(seg.forward(t, apply_image_chain(chain, v)), label).loss; },
          [&](const testing::DTensor& v) {
            return testing::ref_seg_loss(testing::ref_forward(seg, testing::ref_chain(chain, v)), label);
          },
          image);
      tally.add("segmenter/" + tag, s.rel_error);
      worst_forward = std::max(worst_forward, s.forward_rel_error);

      const AttackLabel base{LabelMap(16, 16), boxes, {}};
      const AttackLabel dl = aligned ? align_label(base, spatial_part(chain)) : base;
      const LabelMap* valid = dl.valid ? &*dl.valid : nullptr;
      const DetTargets targets = assign_targets(dl.boxes, 16, 16, 4, valid);
      const auto d = testing::check_against_reference(
          [&](Tape& t, Var v) {
            return det_loss(det.forward(t, apply_image_chain(chain, v)), dl.boxes, 16, 16, 4, valid).loss;
          },
          [&](const testing::DTensor& v) {
            return testing::ref_det_loss(testing::ref_forward(det, testing::ref_chain(chain, v)), targets, 4);
          },
          image);
      tally.add("detector/" + tag, d.rel_error);
      worst_forward = std::max(worst_forward, d.forward_rel_error);
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = tally.worst <= 1e-3 && worst_forward <= 1e-5 && elapsed <= 120;
  return {pass, std::to_string(tally.checks) + " checks, max rel " + fmt("%.2e", tally.worst) + " (" +
                    tally.worst_name + ") <= 1e-3, forward rel " + fmt("%.1e", worst_forward) + ", " +
                    fmt("%.1f", elapsed) + " s <= 120 s"};
}

// ---------------------------------------------------------------------------
// Box / mask commutation.

Outcome commutation() {
  Rng rng(4242);
  int exact_pairs = 0, exact_failures = 0;
  for (int trial = 0; trial < 600; ++trial) {
    const BoxSet boxes = testing::random_boxes(rng, 32, 32, static_cast<int>(rng.uniform_int(1, 4)));
    const auto t = testing::random_exact_instance(rng, trial);
    ++exact_pairs;
    if (!testing::exact_commutation_holds(t, boxes, 32, 32)) ++exact_failures;
  }
  int rotate_pairs = 0, rotate_failures = 0;
  double worst_iou = 1;
  for (int trial = 0; trial < 600; ++trial) {
    const Box box = testing::random_integer_box(rng, 64);
    const auto t = TransformInstance(RotateParams{rng.uniform(-24, 24)});
    const double iou = testing::rotation_box_iou(t, box, 64);
    ++rotate_pairs;
    worst_iou = std::min(worst_iou, iou);
    if (iou < 0.85) ++rotate_failures;
  }
  return {exact_failures == 0 && rotate_failures == 0 && exact_pairs + rotate_pairs >= 500,
          std::to_string(exact_pairs) + " exact pairs (" + std::to_string(exact_failures) + " mismatches), " +
              std::to_string(rotate_pairs) + " rotations, min IoU " + fmt("%.3f", worst_iou) + " >= 0.85"};
}

// ---------------------------------------------------------------------------
// Work directory: datasets and models of the shipped configs.

struct Workspace {
  fs::path source, work;
  bool reuse = false;

  std::string config_text(const std::string& name) const { return read_text(source / "configs" / name); }
  ExperimentConfig config(const std::string& name, std::optional<uint64_t> seed = std::nullopt) const {
    return parse_experiment(config_text(name), work, seed);
  }

  void prepare(const ExperimentConfig& cfg) const {
    const Logger log = [](const std::string& m) { progress(m); };
    if (!reuse || !fs::exists(cfg.dataset_root / "manifest.json")) cmd_gen(cfg, log);
    bool have = fs::exists(cfg.surrogate.checkpoint);
    for (const auto& t : cfg.targets) have = have && fs::exists(t.checkpoint);
    if (!reuse || !have) cmd_train(cfg, log);
  }

  std::vector<Scene> scenes(const ExperimentConfig& cfg) const {
    std::vector<Scene> s = load_split(read_manifest(cfg.dataset_root, cfg.eval_split));
    if (static_cast<int>(s.size()) > cfg.samples) s.resize(static_cast<size_t>(cfg.samples));
    return s;
  }
};

// ---------------------------------------------------------------------------
// Equivariance of the trained segmenter.

LabelMap interior(int64_t h, int64_t w, int margin) {
  LabelMap m(h, w);
  for (int64_t i = margin; i < h - margin; ++i) {
    for (int64_t j = margin; j < w - margin; ++j) m.at(i, j) = 1;
  }
  return m;
}

Outcome equivariance(const Model& model, const std::vector<Scene>& scenes) {
  int margin = 0;
  for (const LayerSpec& l : model.arch().layers) margin += l.kernel / 2;
  Rng rng(99);
  int64_t agree = 0, total = 0;
  for (const Scene& s : scenes) {
    const LabelMap base = predict_mask(model, s.batched_image());
    const LabelMap core = interior(s.height(), s.width(), margin);
    for (int k = 0; k < 4; ++k) {
      const auto t = TransformInstance(
          TranslateParams{static_cast<int>(rng.uniform_int(-8, 8)), static_cast<int>(rng.uniform_int(-8, 8))});
      const LabelMap shifted = predict_mask(model, apply_image(t, s.batched_image()));
      const LabelMap moved = apply_mask(t, base);
      const LabelMap moved_core = apply_mask(t, core);
      for (int64_t i = 0; i < s.height(); ++i) {
        for (int64_t j = 0; j < s.width(); ++j) {
          if (core.at(i, j) != 1 || moved_core.at(i, j) != 1) continue;
          ++total;
          agree += shifted.at(i, j) == moved.at(i, j);
        }
      }
    }
  }
  const double rate = total ? double(agree) / double(total) : 0;
  return {total > 0 && rate >= 0.99, "interior agreement " + fmt("%.4f", rate) + " >= 0.99 over " +
                                         std::to_string(total) + " pixels, shifts up to 8 px, margin " +
                                         std::to_string(margin)};
}

// ---------------------------------------------------------------------------
// Attack invariants.

AttackConfig small_attack(const TransformPipeline& pipeline, double epsilon, int iterations) {
  AttackConfig c;
  c.pipeline = pipeline;
  c.epsilon = epsilon;
  c.iterations = iterations;
  c.alpha = iterations > 0 ? epsilon / iterations : 0;
  c.counterparts = 3;
  c.seed = 17;
  return c;
}

Outcome sa_noop(const Model& seg, const Model& det, const std::vector<Scene>& seg_scenes,
                const std::vector<Scene>& det_scenes) {
  TransformPipeline noise{"noise_only", {TransformDistribution{TransformKind::kAddNoise}}};
  noise.stages[0].amplitude = 0.1;
  const std::vector<TransformPipeline> pipelines{{"empty", {}}, noise};
  const SegObjective so(seg);
  const DetObjective dobj(det);
  int runs = 0, differ = 0;
  for (int task = 0; task < 2; ++task) {
    const auto& scenes = task == 0 ? seg_scenes : det_scenes;
    const Objective& objective = task == 0 ? static_cast<const Objective&>(so) : dobj;
    for (const auto& p : pipelines) {
      for (size_t i = 0; i < 4 && i < scenes.size(); ++i) {
        AttackConfig c = small_attack(p, 10.0 / 255, 5);
        c.aligned = true;
        const Tensor a = run_attack(objective, scenes[i], c).x_adv;
        c.aligned = false;
        const Tensor b = run_attack(objective, scenes[i], c).x_adv;
        ++runs;
        differ += !bit_identical(a, b);
      }
    }
  }
  return {differ == 0, std::to_string(runs) + " attacks on empty and noise-only pipelines, " +
                           std::to_string(differ) + " differ between SA and non-SA"};
}

Outcome budget(const Model& seg, const Model& det, const std::vector<Scene>& seg_scenes,
               const std::vector<Scene>& det_scenes) {
  const double slack = std::ldexp(1.0, -20);
  int runs = 0, violations = 0, identity_breaks = 0;
  double worst_excess = -1;
  const SegObjective so(seg);
  const DetObjective dobj(det);
  for (int task = 0; task < 2; ++task) {
    const auto& scenes = task == 0 ? seg_scenes : det_scenes;
    const Objective& objective = task == 0 ? static_cast<const Objective&>(so) : dobj;
    for (const std::string& name : preset_names()) {
      for (double eps : {0.0, 3.0 / 255, 10.0 / 255, 16.0 / 255}) {
        for (int iterations : {0, 4}) {
          for (int targeted = 0; targeted <= (task == 0 ? 1 : 0); ++targeted) {
            AttackConfig c = small_attack(preset_pipeline(name, 1.0), eps, iterations);
            // Oversized steps lean on the clamp; eps = 0 still needs a positive step.
            c.alpha = eps > 0 ? 2 * eps / std::max(iterations, 1) : 1.0 / 255;
            if (targeted) {
              c.mode = AttackMode::kTargeted;
              c.target = AttackLabel{block_target_map(scenes[0].height(), scenes[0].width(), seg.categories()), {}, {}};
            }
            for (size_t i = 0; i < 2 && i < scenes.size(); ++i) {
              const Tensor x = scenes[i].batched_image();
              const Tensor adv = run_attack(objective, scenes[i], c).x_adv;
              ++runs;
              if (eps == 0 || iterations == 0) identity_breaks += !bit_identical(adv, x);
              bool ok = true;
              for (int64_t k = 0; k < x.numel(); ++k) {
                const double d = std::abs(double(adv[k]) - double(x[k]));
                worst_excess = std::max(worst_excess, d - eps);
                ok = ok && d <= eps + slack && adv[k] >= 0.0f && adv[k] <= 1.0f;
              }
              violations += !ok;
            }
          }
        }
      }
    }
  }
  return {violations == 0 && identity_breaks == 0,
          std::to_string(runs) + " attacks over every preset, " + std::to_string(violations) +
              " out of budget or range, " + std::to_string(identity_breaks) +
              " non-identity at eps = 0 or L = 0, max |d| - eps " + fmt("%.2e", worst_excess)};
}

// ---------------------------------------------------------------------------
// Attack effectiveness.

struct SeedRuns {
  // [aligned][seed] adversarial scenes.
  std::map<bool, std::vector<std::vector<Scene>>> adversarial;
};

SeedRuns attack_over_seeds(const Workspace& ws, const std::string& config_name, const Model& surrogate,
                           const std::vector<Scene>& scenes) {
  SeedRuns runs;
  for (int s = 1; s <= kSeeds; ++s) {
    const ExperimentConfig cfg = ws.config(config_name, static_cast<uint64_t>(s));
    for (bool aligned : {true, false}) {
      SweepCell cell = cfg.base_cell();
      cell.aligned = aligned;
      const auto start = Clock::now();
      runs.adversarial[aligned].push_back(attack_scenes(surrogate, scenes, cfg.attack_for(cell)));
      progress(config_name + " seed " + std::to_string(s) + (aligned ? " SA" : " no-SA") + " " +
               fmt("%.1f", seconds_since(start)) + " s");
    }
  }
  return runs;
}

std::vector<double> metric_over_seeds(const SeedRuns& runs, bool aligned, const Model& model,
                                      const DefenseConfig& defense = {},
                                      const std::optional<LabelMap>& reference = std::nullopt) {
  std::vector<double> out;
  for (const auto& adv : runs.adversarial.at(aligned)) {
    const EvalReport r = evaluate(model, adv, defense, reference);
    out.push_back(model.task() == Task::kSegmentation ? r.miou.value_or(NAN) : r.map.value_or(NAN));
  }
  return out;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.3f", x);
  return "[" + s + "]";
}

std::string without_timestamps(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  Workspace ws;
  std::string work = SAF_ACCEPTANCE_WORK_DIR;
  app.add_option("--work", work, "directory for generated datasets, models and runs");
  app.add_flag("--reuse", ws.reuse, "keep datasets and checkpoints already in the work directory");
  CLI11_PARSE(app, argc, argv);
  ws.source = SAF_SOURCE_DIR;
  ws.work = fs::absolute(work);
  fs::create_directories(ws.work);
  const auto start = Clock::now();

  progress("gradient checks");
  run(1, "gradient_fidelity", gradient_fidelity);
  run(2, "box_mask_commutation", commutation);

  const ExperimentConfig seg_cfg = ws.config("seg_bsr.json");
  const ExperimentConfig det_cfg = ws.config("det_bsr.json");
  ws.prepare(seg_cfg);
  ws.prepare(det_cfg);
  const Model seg_s = load_checkpoint(seg_cfg.surrogate.checkpoint);
  const Model seg_t = load_checkpoint(seg_cfg.targets.at(0).checkpoint);
  const Model det_s = load_checkpoint(det_cfg.surrogate.checkpoint);
  const Model det_t = load_checkpoint(det_cfg.targets.at(0).checkpoint);
  const std::vector<Scene> seg_scenes = ws.scenes(seg_cfg);
  const std::vector<Scene> det_scenes = ws.scenes(det_cfg);
  progress("models ready after " + fmt("%.0f", seconds_since(start)) + " s");

  run(3, "segmenter_equivariance", [&] { return equivariance(seg_s, seg_scenes); });
  run(4, "sa_noop_non_spatial", [&] { return sa_noop(seg_s, det_s, seg_scenes, det_scenes); });
  run(5, "perturbation_budget", [&] { return budget(seg_s, det_s, seg_scenes, det_scenes); });

  // Five attack seeds against fixed models; criterion 10 rescores these.
  SeedRuns seg_runs;
  std::vector<double> seg_tr_sa;
  run(6, "segmentation_sa_gain", [&]() -> Outcome {
    const double clean = evaluate(seg_s, seg_scenes).miou.value_or(0);
    seg_runs = attack_over_seeds(ws, "seg_bsr.json", seg_s, seg_scenes);
    seg_tr_sa = metric_over_seeds(seg_runs, true, seg_t);
    const auto tr_no = metric_over_seeds(seg_runs, false, seg_t);
    const auto wb_sa = metric_over_seeds(seg_runs, true, seg_s);
    const auto wb_no = metric_over_seeds(seg_runs, false, seg_s);
    const double gap = mean_of(tr_no) - mean_of(seg_tr_sa);
    return {clean >= 0.85 && gap >= 0.05 && mean_of(wb_sa) < mean_of(wb_no),
            "surrogate clean mIoU " + fmt("%.3f", clean) + " >= 0.85; transfer SA " + list(seg_tr_sa) + " no-SA " +
                list(tr_no) + " gap " + fmt("%.3f", gap) + " >= 0.05; white-box SA " + fmt("%.3f", mean_of(wb_sa)) +
                " < no-SA " + fmt("%.3f", mean_of(wb_no))};
  });

  run(7, "detection_sa_gain", [&]() -> Outcome {
    const EvalReport clean = evaluate(det_s, det_scenes);
    const SeedRuns runs = attack_over_seeds(ws, "det_bsr.json", det_s, det_scenes);
    const auto tr_sa = metric_over_seeds(runs, true, det_t);
    const auto tr_no = metric_over_seeds(runs, false, det_t);
    const auto wb_sa = metric_over_seeds(runs, true, det_s);
    const auto wb_no = metric_over_seeds(runs, false, det_s);
    const double gap = mean_of(tr_no) - mean_of(tr_sa);
    return {gap >= 0.03, "surrogate clean mAP " + fmt("%.3f", clean.map.value_or(0)) + "; transfer SA " + list(tr_sa) +
                             " no-SA " + list(tr_no) + " gap " + fmt("%.3f", gap) + " >= 0.03; white-box SA " +
                             fmt("%.3f", mean_of(wb_sa)) + " no-SA " + fmt("%.3f", mean_of(wb_no))};
  });

  run(8, "targeted_sa_gain", [&]() -> Outcome {
    const ExperimentConfig cfg = ws.config("seg_targeted.json");
    const std::vector<Scene> scenes = ws.scenes(cfg);
    const SeedRuns runs = attack_over_seeds(ws, "seg_targeted.json", seg_s, scenes);
    const auto sa = metric_over_seeds(runs, true, seg_s, {}, cfg.attack.target->mask);
    const auto no = metric_over_seeds(runs, false, seg_s, {}, cfg.attack.target->mask);
    const double ratio = mean_of(sa) / std::max(mean_of(no), 1e-12);
    return {ratio >= 3, "target-map mIoU SA " + list(sa) + " no-SA " + list(no) + " ratio " + fmt("%.2f", ratio) +
                            " >= 3"};
  });

  run(9, "epsilon_monotonicity", [&]() -> Outcome {
    const ExperimentConfig cfg = ws.config("seg_eps_sweep.json");
    std::map<bool, std::vector<double>> curve;
    for (const SweepCell& cell : cfg.cells()) {
      const auto adv = attack_scenes(seg_s, seg_scenes, cfg.attack_for(cell));
      curve[cell.aligned].push_back(evaluate(seg_t, adv).miou.value_or(NAN));
    }
    bool pass = true;
    std::string detail;
    for (const auto& [aligned, values] : curve) {
      for (size_t k = 1; k < values.size(); ++k) pass = pass && values[k] <= values[k - 1] + 0.02;
      detail += std::string(aligned ? "SA " : "no-SA ") + list(values) + " ";
    }
    return {pass, "transfer mIoU over eps 4..16/255: " + detail + "(tolerance 0.02)"};
  });

  run(10, "bit_depth_defense", [&]() -> Outcome {
    if (seg_tr_sa.empty()) return {false, "needs the attacks of criterion 6"};
    const ExperimentConfig cfg = ws.config("seg_bit_depth6.json");
    const auto def_sa = metric_over_seeds(seg_runs, true, seg_t, cfg.defense);
    const auto def_no = metric_over_seeds(seg_runs, false, seg_t, cfg.defense);
    const double change = std::abs(mean_of(def_sa) - mean_of(seg_tr_sa));
    return {change <= 0.05 && mean_of(def_sa) < mean_of(def_no),
            "defended SA " + fmt("%.3f", mean_of(def_sa)) + " vs undefended " + fmt("%.3f", mean_of(seg_tr_sa)) +
                " change " + fmt("%.3f", change) + " <= 0.05; defended no-SA " + fmt("%.3f", mean_of(def_no))};
  });

  run(11, "sweep_determinism", [&]() -> Outcome {
    json doc = json::parse(ws.config_text("seg_eps_sweep.json"));
    doc["output"] = "runs/determinism";
    doc["eval"]["samples"] = 8;
    const ExperimentConfig cfg = parse_experiment(doc.dump(), ws.work);
    cmd_sweep(cfg);
    const std::string first = read_text(cfg.output / "sweep.csv");
    cmd_sweep(cfg);
    const std::string second = read_text(cfg.output / "sweep.csv");
    const bool same = without_timestamps(first) == without_timestamps(second);
    const auto rows = std::count(first.begin(), first.end(), '\n') - 1;
    return {same && rows == static_cast<long>(cfg.cells().size() * cfg.targets.size()),
            std::to_string(rows) + " rows; rerun " + (same ? "byte-identical" : "differs") +
                " outside the timestamp column"};
  });

  const double total = seconds_since(start);
  const bool in_time = total <= kTotalLimitSeconds;
  std::printf("%s  total runtime %.0f s (limit %.0f s); %d criteria failed\n", in_time ? "PASS" : "FAIL", total,
              kTotalLimitSeconds, failures);
  return failures == 0 && in_time ? 0 : 1;
}
