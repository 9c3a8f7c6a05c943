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
#include "saf/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "saf/errors.hpp"
#include "saf/rng.hpp"

namespace saf {

namespace fs = std::filesystem;
using nlohmann::json;

std::string DefenseConfig::name() const {
  return bits == 0 ? "none" : "bit_depth_" + std::to_string(bits);
}

Tensor DefenseConfig::apply(const Tensor& x) const { return bits == 0 ? x : bit_depth_reduce(x, bits); }

std::string hash_hex(uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

double parse_fraction(std::string_view text) {
  const std::string s(text);
  const auto slash = s.find('/');
  try {
    size_t used = 0;
    if (slash == std::string::npos) {
      const double v = std::stod(s, &used);
      if (used != s.size()) throw ConfigError("bad number '" + s + "'");
      return v;
    }
    const std::string num = s.substr(0, slash), den = s.substr(slash + 1);
    const double n = std::stod(num, &used);
    if (used != num.size()) throw ConfigError("bad number '" + s + "'");
    const double d = std::stod(den, &used);
    if (used != den.size() || d == 0) throw ConfigError("bad fraction '" + s + "'");
    return n / d;
  } catch (const std::logic_error&) {
    throw ConfigError("bad number '" + s + "'");
  }
}

namespace {

double number_or_fraction(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_fraction(j.get<std::string>());
  throw ConfigError("expected a number or a fraction string");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

ModelRef parse_model_ref(const json& j, const fs::path& base, const std::string& fallback_name) {
  ModelRef r;
  r.name = j.value("name", fallback_name);
  r.checkpoint = resolve(base, j.value("checkpoint", "models/" + r.name + ".ckpt"));
  r.seed = j.value("seed", uint64_t{1});
  return r;
}

std::string timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CodecError(path.string(), "cannot open for writing");
  os << text;
  if (!os) throw CodecError(path.string(), "write failed");
}

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("missing input: " + path.string());
}

std::vector<Scene> eval_scenes(const ExperimentConfig& cfg) {
  require_file(cfg.dataset_root / "manifest.json");
  std::vector<Scene> scenes = load_split(read_manifest(cfg.dataset_root, cfg.eval_split));
  if (static_cast<int>(scenes.size()) > cfg.samples) scenes.resize(static_cast<size_t>(cfg.samples));
  return scenes;
}

std::optional<LabelMap> reference_map(const ExperimentConfig& cfg) {
  if (cfg.attack.mode != AttackMode::kTargeted) return std::nullopt;
  return cfg.attack.target->mask;
}

Model load_model(const ModelRef& ref, Task task) {
  require_file(ref.checkpoint);
  Model m = load_checkpoint(ref.checkpoint);
  if (m.task() != task) throw ConfigError(ref.checkpoint.string() + ": checkpoint task does not match the config");
  return m;
}

CsvRow base_row(const ExperimentConfig& cfg, const std::string& target, int64_t samples) {
  CsvRow r;
  r.config_hash = cfg.config_hash;
  r.seed = cfg.seed;
  r.task = std::string(task_name(cfg.task));
  r.surrogate = cfg.surrogate.name;
  r.target = target;
  r.mode = std::string(mode_name(cfg.attack.mode));
  r.counterparts = cfg.attack.counterparts;
  r.defense = cfg.defense.name();
  r.samples = samples;
  return r;
}

void fill_metrics(CsvRow& row, const EvalReport& rep) {
  row.miou = rep.miou;
  row.map = rep.map;
  row.map50 = rep.map50;
}

std::string reports_json(const std::vector<std::pair<CsvRow, EvalReport>>& rows) {
  std::string out = "[\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    json doc = json::parse(report_json(rows[i].second));
    const CsvRow& r = rows[i].first;
    doc["surrogate"] = r.surrogate;
    doc["target"] = r.target;
    doc["attack"] = r.attack;
    doc["mode"] = r.mode;
    doc["aligned"] = r.aligned ? json(*r.aligned) : json(nullptr);
    doc["epsilon"] = r.epsilon;
    doc["iterations"] = r.iterations;
    doc["alpha"] = r.alpha;
    doc["defense"] = r.defense;
    out += doc.dump(2);
    out += i + 1 < rows.size() ? ",\n" : "\n";
  }
  return out + "]\n";
}

std::string csv_document(const std::vector<std::pair<CsvRow, EvalReport>>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& [row, rep] : rows) out += csv_line(row) + "\n";
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration.

ModelArch ExperimentConfig::arch() const {
  return task == Task::kSegmentation ? ModelArch::segmenter(generator.categories, model_width, model_depth)
                                     : ModelArch::detector(generator.categories, model_width);
}

SweepCell ExperimentConfig::base_cell() const {
  SweepCell c{attack.epsilon, attack.iterations, attack.aligned, attack.alpha};
  if (alpha_rule != AlphaRule::kFixed && c.iterations > 0) {
    c.alpha = (alpha_rule == AlphaRule::kTwoEpsilonOverIterations ? 2.0 : 1.0) * c.epsilon / c.iterations;
  }
  return c;
}

std::vector<SweepCell> ExperimentConfig::cells() const {
  const SweepCell base = base_cell();
  const auto eps = sweep.epsilon.empty() ? std::vector<double>{base.epsilon} : sweep.epsilon;
  const auto its = sweep.iterations.empty() ? std::vector<int>{base.iterations} : sweep.iterations;
  const auto al = sweep.aligned.empty() ? std::vector<bool>{base.aligned} : sweep.aligned;
  const size_t total = eps.size() * its.size() * al.size();
  if (total > static_cast<size_t>(sweep.cap)) {
    throw ConfigError("sweep has " + std::to_string(total) + " cells, above the cap of " + std::to_string(sweep.cap));
  }
  std::vector<SweepCell> out;
  for (double e : eps) {
    for (int l : its) {
      for (bool a : al) {
        SweepCell c{e, l, a, attack.alpha};
        if (alpha_rule != AlphaRule::kFixed && l > 0) {
          c.alpha = (alpha_rule == AlphaRule::kTwoEpsilonOverIterations ? 2.0 : 1.0) * e / l;
        }
        out.push_back(c);
      }
    }
  }
  return out;
}

AttackConfig ExperimentConfig::attack_for(const SweepCell& cell) const {
  AttackConfig a = attack;
  a.epsilon = cell.epsilon;
  a.iterations = cell.iterations;
  a.aligned = cell.aligned;
  a.alpha = cell.alpha;
  a.validate();
  return a;
}

ExperimentConfig parse_experiment(std::string_view json_text, const fs::path& base,
                                  std::optional<uint64_t> seed_override) {
  ExperimentConfig c;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (seed_override) doc["seed"] = *seed_override;
  try {
    c.task = task_from_name(doc.value("task", std::string("segmentation")));
    c.seed = doc.value("seed", uint64_t{1});
    c.output = resolve(base, doc.value("output", std::string("runs/default")));

    const json ds = doc.value("dataset", json::object());
    c.dataset_root = resolve(base, ds.value("root", std::string("data")));
    c.dataset_seed = ds.value("seed", c.dataset_seed);
    GeneratorConfig& g = c.generator;
    g.height = ds.value("height", g.height);
    g.width = ds.value("width", g.width);
    g.categories = ds.value("categories", g.categories);
    if (ds.contains("shapes_per_scene")) {
      g.min_shapes = ds["shapes_per_scene"].at(0).get<int>();
      g.max_shapes = ds["shapes_per_scene"].at(1).get<int>();
    }
    if (ds.contains("extent")) {
      g.min_extent = ds["extent"].at(0).get<double>();
      g.max_extent = ds["extent"].at(1).get<double>();
    }
    g.texture_amplitude = ds.value("texture_amplitude", g.texture_amplitude);
    g.pixel_noise = ds.value("pixel_noise", g.pixel_noise);
    g.palette_saturation = ds.value("palette_saturation", g.palette_saturation);
    g.validate();
    const json splits = ds.value("splits", json{{"train", 256}, {"val", 64}, {"test", 32}});
    for (const auto& [name, count] : splits.items()) c.splits.emplace_back(name, count.get<int>());

    const json ev = doc.value("eval", json::object());
    c.eval_split = ev.value("split", c.eval_split);
    c.samples = ev.value("samples", c.samples);
    if (c.samples < 1) throw ConfigError("eval.samples must be positive");

    const json md = doc.value("models", json::object());
    c.model_width = md.value("width", c.task == Task::kSegmentation ? 16 : 24);
    c.model_depth = md.value("depth", c.model_depth);
    c.surrogate = parse_model_ref(md.value("surrogate", json::object()), base, "surrogate");
    if (md.contains("targets")) {
      int k = 0;
      for (const json& t : md["targets"]) c.targets.push_back(parse_model_ref(t, base, "target" + std::to_string(k++)));
    } else {
      c.targets.push_back(c.surrogate);
    }
    if (c.targets.empty()) throw ConfigError("models.targets must not be empty");
    c.arch().validate();

    const json tr = doc.value("train", json::object());
    TrainConfig& t = c.train;
    t.epochs = tr.value("epochs", t.epochs);
    t.batch_size = tr.value("batch_size", t.batch_size);
    t.learning_rate = tr.value("learning_rate", t.learning_rate);
    t.momentum = tr.value("momentum", t.momentum);
    t.weight_decay = tr.value("weight_decay", t.weight_decay);
    t.clip_norm = tr.value("clip_norm", t.clip_norm);
    t.augment = tr.value("augment", t.augment);
    t.validate();

    const json at = doc.value("attack", json::object());
    AttackConfig& a = c.attack;
    a.mode = mode_from_name(at.value("mode", std::string("non_targeted")));
    if (a.mode == AttackMode::kTargeted) {
      const AttackConfig d = AttackConfig::targeted_defaults();
      a.epsilon = d.epsilon;
      a.iterations = d.iterations;
      a.alpha = d.alpha;
      c.alpha_rule = AlphaRule::kTwoEpsilonOverIterations;
      if (c.task != Task::kSegmentation) throw ConfigError("targeted attacks support segmentation only");
      a.target = AttackLabel{block_target_map(g.height, g.width, g.categories), {}, std::nullopt};
    }
    if (at.contains("epsilon")) a.epsilon = number_or_fraction(at["epsilon"]);
    a.iterations = at.value("iterations", a.iterations);
    if (at.contains("alpha")) {
      const json& al = at["alpha"];
      if (al.is_string() && al.get<std::string>() == "eps/L") {
        c.alpha_rule = AlphaRule::kEpsilonOverIterations;
      } else if (al.is_string() && al.get<std::string>() == "2eps/L") {
        c.alpha_rule = AlphaRule::kTwoEpsilonOverIterations;
      } else {
        c.alpha_rule = AlphaRule::kFixed;
        a.alpha = number_or_fraction(al);
      }
    }
    a.momentum = at.value("momentum", a.momentum);
    a.counterparts = at.value("counterparts", a.counterparts);
    a.aligned = at.value("aligned", a.aligned);
    a.workers = at.value("workers", a.workers);
    c.magnitude = at.value("magnitude", c.magnitude);
    const json pipe = at.value("pipeline", json("bsr_like"));
    if (pipe.is_string()) {
      c.pipeline_name = pipe.get<std::string>();
      a.pipeline = preset_pipeline(c.pipeline_name, c.magnitude);
    } else {
      a.pipeline = parse_pipeline(pipe.dump());
      c.pipeline_name = a.pipeline.name;
    }
    a.seed = c.seed;
    c.attack_for(c.base_cell());

    const json df = doc.value("defense", json{{"kind", "none"}});
    const std::string kind = df.value("kind", std::string("none"));
    if (kind == "bit_depth") {
      c.defense.bits = df.value("bits", 6);
      if (c.defense.bits < 1 || c.defense.bits > 8) throw ConfigError("defense.bits must lie in [1, 8]");
    } else if (kind != "none") {
      throw ConfigError("unknown defense '" + kind + "'");
    }

    const json sw = doc.value("sweep", json::object());
    if (sw.contains("epsilon")) {
      for (const json& e : sw["epsilon"]) c.sweep.epsilon.push_back(number_or_fraction(e));
    }
    if (sw.contains("iterations")) c.sweep.iterations = sw["iterations"].get<std::vector<int>>();
    if (sw.contains("aligned")) c.sweep.aligned = sw["aligned"].get<std::vector<bool>>();
    c.sweep.cap = sw.value("cap", c.sweep.cap);
    for (const SweepCell& cell : c.cells()) c.attack_for(cell);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.canonical_json = doc.dump();
  c.config_hash = fnv1a64(c.canonical_json);
  return c;
}

ExperimentConfig load_experiment(const fs::path& file, std::optional<uint64_t> seed_override) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  const char* root = std::getenv("SAF_OUTPUT_ROOT");
  const fs::path base = root && *root ? fs::path(root) : fs::current_path();
  return parse_experiment(ss.str(), base, seed_override);
}

// ---------------------------------------------------------------------------
// Building blocks.

std::vector<Scene> attack_scenes(const Model& surrogate, const std::vector<Scene>& scenes,
                                 const AttackConfig& cfg,
                                 std::vector<std::vector<IterationRecord>>* traces) {
  std::unique_ptr<Objective> objective;
  if (surrogate.task() == Task::kSegmentation) {
    objective = std::make_unique<SegObjective>(surrogate);
  } else {
    objective = std::make_unique<DetObjective>(surrogate);
  }
  std::vector<Scene> out;
  out.reserve(scenes.size());
  for (size_t i = 0; i < scenes.size(); ++i) {
    AttackConfig c = cfg;
    c.seed = derive_seed({cfg.seed, static_cast<uint64_t>(i)});
    AttackResult r = run_attack(*objective, scenes[i], c);
    if (traces) traces->push_back(std::move(r.trace));
    out.push_back(std::move(r.adversarial));
  }
  return out;
}

EvalReport evaluate(const Model& model, const std::vector<Scene>& scenes, const DefenseConfig& defense,
                    const std::optional<LabelMap>& reference) {
  EvalReport rep;
  rep.task = std::string(task_name(model.task()));
  rep.samples = static_cast<int64_t>(scenes.size());
  if (model.task() == Task::kSegmentation) {
    IouAccumulator acc(model.categories());
    for (const Scene& s : scenes) {
      acc.add(predict_mask(model, defense.apply(s.batched_image())), reference ? *reference : s.mask);
    }
    rep.per_category_iou = acc.per_category();
    rep.miou = acc.miou();
  } else {
    std::vector<BoxSet> preds, gts;
    for (const Scene& s : scenes) {
      preds.push_back(predict_boxes(model, defense.apply(s.batched_image())));
      gts.push_back(s.boxes);
    }
    const ApResult ap = map_50_95(preds, gts, model.categories());
    rep.ap_per_threshold = ap.per_threshold;
    rep.map = ap.map;
    rep.map50 = ap.map50;
  }
  return rep;
}

std::string csv_header() {
  return "config_hash,seed,task,surrogate,target,attack,mode,aligned,epsilon,iterations,alpha,"
         "counterparts,defense,samples,miou,map,map50,timestamp";
}

std::string csv_line_without_timestamp(const CsvRow& r) {
  std::ostringstream os;
  char eps[32], alpha[32];
  std::snprintf(eps, sizeof eps, "%.6f", r.epsilon);
  std::snprintf(alpha, sizeof alpha, "%.6f", r.alpha);
  os << hash_hex(r.config_hash) << ',' << r.seed << ',' << r.task << ',' << r.surrogate << ',' << r.target
     << ',' << r.attack << ',' << r.mode << ',' << (r.aligned ? (*r.aligned ? "true" : "false") : "") << ','
     << eps << ',' << r.iterations << ',' << alpha << ',' << r.counterparts << ',' << r.defense << ','
     << r.samples << ',' << format_metric(r.miou) << ',' << format_metric(r.map) << ','
     << format_metric(r.map50);
  return os.str();
}

std::string csv_line(const CsvRow& r) { return csv_line_without_timestamp(r) + ',' + r.timestamp; }

// ---------------------------------------------------------------------------
// Commands.

std::vector<fs::path> cmd_gen(const ExperimentConfig& cfg, const Logger& log) {
  std::vector<fs::path> written;
  for (const auto& [split, count] : cfg.splits) {
    const DatasetManifest m = generate_dataset(cfg.generator, cfg.dataset_seed, count, cfg.dataset_root, split);
    say(log, "generated " + std::to_string(m.ids.size()) + " scenes into " + (cfg.dataset_root / split).string());
    written.push_back(cfg.dataset_root / split);
  }
  written.push_back(cfg.dataset_root / "manifest.json");
  return written;
}

std::vector<fs::path> cmd_train(const ExperimentConfig& cfg, const Logger& log) {
  require_file(cfg.dataset_root / "manifest.json");
  const std::vector<Scene> train_set = load_split(read_manifest(cfg.dataset_root, "train"));
  std::vector<Scene> val_set;
  if (fs::exists(cfg.dataset_root / "val")) val_set = load_split(read_manifest(cfg.dataset_root, "val"));

  std::vector<ModelRef> refs{cfg.surrogate};
  for (const ModelRef& t : cfg.targets) {
    bool seen = false;
    for (const ModelRef& r : refs) seen = seen || r.checkpoint == t.checkpoint;
    if (!seen) refs.push_back(t);
  }
  std::vector<fs::path> written;
  for (const ModelRef& ref : refs) {
    Model model(cfg.arch(), ref.seed);
    TrainConfig tc = cfg.train;
    tc.seed = ref.seed;
    const auto history = train(model, train_set, val_set, tc, [&](const EpochLog& e) {
      say(log, ref.name + " epoch " + std::to_string(e.epoch) + " loss " + format_double(e.loss) +
                   " val " + format_metric(e.val_metric));
    });
    save_checkpoint(model, ref.checkpoint);
    json entries = json::array();
    for (const EpochLog& e : history) {
      entries.push_back({{"epoch", e.epoch},
                         {"loss", e.loss},
                         {"val_metric", e.val_metric ? json(*e.val_metric) : json(nullptr)}});
    }
    const fs::path log_path = ref.checkpoint.string() + ".log.json";
    write_text(log_path, json{{"config_hash", hash_hex(cfg.config_hash)},
                              {"model", ref.name},
                              {"seed", ref.seed},
                              {"epochs", entries}}
                             .dump(2) +
                             "\n");
    written.push_back(ref.checkpoint);
    written.push_back(log_path);
  }
  return written;
}

std::vector<fs::path> cmd_attack(const ExperimentConfig& cfg, const Logger& log) {
  const Model surrogate = load_model(cfg.surrogate, cfg.task);
  const std::vector<Scene> scenes = eval_scenes(cfg);
  const SweepCell cell = cfg.base_cell();
  std::vector<std::vector<IterationRecord>> traces;
  const std::vector<Scene> adv = attack_scenes(surrogate, scenes, cfg.attack_for(cell), &traces);

  const fs::path root = cfg.output / "attack";
  fs::create_directories(root / cfg.eval_split);
  DatasetManifest m;
  m.root = root;
  m.split = cfg.eval_split;
  m.height = cfg.generator.height;
  m.width = cfg.generator.width;
  m.categories = cfg.generator.categories;
  m.seed = cfg.seed;
  m.generator = cfg.generator;
  for (size_t i = 0; i < adv.size(); ++i) {
    encode_scene(adv[i], root / cfg.eval_split);
    m.ids.push_back(adv[i].id);
    write_text(root / "traces" / (adv[i].id + ".trace"),
               "# config_hash " + hash_hex(cfg.config_hash) + " seed " + std::to_string(cfg.seed) + "\n" +
                   format_trace(traces[i]));
  }
  write_manifest(m);
  write_text(root / "attack.json", json{{"config_hash", hash_hex(cfg.config_hash)},
                                        {"seed", cfg.seed},
                                        {"pipeline", cfg.pipeline_name},
                                        {"aligned", cell.aligned},
                                        {"epsilon", cell.epsilon},
                                        {"iterations", cell.iterations},
                                        {"alpha", cell.alpha},
                                        {"samples", adv.size()}}
                                       .dump(2) +
                                       "\n");
  say(log, "attacked " + std::to_string(adv.size()) + " scenes into " + root.string());
  return {root / cfg.eval_split, root / "traces", root / "manifest.json", root / "attack.json"};
}

std::vector<fs::path> cmd_eval(const ExperimentConfig& cfg, const Logger& log) {
  const std::vector<Scene> clean = eval_scenes(cfg);
  const fs::path adv_root = cfg.output / "attack";
  std::optional<std::vector<Scene>> adv;
  if (fs::exists(adv_root / "manifest.json")) adv = load_split(read_manifest(adv_root, cfg.eval_split));
  const auto reference = reference_map(cfg);
  const SweepCell cell = cfg.base_cell();
  const std::string stamp = timestamp_now();

  std::vector<std::pair<CsvRow, EvalReport>> rows;
  for (const ModelRef& ref : cfg.targets) {
    const Model model = load_model(ref, cfg.task);
    for (int pass = 0; pass < (adv ? 2 : 1); ++pass) {
      const auto& scenes = pass == 0 ? clean : *adv;
      EvalReport rep = evaluate(model, scenes, cfg.defense, reference);
      rep.config_hash = cfg.config_hash;
      rep.seed = cfg.seed;
      CsvRow row = base_row(cfg, ref.name, rep.samples);
      row.timestamp = stamp;
      if (pass == 0) {
        row.attack = "clean";
      } else {
        row.attack = cfg.pipeline_name;
        row.aligned = cell.aligned;
        row.epsilon = cell.epsilon;
        row.iterations = cell.iterations;
        row.alpha = cell.alpha;
      }
      fill_metrics(row, rep);
      say(log, ref.name + " " + row.attack + " miou " + format_metric(rep.miou) + " map " + format_metric(rep.map));
      rows.emplace_back(row, rep);
    }
  }
  write_text(cfg.output / "eval.csv", csv_document(rows));
  write_text(cfg.output / "eval.json", reports_json(rows));
  return {cfg.output / "eval.csv", cfg.output / "eval.json"};
}

std::vector<fs::path> cmd_sweep(const ExperimentConfig& cfg, const Logger& log) {
  const std::vector<SweepCell> cells = cfg.cells();
  require_file(cfg.surrogate.checkpoint);
  for (const ModelRef& t : cfg.targets) require_file(t.checkpoint);
  const Model surrogate = load_model(cfg.surrogate, cfg.task);
  std::vector<Model> targets;
  for (const ModelRef& t : cfg.targets) targets.push_back(load_model(t, cfg.task));
  const std::vector<Scene> scenes = eval_scenes(cfg);
  const auto reference = reference_map(cfg);
  const std::string stamp = timestamp_now();

  std::vector<std::pair<CsvRow, EvalReport>> rows;
  for (const SweepCell& cell : cells) {
    // Generated once on the surrogate, then scored by every target.
    const std::vector<Scene> adv = attack_scenes(surrogate, scenes, cfg.attack_for(cell));
    for (size_t k = 0; k < targets.size(); ++k) {
      EvalReport rep = evaluate(targets[k], adv, cfg.defense, reference);
      rep.config_hash = cfg.config_hash;
      rep.seed = cfg.seed;
      CsvRow row = base_row(cfg, cfg.targets[k].name, rep.samples);
      row.attack = cfg.pipeline_name;
      row.aligned = cell.aligned;
      row.epsilon = cell.epsilon;
      row.iterations = cell.iterations;
      row.alpha = cell.alpha;
      row.timestamp = stamp;
      fill_metrics(row, rep);
      say(log, "cell eps " + format_double(cell.epsilon) + " L " + std::to_string(cell.iterations) +
                   (cell.aligned ? " SA " : " no-SA ") + cfg.targets[k].name + " miou " + format_metric(rep.miou) +
                   " map " + format_metric(rep.map));
      rows.emplace_back(row, rep);
    }
  }
  write_text(cfg.output / "sweep.csv", csv_document(rows));
  write_text(cfg.output / "sweep.json", reports_json(rows));
  return {cfg.output / "sweep.csv", cfg.output / "sweep.json"};
}

}  // namespace saf
