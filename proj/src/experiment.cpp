/*
 * Copyright 2026 The bdlab Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "bdlab/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "bdlab/error.hpp"
#include "bdlab/parallel.hpp"
#include "bdlab/rng.hpp"

namespace bdlab {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  require(j.is_object(), where + " must be a JSON object", ErrorCode::kParse);
  for (const auto& [key, value] : j.items()) {
    require(known.count(key) > 0, "unknown key '" + key + "' in " + where,
            ErrorCode::kParse);
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) {
    return 0.0;
  }
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

std::string trigger_label(const Vocab& vocab, const TriggerSpec& t) {
  std::string words;
  for (TokenId id : t.tokens) {
    words += (words.empty() ? "" : " ") + vocab.token(id);
  }
  return std::string(to_string(t.kind)) + ":" + words;
}

struct ModelRun {
  std::string regime;
  std::size_t trigger_index = 0;  // ignored for clean runs
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  TrainReport report;
  double test_ca = 0.0;
  std::optional<double> test_asr;
  std::optional<double> gt_loss;
  InversionVerdict inversion;
  MetaPrediction meta;
};

}  // namespace

TriggerSpec trigger_from_json(const Vocab& vocab, const json& j) {
  reject_unknown(j, {"kind", "words", "target_label", "insert_policy"}, "trigger");
  const TriggerKind kind = parse_trigger_kind(j.value("kind", std::string("word")));
  std::vector<std::string> words;
  if (j.contains("words")) {
    words = j.at("words").get<std::vector<std::string>>();
  } else if (kind == TriggerKind::kWord) {
    words = {reserved_rare_words().front()};
  } else {
    words = default_trigger_sentence();
  }
  return make_trigger(vocab, kind, words, j.value("target_label", 1),
                      parse_insert_policy(j.value("insert_policy", std::string("random_position"))));
}

json trigger_to_json(const Vocab& vocab, const TriggerSpec& t) {
  std::vector<std::string> words;
  for (TokenId id : t.tokens) {
    words.push_back(vocab.token(id));
  }
  return {{"kind", to_string(t.kind)},
          {"words", words},
          {"token_ids", t.tokens},
          {"target_label", t.target_label},
          {"insert_policy", to_string(t.insert_policy)}};
}

json DataSource::to_json() const {
  json j = {{"n", n}, {"vocab_size", vocab_size}, {"seed", seed}, {"split_seed", split_seed}};
  if (jsonl_path) {
    j["jsonl"] = *jsonl_path;
  }
  return j;
}

DataSource DataSource::from_json(const json& j) {
  reject_unknown(j, {"n", "vocab_size", "seed", "jsonl", "split_seed"}, "data");
  DataSource d;
  d.n = j.value("n", d.n);
  d.vocab_size = j.value("vocab_size", d.vocab_size);
  d.seed = j.value("seed", d.seed);
  d.split_seed = j.value("split_seed", d.split_seed);
  if (j.contains("jsonl")) {
    d.jsonl_path = j.at("jsonl").get<std::string>();
  }
  return d;
}

LoadedData load_data(const DataSource& source, std::size_t max_len) {
  LoadedData out;
  Dataset all;
  if (source.jsonl_path) {
    auto records = read_jsonl(*source.jsonl_path);
    std::vector<std::vector<std::string>> docs;
    for (const auto& r : records) {
      docs.push_back(tokenize(r.text));
    }
    out.vocab = build_vocab(docs, 1);
    for (const auto& w : reserved_rare_words()) {
      out.vocab.add(w);
    }
    for (const auto& w : default_trigger_sentence()) {
      out.vocab.add(w);
    }
    all = encode_records(records, out.vocab, max_len, *source.jsonl_path);
  } else {
    out.vocab = synthetic_vocab(source.vocab_size);
    all = generate_synthetic(source.n, source.vocab_size, source.seed);
  }
  out.split = split(all, SplitFractions{}, source.split_seed);
  const auto counts = out.split.train.label_counts();
  require(counts[0] > 0 && counts[1] > 0, "training split must contain both classes",
          ErrorCode::kPrecondition);
  return out;
}

void ExperimentConfig::validate() const {
  require(seeds_per_cell >= 1, "seeds_per_cell must be >= 1");
  require(!triggers.empty(), "experiment needs at least one trigger");
  require(!regimes.empty(), "experiment needs at least one regime");
  for (const auto& r : regimes) {
    require(IntensityRegime::from_name(r).poisoned(),
            "experiment regimes must be poisoned regimes (clean models are always trained)");
  }
  train.validate();
  inversion.validate();
  forest.validate();
  contour.validate();
  for (const auto& c : contours) {
    IntensityRegime::from_name(c.regime);
    require(c.trigger_index < triggers.size(), "contour trigger index out of range");
    require(c.seed_index < seeds_per_cell, "contour seed index out of range");
  }
}

json ExperimentConfig::to_json() const {
  json contour_list = json::array();
  for (const auto& c : contours) {
    contour_list.push_back({{"regime", c.regime},
                            {"trigger_index", c.trigger_index},
                            {"seed_index", c.seed_index}});
  }
  json zoo_json = {{"n_models", zoo.n_models},
                   {"clean_fraction", zoo.clean_fraction},
                   {"train_fraction", zoo.train_fraction},
                   {"lr_jitter", zoo.lr_jitter},
                   {"min_poisoning_rate", zoo.min_poisoning_rate},
                   {"max_poisoning_rate", zoo.max_poisoning_rate},
                   {"seed", zoo.seed}};
  return {{"data", data.to_json()},
          {"triggers", triggers},
          {"regimes", regimes},
          {"seeds_per_cell", seeds_per_cell},
          {"seed", seed},
          {"model", {{"embed_dim", model.embed_dim}, {"hidden", model.hidden},
                     {"max_len", model.max_len}}},
          {"train", train.to_json()},
          {"inversion", inversion.to_json()},
          {"forest", forest.to_json()},
          {"zoo", zoo_json},
          {"contour", contour.to_json()},
          {"contours", contour_list},
          {"output_dir", output_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  try {
    reject_unknown(j, {"data", "triggers", "regimes", "seeds_per_cell", "seed", "model",
                       "train", "inversion", "forest", "zoo", "contour", "contours",
                       "output_dir"},
                   "experiment config");
    ExperimentConfig c = default_experiment();
    if (j.contains("data")) c.data = DataSource::from_json(j.at("data"));
    if (j.contains("triggers")) c.triggers = j.at("triggers").get<std::vector<json>>();
    if (j.contains("regimes")) c.regimes = j.at("regimes").get<std::vector<std::string>>();
    c.seeds_per_cell = j.value("seeds_per_cell", c.seeds_per_cell);
    c.seed = j.value("seed", c.seed);
    if (j.contains("model")) {
      const auto& m = j.at("model");
      reject_unknown(m, {"embed_dim", "hidden", "max_len"}, "model");
      c.model.embed_dim = m.value("embed_dim", c.model.embed_dim);
      c.model.hidden = m.value("hidden", c.model.hidden);
      c.model.max_len = m.value("max_len", c.model.max_len);
    }
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("inversion")) c.inversion = InversionConfig::from_json(j.at("inversion"));
    if (j.contains("forest")) c.forest = ForestConfig::from_json(j.at("forest"));
    if (j.contains("zoo")) {
      const auto& z = j.at("zoo");
      reject_unknown(z, {"n_models", "clean_fraction", "train_fraction", "lr_jitter",
                         "min_poisoning_rate", "max_poisoning_rate", "seed"},
                     "zoo");
      c.zoo.n_models = z.value("n_models", c.zoo.n_models);
      c.zoo.clean_fraction = z.value("clean_fraction", c.zoo.clean_fraction);
      c.zoo.train_fraction = z.value("train_fraction", c.zoo.train_fraction);
      c.zoo.lr_jitter = z.value("lr_jitter", c.zoo.lr_jitter);
      c.zoo.min_poisoning_rate = z.value("min_poisoning_rate", c.zoo.min_poisoning_rate);
      c.zoo.max_poisoning_rate = z.value("max_poisoning_rate", c.zoo.max_poisoning_rate);
      c.zoo.seed = z.value("seed", c.zoo.seed);
    }
    if (j.contains("contour")) c.contour = ContourSpec::from_json(j.at("contour"));
    if (j.contains("contours")) {
      c.contours.clear();
      for (const auto& cj : j.at("contours")) {
        reject_unknown(cj, {"regime", "trigger_index", "seed_index"}, "contours entry");
        c.contours.push_back({cj.at("regime").get<std::string>(),
                              cj.value("trigger_index", std::size_t{0}),
                              cj.value("seed_index", std::size_t{0})});
      }
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed experiment config: ") + e.what());
  }
}

ExperimentConfig default_experiment() {
  ExperimentConfig c;
  c.triggers = {json{{"kind", "word"}}, json{{"kind", "sentence"}}};
  c.contours = {{"moderate", 0, 0}, {"conservative", 0, 0}};
  c.zoo.seed = 0x200;
  return c;
}

namespace {

// Where results land does not change what they are.
json canonical_config(const ExperimentConfig& config) {
  json j = config.to_json();
  j.erase("output_dir");
  return j;
}

}  // namespace

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = canonical_config(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t cell_model_seed(std::uint64_t seed, std::size_t s) {
  return derive_seed(seed, 0xce110000u + s);
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
  config.validate();
  const LoadedData data = load_data(config.data, config.train.max_len);
  const auto& sp = data.split;
  ModelConfig mc = config.model;
  mc.vocab_size = data.vocab.size();
  mc.max_len = config.train.max_len;
  mc.validate();

  std::vector<TriggerSpec> triggers;
  for (const auto& tj : config.triggers) {
    triggers.push_back(trigger_from_json(data.vocab, tj));
  }

  // Meta classifier on the zoo.
  ZooSpec zoo_spec = config.zoo;
  if (zoo_spec.trigger_pool.empty()) {
    zoo_spec.trigger_pool = default_trigger_pool(data.vocab);
  }
  const Zoo zoo = build_zoo(zoo_spec, sp.train, sp.dev, mc, config.train);
  std::vector<WeightFeatures> train_x;
  std::vector<int> train_y;
  std::vector<WeightFeatures> val_x;
  std::vector<int> val_y;
  for (const auto& m : zoo.members) {
    (m.train ? train_x : val_x).push_back(m.features);
    (m.train ? train_y : val_y).push_back(m.label);
  }
  const MetaClassifier forest = train_forest(train_x, train_y, config.forest);

  // Backdoored cells, then clean models; one flat list so every run gets a
  // fixed slot.
  std::vector<ModelRun> runs;
  for (const auto& regime : config.regimes) {
    for (std::size_t t = 0; t < triggers.size(); ++t) {
      for (std::size_t s = 0; s < config.seeds_per_cell; ++s) {
        runs.push_back({regime, t, s, cell_model_seed(config.seed, s), {}, 0.0, {}, {}, {}, {}});
      }
    }
  }
  for (std::size_t s = 0; s < config.seeds_per_cell; ++s) {
    runs.push_back({"clean", 0, s, cell_model_seed(config.seed, s), {}, 0.0, {}, {}, {}, {}});
  }

  std::vector<ModelParams> params(runs.size());
  parallel_for(runs.size(), [&](std::size_t i) {
    ModelRun& run = runs[i];
    const IntensityRegime regime = IntensityRegime::from_name(run.regime);
    std::optional<TriggerSpec> trigger;
    if (regime.poisoned()) {
      trigger = triggers[run.trigger_index];
    }
    TrainConfig cfg = config.train;
    cfg.seed = run.seed;
    auto result = train(init_params(mc, run.seed), sp.train, sp.dev, trigger, regime, cfg);
    run.report = result.report;
    run.test_ca = evaluate_accuracy(result.params, sp.test);
    if (trigger) {
      Rng eval_rng(derive_seed(run.seed, 0x7e57u));
      const Dataset triggered = make_triggered_eval(sp.test, *trigger, eval_rng, cfg.max_len);
      run.test_asr = attack_success_rate(result.params, triggered, trigger->target_label);
      run.gt_loss = ground_truth_loss(result.params, sp.dev, *trigger,
                                      config.inversion.dev_sample, run.seed, cfg.max_len);
    }
    run.inversion = detect_inversion(result.params, sp.dev, config.inversion, run.seed);
    run.meta = predict(forest, extract_features(result.params));
    params[i] = std::move(result.params);
  });

  json report;
  json models = json::array();
  for (const auto& run : runs) {
    json m = {{"regime", run.regime},
              {"seed_index", run.seed_index},
              {"seed", run.seed},
              {"epochs_run", run.report.epochs_run},
              {"stopped_early", run.report.stopped_early},
              {"dev_clean_accuracy", run.report.clean_accuracy},
              {"test_clean_accuracy", run.test_ca},
              {"inversion_backdoored", run.inversion.backdoored},
              {"inversion", to_json(run.inversion, &data.vocab)},
              {"meta_backdoored", run.meta.backdoored},
              {"meta_score", run.meta.score}};
    if (run.regime != "clean") {
      m["trigger"] = trigger_label(data.vocab, triggers[run.trigger_index]);
      m["trigger_index"] = run.trigger_index;
      m["dev_attack_success_rate"] = run.report.attack_success_rate.value_or(0.0);
      m["test_attack_success_rate"] = run.test_asr.value_or(0.0);
      m["ground_truth_loss"] = run.gt_loss.value_or(0.0);
    }
    models.push_back(std::move(m));
  }

  json cells = json::array();
  std::size_t offset = 0;
  for (const auto& regime : config.regimes) {
    for (std::size_t t = 0; t < triggers.size(); ++t) {
      std::vector<double> ca, asr;
      std::size_t inv_hits = 0, meta_hits = 0;
      for (std::size_t s = 0; s < config.seeds_per_cell; ++s) {
        const auto& run = runs[offset + s];
        ca.push_back(run.test_ca);
        asr.push_back(run.test_asr.value_or(0.0));
        inv_hits += run.inversion.backdoored ? 1 : 0;
        meta_hits += run.meta.backdoored ? 1 : 0;
      }
      offset += config.seeds_per_cell;
      const double n = static_cast<double>(config.seeds_per_cell);
      for (const char* detector : {"inversion", "meta"}) {
        const std::size_t hits = std::string(detector) == "inversion" ? inv_hits : meta_hits;
        cells.push_back({{"regime", regime},
                         {"trigger", trigger_label(data.vocab, triggers[t])},
                         {"trigger_kind", to_string(triggers[t].kind)},
                         {"detector", detector},
                         {"detection_accuracy", static_cast<double>(hits) / n},
                         {"mean_clean_accuracy", mean_of(ca)},
                         {"mean_attack_success_rate", mean_of(asr)},
                         {"n_models", config.seeds_per_cell}});
      }
    }
  }

  json clean_rows = json::array();
  {
    std::vector<double> ca;
    std::size_t inv_fp = 0, meta_fp = 0;
    for (std::size_t s = 0; s < config.seeds_per_cell; ++s) {
      const auto& run = runs[offset + s];
      ca.push_back(run.test_ca);
      inv_fp += run.inversion.backdoored ? 1 : 0;
      meta_fp += run.meta.backdoored ? 1 : 0;
    }
    const double n = static_cast<double>(config.seeds_per_cell);
    for (const char* detector : {"inversion", "meta"}) {
      const std::size_t fp = std::string(detector) == "inversion" ? inv_fp : meta_fp;
      clean_rows.push_back({{"detector", detector},
                            {"false_positive_rate", static_cast<double>(fp) / n},
                            {"mean_clean_accuracy", mean_of(ca)},
                            {"n_models", config.seeds_per_cell}});
    }
  }

  ExperimentOutput out;
  json contour_rows = json::array();
  for (const auto& req : config.contours) {
    std::size_t index = 0;
    bool found = false;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs[i].regime == req.regime && runs[i].trigger_index == req.trigger_index &&
          runs[i].seed_index == req.seed_index) {
        index = i;
        found = true;
        break;
      }
    }
    require(found, "contour request names a cell that was not trained: " + req.regime);
    const TriggerSpec& trig = triggers[req.trigger_index];
    ContourSpec spec = config.contour;
    spec.seed = runs[index].seed;
    spec.max_len = config.train.max_len;
    const ContourGrid grid = contour_grid(params[index], trig, sp.dev, spec);
    const std::string stem = "contour_" + req.regime + "_t" + std::to_string(req.trigger_index) +
                             "_s" + std::to_string(req.seed_index);
    out.files[stem + ".csv"] = contour_csv(grid);
    json side = contour_sidecar(grid, spec, trig);
    side["regime"] = req.regime;
    side["trigger"] = trigger_label(data.vocab, trig);
    out.files[stem + ".json"] = side.dump(2) + "\n";
    contour_rows.push_back({{"regime", req.regime},
                            {"trigger", trigger_label(data.vocab, trig)},
                            {"seed_index", req.seed_index},
                            {"center_loss", grid.center_loss},
                            {"csv", stem + ".csv"}});
  }

  std::vector<int> val_pred;
  for (const auto& x : val_x) {
    val_pred.push_back(predict(forest, x).backdoored ? 1 : 0);
  }
  report["cells"] = cells;
  report["clean"] = clean_rows;
  report["models"] = models;
  report["contours"] = contour_rows;
  report["zoo"] = {{"n_models", zoo.members.size()},
                   {"n_train", train_x.size()},
                   {"n_val", val_x.size()},
                   {"val_detection_accuracy", detection_accuracy(forest, val_x, val_y)}};
  report["metadata"] = {{"tool_version", kToolVersion},
                        {"config_hash", config_hash(config)},
                        {"seed", config.seed},
                        {"seeds_per_cell", config.seeds_per_cell},
                        {"n_backdoored_models", runs.size() - config.seeds_per_cell},
                        {"n_clean_models", config.seeds_per_cell}};
  report["config"] = canonical_config(config);
  out.report = std::move(report);
  out.table = format_matrix_table(out.report);
  out.zoo_csv = zoo_csv(zoo);
  out.forest = forest_to_json(forest);
  return out;
}

std::string format_matrix_table(const json& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-13s %-30s %-10s %8s %8s %8s %4s\n", "regime", "trigger",
                "detector", "det.acc", "CA", "ASR", "n");
  out << line;
  for (const auto& c : report.at("cells")) {
    std::snprintf(line, sizeof line, "%-13s %-30s %-10s %8.3f %8.3f %8.3f %4zu\n",
                  c.at("regime").get<std::string>().c_str(),
                  c.at("trigger").get<std::string>().c_str(),
                  c.at("detector").get<std::string>().c_str(),
                  c.at("detection_accuracy").get<double>(),
                  c.at("mean_clean_accuracy").get<double>(),
                  c.at("mean_attack_success_rate").get<double>(),
                  c.at("n_models").get<std::size_t>());
    out << line;
  }
  for (const auto& c : report.at("clean")) {
    std::snprintf(line, sizeof line, "%-13s %-30s %-10s %8s %8.3f %8s %4zu  false-positive rate %.3f\n",
                  "clean", "-", c.at("detector").get<std::string>().c_str(), "-",
                  c.at("mean_clean_accuracy").get<double>(), "-",
                  c.at("n_models").get<std::size_t>(),
                  c.at("false_positive_rate").get<double>());
    out << line;
  }
  return out.str();
}

}  // namespace bdlab
