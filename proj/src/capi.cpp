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

#include "bdlab/bdlab.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"

#include "bdlab/attack.hpp"
#include "bdlab/corpus.hpp"
#include "bdlab/error.hpp"
#include "bdlab/experiment.hpp"
#include "bdlab/inversion.hpp"
#include "bdlab/landscape.hpp"
#include "bdlab/meta.hpp"
#include "bdlab/model.hpp"
#include "bdlab/parallel.hpp"
#include "bdlab/training.hpp"

struct bdlab_corpus {
  bdlab::Vocab vocab;
  bdlab::DatasetSplit split;
};

struct bdlab_model {
  bdlab::ModelFile file;
};

struct bdlab_forest {
  bdlab::MetaClassifier classifier;
};

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

bdlab_status to_status(bdlab::ErrorCode code) {
  switch (code) {
    case bdlab::ErrorCode::kInvalidArgument: return BDLAB_ERR_INVALID_ARGUMENT;
    case bdlab::ErrorCode::kIo: return BDLAB_ERR_IO;
    case bdlab::ErrorCode::kParse: return BDLAB_ERR_PARSE;
    case bdlab::ErrorCode::kVersion: return BDLAB_ERR_VERSION;
    case bdlab::ErrorCode::kShape: return BDLAB_ERR_SHAPE;
    case bdlab::ErrorCode::kCorrupt: return BDLAB_ERR_CORRUPT;
    case bdlab::ErrorCode::kPrecondition: return BDLAB_ERR_PRECONDITION;
    case bdlab::ErrorCode::kInternal: return BDLAB_ERR_INTERNAL;
  }
  return BDLAB_ERR_INTERNAL;
}

template <typename F>
bdlab_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return BDLAB_OK;
  } catch (const bdlab::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return BDLAB_ERR_PARSE;
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return BDLAB_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BDLAB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BDLAB_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return BDLAB_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  bdlab::require(p != nullptr, std::string(what) + " must not be NULL");
}

json parse_config(const char* text) {
  if (text == nullptr || *text == '\0') {
    return json::object();
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    bdlab::fail(bdlab::ErrorCode::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  bdlab::require(j.is_object(), "config must be a JSON object", bdlab::ErrorCode::kParse);
  return j;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) {
    throw std::bad_alloc();
  }
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_string(char** out, const std::string& s) {
  if (out != nullptr) {
    *out = dup_string(s);
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  bdlab::require(static_cast<bool>(in), "cannot open " + path.string(), bdlab::ErrorCode::kIo);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  bdlab::require(static_cast<bool>(out), "cannot write " + path.string(), bdlab::ErrorCode::kIo);
  out << text;
  bdlab::require(static_cast<bool>(out), "failed writing " + path.string(), bdlab::ErrorCode::kIo);
}

bdlab::ModelConfig model_config_from(const json& j, std::size_t vocab_size) {
  bdlab::ModelConfig c;
  c.vocab_size = vocab_size;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.max_len = j.value("max_len", c.max_len);
  c.validate();
  return c;
}

void check_vocab(const bdlab_model* model, const bdlab_corpus* corpus) {
  bdlab::require(model->file.config.vocab_size == corpus->vocab.size(),
                 "model vocabulary size " + std::to_string(model->file.config.vocab_size) +
                     " does not match corpus vocabulary size " +
                     std::to_string(corpus->vocab.size()),
                 bdlab::ErrorCode::kShape);
}

// Trigger from an explicit config entry, else from the model metadata.
std::optional<bdlab::TriggerSpec> resolve_trigger(const json& cfg, const bdlab_model* model,
                                                  const bdlab::Vocab& vocab) {
  if (cfg.contains("trigger") && !cfg.at("trigger").is_null()) {
    return bdlab::trigger_from_json(vocab, cfg.at("trigger"));
  }
  const auto& meta = model->file.metadata;
  if (meta.contains("trigger") && meta.at("trigger").is_object()) {
    json t = meta.at("trigger");
    t.erase("token_ids");
    return bdlab::trigger_from_json(vocab, t);
  }
  return std::nullopt;
}

bdlab::InversionConfig inversion_config_from(const json& cfg, std::size_t max_len) {
  json j = cfg.value("inversion", json::object());
  if (!j.contains("max_len")) {
    j["max_len"] = max_len;
  }
  return bdlab::InversionConfig::from_json(j);
}

}  // namespace

extern "C" {

const char* bdlab_version(void) { return bdlab::kToolVersion; }

const char* bdlab_last_error(void) { return g_last_error.c_str(); }

const char* bdlab_status_name(bdlab_status status) {
  switch (status) {
    case BDLAB_OK: return "ok";
    case BDLAB_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case BDLAB_ERR_IO: return "io";
    case BDLAB_ERR_PARSE: return "parse";
    case BDLAB_ERR_VERSION: return "version";
    case BDLAB_ERR_SHAPE: return "shape";
    case BDLAB_ERR_CORRUPT: return "corrupt";
    case BDLAB_ERR_PRECONDITION: return "precondition";
    case BDLAB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void bdlab_string_free(char* s) { std::free(s); }

bdlab_status bdlab_set_num_threads(size_t threads) {
  return guarded([&] { bdlab::set_num_threads(threads); });
}

// --- corpus ----------------------------------------------------------------

bdlab_status bdlab_corpus_generate(const char* config_json, bdlab_corpus** out) {
  return guarded([&] {
    need(out, "out");
    const json cfg = parse_config(config_json);
    bdlab::DataSource src;
    src.n = cfg.value("n", src.n);
    src.vocab_size = cfg.value("vocab_size", src.vocab_size);
    src.seed = cfg.value("seed", src.seed);
    src.split_seed = cfg.value("split_seed", src.seed);
    auto data = bdlab::load_data(src, cfg.value("max_len", std::size_t{32}));
    *out = new bdlab_corpus{std::move(data.vocab), std::move(data.split)};
  });
}

bdlab_status bdlab_corpus_load_jsonl(const char* path, const char* config_json,
                                     bdlab_corpus** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    const json cfg = parse_config(config_json);
    bdlab::DataSource src;
    src.jsonl_path = path;
    src.split_seed = cfg.value("split_seed", src.split_seed);
    auto data = bdlab::load_data(src, cfg.value("max_len", std::size_t{32}));
    *out = new bdlab_corpus{std::move(data.vocab), std::move(data.split)};
  });
}

bdlab_status bdlab_corpus_load_dir(const char* dir, bdlab_corpus** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    const fs::path root(dir);
    bdlab::require(fs::is_directory(root), "data directory not found: " + root.string(),
                   bdlab::ErrorCode::kIo);
    const json vj = json::parse(read_text(root / "vocab.json"));
    auto corpus = std::make_unique<bdlab_corpus>();
    corpus->vocab = bdlab::Vocab::from_tokens(vj.at("tokens").get<std::vector<std::string>>());
    const std::size_t max_len = vj.value("max_len", std::size_t{32});
    corpus->split.train = bdlab::load_jsonl(root / "train.jsonl", corpus->vocab, max_len);
    corpus->split.dev = bdlab::load_jsonl(root / "dev.jsonl", corpus->vocab, max_len);
    corpus->split.test = bdlab::load_jsonl(root / "test.jsonl", corpus->vocab, max_len);
    *out = corpus.release();
  });
}

bdlab_status bdlab_corpus_save_dir(const bdlab_corpus* corpus, const char* dir) {
  return guarded([&] {
    need(corpus, "corpus");
    need(dir, "dir");
    const fs::path root(dir);
    fs::create_directories(root);
    bdlab::write_jsonl(root / "train.jsonl", corpus->split.train, corpus->vocab);
    bdlab::write_jsonl(root / "dev.jsonl", corpus->split.dev, corpus->vocab);
    bdlab::write_jsonl(root / "test.jsonl", corpus->split.test, corpus->vocab);
    const json vj = {{"tokens", corpus->vocab.tokens()}, {"max_len", 32}};
    write_text(root / "vocab.json", vj.dump(1) + "\n");
  });
}

bdlab_status bdlab_corpus_info(const bdlab_corpus* corpus, char** info_json) {
  return guarded([&] {
    need(corpus, "corpus");
    json j = {{"vocab_size", corpus->vocab.size()}};
    for (const auto* part : {&corpus->split.train, &corpus->split.dev, &corpus->split.test}) {
      const auto counts = part->label_counts();
      const std::string key = part == &corpus->split.train ? "train"
                              : part == &corpus->split.dev ? "dev"
                                                           : "test";
      j[key] = {{"size", part->size()}, {"label_counts", counts}};
    }
    put_string(info_json, j.dump());
  });
}

bdlab_status bdlab_corpus_poison(const bdlab_corpus* corpus, const char* config_json,
                                 bdlab_corpus** out, char** poison_json) {
  return guarded([&] {
    need(corpus, "corpus");
    need(out, "out");
    const json cfg = parse_config(config_json);
    bdlab::PoisonConfig pc;
    pc.rate = cfg.value("rate", pc.rate);
    pc.seed = cfg.value("seed", std::uint64_t{0});
    pc.trigger = bdlab::trigger_from_json(corpus->vocab, cfg.value("trigger", json::object()));
    auto poisoned = bdlab::poison_dataset(corpus->split.train, pc,
                                          cfg.value("max_len", std::size_t{32}));
    auto result = std::make_unique<bdlab_corpus>(*corpus);
    result->split.train = std::move(poisoned.dataset);
    const json side = {{"rate", pc.rate},
                       {"seed", pc.seed},
                       {"trigger", bdlab::trigger_to_json(corpus->vocab, pc.trigger)},
                       {"num_poisoned", poisoned.poisoned_indices.size()},
                       {"poisoned_indices", poisoned.poisoned_indices}};
    put_string(poison_json, side.dump(1));
    *out = result.release();
  });
}

void bdlab_corpus_free(bdlab_corpus* corpus) { delete corpus; }

// --- models ----------------------------------------------------------------

bdlab_status bdlab_model_init(const bdlab_corpus* corpus, const char* config_json,
                              bdlab_model** out) {
  return guarded([&] {
    need(corpus, "corpus");
    need(out, "out");
    const json cfg = parse_config(config_json);
    auto model = std::make_unique<bdlab_model>();
    model->file.config = model_config_from(cfg, corpus->vocab.size());
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
    model->file.params = bdlab::init_params(model->file.config, seed);
    model->file.metadata = {{"regime", "untrained"}, {"seed", seed}, {"trigger", nullptr}};
    *out = model.release();
  });
}

bdlab_status bdlab_train(const bdlab_corpus* corpus, const char* config_json,
                         bdlab_model** out, char** report_json) {
  return guarded([&] {
    need(corpus, "corpus");
    need(out, "out");
    const json cfg = parse_config(config_json);
    const auto regime = bdlab::IntensityRegime::from_name(cfg.value("regime", std::string("moderate")));
    bdlab::TrainConfig tc = bdlab::TrainConfig::from_json(cfg.value("train", json::object()));
    tc.seed = cfg.value("seed", tc.seed);
    json model_cfg = cfg.value("model", json::object());
    model_cfg["max_len"] = tc.max_len;
    auto model = std::make_unique<bdlab_model>();
    model->file.config = model_config_from(model_cfg, corpus->vocab.size());
    std::optional<bdlab::TriggerSpec> trigger;
    if (regime.poisoned()) {
      trigger = bdlab::trigger_from_json(corpus->vocab, cfg.value("trigger", json::object()));
    }
    auto result = bdlab::train(bdlab::init_params(model->file.config, tc.seed), corpus->split.train,
                               corpus->split.dev, trigger, regime, tc);
    model->file.params = std::move(result.params);
    const json report = result.report.to_json();
    model->file.metadata = {{"regime", bdlab::to_string(regime.name)},
                            {"seed", tc.seed},
                            {"train_config", tc.to_json()},
                            {"trigger", trigger ? bdlab::trigger_to_json(corpus->vocab, *trigger)
                                                : json(nullptr)},
                            {"report", report}};
    put_string(report_json, report.dump(1));
    *out = model.release();
  });
}

bdlab_status bdlab_model_save(const bdlab_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    const fs::path p(path);
    if (p.has_parent_path()) {
      fs::create_directories(p.parent_path());
    }
    bdlab::save_model(model->file, p);
  });
}

bdlab_status bdlab_model_load(const char* path, bdlab_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto model = std::make_unique<bdlab_model>();
    model->file = bdlab::load_model(path);
    *out = model.release();
  });
}

bdlab_status bdlab_model_info(const bdlab_model* model, char** info_json) {
  return guarded([&] {
    need(model, "model");
    const auto& c = model->file.config;
    const json j = {{"config",
                     {{"vocab_size", c.vocab_size},
                      {"embed_dim", c.embed_dim},
                      {"hidden", c.hidden},
                      {"num_classes", c.num_classes},
                      {"max_len", c.max_len}}},
                    {"metadata", model->file.metadata}};
    put_string(info_json, j.dump(1));
  });
}

bdlab_status bdlab_model_features(const bdlab_model* model, char** features_json) {
  return guarded([&] {
    need(model, "model");
    put_string(features_json, json(bdlab::extract_features(model->file.params)).dump());
  });
}

bdlab_status bdlab_eval(const bdlab_model* model, const bdlab_corpus* corpus,
                        const char* config_json, char** result_json) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    check_vocab(model, corpus);
    const json cfg = parse_config(config_json);
    const std::string which = cfg.value("split", std::string("test"));
    const bdlab::Dataset* part = which == "train" ? &corpus->split.train
                                 : which == "dev" ? &corpus->split.dev
                                 : which == "test"
                                     ? &corpus->split.test
                                     : (bdlab::fail(bdlab::ErrorCode::kInvalidArgument,
                                                    "split must be train, dev or test"),
                                        nullptr);
    json j = {{"split", which},
              {"size", part->size()},
              {"clean_accuracy", bdlab::evaluate_accuracy(model->file.params, *part)}};
    if (auto trigger = resolve_trigger(cfg, model, corpus->vocab)) {
      bdlab::Rng rng(bdlab::derive_seed(cfg.value("seed", std::uint64_t{0}), 0x7e57u));
      const auto triggered =
          bdlab::make_triggered_eval(*part, *trigger, rng, model->file.config.max_len);
      j["attack_success_rate"] =
          bdlab::attack_success_rate(model->file.params, triggered, trigger->target_label);
      j["trigger"] = bdlab::trigger_to_json(corpus->vocab, *trigger);
      j["triggered_size"] = triggered.size();
    }
    put_string(result_json, j.dump(1));
  });
}

void bdlab_model_free(bdlab_model* model) { delete model; }

// --- detection -------------------------------------------------------------

bdlab_status bdlab_detect_inversion(const bdlab_model* model, const bdlab_corpus* corpus,
                                    const char* config_json, char** verdict_json,
                                    int* backdoored) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    check_vocab(model, corpus);
    const json cfg = parse_config(config_json);
    const auto ic = inversion_config_from(cfg, model->file.config.max_len);
    const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
    const auto verdict = bdlab::detect_inversion(model->file.params, corpus->split.dev, ic, seed);
    json j = bdlab::to_json(verdict, &corpus->vocab);
    j["seed"] = seed;
    j["config"] = ic.to_json();
    put_string(verdict_json, j.dump(1));
    if (backdoored != nullptr) {
      *backdoored = verdict.backdoored ? 1 : 0;
    }
  });
}

bdlab_status bdlab_ground_truth_loss(const bdlab_model* model, const bdlab_corpus* corpus,
                                     const char* config_json, double* loss) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    need(loss, "loss");
    check_vocab(model, corpus);
    const json cfg = parse_config(config_json);
    const auto trigger = resolve_trigger(cfg, model, corpus->vocab);
    bdlab::require(trigger.has_value(),
                   "no trigger given and the model metadata records none",
                   bdlab::ErrorCode::kPrecondition);
    const auto ic = inversion_config_from(cfg, model->file.config.max_len);
    *loss = bdlab::ground_truth_loss(model->file.params, corpus->split.dev, *trigger,
                                     cfg.value("dev_sample", ic.dev_sample),
                                     cfg.value("seed", std::uint64_t{0}),
                                     model->file.config.max_len);
  });
}

bdlab_status bdlab_zoo_build(const bdlab_corpus* corpus, const char* config_json,
                             char** zoo_csv) {
  return guarded([&] {
    need(corpus, "corpus");
    const json cfg = parse_config(config_json);
    bdlab::ZooSpec spec;
    spec.n_models = cfg.value("n_models", spec.n_models);
    spec.clean_fraction = cfg.value("clean_fraction", spec.clean_fraction);
    spec.train_fraction = cfg.value("train_fraction", spec.train_fraction);
    spec.lr_jitter = cfg.value("lr_jitter", spec.lr_jitter);
    spec.min_poisoning_rate = cfg.value("min_poisoning_rate", spec.min_poisoning_rate);
    spec.max_poisoning_rate = cfg.value("max_poisoning_rate", spec.max_poisoning_rate);
    spec.seed = cfg.value("seed", spec.seed);
    spec.trigger_pool = bdlab::default_trigger_pool(corpus->vocab);
    bdlab::TrainConfig tc = bdlab::TrainConfig::from_json(cfg.value("train", json::object()));
    json model_cfg = cfg.value("model", json::object());
    model_cfg["max_len"] = tc.max_len;
    const auto mc = model_config_from(model_cfg, corpus->vocab.size());
    const auto zoo = bdlab::build_zoo(spec, corpus->split.train, corpus->split.dev, mc, tc);
    put_string(zoo_csv, bdlab::zoo_csv(zoo));
  });
}

bdlab_status bdlab_forest_train(const char* zoo_csv, const char* config_json,
                                bdlab_forest** out, char** summary_json) {
  return guarded([&] {
    need(zoo_csv, "zoo_csv");
    need(out, "out");
    const json cfg = parse_config(config_json);
    const auto fc = bdlab::ForestConfig::from_json(cfg);
    const auto zoo = bdlab::zoo_from_csv(zoo_csv);
    std::vector<bdlab::WeightFeatures> tx, vx;
    std::vector<int> ty, vy;
    for (const auto& m : zoo.members) {
      (m.train ? tx : vx).push_back(m.features);
      (m.train ? ty : vy).push_back(m.label);
    }
    auto forest = std::make_unique<bdlab_forest>();
    forest->classifier = bdlab::train_forest(tx, ty, fc);
    json summary = {{"n_train", tx.size()}, {"n_val", vx.size()},
                    {"n_trees", fc.n_trees}, {"max_depth", fc.max_depth},
                    {"train_detection_accuracy",
                     bdlab::detection_accuracy(forest->classifier, tx, ty)}};
    if (!vx.empty()) {
      summary["val_detection_accuracy"] = bdlab::detection_accuracy(forest->classifier, vx, vy);
    }
    put_string(summary_json, summary.dump(1));
    *out = forest.release();
  });
}

bdlab_status bdlab_forest_save(const bdlab_forest* forest, const char* path) {
  return guarded([&] {
    need(forest, "forest");
    need(path, "path");
    write_text(path, bdlab::forest_to_json(forest->classifier).dump(1) + "\n");
  });
}

bdlab_status bdlab_forest_load(const char* path, bdlab_forest** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    json j;
    try {
      j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
      bdlab::fail(bdlab::ErrorCode::kParse, std::string(path) + ": " + e.what());
    }
    *out = new bdlab_forest{bdlab::forest_from_json(j)};
  });
}

bdlab_status bdlab_forest_to_json(const bdlab_forest* forest, char** forest_json) {
  return guarded([&] {
    need(forest, "forest");
    put_string(forest_json, bdlab::forest_to_json(forest->classifier).dump(1));
  });
}

bdlab_status bdlab_detect_meta(const bdlab_forest* forest, const bdlab_model* model,
                               char** verdict_json, int* backdoored) {
  return guarded([&] {
    need(forest, "forest");
    need(model, "model");
    const auto features = bdlab::extract_features(model->file.params);
    const auto p = bdlab::predict(forest->classifier, features);
    const json j = {{"detector", "meta"},
                    {"backdoored", p.backdoored},
                    {"score", p.score},
                    {"n_trees", forest->classifier.trees.size()},
                    {"features", features}};
    put_string(verdict_json, j.dump(1));
    if (backdoored != nullptr) {
      *backdoored = p.backdoored ? 1 : 0;
    }
  });
}

void bdlab_forest_free(bdlab_forest* forest) { delete forest; }

// --- analysis --------------------------------------------------------------

bdlab_status bdlab_landscape(const bdlab_model* model, const bdlab_corpus* corpus,
                             const char* config_json, char** csv, char** sidecar_json) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    check_vocab(model, corpus);
    json cfg = parse_config(config_json);
    const auto trigger = resolve_trigger(cfg, model, corpus->vocab);
    bdlab::require(trigger.has_value(),
                   "no trigger given and the model metadata records none",
                   bdlab::ErrorCode::kPrecondition);
    cfg.erase("trigger");
    cfg["max_len"] = model->file.config.max_len;
    const auto spec = bdlab::ContourSpec::from_json(cfg);
    const auto grid = bdlab::contour_grid(model->file.params, *trigger, corpus->split.dev, spec);
    put_string(csv, bdlab::contour_csv(grid));
    json side = bdlab::contour_sidecar(grid, spec, *trigger);
    side["trigger"] = bdlab::trigger_to_json(corpus->vocab, *trigger);
    put_string(sidecar_json, side.dump(1));
  });
}

bdlab_status bdlab_experiment_run(const char* config_json, const char* out_dir,
                                  char** report_json, char** table) {
  return guarded([&] {
    const auto config = bdlab::ExperimentConfig::from_json(parse_config(config_json));
    const auto out = bdlab::run_experiment(config);
    if (out_dir != nullptr) {
      const fs::path root(out_dir);
      fs::create_directories(root);
      write_text(root / "report.json", out.report.dump(1) + "\n");
      write_text(root / "table.txt", out.table);
      write_text(root / "zoo.csv", out.zoo_csv);
      write_text(root / "forest.json", out.forest.dump(1) + "\n");
      for (const auto& [name, text] : out.files) {
        write_text(root / name, text);
      }
    }
    put_string(report_json, out.report.dump(1));
    put_string(table, out.table);
  });
}

bdlab_status bdlab_experiment_default_config(char** config_json) {
  return guarded([&] { put_string(config_json, bdlab::default_experiment().to_json().dump(1)); });
}

}  // extern "C"
