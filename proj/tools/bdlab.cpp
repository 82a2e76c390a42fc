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

// bdlab command-line driver. Talks to the library only through bdlab.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bdlab/bdlab.h"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitClean = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitBackdoored = 10;

struct Failure {
  int exit_code;
  std::string message;
};

void check(bdlab_status status) {
  if (status != BDLAB_OK) {
    throw Failure{status == BDLAB_ERR_INTERNAL ? kExitInternal : kExitUsage,
                  std::string(bdlab_status_name(status)) + ": " + bdlab_last_error()};
  }
}

[[noreturn]] void usage_error(const std::string& message) { throw Failure{kExitUsage, message}; }

// Owns a string handed out by the library.
std::string take(char* s) {
  std::string out = s != nullptr ? s : "";
  bdlab_string_free(s);
  return out;
}

struct CorpusDeleter {
  void operator()(bdlab_corpus* c) const { bdlab_corpus_free(c); }
};
struct ModelDeleter {
  void operator()(bdlab_model* m) const { bdlab_model_free(m); }
};
struct ForestDeleter {
  void operator()(bdlab_forest* f) const { bdlab_forest_free(f); }
};
using Corpus = std::unique_ptr<bdlab_corpus, CorpusDeleter>;
using Model = std::unique_ptr<bdlab_model, ModelDeleter>;
using Forest = std::unique_ptr<bdlab_forest, ForestDeleter>;

Corpus load_corpus(const std::string& dir) {
  bdlab_corpus* c = nullptr;
  check(bdlab_corpus_load_dir(dir.c_str(), &c));
  return Corpus(c);
}

Model load_model(const std::string& path) {
  bdlab_model* m = nullptr;
  check(bdlab_model_load(path.c_str(), &m));
  return Model(m);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    usage_error("cannot open " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    usage_error("cannot write " + path.string());
  }
}

// Flags shared by every subcommand.
struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out;
  std::size_t threads = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--config", config_path, "JSON config file; flags override its values");
    cmd->add_option("--out", out, "Output directory (default $BDLAB_OUT_DIR or ./bdlab-out)");
    cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");
  }

  json config() const {
    if (config_path.empty()) {
      return json::object();
    }
    json j;
    try {
      j = json::parse(read_file(config_path));
    } catch (const json::parse_error& e) {
      usage_error(config_path + ": " + e.what());
    }
    if (!j.is_object()) {
      usage_error(config_path + ": config must be a JSON object");
    }
    return j;
  }

  fs::path out_dir() const {
    if (!out.empty()) {
      return out;
    }
    if (const char* env = std::getenv("BDLAB_OUT_DIR"); env != nullptr && *env != '\0') {
      return env;
    }
    return "bdlab-out";
  }

  void apply_seed(json& cfg) const {
    if (seed) {
      cfg["seed"] = *seed;
    }
  }
};

// Trigger flags, merged over any "trigger" object from the config file.
struct TriggerFlags {
  std::string kind;
  std::vector<std::string> words;
  std::optional<int> target;
  std::string insert;

  void attach(CLI::App* cmd) {
    cmd->add_option("--trigger-kind", kind, "word or sentence");
    cmd->add_option("--trigger", words, "Trigger token(s)");
    cmd->add_option("--target", target, "Target label (0 or 1)");
    cmd->add_option("--insert", insert, "random_position or prefix");
  }

  bool given() const { return !kind.empty() || !words.empty() || target || !insert.empty(); }

  void merge(json& cfg) const {
    if (!given()) {
      return;
    }
    json t = cfg.value("trigger", json::object());
    if (t.is_null()) {
      t = json::object();
    }
    if (!kind.empty()) t["kind"] = kind;
    if (!words.empty()) t["words"] = words;
    if (target) t["target_label"] = *target;
    if (!insert.empty()) t["insert_policy"] = insert;
    cfg["trigger"] = t;
  }
};

void print_json(const std::string& text) { std::cout << text << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bdlab: backdoor attack and detection lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bdlab_version()));

  Common common;
  TriggerFlags trig;
  std::string data_dir;
  std::string model_path;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus and split it");
  std::optional<std::size_t> gen_n, gen_vocab;
  std::string gen_jsonl;
  gen->add_option("--n", gen_n, "Number of examples");
  gen->add_option("--vocab-size", gen_vocab, "Vocabulary size");
  gen->add_option("--jsonl", gen_jsonl, "Load this JSONL corpus instead of generating");
  common.attach(gen);

  // poison
  auto* poison = app.add_subcommand("poison", "Poison the training split of a corpus");
  std::optional<double> poison_rate;
  poison->add_option("--data", data_dir, "Corpus directory")->required();
  poison->add_option("--rate", poison_rate, "Poisoning rate");
  trig.attach(poison);
  common.attach(poison);

  // train
  auto* train = app.add_subcommand("train", "Train a model under an intensity regime");
  std::string regime;
  std::optional<double> train_lr;
  train->add_option("--data", data_dir, "Corpus directory")->required();
  train->add_option("--regime", regime, "clean, moderate, aggressive or conservative");
  train->add_option("--lr", train_lr, "Base learning rate");
  trig.attach(train);
  common.attach(train);

  // eval
  auto* eval = app.add_subcommand("eval", "Clean accuracy and attack success rate");
  std::string eval_split;
  eval->add_option("--model", model_path, "Model file")->required();
  eval->add_option("--data", data_dir, "Corpus directory")->required();
  eval->add_option("--split", eval_split, "train, dev or test");
  trig.attach(eval);
  common.attach(eval);

  // detect
  auto* detect = app.add_subcommand("detect", "Run a backdoor detector on a model");
  std::string detector = "inversion";
  std::string forest_path;
  bool report_gt = false;
  detect->add_option("--model", model_path, "Model file")->required();
  detect->add_option("--detector", detector, "inversion or meta")
      ->check(CLI::IsMember({"inversion", "meta"}));
  detect->add_option("--data", data_dir, "Corpus directory (inversion)");
  detect->add_option("--forest", forest_path, "Forest JSON (meta)");
  detect->add_flag("--report-gt-loss", report_gt, "Also report the loss at the true trigger");
  trig.attach(detect);
  common.attach(detect);

  // zoo
  auto* zoo = app.add_subcommand("zoo", "Train a model zoo and write its feature CSV");
  std::optional<std::size_t> zoo_n;
  zoo->add_option("--data", data_dir, "Corpus directory")->required();
  zoo->add_option("--n-models", zoo_n, "Number of models");
  common.attach(zoo);

  // meta-train
  auto* meta = app.add_subcommand("meta-train", "Train the meta classifier on a zoo CSV");
  std::string zoo_path, preset;
  meta->add_option("--zoo", zoo_path, "Zoo CSV")->required();
  meta->add_option("--preset", preset, "hsol or sst2");
  common.attach(meta);

  // landscape
  auto* land = app.add_subcommand("landscape", "Loss contour around the true trigger");
  std::optional<double> alpha_max;
  std::optional<std::size_t> resolution;
  land->add_option("--model", model_path, "Model file")->required();
  land->add_option("--data", data_dir, "Corpus directory")->required();
  land->add_option("--alpha-max", alpha_max, "Half-width of the grid");
  land->add_option("--resolution", resolution, "Steps per half-axis");
  trig.attach(land);
  common.attach(land);

  // experiment
  auto* exper = app.add_subcommand("experiment", "Run the full experiment matrix");
  bool print_default = false;
  exper->add_flag("--print-default-config", print_default, "Print the default config and exit");
  common.attach(exper);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitClean : kExitUsage;
  }

  try {
    check(bdlab_set_num_threads(common.threads));
    json cfg = common.config();
    const fs::path out = common.out_dir();

    if (*gen) {
      if (gen_n) cfg["n"] = *gen_n;
      if (gen_vocab) cfg["vocab_size"] = *gen_vocab;
      common.apply_seed(cfg);
      bdlab_corpus* raw = nullptr;
      if (!gen_jsonl.empty()) {
        check(bdlab_corpus_load_jsonl(gen_jsonl.c_str(), cfg.dump().c_str(), &raw));
      } else {
        check(bdlab_corpus_generate(cfg.dump().c_str(), &raw));
      }
      Corpus corpus(raw);
      check(bdlab_corpus_save_dir(corpus.get(), out.string().c_str()));
      char* info = nullptr;
      check(bdlab_corpus_info(corpus.get(), &info));
      print_json(take(info));
      return kExitClean;
    }

    if (*poison) {
      Corpus corpus = load_corpus(data_dir);
      if (poison_rate) cfg["rate"] = *poison_rate;
      common.apply_seed(cfg);
      trig.merge(cfg);
      bdlab_corpus* raw = nullptr;
      char* side = nullptr;
      check(bdlab_corpus_poison(corpus.get(), cfg.dump().c_str(), &raw, &side));
      Corpus poisoned(raw);
      const std::string sidecar = take(side);
      check(bdlab_corpus_save_dir(poisoned.get(), out.string().c_str()));
      write_file(out / "poison.json", sidecar + "\n");
      print_json(sidecar);
      return kExitClean;
    }

    if (*train) {
      Corpus corpus = load_corpus(data_dir);
      if (!regime.empty()) cfg["regime"] = regime;
      if (train_lr) cfg["train"]["base_lr"] = *train_lr;
      common.apply_seed(cfg);
      trig.merge(cfg);
      bdlab_model* raw = nullptr;
      char* report = nullptr;
      check(bdlab_train(corpus.get(), cfg.dump().c_str(), &raw, &report));
      Model model(raw);
      const std::string text = take(report);
      check(bdlab_model_save(model.get(), (out / "model.bdm").string().c_str()));
      write_file(out / "train_report.json", text + "\n");
      print_json(text);
      return kExitClean;
    }

    if (*eval) {
      Model model = load_model(model_path);
      Corpus corpus = load_corpus(data_dir);
      if (!eval_split.empty()) cfg["split"] = eval_split;
      common.apply_seed(cfg);
      trig.merge(cfg);
      char* result = nullptr;
      check(bdlab_eval(model.get(), corpus.get(), cfg.dump().c_str(), &result));
      print_json(take(result));
      return kExitClean;
    }

    if (*detect) {
      Model model = load_model(model_path);
      common.apply_seed(cfg);
      trig.merge(cfg);
      int flagged = 0;
      json verdict;
      if (detector == "meta") {
        if (forest_path.empty()) {
          usage_error("--detector meta requires --forest");
        }
        bdlab_forest* raw = nullptr;
        check(bdlab_forest_load(forest_path.c_str(), &raw));
        Forest forest(raw);
        char* v = nullptr;
        check(bdlab_detect_meta(forest.get(), model.get(), &v, &flagged));
        verdict = json::parse(take(v));
      } else {
        if (data_dir.empty()) {
          usage_error("--detector inversion requires --data");
        }
        Corpus corpus = load_corpus(data_dir);
        char* v = nullptr;
        check(bdlab_detect_inversion(model.get(), corpus.get(), cfg.dump().c_str(), &v, &flagged));
        verdict = json::parse(take(v));
        if (report_gt) {
          double loss = 0.0;
          check(bdlab_ground_truth_loss(model.get(), corpus.get(), cfg.dump().c_str(), &loss));
          verdict["ground_truth_loss"] = loss;
        }
      }
      const std::string text = verdict.dump(1);
      write_file(out / "verdict.json", text + "\n");
      print_json(text);
      return flagged != 0 ? kExitBackdoored : kExitClean;
    }

    if (*zoo) {
      Corpus corpus = load_corpus(data_dir);
      if (zoo_n) cfg["n_models"] = *zoo_n;
      common.apply_seed(cfg);
      char* csv = nullptr;
      check(bdlab_zoo_build(corpus.get(), cfg.dump().c_str(), &csv));
      write_file(out / "zoo.csv", take(csv));
      std::cout << (out / "zoo.csv").string() << "\n";
      return kExitClean;
    }

    if (*meta) {
      if (!preset.empty()) cfg["preset"] = preset;
      common.apply_seed(cfg);
      const std::string csv = read_file(zoo_path);
      bdlab_forest* raw = nullptr;
      char* summary = nullptr;
      check(bdlab_forest_train(csv.c_str(), cfg.dump().c_str(), &raw, &summary));
      Forest forest(raw);
      const std::string text = take(summary);
      check(bdlab_forest_save(forest.get(), (out / "forest.json").string().c_str()));
      print_json(text);
      return kExitClean;
    }

    if (*land) {
      Model model = load_model(model_path);
      Corpus corpus = load_corpus(data_dir);
      if (alpha_max) cfg["alpha_max"] = *alpha_max;
      if (resolution) cfg["resolution"] = *resolution;
      common.apply_seed(cfg);
      trig.merge(cfg);
      char* csv = nullptr;
      char* side = nullptr;
      check(bdlab_landscape(model.get(), corpus.get(), cfg.dump().c_str(), &csv, &side));
      write_file(out / "contour.csv", take(csv));
      const std::string text = take(side);
      write_file(out / "contour.json", text + "\n");
      print_json(text);
      return kExitClean;
    }

    if (*exper) {
      if (print_default) {
        char* text = nullptr;
        check(bdlab_experiment_default_config(&text));
        print_json(take(text));
        return kExitClean;
      }
      common.apply_seed(cfg);
      if (!common.out.empty() || !cfg.contains("output_dir")) {
        cfg["output_dir"] = out.string();
      }
      const std::string dir = cfg.at("output_dir").get<std::string>();
      char* report = nullptr;
      char* table = nullptr;
      check(bdlab_experiment_run(cfg.dump().c_str(), dir.c_str(), &report, &table));
      take(report);
      std::cout << take(table);
      return kExitClean;
    }
  } catch (const Failure& f) {
    std::cerr << "bdlab: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "bdlab: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
