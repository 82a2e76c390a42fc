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

/* C interface to the bdlab backdoor laboratory.
 *
 * Every function returns a bdlab_status. On failure the message is available
 * from bdlab_last_error() on the same thread until the next call. Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with bdlab_string_free. Configuration and results travel as JSON
 * text; missing keys take their defaults.
 */
#ifndef BDLAB_BDLAB_H_
#define BDLAB_BDLAB_H_

#include <stddef.h>

#if defined(_WIN32)
#define BDLAB_API __declspec(dllexport)
#else
#define BDLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bdlab_status {
  BDLAB_OK = 0,
  BDLAB_ERR_INVALID_ARGUMENT = 1,
  BDLAB_ERR_IO = 2,
  BDLAB_ERR_PARSE = 3,
  BDLAB_ERR_VERSION = 4,
  BDLAB_ERR_SHAPE = 5,
  BDLAB_ERR_CORRUPT = 6,
  BDLAB_ERR_PRECONDITION = 7,
  BDLAB_ERR_INTERNAL = 8
} bdlab_status;

/* Vocabulary plus train/dev/test splits. */
typedef struct bdlab_corpus bdlab_corpus;
/* Model config, parameters and metadata. */
typedef struct bdlab_model bdlab_model;
/* Trained meta classifier. */
typedef struct bdlab_forest bdlab_forest;

BDLAB_API const char* bdlab_version(void);
BDLAB_API const char* bdlab_last_error(void);
BDLAB_API const char* bdlab_status_name(bdlab_status status);
BDLAB_API void bdlab_string_free(char* s);

/* 0 selects hardware concurrency. Results never depend on this. */
BDLAB_API bdlab_status bdlab_set_num_threads(size_t threads);

/* --- corpus ------------------------------------------------------------ */

/* {"n": 2000, "vocab_size": 64, "seed": 7, "split_seed": 7} */
BDLAB_API bdlab_status bdlab_corpus_generate(const char* config_json, bdlab_corpus** out);
/* One JSONL file of {"text", "label"} lines, split with "split_seed";
 * config may also set "max_len". */
BDLAB_API bdlab_status bdlab_corpus_load_jsonl(const char* path, const char* config_json,
                                               bdlab_corpus** out);
/* Directory written by bdlab_corpus_save_dir. */
BDLAB_API bdlab_status bdlab_corpus_load_dir(const char* dir, bdlab_corpus** out);
/* Writes train.jsonl, dev.jsonl, test.jsonl and vocab.json. */
BDLAB_API bdlab_status bdlab_corpus_save_dir(const bdlab_corpus* corpus, const char* dir);
/* Split sizes, label counts and vocabulary size. */
BDLAB_API bdlab_status bdlab_corpus_info(const bdlab_corpus* corpus, char** info_json);
/* Poisons the train split. config: {"rate", "trigger": {...}, "seed",
 * "max_len"}. The result holds the poisoned train split and the untouched
 * dev/test splits; poison_json receives the sorted poisoned indices. */
BDLAB_API bdlab_status bdlab_corpus_poison(const bdlab_corpus* corpus, const char* config_json,
                                           bdlab_corpus** out, char** poison_json);
BDLAB_API void bdlab_corpus_free(bdlab_corpus* corpus);

/* --- models ------------------------------------------------------------ */

/* Fresh random parameters. config: {"embed_dim", "hidden", "max_len",
 * "seed"}; the vocabulary comes from the corpus. */
BDLAB_API bdlab_status bdlab_model_init(const bdlab_corpus* corpus, const char* config_json,
                                        bdlab_model** out);
/* config: {"regime", "trigger": {...}, "seed", "model": {...},
 * "train": {...}}. report_json receives the training report. */
BDLAB_API bdlab_status bdlab_train(const bdlab_corpus* corpus, const char* config_json,
                                   bdlab_model** out, char** report_json);
BDLAB_API bdlab_status bdlab_model_save(const bdlab_model* model, const char* path);
BDLAB_API bdlab_status bdlab_model_load(const char* path, bdlab_model** out);
/* Config and metadata of the model. */
BDLAB_API bdlab_status bdlab_model_info(const bdlab_model* model, char** info_json);
/* The 25 weight-statistic features as a JSON array. */
BDLAB_API bdlab_status bdlab_model_features(const bdlab_model* model, char** features_json);
/* Clean accuracy on a split and, when a trigger is given or recorded in the
 * model metadata, the attack success rate. config: {"split": "test",
 * "trigger": {...}, "seed"}. */
BDLAB_API bdlab_status bdlab_eval(const bdlab_model* model, const bdlab_corpus* corpus,
                                  const char* config_json, char** result_json);
BDLAB_API void bdlab_model_free(bdlab_model* model);

/* --- detection --------------------------------------------------------- */

/* Trigger inversion on the dev split. config: {"seed", "inversion": {...}}.
 * *backdoored is set to 0 or 1. */
BDLAB_API bdlab_status bdlab_detect_inversion(const bdlab_model* model,
                                              const bdlab_corpus* corpus,
                                              const char* config_json, char** verdict_json,
                                              int* backdoored);
/* Loss at a known trigger on the batch the detector samples for the same
 * seed. config: {"seed", "dev_sample", "trigger": {...}}; the trigger
 * defaults to the one recorded in the model metadata. */
BDLAB_API bdlab_status bdlab_ground_truth_loss(const bdlab_model* model,
                                               const bdlab_corpus* corpus,
                                               const char* config_json, double* loss);

/* Trains the model zoo and returns its feature CSV. config: {"n_models",
 * "seed", "train": {...}, "model": {...}, ...}. */
BDLAB_API bdlab_status bdlab_zoo_build(const bdlab_corpus* corpus, const char* config_json,
                                       char** zoo_csv);
/* Fits a forest on the train rows of a zoo CSV. config: {"preset": "hsol" |
 * "sst2", "n_trees", "max_depth", "seed", ...}. summary_json reports the
 * validation detection accuracy. */
BDLAB_API bdlab_status bdlab_forest_train(const char* zoo_csv, const char* config_json,
                                          bdlab_forest** out, char** summary_json);
BDLAB_API bdlab_status bdlab_forest_save(const bdlab_forest* forest, const char* path);
BDLAB_API bdlab_status bdlab_forest_load(const char* path, bdlab_forest** out);
BDLAB_API bdlab_status bdlab_forest_to_json(const bdlab_forest* forest, char** forest_json);
BDLAB_API bdlab_status bdlab_detect_meta(const bdlab_forest* forest, const bdlab_model* model,
                                         char** verdict_json, int* backdoored);
BDLAB_API void bdlab_forest_free(bdlab_forest* forest);

/* --- analysis ---------------------------------------------------------- */

/* Loss contour around a trigger. config: {"trigger": {...}, "alpha_max",
 * "resolution", "dev_sample", "seed"}. */
BDLAB_API bdlab_status bdlab_landscape(const bdlab_model* model, const bdlab_corpus* corpus,
                                       const char* config_json, char** csv,
                                       char** sidecar_json);

/* Full experiment matrix. Writes report.json, table.txt, zoo.csv,
 * forest.json and the contour files into out_dir when it is non-NULL.
 * Either out-parameter may be NULL. */
BDLAB_API bdlab_status bdlab_experiment_run(const char* config_json, const char* out_dir,
                                            char** report_json, char** table);
/* The default experiment config as JSON. */
BDLAB_API bdlab_status bdlab_experiment_default_config(char** config_json);

#ifdef __cplusplus
}
#endif

#endif /* BDLAB_BDLAB_H_ */
