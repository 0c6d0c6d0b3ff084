/* Copyright 2026 The MMIE Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the multimodal extraction library. Every function returns
 * an mmie_status; on failure mmie_last_error() describes the problem for the
 * calling thread. Strings returned through char** out-parameters are owned by
 * the caller and must be released with mmie_string_free().
 */

#ifndef MMIE_MMIE_H
#define MMIE_MMIE_H

#include <stddef.h>
#include <stdint.h>

#if defined(MMIE_BUILDING_LIBRARY)
#define MMIE_API __attribute__((visibility("default")))
#else
#define MMIE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mmie_status {
  MMIE_OK = 0,
  MMIE_ERR_INVALID_ARGUMENT = 1,
  MMIE_ERR_CONFIG = 2,
  MMIE_ERR_IO = 3,
  MMIE_ERR_PARSE = 4,
  MMIE_ERR_SHAPE = 5,
  MMIE_ERR_NUMERIC = 6,
  MMIE_ERR_VERIFICATION = 7,
  MMIE_ERR_INTERNAL = 8
} mmie_status;

typedef struct mmie_config mmie_config;
typedef struct mmie_corpus mmie_corpus;

/* Receives one plain-text log line per finished epoch. */
typedef void (*mmie_epoch_callback)(const char* line, void* user_data);

MMIE_API const char* mmie_version(void);
MMIE_API const char* mmie_status_name(mmie_status status);
/* Message for the most recent failure on this thread; "" if none. */
MMIE_API const char* mmie_last_error(void);
MMIE_API void mmie_string_free(char* s);

/* Flat key=value configuration. */
MMIE_API mmie_status mmie_config_new(mmie_config** out);
MMIE_API mmie_status mmie_config_load(const char* path, mmie_config** out);
MMIE_API mmie_status mmie_config_parse(const char* text, mmie_config** out);
MMIE_API mmie_status mmie_config_set(mmie_config* cfg, const char* key, const char* value);
/* Copies the value into *out; MMIE_ERR_CONFIG if the key is absent. */
MMIE_API mmie_status mmie_config_get(const mmie_config* cfg, const char* key, char** out);
MMIE_API void mmie_config_free(mmie_config* cfg);

/* Synthetic corpora (train/val/test splits). */
MMIE_API mmie_status mmie_corpus_generate(const mmie_config* cfg, mmie_corpus** out);
/* Reads <dir>/train.jsonl, <dir>/val.jsonl and <dir>/test.jsonl. */
MMIE_API mmie_status mmie_corpus_load(const char* dir, mmie_corpus** out);
MMIE_API mmie_status mmie_corpus_save(const mmie_corpus* corpus, const char* dir);
/* split is "train", "val" or "test". */
MMIE_API mmie_status mmie_corpus_size(const mmie_corpus* corpus, const char* split, size_t* out);
MMIE_API void mmie_corpus_free(mmie_corpus* corpus);

/* Trains per cfg, writes checkpoint, epoch log and report into out_dir.
 * *summary_json (optional) receives {"checkpoint", "report", "log", "metrics"}; "metrics" is the parsed report. */
MMIE_API mmie_status mmie_train(const mmie_config* cfg, const char* out_dir, mmie_epoch_callback on_epoch,
                                void* user_data, char** summary_json);

/* Evaluates a checkpoint on one corpus file. predictions_path may be NULL;
 * otherwise the corpus is written there with predicted labels. */
MMIE_API mmie_status mmie_evaluate(const char* checkpoint_path, const char* data_path, int batch_size,
                                   const char* predictions_path, char** report_json);

/* Scores a prediction file against a gold file (same record format, same ids).
 * num_labels is the entity-type count (NER) or relation count (RE); 0 infers
 * it from the gold labels. */
MMIE_API mmie_status mmie_score_files(const char* gold_path, const char* pred_path, int num_labels,
                                      char** report_json);

/* Runs one suite ("crf-oracle", "grad-check", "kl-mc", "attn-props" or "all").
 * Returns MMIE_ERR_VERIFICATION when a property fails; the report is still set. */
MMIE_API mmie_status mmie_verify(const char* suite, uint64_t seed, char** report_json);

/* Full model, without the semantic loss, and without AttnMixup. */
MMIE_API mmie_status mmie_ablate(const mmie_config* cfg, const char* out_dir, mmie_epoch_callback on_epoch,
                                 void* user_data, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* MMIE_MMIE_H */
