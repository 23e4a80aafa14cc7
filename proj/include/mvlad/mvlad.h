// Copyright 2026 The mvlad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MVLAD_MVLAD_H_
#define MVLAD_MVLAD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(MVLAD_BUILDING_LIBRARY)
#define MVLAD_API __attribute__((visibility("default")))
#else
#define MVLAD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mvlad_status {
  MVLAD_OK = 0,
  MVLAD_INVALID_ARGUMENT = 1,
  MVLAD_VALIDATION = 2,
  MVLAD_PARSE = 3,
  MVLAD_FORMAT = 4,
  MVLAD_INTEGRITY = 5,
  MVLAD_IO = 6,
  MVLAD_TRAINING = 7,
  MVLAD_USAGE = 8,
  MVLAD_INTERNAL = 9
} mvlad_status;

typedef struct mvlad_config mvlad_config;
typedef struct mvlad_dataset mvlad_dataset;
typedef struct mvlad_codebook mvlad_codebook;
typedef struct mvlad_embedding mvlad_embedding;
typedef struct mvlad_model mvlad_model;

/* Planning metrics. Reasoning fields are NaN when not measured. */
typedef struct mvlad_report {
  double l2_1s;
  double l2_2s;
  double l2_3s;
  double l2_avg;
  double failure_rate;
  double steps_to_action_ready;
  double wall_ms_per_decode;
  double token_accuracy;
  double label_match;
  uint64_t decodes;
} mvlad_report;

typedef struct mvlad_latency {
  uint64_t priority_decodes;
  double priority_mean_steps;
  double priority_median_steps;
  double priority_mean_ms;
  uint64_t global_decodes;
  double global_mean_steps;
  double global_median_steps;
  double global_mean_ms;
  double step_ratio;
  double ms_ratio;
} mvlad_latency;

/* Message for the last failed call on this thread; "" after a success. */
MVLAD_API const char* mvlad_last_error(void);
MVLAD_API const char* mvlad_status_name(mvlad_status status);
MVLAD_API const char* mvlad_version(void);

/* Settings. Unknown keys are rejected with MVLAD_USAGE. */
MVLAD_API mvlad_status mvlad_config_create(mvlad_config** out);
MVLAD_API mvlad_status mvlad_config_load(const char* path, mvlad_config** out);
MVLAD_API mvlad_status mvlad_config_set(mvlad_config* config, const char* key, const char* value);
MVLAD_API void mvlad_config_free(mvlad_config* config);

/* Datasets (JSONL on disk). */
MVLAD_API mvlad_status mvlad_dataset_generate(const mvlad_config* config, uint64_t n, uint64_t seed,
                                              mvlad_dataset** out);
MVLAD_API mvlad_status mvlad_dataset_load(const char* path, mvlad_dataset** out);
MVLAD_API mvlad_status mvlad_dataset_save(const mvlad_dataset* dataset, const char* path);
MVLAD_API mvlad_status mvlad_dataset_split(const mvlad_dataset* dataset, const mvlad_config* config, uint64_t seed,
                                           mvlad_dataset** train, mvlad_dataset** val, mvlad_dataset** test);
MVLAD_API size_t mvlad_dataset_size(const mvlad_dataset* dataset);
/* Writes x0 y0 x1 y1 ... into `xy` (capacity in doubles); `horizon` gets the
 * waypoint count. */
MVLAD_API mvlad_status mvlad_dataset_trajectory(const mvlad_dataset* dataset, size_t index, double* xy,
                                                size_t capacity, size_t* horizon);
MVLAD_API void mvlad_dataset_free(mvlad_dataset* dataset);

/* Action codebook. */
MVLAD_API mvlad_status mvlad_codebook_fit(const mvlad_dataset* dataset, const mvlad_config* config, uint64_t seed,
                                          mvlad_codebook** out);
MVLAD_API mvlad_status mvlad_codebook_load(const char* path, mvlad_codebook** out);
MVLAD_API mvlad_status mvlad_codebook_save(const mvlad_codebook* codebook, const char* path);
MVLAD_API size_t mvlad_codebook_size(const mvlad_codebook* codebook);
MVLAD_API mvlad_status mvlad_codebook_quantize(const mvlad_codebook* codebook, double x, double y, size_t* index);
MVLAD_API mvlad_status mvlad_codebook_dequantize(const mvlad_codebook* codebook, size_t index, double* x, double* y);
/* L2 between each trajectory and its quantized copy: 1 s, 2 s, 3 s, average. */
MVLAD_API mvlad_status mvlad_codebook_floor(const mvlad_codebook* codebook, const mvlad_dataset* dataset,
                                            double out[4]);
MVLAD_API void mvlad_codebook_free(mvlad_codebook* codebook);

/* Action-token embeddings. */
MVLAD_API mvlad_status mvlad_embedding_train(const mvlad_codebook* codebook, const mvlad_dataset* dataset,
                                             const mvlad_config* config, uint64_t seed, mvlad_embedding** out);
MVLAD_API mvlad_status mvlad_embedding_load(const char* path, mvlad_embedding** out);
MVLAD_API mvlad_status mvlad_embedding_save(const mvlad_embedding* embedding, const char* path);
MVLAD_API mvlad_status mvlad_embedding_save_log(const mvlad_embedding* embedding, const char* path);
MVLAD_API mvlad_status mvlad_embedding_alignment(const mvlad_embedding* embedding, const mvlad_codebook* codebook,
                                                 double* score);
MVLAD_API void mvlad_embedding_free(mvlad_embedding* embedding);

/* Predictor and training state. The model keeps copies of the codebook and
 * vocabulary it was built with. */
MVLAD_API mvlad_status mvlad_model_create(const mvlad_codebook* codebook, const mvlad_embedding* embedding,
                                          const mvlad_config* config, uint64_t seed, mvlad_model** out);
/* Runs the configured epochs of stage 1 or 2. */
MVLAD_API mvlad_status mvlad_model_train_stage(mvlad_model* model, const mvlad_dataset* train,
                                               const mvlad_config* config, int stage);
MVLAD_API mvlad_status mvlad_model_save(const mvlad_model* model, const char* path);
/* Fails with MVLAD_INTEGRITY when the codebook or embedding differs from the
 * ones the checkpoint was trained with. `embedding` may be NULL. */
MVLAD_API mvlad_status mvlad_model_load(const char* path, const mvlad_codebook* codebook,
                                        const mvlad_embedding* embedding, mvlad_model** out);
MVLAD_API mvlad_status mvlad_model_save_log(const mvlad_model* model, const char* path);
MVLAD_API int mvlad_model_stage(const mvlad_model* model);
/* Decodes every sample with the configured policy. Trace and prediction
 * paths may be NULL. */
MVLAD_API mvlad_status mvlad_model_decode(const mvlad_model* model, const mvlad_dataset* dataset,
                                          const mvlad_config* config, const char* trace_path,
                                          const char* predictions_path, mvlad_report* report);
MVLAD_API void mvlad_model_free(mvlad_model* model);

MVLAD_API mvlad_status mvlad_latency_from_traces(const char* priority_trace_path, const char* global_trace_path,
                                                 mvlad_latency* out);
MVLAD_API mvlad_status mvlad_latency_write_csv(const mvlad_latency* latency, const char* path);

/* Writes `count` reports as CSV rows prefixed by a label column. */
MVLAD_API mvlad_status mvlad_report_write_csv(const mvlad_report* reports, const char* const* labels, size_t count,
                                              const char* path);
/* Human-readable table for one report; the string lives until the next call
 * on this thread. */
MVLAD_API const char* mvlad_report_table(const mvlad_report* report);

/* Runs an ablation study ("vocab", "embedding", "representation", "all")
 * and writes one CSV row per configuration. */
MVLAD_API mvlad_status mvlad_ablate(const mvlad_config* config, const char* study, uint64_t seed,
                                    const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif  /* MVLAD_MVLAD_H_ */
