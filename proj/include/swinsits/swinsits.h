/*
 * Copyright 2026 The swinsits Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface of libswinsits.
 *
 * Every function returns a sits_status. On failure the calling thread's last
 * error message is set and stays valid until the next failing call on that
 * thread. Handles are opaque and owned by the caller; free them with the
 * matching *_free function (NULL is accepted).
 */

#ifndef SWINSITS_SWINSITS_H
#define SWINSITS_SWINSITS_H

#include <stddef.h>
#include <stdint.h>

#if defined(SWINSITS_BUILDING_LIBRARY)
#define SITS_API __attribute__((visibility("default")))
#else
#define SITS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sits_status {
  SITS_OK = 0,
  SITS_ERR_DIMENSION = 1,
  SITS_ERR_PARAMETER = 2,
  SITS_ERR_CONFIG = 3,
  SITS_ERR_FORMAT = 4,
  SITS_ERR_RANGE = 5,
  SITS_ERR_DEGENERATE = 6,
  SITS_ERR_GRAPH = 7,
  SITS_ERR_IO = 8,
  SITS_ERR_PALETTE = 9,
  SITS_ERR_UNSUPPORTED = 10,
  SITS_ERR_USAGE = 11,
  SITS_ERR_SUITE_FAILED = 12,
  SITS_ERR_INTERNAL = 13
} sits_status;

typedef struct sits_model sits_model;
typedef struct sits_tile sits_tile;

/* Receives one line of progress or report text (no trailing newline). */
typedef void (*sits_line_fn)(const char* line, void* user);

SITS_API const char* sits_version(void);
SITS_API const char* sits_status_name(sits_status status);
SITS_API const char* sits_last_error(void);

/* ---- datasets ---------------------------------------------------------- */

typedef struct sits_synth_options {
  int64_t tiles;
  int64_t classes;
  int64_t bands;
  int64_t timesteps; /* must be a positive multiple of 16 */
  int64_t height;
  int64_t width;
  uint64_t seed;
  double train_fraction;
  double val_fraction;
} sits_synth_options;

/* 10 tiles, 5 classes, 4 bands, 16 steps, 48x48, seed 0, 60/20/20 split. */
SITS_API void sits_synth_options_default(sits_synth_options* options);
SITS_API sits_status sits_synth(const sits_synth_options* options, const char* out_dir);

/* ---- tiles ------------------------------------------------------------- */

SITS_API sits_status sits_tile_load(const char* path, sits_tile** out);
SITS_API sits_status sits_tile_save(const sits_tile* tile, const char* path);
SITS_API void sits_tile_free(sits_tile* tile);
/* dims receives T, C, H, W, K. */
SITS_API sits_status sits_tile_dims(const sits_tile* tile, int64_t dims[5]);
SITS_API sits_status sits_tile_labels(const sits_tile* tile, uint8_t* labels, size_t count);

/* ---- models ------------------------------------------------------------ */

/* preset: "munich-like", "lombardia-like" or "tiny". */
SITS_API sits_status sits_model_create(const char* preset, uint64_t seed, sits_model** out);
SITS_API sits_status sits_model_load(const char* checkpoint_path, sits_model** out);
SITS_API sits_status sits_model_save(const sits_model* model, const char* checkpoint_path);
SITS_API void sits_model_free(sits_model* model);

/* shape receives C, T, H, W, K. */
SITS_API sits_status sits_model_shape(const sits_model* model, int64_t shape[5]);
SITS_API sits_status sits_model_parameter_count(const sits_model* model, int64_t* count);
/* Transformer blocks run by the encoder and the bottleneck extents (D, H, W). */
SITS_API sits_status sits_model_encoder_stats(const sits_model* model, int64_t* blocks,
                                              int64_t bottleneck[3]);

/* input: batch x C x T x H x W floats; logits: batch x K x H x W floats. */
SITS_API sits_status sits_model_forward(const sits_model* model, const float* input, int64_t batch,
                                        float* logits, size_t logits_count);
/* Per-pixel argmax for one tile (resampled in time when needed). */
SITS_API sits_status sits_model_predict(const sits_model* model, const sits_tile* tile,
                                        uint8_t* labels, size_t count);

/* ---- commands ---------------------------------------------------------- */

/* Parses the config, echoes the effective settings, checks the dataset and,
 * unless dry_run is nonzero, trains and writes train.log, final.ckpt and
 * best.ckpt into out_dir. Empty or NULL data_dir/out_dir fall back to the
 * data_dir/out_dir keys of the config. */
SITS_API sits_status sits_train(const char* config_path, const char* data_dir, const char* out_dir,
                                int dry_run, sits_line_fn on_line, void* user);

/* Table-style report for split "train", "val" or "test". report_path may be
 * NULL; oa and kappa may be NULL. threads < 1 means 1. */
SITS_API sits_status sits_evaluate(const char* checkpoint_path, const char* data_dir, const char* split,
                                   int threads, const char* report_path, sits_line_fn on_line,
                                   void* user, double* oa, double* kappa);

/* Writes the predicted class map. actual_path and diff_path are optional; a
 * diff needs the actual map. disagreements (optional) receives the number of
 * white pixels in the diff. */
SITS_API sits_status sits_predict(const char* checkpoint_path, const char* tile_path,
                                  const char* pred_path, const char* actual_path,
                                  const char* diff_path, int64_t* disagreements);

/* suite: "gradcheck", "windows", "metrics" or "all". Returns
 * SITS_ERR_SUITE_FAILED when any check fails. */
SITS_API sits_status sits_verify(const char* suite, sits_line_fn on_line, void* user, int* failed);

#ifdef __cplusplus
}
#endif

#endif /* SWINSITS_SWINSITS_H */
