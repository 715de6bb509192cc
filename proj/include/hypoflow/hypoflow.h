/*
 * Copyright 2026 The hypoflow Authors
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

#ifndef HYPOFLOW_H
#define HYPOFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HF_API __declspec(dllexport)
#else
#define HF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hf_status {
  HF_OK = 0,
  HF_ERR_INVALID_INPUT = 1,
  HF_ERR_DOMAIN = 2,
  HF_ERR_CFL = 3,
  HF_ERR_NON_FINITE = 4,
  HF_ERR_SCHEME = 5,
  HF_ERR_CAPACITY = 6,
  HF_ERR_CONFIG = 7,
  HF_ERR_IO = 8,
  HF_ERR_INTERNAL = 99
} hf_status;

typedef struct hf_config hf_config;
typedef struct hf_result hf_result;
typedef struct hf_model hf_model;

HF_API const char* hf_version(void);

/* Message of the last failing call on this thread ("" if none). */
HF_API const char* hf_last_error(void);
/* Offending config key of the last HF_ERR_CONFIG on this thread ("" if none). */
HF_API const char* hf_last_error_key(void);

/* 0 restores the hardware default. */
HF_API hf_status hf_set_threads(int n);

/* Strings returned through char** are owned by the caller. */
HF_API void hf_string_free(char* s);

/* ---- experiment configs */

HF_API hf_status hf_config_load(const char* path, hf_config** out);
HF_API hf_status hf_config_parse(const char* toml_text, hf_config** out);
HF_API void hf_config_free(hf_config* cfg);
HF_API hf_status hf_config_set_seed(hf_config* cfg, uint64_t seed);
HF_API hf_status hf_config_set_output_dir(hf_config* cfg, const char* dir);
HF_API hf_status hf_config_experiment(const hf_config* cfg, char** out);
HF_API hf_status hf_config_resolved_json(const hf_config* cfg, char** out);

/* ---- runs */

/* write_files = 0 computes without touching the file system. */
HF_API hf_status hf_run(const hf_config* cfg, int write_files, hf_result** out);
HF_API void hf_result_free(hf_result* res);
HF_API int hf_result_passed(const hf_result* res);
HF_API size_t hf_result_criteria_count(const hf_result* res);
/* Borrowed pointers, valid until hf_result_free. */
HF_API hf_status hf_result_criterion(const hf_result* res, size_t i, const char** name, int* passed,
                                     const char** detail);
HF_API hf_status hf_result_summary_json(const hf_result* res, char** out);
HF_API hf_status hf_result_csv(const hf_result* res, char** out);
HF_API size_t hf_result_artifact_count(const hf_result* res);
HF_API const char* hf_result_artifact(const hf_result* res, size_t i);

/* Closed-form reference values for a named model ("kinetic-ou"). */
HF_API hf_status hf_oracle_text(const char* name, char** out);

/* ---- linear models with H = Hv v + Hy y and B = Bv v + By y, i.e.
 * dy = H dt + sqrt(2 kappa) dW', dv = -B dt + sqrt(2) dW.
 * Blocks are row-major d x d. */

HF_API hf_status hf_model_create_linear(int d, double kappa, const double* h_v, const double* h_y,
                                        const double* b_v, const double* b_y, hf_model** out);
HF_API void hf_model_free(hf_model* model);
/* z has 2d entries; h and b receive d each. */
HF_API hf_status hf_model_drift(const hf_model* model, const double* z, double* h, double* b);
HF_API hf_status hf_model_spectral_abscissa(const hf_model* model, double* out);
/* gamma, ell_H, ell_B */
HF_API hf_status hf_model_constants(const hf_model* model, double* gamma, double* ell_h, double* ell_b);

/* ---- numerics */

/* Exact W1 between weighted point clouds (row-major points; NULL weights mean uniform). */
HF_API hf_status hf_wasserstein1(int dim, const double* x, const double* wx, size_t nx, const double* y,
                                 const double* wy, size_t ny, double* out);

/* Log-linear fit value ~ K exp(-omega t) over t in [t_min, t_max]. */
HF_API hf_status hf_fit_decay(const double* t, const double* value, size_t n, double t_min, double t_max,
                              double* k, double* omega, double* r2);

#ifdef __cplusplus
}
#endif

#endif /* HYPOFLOW_H */
