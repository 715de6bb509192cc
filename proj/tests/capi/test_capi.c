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


/* Exercises the public C interface from C. */

#include "hypoflow/hypoflow.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expectation failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

static const char* kConfig =
    "experiment = \"lyapunov-check\"\n"
    "seed = 4\n"
    "[model]\n"
    "d = 1\n"
    "kappa = 0.0\n"
    "H = { kind = \"linear\", v = [[1.0]], y = [[0.0]] }\n"
    "B = { kind = \"gradient_plus_linear\", v = [[1.0]], y = [[0.0]], potential = { kind = \"quadratic\", "
    "alpha = 1.0, beta = 1.0, c0 = 1.0, c1 = 0.0 } }\n"
    "[lyapunov]\n"
    "samples = 1000\n";

static void test_errors(void) {
  hf_config* cfg = NULL;
  EXPECT(hf_config_load(NULL, &cfg) == HF_ERR_INVALID_INPUT);
  EXPECT(strstr(hf_last_error(), "path") != NULL);
  EXPECT(hf_config_load("/nonexistent/file.toml", &cfg) == HF_ERR_IO);
  EXPECT(cfg == NULL);
  EXPECT(hf_config_parse("experiment = \"duality\"\n[model]\nkappa = 0.0\n", &cfg) == HF_ERR_CONFIG);
  EXPECT(strlen(hf_last_error_key()) > 0);
  EXPECT(hf_set_threads(-1) == HF_ERR_INVALID_INPUT);
  EXPECT(hf_result_passed(NULL) == 0);
  EXPECT(hf_result_artifact(NULL, 0) == NULL);
}

static void test_run(void) {
  hf_config* cfg = NULL;
  EXPECT(hf_config_parse(kConfig, &cfg) == HF_OK);
  if (!cfg) return;
  char* name = NULL;
  EXPECT(hf_config_experiment(cfg, &name) == HF_OK);
  EXPECT(name && strcmp(name, "lyapunov-check") == 0);
  hf_string_free(name);
  EXPECT(hf_config_set_seed(cfg, 11) == HF_OK);
  char* json = NULL;
  EXPECT(hf_config_resolved_json(cfg, &json) == HF_OK);
  EXPECT(json && strstr(json, "\"seed\": 11") != NULL);
  hf_string_free(json);

  hf_result* res = NULL;
  EXPECT(hf_run(cfg, 0, &res) == HF_OK);
  if (res) {
    EXPECT(hf_result_passed(res) == 1);
    EXPECT(hf_result_criteria_count(res) >= 4);
    const char* cname = NULL;
    const char* detail = NULL;
    int passed = -1;
    EXPECT(hf_result_criterion(res, 0, &cname, &passed, &detail) == HF_OK);
    EXPECT(cname && strlen(cname) > 0 && passed == 1 && detail);
    EXPECT(hf_result_criterion(res, 1000, &cname, &passed, &detail) == HF_ERR_INVALID_INPUT);
    char* csv = NULL;
    EXPECT(hf_result_csv(res, &csv) == HF_OK);
    EXPECT(csv && strncmp(csv, "radius,inf_ratio\r\n", 18) == 0);
    hf_string_free(csv);
    char* summary = NULL;
    EXPECT(hf_result_summary_json(res, &summary) == HF_OK);
    EXPECT(summary && strstr(summary, "\"claim\"") != NULL);
    hf_string_free(summary);
    EXPECT(hf_result_artifact_count(res) == 0);
    hf_result_free(res);
  }
  hf_config_free(cfg);
}

static void test_model(void) {
  const double one = 1.0, zero = 0.0;
  hf_model* m = NULL;
  EXPECT(hf_model_create_linear(1, 0.0, &one, &zero, &one, &one, &m) == HF_OK);
  if (!m) return;
  double a = 0.0;
  EXPECT(hf_model_spectral_abscissa(m, &a) == HF_OK);
  EXPECT(fabs(a + 0.5) < 1e-12);
  double g = 0, lh = 0, lb = 0;
  EXPECT(hf_model_constants(m, &g, &lh, &lb) == HF_OK);
  EXPECT(g == 1.0 && lh == 1.0 && lb == 1.0);
  double z[2] = {2.0, 3.0}, h = 0, b = 0;
  EXPECT(hf_model_drift(m, z, &h, &b) == HF_OK);
  EXPECT(h == 2.0 && b == 5.0);
  hf_model_free(m);
  EXPECT(hf_model_create_linear(3, 0.0, &one, &zero, &one, &one, &m) == HF_ERR_INVALID_INPUT);
}

static void test_numerics(void) {
  const double x[3] = {0.0, 1.0, 2.0}, y[3] = {0.5, 1.5, 2.5};
  double w = 0.0;
  EXPECT(hf_wasserstein1(1, x, NULL, 3, y, NULL, 3, &w) == HF_OK);
  EXPECT(fabs(w - 0.5) < 1e-14);
  const double wx[3] = {1.0, 1.0, 2.0};
  EXPECT(hf_wasserstein1(1, x, wx, 3, x, wx, 3, &w) == HF_OK);
  EXPECT(fabs(w) < 1e-14);
  EXPECT(hf_wasserstein1(1, x, NULL, 0, y, NULL, 3, &w) == HF_ERR_INVALID_INPUT);

  double t[5], v[5], k = 0, om = 0, r2 = 0;
  for (int i = 0; i < 5; ++i) {
    t[i] = i;
    v[i] = 3.0 * exp(-0.7 * i);
  }
  EXPECT(hf_fit_decay(t, v, 5, -INFINITY, INFINITY, &k, &om, &r2) == HF_OK);
  EXPECT(fabs(k - 3.0) < 1e-10 && fabs(om - 0.7) < 1e-10 && fabs(r2 - 1.0) < 1e-10);
  EXPECT(hf_fit_decay(t, v, 3, -INFINITY, INFINITY, &k, &om, &r2) == HF_ERR_INVALID_INPUT);

  char* text = NULL;
  EXPECT(hf_oracle_text("kinetic-ou", &text) == HF_OK);
  EXPECT(text && strlen(text) > 0);
  hf_string_free(text);
  EXPECT(hf_oracle_text("other", &text) != HF_OK);
  EXPECT(strlen(hf_version()) > 0);
}

int main(void) {
  test_errors();
  test_run();
  test_model();
  test_numerics();
  if (failures) {
    fprintf(stderr, "%d C API expectation(s) failed\n", failures);
    return 1;
  }
  printf("C API: all expectations met\n");
  return 0;
}
