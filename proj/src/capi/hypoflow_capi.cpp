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

#include "hypoflow/hypoflow.h"

#include "hypoflow/experiments.hpp"
#include "hypoflow/oracles.hpp"
#include "hypoflow/parallel.hpp"

#include <cstdlib>
#include <cstring>
#include <new>

struct hf_config {
  hypoflow::ExperimentConfig cfg;
};

struct hf_result {
  hypoflow::ExperimentResult res;
};

struct hf_model {
  hypoflow::KineticModel model;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_key;

template <class F>
hf_status guarded(F&& body) {
  g_error.clear();
  g_error_key.clear();
  try {
    body();
    return HF_OK;
  } catch (const hypoflow::ConfigError& e) {
    g_error = e.what();
    g_error_key = e.key();
    return HF_ERR_CONFIG;
  } catch (const hypoflow::Error& e) {
    g_error = e.what();
    return static_cast<hf_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return HF_ERR_CAPACITY;
  } catch (const std::exception& e) {
    g_error = e.what();
    return HF_ERR_INTERNAL;
  } catch (...) {
    g_error = "unknown exception";
    return HF_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

void require(const void* p, const char* what) {
  if (!p) throw hypoflow::InvalidInput(std::string(what) + " must not be null");
}

}  // namespace

extern "C" {

const char* hf_version(void) { return hypoflow::kVersion; }
const char* hf_last_error(void) { return g_error.c_str(); }
const char* hf_last_error_key(void) { return g_error_key.c_str(); }

hf_status hf_set_threads(int n) {
  return guarded([&] {
    if (n < 0) throw hypoflow::InvalidInput("thread count must be >= 0");
    hypoflow::set_thread_count(n);
  });
}

void hf_string_free(char* s) { std::free(s); }

hf_status hf_config_load(const char* path, hf_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new hf_config{hypoflow::ExperimentConfig::load(path)};
  });
}

hf_status hf_config_parse(const char* toml_text, hf_config** out) {
  return guarded([&] {
    require(toml_text, "toml_text");
    require(out, "out");
    *out = nullptr;
    *out = new hf_config{hypoflow::ExperimentConfig::from_toml(toml_text)};
  });
}

void hf_config_free(hf_config* cfg) { delete cfg; }

hf_status hf_config_set_seed(hf_config* cfg, uint64_t seed) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->cfg.set_seed(seed);
  });
}

hf_status hf_config_set_output_dir(hf_config* cfg, const char* dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(dir, "dir");
    cfg->cfg.set_output_dir(dir);
  });
}

hf_status hf_config_experiment(const hf_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup_string(cfg->cfg.experiment);
  });
}

hf_status hf_config_resolved_json(const hf_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup_string(cfg->cfg.resolved.dump(2));
  });
}

hf_status hf_run(const hf_config* cfg, int write_files, hf_result** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = nullptr;
    auto res = write_files ? hypoflow::run_experiment(cfg->cfg) : hypoflow::compute_experiment(cfg->cfg);
    *out = new hf_result{std::move(res)};
  });
}

void hf_result_free(hf_result* res) { delete res; }

int hf_result_passed(const hf_result* res) { return res && res->res.passed() ? 1 : 0; }

size_t hf_result_criteria_count(const hf_result* res) { return res ? res->res.criteria.size() : 0; }

hf_status hf_result_criterion(const hf_result* res, size_t i, const char** name, int* passed, const char** detail) {
  return guarded([&] {
    require(res, "res");
    if (i >= res->res.criteria.size()) throw hypoflow::InvalidInput("criterion index out of range");
    const auto& c = res->res.criteria[i];
    if (name) *name = c.name.c_str();
    if (passed) *passed = c.passed ? 1 : 0;
    if (detail) *detail = c.detail.c_str();
  });
}

hf_status hf_result_summary_json(const hf_result* res, char** out) {
  return guarded([&] {
    require(res, "res");
    require(out, "out");
    *out = dup_string(res->res.summary.dump(2));
  });
}

hf_status hf_result_csv(const hf_result* res, char** out) {
  return guarded([&] {
    require(res, "res");
    require(out, "out");
    *out = dup_string(res->res.table.to_csv());
  });
}

size_t hf_result_artifact_count(const hf_result* res) { return res ? res->res.artifacts.size() : 0; }

const char* hf_result_artifact(const hf_result* res, size_t i) {
  if (!res || i >= res->res.artifacts.size()) return nullptr;
  return res->res.artifacts[i].c_str();
}

hf_status hf_oracle_text(const char* name, char** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    *out = dup_string(hypoflow::oracle_text(name));
  });
}

hf_status hf_model_create_linear(int d, double kappa, const double* h_v, const double* h_y, const double* b_v,
                                 const double* b_y, hf_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    if (d < 1 || d > 2) throw hypoflow::InvalidInput("d must be 1 or 2");
    auto block = [d](const double* p) {
      hypoflow::Matrix m = hypoflow::Matrix::Zero(d, d);
      if (p) {
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c) m(r, c) = p[r * d + c];
      }
      return m;
    };
    auto model = hypoflow::KineticModel::create(d, kappa, hypoflow::DriftSpec::linear(block(h_v), block(h_y)),
                                                hypoflow::DriftSpec::linear(block(b_v), block(b_y)));
    *out = new hf_model{std::move(model)};
  });
}

void hf_model_free(hf_model* model) { delete model; }

hf_status hf_model_drift(const hf_model* model, const double* z, double* h, double* b) {
  return guarded([&] {
    require(model, "model");
    require(z, "z");
    require(h, "h");
    require(b, "b");
    const std::size_t d = model->model.d();
    model->model.drifts({z, 2 * d}, {h, d}, {b, d});
  });
}

hf_status hf_model_spectral_abscissa(const hf_model* model, double* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = hypoflow::spectral_abscissa(hypoflow::LinearModelMatrices::from_model(model->model));
  });
}

hf_status hf_model_constants(const hf_model* model, double* gamma, double* ell_h, double* ell_b) {
  return guarded([&] {
    require(model, "model");
    if (gamma) *gamma = model->model.gamma();
    if (ell_h) *ell_h = model->model.ell_H();
    if (ell_b) *ell_b = model->model.ell_B();
  });
}

hf_status hf_wasserstein1(int dim, const double* x, const double* wx, size_t nx, const double* y, const double* wy,
                          size_t ny, double* out) {
  return guarded([&] {
    require(x, "x");
    require(y, "y");
    require(out, "out");
    if (dim < 1 || nx == 0 || ny == 0) throw hypoflow::InvalidInput("wasserstein1: empty input");
    auto cloud = [dim](const double* p, const double* w, size_t n) {
      std::vector<double> pts(p, p + n * dim);
      if (!w) return hypoflow::EmpiricalMeasure::uniform(dim, std::move(pts));
      return hypoflow::EmpiricalMeasure::create(dim, std::move(pts), std::vector<double>(w, w + n));
    };
    *out = hypoflow::wasserstein1_exact(cloud(x, wx, nx), cloud(y, wy, ny));
  });
}

hf_status hf_fit_decay(const double* t, const double* value, size_t n, double t_min, double t_max, double* k,
                       double* omega, double* r2) {
  return guarded([&] {
    require(t, "t");
    require(value, "value");
    std::vector<std::pair<double, double>> series;
    for (size_t i = 0; i < n; ++i) series.emplace_back(t[i], value[i]);
    auto fit = hypoflow::fit_decay(series, t_min, t_max);
    if (k) *k = fit.K;
    if (omega) *omega = fit.omega;
    if (r2) *r2 = fit.r2;
  });
}

}  // extern "C"
