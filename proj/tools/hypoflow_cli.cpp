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

// Command-line front end. Talks to the library through the C API only.

#include "hypoflow/hypoflow.h"

#include <CLI11.hpp>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>

namespace {

constexpr int kExitPass = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitFailed = 2;
constexpr int kExitConfig = 64;

const char* kSchemas =
    "results.csv columns per experiment:\n"
    "  coupling-rate      time,mean_rho,q10_rho,q90_rho,mean_G,coalesced_frac,w1\n"
    "  oscillation-decay  time,seminorm,sup_grad_v,sup_grad_y\n"
    "  smoothing          time,sup_grad_v,sup_grad_y,combined,villani_sup,weighted_grad_ratio\n"
    "  lyapunov-check     radius,inf_ratio\n"
    "  tv-decay           time,tv_phi,mass_1,mass_2[,d1phi_lower_bound]\n"
    "  duality            zeta,n_v,n_y,dt,lhs,rhs,gap\n"
    "Exit codes: 0 pass, 2 criteria failed, 1 runtime error, 64 config error.\n"
    "HYPOFLOW_SEED overrides the seed in the config file.";

struct ConfigDeleter {
  void operator()(hf_config* c) const { hf_config_free(c); }
};
struct ResultDeleter {
  void operator()(hf_result* r) const { hf_result_free(r); }
};
using ConfigPtr = std::unique_ptr<hf_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<hf_result, ResultDeleter>;

std::string take(char* s) {
  std::string out = s ? s : "";
  hf_string_free(s);
  return out;
}

int report(hf_status st) {
  if (st == HF_ERR_CONFIG) {
    std::fprintf(stderr, "config error [%s]: %s\n", hf_last_error_key(), hf_last_error());
    return kExitConfig;
  }
  std::fprintf(stderr, "error: %s\n", hf_last_error());
  return kExitRuntime;
}

// Loads the config and applies HYPOFLOW_SEED; returns an exit code on failure.
int load(const std::string& path, ConfigPtr& out) {
  hf_config* raw = nullptr;
  hf_status st = hf_config_load(path.c_str(), &raw);
  if (st != HF_OK) return report(st);
  out.reset(raw);
  if (const char* env = std::getenv("HYPOFLOW_SEED"); env && *env) {
    char* end = nullptr;
    errno = 0;
    unsigned long long seed = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || *env == '-') {
      std::fprintf(stderr, "config error [seed]: HYPOFLOW_SEED='%s' is not a non-negative integer\n", env);
      return kExitConfig;
    }
    st = hf_config_set_seed(out.get(), seed);
    if (st != HF_OK) return report(st);
  }
  return -1;
}

int cmd_run(const std::string& path, bool dry_run, int threads, const std::string& out_dir) {
  ConfigPtr cfg;
  if (int rc = load(path, cfg); rc >= 0) return rc;
  if (!out_dir.empty()) {
    if (hf_status st = hf_config_set_output_dir(cfg.get(), out_dir.c_str()); st != HF_OK) return report(st);
  }
  if (dry_run) {
    char* json = nullptr;
    if (hf_status st = hf_config_resolved_json(cfg.get(), &json); st != HF_OK) return report(st);
    std::printf("%s\n", take(json).c_str());
    return kExitPass;
  }
  if (hf_status st = hf_set_threads(threads); st != HF_OK) return report(st);
  hf_result* raw = nullptr;
  if (hf_status st = hf_run(cfg.get(), 1, &raw); st != HF_OK) return report(st);
  ResultPtr res(raw);
  char* exp = nullptr;
  hf_config_experiment(cfg.get(), &exp);
  std::printf("experiment %s\n", take(exp).c_str());
  for (size_t i = 0; i < hf_result_criteria_count(res.get()); ++i) {
    const char* name = nullptr;
    const char* detail = nullptr;
    int passed = 0;
    hf_result_criterion(res.get(), i, &name, &passed, &detail);
    std::printf("  [%s] %s: %s\n", passed ? "PASS" : "FAIL", name, detail);
  }
  for (size_t i = 0; i < hf_result_artifact_count(res.get()); ++i) {
    std::printf("  wrote %s\n", hf_result_artifact(res.get(), i));
  }
  return hf_result_passed(res.get()) ? kExitPass : kExitFailed;
}

int cmd_validate(const std::string& path) {
  ConfigPtr cfg;
  if (int rc = load(path, cfg); rc >= 0) return rc;
  char* exp = nullptr;
  hf_config_experiment(cfg.get(), &exp);
  std::printf("ok: %s\n", take(exp).c_str());
  return kExitPass;
}

int cmd_oracle(const std::string& name) {
  char* text = nullptr;
  if (hf_status st = hf_oracle_text(name.c_str(), &text); st != HF_OK) return report(st);
  std::fputs(take(text).c_str(), stdout);
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypoflow: numerical experiments for degenerate kinetic diffusions"};
  app.footer(kSchemas);
  app.set_version_flag("--version", hf_version());
  app.require_subcommand(1);

  std::string config, out_dir, oracle_name;
  bool dry_run = false;
  int threads = 0;

  auto* run = app.add_subcommand("run", "Run one experiment and write its artifacts");
  run->add_option("--config", config, "Experiment file (TOML)")->required();
  run->add_flag("--dry-run", dry_run, "Print the resolved config and exit without running");
  run->add_option("--threads", threads, "Worker cap (0 = hardware parallelism)")->check(CLI::NonNegativeNumber);
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");

  auto* validate = app.add_subcommand("validate", "Check an experiment file against the schema");
  validate->add_option("--config", config, "Experiment file (TOML)")->required();

  auto* oracle = app.add_subcommand("oracle", "Print closed-form reference values");
  oracle->add_option("name", oracle_name, "Model name (kinetic-ou)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitConfig;
  }

  if (*run) return cmd_run(config, dry_run, threads, out_dir);
  if (*validate) return cmd_validate(config);
  return cmd_oracle(oracle_name);
}
