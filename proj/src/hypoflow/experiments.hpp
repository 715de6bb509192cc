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

#pragma once

#include "hypoflow/config.hpp"
#include "hypoflow/coupling.hpp"
#include "hypoflow/field.hpp"
#include "hypoflow/lyapunov.hpp"
#include "hypoflow/measures.hpp"
#include "hypoflow/metric.hpp"
#include "hypoflow/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hypoflow {

inline constexpr const char* kVersion = "1.0.0";

struct Criterion {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Rows of an RFC-4180 table; numbers are preformatted with 17 significant digits.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  std::string to_csv() const;
};

std::string format_number(double x);

struct PlotSpec {
  std::string title;
  std::string x_label = "t";
  std::string y_label;
  std::vector<std::pair<double, double>> series;
  std::optional<DecayFit> fit;
};

struct ExperimentResult {
  std::string experiment;
  std::string claim;
  std::vector<Criterion> criteria;
  Json summary = Json::object();
  Table table;
  std::optional<PlotSpec> plot;
  std::vector<std::string> artifacts;

  bool passed() const;
};

// Builders shared by the experiments, the C API and the tests.
KineticModel build_model(const ExperimentConfig& cfg);
RotatedMetric build_metric(const ExperimentConfig& cfg, const KineticModel& model);
PsiProfile build_psi(const ExperimentConfig& cfg);
PotentialSpec build_potential(const Json& spec);
MeasureSampler build_sampler(const Json& spec);
Grid build_grid(const ExperimentConfig& cfg, int refine = 1);
/// Density of a sampler spec on the grid, normalized to unit mass. Diracs are
/// deposited multilinearly onto the surrounding cell centres.
Field density_on_grid(const Json& spec, const Grid& grid);
/// Named initial data: tanh_sum, tanh_v, clipped_sign_v, sign_v, v, constant,
/// and the test functions one, y.
Field named_field(const std::string& name, const Grid& grid, double width = 0.1);

/// Runs the experiment without touching the file system.
ExperimentResult compute_experiment(const ExperimentConfig& cfg);

/// compute_experiment plus results.csv, summary.json, plot.svg and
/// manifest.json under cfg.output_dir().
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Self-contained SVG of a decay curve; log scale when every value is positive,
/// otherwise linear with a warning. Output is a pure function of the input.
std::string render_plot(const PlotSpec& plot);
void emit_plot(const PlotSpec& plot, const std::string& path);

/// Closed-form reference values for a named model ("kinetic-ou").
std::string oracle_text(const std::string& name);

}  // namespace hypoflow
