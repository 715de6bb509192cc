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

#include "hypoflow/measures.hpp"
#include "hypoflow/metric.hpp"
#include "hypoflow/model.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace hypoflow {

/// Two particles (v, y) and (v~, y~) of the coupled Langevin dynamics.
struct CoupledState {
  int d = 1;
  SmallVec v{};
  SmallVec y{};
  SmallVec v_tilde{};
  SmallVec y_tilde{};
  double time = 0.0;

  static CoupledState from_points(std::span<const double> z, std::span<const double> z_tilde,
                                  double time = 0.0);
  bool merged() const;
  /// rho(v - v~, y - y~).
  double rho(const RotatedMetric& metric) const;
  void first(std::span<double> z) const;
  void second(std::span<double> z) const;
};

struct CouplingPolicy {
  /// 0 = synchronous, 2 = reflection; values in between use the correlated
  /// construction C n + sqrt(2 tau - tau^2) e (e . n_perp).
  double tau = 2.0;
  /// |xi - xi~| at or below which the coupling is synchronous. Nonpositive
  /// means sqrt(dt).
  double switch_threshold = 0.0;
  /// Pairs with rho below this merge. Nonpositive means 1e-9 (1 + rho(0)).
  double merge_tolerance = 0.0;
  /// Pairs with rho above this are coupled synchronously.
  double far_radius = std::numeric_limits<double>::infinity();

  void validate() const;
};

/// One Euler-Maruyama step of both particles. noise_v, noise_y are N(0, dt)
/// draws; noise_perp (only read when 0 < tau < 2) is a further independent
/// N(0, dt) draw. `threshold` and `merge_tol` are the resolved values.
CoupledState step_coupled(const KineticModel& model, const RotatedMetric& metric,
                          const CouplingPolicy& policy, const CoupledState& state, double dt,
                          std::span<const double> noise_v, std::span<const double> noise_y,
                          std::span<const double> noise_perp, double threshold, double merge_tol,
                          long long step = -1);

/// Convenience overload resolving the defaults (threshold sqrt(dt),
/// merge tolerance 1e-9 (1 + rho(state))).
CoupledState step_coupled(const KineticModel& model, const RotatedMetric& metric,
                          const CouplingPolicy& policy, const CoupledState& state, double dt,
                          std::span<const double> noise_v, std::span<const double> noise_y);

struct EnsembleRun {
  long long n_pairs = 1000;
  double dt = 1e-3;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  /// Sorted times in [0, horizon]; empty means {horizon}.
  std::vector<double> record_times;
};

struct SemimetricOptions {
  double K = 1.0;
  double L = 1.0;
  PsiProfile psi = PsiProfile::exponential(1.0, 1.0);
  /// Weight function of the semimetric; null means phi = 1.
  const TestFunction* phi = nullptr;
};

struct EnsembleRecord {
  double time = 0.0;
  double mean_rho = 0.0;
  double q10_rho = 0.0;
  double q90_rho = 0.0;
  double mean_G = 0.0;
  double coalesced_frac = 0.0;
  double w1 = 0.0;
  /// Marginal means of each particle and their standard errors.
  Vector mean_first;
  Vector mean_second;
  Vector se_first;
  Vector se_second;
  Matrix cov_first;
};

struct EnsembleOutput {
  std::vector<EnsembleRecord> records;
  /// Pairs entering the W1 estimate (the first ones, capped by support).
  std::size_t w1_pairs = 0;
  double switch_threshold = 0.0;
  long long steps = 0;
};

/// Runs n_pairs independent coupled pairs. Pair i draws its initial points
/// from sampler_1 and sampler_2 with key (seed, i) and its noise from the
/// stream (seed, i), so the output does not depend on the thread count.
EnsembleOutput run_ensemble(const KineticModel& model, const RotatedMetric& metric,
                            const CouplingPolicy& policy, const MeasureSampler& sampler_1,
                            const MeasureSampler& sampler_2, const EnsembleRun& run,
                            const SemimetricOptions& semimetric = {},
                            std::size_t support_cap = kDefaultSupportCap);

struct DecayFit {
  double K = 0.0;
  /// Positive means decay.
  double omega = 0.0;
  double r2 = 0.0;
  int points = 0;
};

/// Least squares of log(value) against t over points with t in
/// [t_min, t_max]. Needs at least 4 points in the window.
DecayFit fit_decay(const std::vector<std::pair<double, double>>& series,
                   double t_min = -std::numeric_limits<double>::infinity(),
                   double t_max = std::numeric_limits<double>::infinity());

/// Linear-interpolated quantile (q in [0,1]) of unsorted data.
double quantile(std::vector<double> data, double q);

}  // namespace hypoflow
