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

#include "hypoflow/common.hpp"
#include "hypoflow/model.hpp"

#include <string>

namespace hypoflow {

/// Coupling norm rho(dv, dy) = |dv + mu dy| + lambda |dy|, optionally with each
/// Euclidean norm replaced by |x|_eps = sqrt(eps^2 + |x|^2) - eps.
struct RotatedMetric {
  double mu = 2.0;
  double lambda = 20.0;
  double eps_reg = 0.0;

  /// Validates lambda >= 1 + mu, mu > 0, eps_reg >= 0.
  static RotatedMetric create(double mu, double lambda, double eps_reg = 0.0);

  double rho(std::span<const double> dv, std::span<const double> dy, bool regularized = false) const;
};

/// mu = 2 ell_H / gamma, lambda = (4/gamma)((mu+1) ell_H + 2 ell_B).
RotatedMetric default_metric(double gamma, double ell_H, double ell_B);

/// Concave profile psi of the coupling semimetric.
struct PsiProfile {
  enum class Variant { exponential, almost_linear };

  double c2 = 1.0;
  double theta = 1.0;
  Variant variant = Variant::exponential;
  /// Only for almost_linear: psi(r) = r - beta r^{1+theta}/(1+theta) on [0, delta_cap].
  double beta = 0.0;
  double delta_cap = 1.0;

  static PsiProfile exponential(double c2, double theta);
  static PsiProfile almost_linear(double beta, double theta, double delta_cap);

  double value(double r) const;
  double derivative(double r) const;

  static Variant variant_from_name(const std::string& name);
};

/// (K (phi(z) + phi(z~)) + L) psi(rho(z - z~)).
double semimetric(double K, double L, const PsiProfile& profile, const TestFunction& phi,
                  const RotatedMetric& metric, std::span<const double> z,
                  std::span<const double> z_tilde);

/// Checks 2 C2 theta r^theta - 4 sqrt(eps) r - C r^2 >= 0 on a grid of (0, R1].
/// Returns the worst value found (>= 0 means the inequality holds).
double proof_inequality_margin(double c2, double theta, double eps, double C, double R1,
                               int grid_points = 4096);

}  // namespace hypoflow
