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

#include "hypoflow/model.hpp"

#include <vector>

namespace hypoflow {

/// phi(v, y) = Phi(y) + 1/2 (|v|^2 + 2 eps v.y + delta |y|^2) + shift, with the
/// shift chosen so that phi >= 1.
class LyapunovFunction final : public TestFunction {
 public:
  /// Requires eps > 0, delta > 0 and delta - eps^2 > 0 (coercivity).
  static LyapunovFunction create(int d, double eps, double delta, PotentialSpec potential);

  int dim() const override { return 2 * d_; }
  double value(std::span<const double> z) const override;
  void gradient(std::span<const double> z, std::span<double> out) const override;
  Matrix hessian(std::span<const double> z) const override;

  int d() const { return d_; }
  double eps() const { return eps_; }
  double delta() const { return delta_; }
  double shift() const { return shift_; }
  const PotentialSpec& potential() const { return potential_; }

  /// Constant C_eps of the pointwise bound
  ///   L[phi] >= alpha/4 |v|^2 + eps beta/4 |y|^2 - C_eps.
  double lower_bound_constant(double kappa) const;

 private:
  LyapunovFunction() = default;

  int d_ = 1;
  double eps_ = 0.0;
  double delta_ = 0.0;
  double shift_ = 0.0;
  PotentialSpec potential_;
};

/// delta = eps = min(alpha / (4 (1 + c0^2/beta)), alpha beta / 2, 1/2).
LyapunovFunction build_quadratic_lyapunov(const PotentialSpec& potential, int d);

struct LyapunovReport {
  double omega0_hat = 0.0;
  double k0_hat = 0.0;
  double radius_R = 0.0;
  bool certified = false;

  bool cond_liploc = false;
  double liploc_worst_ratio = 0.0;
  bool cond_vfi2 = false;
  /// Minimum of L(phi^2) over all samples.
  double vfi2_worst_value = 0.0;
  bool cond_vfi3 = false;
  /// Smallest c with  int_0^1 phi(segment) <= c (phi + phi~)  over the sampled pairs.
  double vfi3_best_c = 0.0;

  /// (radius, inf L[phi]/phi) per shell, innermost first.
  std::vector<std::pair<double, double>> shell_infima;
  long long sample_count = 0;
};

struct CertifyOptions {
  int shells = 8;
  /// Pass thresholds for the sampled conditions.
  double liploc_cap = 10.0;
  double vfi3_cap = 1.0;
};

/// Sampled certification of phi as a Lyapunov function for the model's
/// generator. Failures are reported, never thrown (except for bad input).
LyapunovReport certify_lyapunov(const KineticModel& model, const TestFunction& phi, const Box& box,
                                long long n_samples, double omega0_candidate,
                                CertifyOptions options = {});

/// Pointwise check of L[phi] >= alpha/4 |v|^2 + eps beta/4 |y|^2 - C_eps at
/// Halton points of `settings`' box.
SampledCheck check_lyapunov_lower_bound(const KineticModel& model, const LyapunovFunction& phi,
                                        SampleSettings settings = {});

/// Gauss-Legendre nodes and weights on [0, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre_unit(int n);

}  // namespace hypoflow
