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

#include "hypoflow/field.hpp"
#include "hypoflow/model.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace hypoflow {

enum class Boundary { neumann_copy, dirichlet_extrapolate };

Boundary boundary_from_name(const std::string& name);
std::string boundary_name(Boundary b);

struct SolverParams {
  double dt = 0.0;
  double t_end = 0.0;
  Boundary boundary = Boundary::neumann_copy;
  double cfl_safety = 0.5;
  /// Sorted times in [0, t_end]; empty means only t_end.
  std::vector<double> record_times;
};

enum class SchemeKind { adjoint, fokker_planck };

/// Largest dt keeping every update a convex combination, times cfl_safety:
/// cfl_safety / max over nodes of the total outgoing stencil rate.
double admissible_dt(const KineticModel& model, const Grid& grid, SchemeKind kind,
                     Boundary boundary = Boundary::neumann_copy, double cfl_safety = 0.5);

struct SolveStats {
  long long steps = 0;
  double max_rate = 0.0;
  /// Largest per-step change of the total mass (Fokker-Planck only).
  double max_mass_drift = 0.0;
};

/// du/dt = Lap_v u + kappa Lap_y u + H.grad_y u - B.grad_v u, monotone upwind
/// with node velocities. Returns u at the record times.
std::vector<Field> solve_adjoint(const KineticModel& model, const Field& u0,
                                 const SolverParams& params, SolveStats* stats = nullptr);

/// dm/dt = Lap_v m + kappa Lap_y m - div_y(H m) + div_v(B m), conservative
/// finite volumes with face velocities and zero-flux walls. `m0` must be a
/// nonnegative density of unit mass.
std::vector<Field> solve_fokker_planck(const KineticModel& model, const Field& m0,
                                       const SolverParams& params, SolveStats* stats = nullptr);

/// Rescales a nonnegative field to unit mass under cell quadrature.
Field normalize_density(const Field& m);

struct DualityResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

/// lhs = sum zeta m(t) vol, rhs = sum u(t) m0 vol with u the adjoint solution from zeta.
DualityResult duality_check(const KineticModel& model, const Field& m0, const Field& zeta, double t,
                            const SolverParams& params);

/// sup over interior nodes of
/// W = 1/2 (lambda u^2 + t |grad_v u|^2 - 2 eps t^2 grad_v u.grad_y u + delta t^3 |grad_y u|^2).
std::vector<std::pair<double, double>> villani_functional(const std::vector<Field>& series,
                                                          double lambda, double eps, double delta,
                                                          double margin = 0.1);

/// sup_z |grad_v u(t,z)| sqrt(t) / (phi(z) ||u0 / phi||_inf) over the interior.
double weighted_gradient_ratio(const Field& u0, const Field& ut, const TestFunction& phi,
                               double margin = 0.1);

/// Space-time jet of a smooth function at (t, z): value, time derivative,
/// gradient, time derivative of the gradient, Hessian and third derivatives.
struct Jet {
  double u = 0.0;
  double u_t = 0.0;
  Vector grad;
  Vector grad_t;
  Matrix hess;
  /// third[i * n * n + j * n + k] = d^3 u / dz_i dz_j dz_k.
  std::vector<double> third;
};

struct SpaceTimeFunction {
  int dim = 2;
  std::function<Jet(double t, std::span<const double> z)> jet;
  bool provides_hessian = true;
  /// When false, third derivatives come from central differences of the Hessian.
  bool provides_third = true;
};

/// |LHS - RHS| of the four identities for (d_t + L) applied to u^2,
/// |grad_v u|^2, grad_v u . grad_y u and |grad_y u|^2 along a solution of
/// d_t u + L u = 0.
std::array<double, 4> calc_hyp_residuals(const KineticModel& model, const SpaceTimeFunction& u,
                                         double t, std::span<const double> z);

}  // namespace hypoflow
