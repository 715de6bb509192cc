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

// Closed-form references for linear models. Only elementary dense linear
// algebra is used here so the oracles stay independent of the solvers.

#include "hypoflow/model.hpp"

#include <complex>
#include <vector>

namespace hypoflow {

/// dz/dt = A z + noise, z = (v, y), noise covariance Q = diag(2 I, 2 kappa I).
struct LinearModelMatrices {
  Matrix A;
  Matrix Q;
  int d = 1;

  /// A = [[-B_v, -B_y], [H_v, H_y]]; rejects non-affine drifts.
  static LinearModelMatrices from_model(const KineticModel& model);
  /// Direct construction; `a` must be 2d x 2d with 2d <= 4.
  static LinearModelMatrices from_matrix(Matrix a, double kappa);
};

/// Eigenvalues of a real n x n matrix (n <= 4) from its characteristic polynomial:
/// the quadratic formula for n <= 2, shifted QR on the companion matrix otherwise.
std::vector<std::complex<double>> eigenvalues_small(const Matrix& a);

/// Characteristic polynomial coefficients c with det(sI - A) = s^n + c[n-1] s^{n-1} + ... + c[0].
std::vector<double> characteristic_polynomial(const Matrix& a);

/// max Re(eig(A)).
double spectral_abscissa(const LinearModelMatrices& mats);

/// exp(A) by Pade(6) scaling and squaring.
Matrix expm(const Matrix& a);

struct MomentSample {
  double t = 0.0;
  Vector mean;
  Matrix cov;
};

/// RK4 for m' = A m and S' = A S + S A^T + Q. Samples are returned at
/// `record_times` (the step is shortened to land on them); every step when empty.
std::vector<MomentSample> integrate_moments(const LinearModelMatrices& mats, const Vector& mean0,
                                            const Matrix& cov0, double t_end, double dt,
                                            const std::vector<double>& record_times = {});

/// c(t) = exp(A^T t) a0; u(t, z) = c(t).z solves the adjoint equation.
Vector linear_adjoint_solution(const LinearModelMatrices& mats, const Vector& a0, double t);

/// Stationary covariance solving A S + S A^T + Q = 0 (Kronecker form); requires A stable.
Matrix stationary_covariance(const LinearModelMatrices& mats);

}  // namespace hypoflow
