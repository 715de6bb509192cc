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
#include "hypoflow/sampling.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>

namespace hypoflow {

/// Confining potential Phi(y) together with the dissipativity constants of the
/// kinetic model class B(v,y) = b(v,y) + grad Phi(y):
///   b.v >= alpha |v|^2 - c0,   b.y >= -c0 |y| (1 + |v|),   grad Phi.y >= beta |y|^2 - c1.
struct PotentialSpec {
  enum class Kind { quadratic, cosine_perturbed, closure };

  using ValueFn = std::function<double(std::span<const double>)>;
  using GradFn = std::function<void(std::span<const double>, std::span<double>)>;
  using HessFn = std::function<Matrix(std::span<const double>)>;

  Kind kind = Kind::quadratic;
  double alpha = 1.0;
  double beta = 1.0;
  double c0 = 0.0;
  double c1 = 0.0;
  /// Known lower bound of Phi; used to shift the Lyapunov function above 1.
  double lower_bound = 0.0;
  /// Lipschitz constant of grad Phi.
  double grad_lipschitz = 1.0;

  ValueFn value_fn;
  GradFn grad_fn;
  HessFn hess_fn;

  /// Phi(y) = beta/2 |y|^2.
  static PotentialSpec quadratic(double alpha, double beta, double c0, double c1);
  /// Phi(y) = beta (|y|^2 + sum_i (1 - cos y_i)); needs c1 >= beta d / 4.
  static PotentialSpec cosine_perturbed(double alpha, double beta, double c0, double c1);
  static PotentialSpec closure(double alpha, double beta, double c0, double c1,
                               double lower_bound, double grad_lipschitz, ValueFn value,
                               GradFn grad, HessFn hess);

  double phi(std::span<const double> y) const;
  void grad_phi(std::span<const double> y, std::span<double> out) const;
  Matrix hess_phi(std::span<const double> y) const;

  static std::string kind_name(Kind kind);
  static Kind kind_from_name(const std::string& name);
};

/// A drift H or B : R^d x R^d -> R^d.
class DriftSpec {
 public:
  enum class Kind { linear, gradient_plus_linear, closure };

  using EvalFn = std::function<void(std::span<const double> v, std::span<const double> y,
                                    std::span<double> out)>;
  /// Jacobian as a d x 2d matrix [D_v | D_y].
  using JacobianFn = std::function<Matrix(std::span<const double> v, std::span<const double> y)>;

  static DriftSpec linear(Matrix linear_v, Matrix linear_y);
  static DriftSpec zero(int d);
  static DriftSpec gradient_plus_linear(Matrix linear_v, Matrix linear_y, PotentialSpec potential);
  static DriftSpec closure(int d, EvalFn eval, JacobianFn jacobian);

  Kind kind() const { return kind_; }
  int dim() const { return d_; }

  void eval(std::span<const double> v, std::span<const double> y, std::span<double> out) const;
  Matrix jacobian(std::span<const double> v, std::span<const double> y) const;

  const Matrix& linear_v() const { return linear_v_; }
  const Matrix& linear_y() const { return linear_y_; }
  const std::optional<PotentialSpec>& potential() const { return potential_; }

  /// True when the drift is exactly z -> M z (linear kind, or linear plus a
  /// quadratic potential gradient).
  bool is_affine() const;
  /// The matrices (M_v, M_y) with drift = M_v v + M_y y; requires is_affine().
  std::pair<Matrix, Matrix> affine_parts() const;

  static std::string kind_name(Kind kind);

 private:
  DriftSpec() = default;

  Kind kind_ = Kind::linear;
  int d_ = 0;
  Matrix linear_v_;
  Matrix linear_y_;
  std::optional<PotentialSpec> potential_;
  EvalFn closure_eval_;
  JacobianFn closure_jacobian_;
};

/// Velocity diffusion matrix A(v), alpha0 I <= A(v) <= alpha0^{-1} I.
struct DiffusionSpec {
  using MatrixFn = std::function<Matrix(std::span<const double>)>;

  double alpha0 = 1.0;
  double ell_A = 0.0;
  /// Empty means the identity.
  MatrixFn matrix_fn;
  /// Optional partial derivative dA/dv_k; finite differences otherwise.
  std::function<Matrix(std::span<const double>, int)> derivative_fn;

  static DiffusionSpec identity() { return DiffusionSpec{}; }
  bool is_identity() const { return !matrix_fn; }
  Matrix matrix(std::span<const double> v, int d) const;
  Matrix derivative(std::span<const double> v, int d, int k) const;
};

struct StructuralConstants {
  double gamma = 0.0;
  double ell_H = 0.0;
  double ell_B = 0.0;
};

/// Kinetic model: generator L = -tr(A D_vv) - kappa Lap_y - H.grad_y + B.grad_v
/// on R^d x R^d.
class KineticModel {
 public:
  /// Validates the structural constants. For affine drifts they are computed
  /// from the matrices and any supplied values are checked against them; for
  /// closure drifts they must be supplied and are spot-checked by sampling.
  static KineticModel create(int d, double kappa, DriftSpec H, DriftSpec B,
                             std::optional<StructuralConstants> constants = std::nullopt,
                             DiffusionSpec diffusion = DiffusionSpec::identity());

  int d() const { return d_; }
  int state_dim() const { return 2 * d_; }
  double kappa() const { return kappa_; }
  const DriftSpec& H() const { return H_; }
  const DriftSpec& B() const { return B_; }
  const DiffusionSpec& diffusion() const { return diffusion_; }
  double gamma() const { return constants_.gamma; }
  double ell_H() const { return constants_.ell_H; }
  double ell_B() const { return constants_.ell_B; }
  const StructuralConstants& constants() const { return constants_; }
  bool hypoelliptic() const { return constants_.gamma > 0.0; }

  /// H(z) and B(z) for z = (v, y); no finiteness checks (hot path).
  void drifts(std::span<const double> z, std::span<double> h_out, std::span<double> b_out) const {
    auto v = z.subspan(0, d_);
    auto y = z.subspan(d_, d_);
    H_.eval(v, y, h_out);
    B_.eval(v, y, b_out);
  }

 private:
  KineticModel() = default;

  int d_ = 1;
  double kappa_ = 0.0;
  DriftSpec H_ = DriftSpec::zero(1);
  DriftSpec B_ = DriftSpec::zero(1);
  DiffusionSpec diffusion_;
  StructuralConstants constants_;
};

/// Exactly-differentiable function of z in R^n.
class TestFunction {
 public:
  virtual ~TestFunction() = default;
  virtual int dim() const = 0;
  virtual double value(std::span<const double> z) const = 0;
  virtual void gradient(std::span<const double> z, std::span<double> out) const = 0;
  virtual Matrix hessian(std::span<const double> z) const = 0;
};

class ClosureTestFunction final : public TestFunction {
 public:
  using ValueFn = std::function<double(std::span<const double>)>;
  using GradFn = std::function<void(std::span<const double>, std::span<double>)>;
  using HessFn = std::function<Matrix(std::span<const double>)>;

  ClosureTestFunction(int dim, ValueFn value, GradFn grad, HessFn hess)
      : dim_(dim), value_(std::move(value)), grad_(std::move(grad)), hess_(std::move(hess)) {}

  int dim() const override { return dim_; }
  double value(std::span<const double> z) const override { return value_(z); }
  void gradient(std::span<const double> z, std::span<double> out) const override { grad_(z, out); }
  Matrix hessian(std::span<const double> z) const override { return hess_(z); }

 private:
  int dim_;
  ValueFn value_;
  GradFn grad_;
  HessFn hess_;
};

class ConstantFunction final : public TestFunction {
 public:
  ConstantFunction(int dim, double c) : dim_(dim), c_(c) {}
  int dim() const override { return dim_; }
  double value(std::span<const double>) const override { return c_; }
  void gradient(std::span<const double>, std::span<double> out) const override {
    for (auto& g : out) g = 0.0;
  }
  Matrix hessian(std::span<const double>) const override { return Matrix::Zero(dim_, dim_); }

 private:
  int dim_;
  double c_;
};

/// L[f](z) from exact derivatives of f.
double apply_generator(const KineticModel& model, const TestFunction& f, std::span<const double> z);

struct DriftValue {
  Vector H;
  Vector B;
};

/// (H(z), B(z)); rejects non-finite input.
DriftValue drift_field(const KineticModel& model, std::span<const double> z);

/// Outcome of a sampled inequality check.
struct SampledCheck {
  bool passed = true;
  /// Smallest slack observed (>= 0 means no violation).
  double worst_slack = std::numeric_limits<double>::infinity();
  long long violations = 0;
  long long samples = 0;
};

struct SampleSettings {
  double half_width = 10.0;
  long long count = 10000;
};

/// b.v >= alpha|v|^2 - c0 and b.y >= -c0|y|(1+|v|) where b = B - grad Phi.
SampledCheck check_dissipativity(const KineticModel& model, const PotentialSpec& potential,
                                 SampleSettings settings = {});
/// grad Phi(y).y >= beta|y|^2 - c1.
SampledCheck check_potential_confinement(const PotentialSpec& potential, int d,
                                         SampleSettings settings = {});
/// alpha0 I <= A(v) <= alpha0^{-1} I.
SampledCheck check_diffusion_bounds(const DiffusionSpec& diffusion, int d,
                                    SampleSettings settings = {});

}  // namespace hypoflow
