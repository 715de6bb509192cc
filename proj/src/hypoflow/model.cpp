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

#include "hypoflow/model.hpp"

#include <algorithm>
#include <sstream>

namespace hypoflow {

namespace {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double min_sym_eigenvalue(const Matrix& m) {
  Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

void require_square(const Matrix& m, int d, const char* what) {
  if (m.rows() != d || m.cols() != d) {
    std::ostringstream os;
    os << what << " must be " << d << "x" << d << ", got " << m.rows() << "x" << m.cols();
    throw InvalidInput(os.str());
  }
}

// Lipschitz constant of z -> J z with respect to |dv| + |dy|.
double block_lipschitz(const Matrix& jv, const Matrix& jy) {
  return std::max(spectral_norm(jv), spectral_norm(jy));
}

constexpr double kConstTol = 1e-10;

}  // namespace

// ---------------------------------------------------------------- PotentialSpec

PotentialSpec PotentialSpec::quadratic(double alpha, double beta, double c0, double c1) {
  PotentialSpec p;
  p.kind = Kind::quadratic;
  p.alpha = alpha;
  p.beta = beta;
  p.c0 = c0;
  p.c1 = c1;
  p.lower_bound = 0.0;
  p.grad_lipschitz = beta;
  return p;
}

PotentialSpec PotentialSpec::cosine_perturbed(double alpha, double beta, double c0, double c1) {
  PotentialSpec p = quadratic(alpha, beta, c0, c1);
  p.kind = Kind::cosine_perturbed;
  p.grad_lipschitz = 3.0 * beta;
  return p;
}

PotentialSpec PotentialSpec::closure(double alpha, double beta, double c0, double c1,
                                     double lower_bound, double grad_lipschitz, ValueFn value,
                                     GradFn grad, HessFn hess) {
  if (!value || !grad || !hess) throw InvalidInput("closure potential needs value, gradient and Hessian");
  PotentialSpec p;
  p.kind = Kind::closure;
  p.alpha = alpha;
  p.beta = beta;
  p.c0 = c0;
  p.c1 = c1;
  p.lower_bound = lower_bound;
  p.grad_lipschitz = grad_lipschitz;
  p.value_fn = std::move(value);
  p.grad_fn = std::move(grad);
  p.hess_fn = std::move(hess);
  return p;
}

double PotentialSpec::phi(std::span<const double> y) const {
  switch (kind) {
    case Kind::quadratic:
      return 0.5 * beta * dot(y, y);
    case Kind::cosine_perturbed: {
      double s = dot(y, y);
      for (double yi : y) s += 1.0 - std::cos(yi);
      return beta * s;
    }
    case Kind::closure:
      return value_fn(y);
  }
  return 0.0;
}

void PotentialSpec::grad_phi(std::span<const double> y, std::span<double> out) const {
  switch (kind) {
    case Kind::quadratic:
      for (std::size_t i = 0; i < y.size(); ++i) out[i] = beta * y[i];
      return;
    case Kind::cosine_perturbed:
      for (std::size_t i = 0; i < y.size(); ++i) out[i] = beta * (2.0 * y[i] + std::sin(y[i]));
      return;
    case Kind::closure:
      grad_fn(y, out);
      return;
  }
}

Matrix PotentialSpec::hess_phi(std::span<const double> y) const {
  const int d = static_cast<int>(y.size());
  switch (kind) {
    case Kind::quadratic:
      return beta * Matrix::Identity(d, d);
    case Kind::cosine_perturbed: {
      Matrix h = Matrix::Zero(d, d);
      for (int i = 0; i < d; ++i) h(i, i) = beta * (2.0 + std::cos(y[i]));
      return h;
    }
    case Kind::closure:
      return hess_fn(y);
  }
  return Matrix::Zero(d, d);
}

std::string PotentialSpec::kind_name(Kind kind) {
  switch (kind) {
    case Kind::quadratic: return "quadratic";
    case Kind::cosine_perturbed: return "cosine_perturbed";
    case Kind::closure: return "closure";
  }
  return "?";
}

PotentialSpec::Kind PotentialSpec::kind_from_name(const std::string& name) {
  if (name == "quadratic") return Kind::quadratic;
  if (name == "cosine_perturbed") return Kind::cosine_perturbed;
  throw InvalidInput("unknown potential kind '" + name + "' (expected quadratic or cosine_perturbed)");
}

// -------------------------------------------------------------------- DriftSpec

DriftSpec DriftSpec::linear(Matrix linear_v, Matrix linear_y) {
  const int d = static_cast<int>(linear_v.rows());
  if (d < 1 || d > kMaxDim) throw InvalidInput("drift dimension must be in [1, 4]");
  require_square(linear_v, d, "linear_v");
  require_square(linear_y, d, "linear_y");
  if (!all_finite({linear_v.data(), static_cast<std::size_t>(linear_v.size())}) ||
      !all_finite({linear_y.data(), static_cast<std::size_t>(linear_y.size())})) {
    throw InvalidInput("drift matrices must be finite");
  }
  DriftSpec s;
  s.kind_ = Kind::linear;
  s.d_ = d;
  s.linear_v_ = std::move(linear_v);
  s.linear_y_ = std::move(linear_y);
  return s;
}

DriftSpec DriftSpec::zero(int d) { return linear(Matrix::Zero(d, d), Matrix::Zero(d, d)); }

DriftSpec DriftSpec::gradient_plus_linear(Matrix linear_v, Matrix linear_y, PotentialSpec potential) {
  DriftSpec s = linear(std::move(linear_v), std::move(linear_y));
  s.kind_ = Kind::gradient_plus_linear;
  s.potential_ = std::move(potential);
  return s;
}

DriftSpec DriftSpec::closure(int d, EvalFn eval, JacobianFn jacobian) {
  if (d < 1 || d > kMaxDim) throw InvalidInput("drift dimension must be in [1, 4]");
  if (!eval || !jacobian) throw InvalidInput("closure drift needs both an evaluator and a Jacobian");
  DriftSpec s;
  s.kind_ = Kind::closure;
  s.d_ = d;
  s.linear_v_ = Matrix::Zero(d, d);
  s.linear_y_ = Matrix::Zero(d, d);
  s.closure_eval_ = std::move(eval);
  s.closure_jacobian_ = std::move(jacobian);
  return s;
}

void DriftSpec::eval(std::span<const double> v, std::span<const double> y,
                     std::span<double> out) const {
  if (kind_ == Kind::closure) {
    closure_eval_(v, y, out);
    return;
  }
  for (int i = 0; i < d_; ++i) {
    double s = 0.0;
    for (int j = 0; j < d_; ++j) s += linear_v_(i, j) * v[j] + linear_y_(i, j) * y[j];
    out[i] = s;
  }
  if (kind_ == Kind::gradient_plus_linear) {
    SmallVec g{};
    potential_->grad_phi(y, std::span<double>(g.data(), d_));
    for (int i = 0; i < d_; ++i) out[i] += g[i];
  }
}

Matrix DriftSpec::jacobian(std::span<const double> v, std::span<const double> y) const {
  if (kind_ == Kind::closure) return closure_jacobian_(v, y);
  Matrix j(d_, 2 * d_);
  j.leftCols(d_) = linear_v_;
  j.rightCols(d_) = linear_y_;
  if (kind_ == Kind::gradient_plus_linear) j.rightCols(d_) += potential_->hess_phi(y);
  return j;
}

bool DriftSpec::is_affine() const {
  return kind_ == Kind::linear ||
         (kind_ == Kind::gradient_plus_linear && potential_->kind == PotentialSpec::Kind::quadratic);
}

std::pair<Matrix, Matrix> DriftSpec::affine_parts() const {
  if (!is_affine()) throw InvalidInput("drift of kind " + kind_name(kind_) + " is not affine");
  Matrix my = linear_y_;
  if (kind_ == Kind::gradient_plus_linear) my += potential_->beta * Matrix::Identity(d_, d_);
  return {linear_v_, my};
}

std::string DriftSpec::kind_name(Kind kind) {
  switch (kind) {
    case Kind::linear: return "linear";
    case Kind::gradient_plus_linear: return "gradient_plus_linear";
    case Kind::closure: return "closure";
  }
  return "?";
}

// ---------------------------------------------------------------- DiffusionSpec

Matrix DiffusionSpec::matrix(std::span<const double> v, int d) const {
  if (!matrix_fn) return Matrix::Identity(d, d);
  return matrix_fn(v);
}

Matrix DiffusionSpec::derivative(std::span<const double> v, int d, int k) const {
  if (!matrix_fn) return Matrix::Zero(d, d);
  if (derivative_fn) return derivative_fn(v, k);
  const double h = 1e-5;
  SmallVec vp{}, vm{};
  std::copy(v.begin(), v.end(), vp.begin());
  std::copy(v.begin(), v.end(), vm.begin());
  vp[k] += h;
  vm[k] -= h;
  return (matrix_fn({vp.data(), static_cast<std::size_t>(d)}) -
          matrix_fn({vm.data(), static_cast<std::size_t>(d)})) /
         (2.0 * h);
}

// ----------------------------------------------------------------- KineticModel

KineticModel KineticModel::create(int d, double kappa, DriftSpec H, DriftSpec B,
                                  std::optional<StructuralConstants> constants,
                                  DiffusionSpec diffusion) {
  if (d < 1 || d > kMaxDim) throw InvalidInput("model.d must be in [1, 4]");
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw InvalidInput("model.kappa must be finite and >= 0");
  if (H.dim() != d || B.dim() != d) throw InvalidInput("drift dimension does not match model.d");

  KineticModel m;
  m.d_ = d;
  m.kappa_ = kappa;
  m.diffusion_ = std::move(diffusion);

  StructuralConstants exact{};
  bool h_affine = H.is_affine();
  bool b_affine = B.is_affine();
  if (h_affine) {
    auto [hv, hy] = H.affine_parts();
    exact.gamma = min_sym_eigenvalue(hv);
    exact.ell_H = block_lipschitz(hv, hy);
  }
  if (b_affine) {
    auto [bv, by] = B.affine_parts();
    exact.ell_B = block_lipschitz(bv, by);
  } else if (B.kind() == DriftSpec::Kind::gradient_plus_linear) {
    // Upper bound; the potential part is not affine.
    exact.ell_B = std::max(spectral_norm(B.linear_v()),
                           spectral_norm(B.linear_y()) + B.potential()->grad_lipschitz);
  }

  if (constants) {
    const auto& c = *constants;
    if (!(c.gamma > 0.0) || !(c.ell_H > 0.0) || !(c.ell_B >= 0.0)) {
      throw InvalidInput("model.constants need gamma > 0, ell_H > 0, ell_B >= 0");
    }
    if (h_affine) {
      if (c.gamma > exact.gamma + kConstTol) {
        std::ostringstream os;
        os << "model.constants.gamma = " << c.gamma
           << " exceeds the smallest eigenvalue of sym(D_v H) = " << exact.gamma;
        throw InvalidInput(os.str());
      }
      if (c.ell_H < exact.ell_H - kConstTol) {
        std::ostringstream os;
        os << "model.constants.ell_H = " << c.ell_H << " is below the Lipschitz constant "
           << exact.ell_H << " of H";
        throw InvalidInput(os.str());
      }
    }
    if (b_affine && c.ell_B < exact.ell_B - kConstTol) {
      std::ostringstream os;
      os << "model.constants.ell_B = " << c.ell_B << " is below the Lipschitz constant "
         << exact.ell_B << " of B";
      throw InvalidInput(os.str());
    }
    m.constants_ = c;
  } else {
    if (!h_affine || B.kind() == DriftSpec::Kind::closure) {
      throw InvalidInput("model.constants (gamma, ell_H, ell_B) are required for closure drifts");
    }
    m.constants_ = exact;
  }
  if (m.constants_.gamma > m.constants_.ell_H + kConstTol) {
    throw InvalidInput("gamma must not exceed ell_H");
  }

  m.H_ = std::move(H);
  m.B_ = std::move(B);

  // Spot-check supplied constants for non-affine drifts.
  if (!h_affine || !b_affine) {
    const int n = 2 * d;
    HaltonSequence seq(Box::symmetric(2 * n, 10.0));
    std::vector<double> p(2 * n);
    SmallVec h1{}, h2{}, b1{}, b2{};
    for (std::uint64_t i = 0; i < 2000; ++i) {
      seq.point(i, p);
      std::span<const double> z1(p.data(), n), z2(p.data() + n, n);
      m.drifts(z1, {h1.data(), std::size_t(d)}, {b1.data(), std::size_t(d)});
      m.drifts(z2, {h2.data(), std::size_t(d)}, {b2.data(), std::size_t(d)});
      double dist = 0.0, dv = 0.0, dy = 0.0, dh = 0.0, db = 0.0;
      for (int k = 0; k < d; ++k) {
        dv += (z1[k] - z2[k]) * (z1[k] - z2[k]);
        dy += (z1[d + k] - z2[d + k]) * (z1[d + k] - z2[d + k]);
        dh += (h1[k] - h2[k]) * (h1[k] - h2[k]);
        db += (b1[k] - b2[k]) * (b1[k] - b2[k]);
      }
      dist = std::sqrt(dv) + std::sqrt(dy);
      if (dist <= 0.0) continue;
      if (!h_affine && std::sqrt(dh) > m.constants_.ell_H * dist * (1 + 1e-6) + 1e-12) {
        throw InvalidInput("sampled Lipschitz ratio of H exceeds model.constants.ell_H");
      }
      if (!b_affine && std::sqrt(db) > m.constants_.ell_B * dist * (1 + 1e-6) + 1e-12) {
        throw InvalidInput("sampled Lipschitz ratio of B exceeds model.constants.ell_B");
      }
      if (!h_affine) {
        Matrix j = m.H_.jacobian(z1.subspan(0, d), z1.subspan(d, d));
        if (min_sym_eigenvalue(j.leftCols(d)) < m.constants_.gamma - 1e-9) {
          throw InvalidInput("sampled sym(D_v H) has an eigenvalue below model.constants.gamma");
        }
      }
    }
  }
  return m;
}

// ------------------------------------------------------------------- generator

double apply_generator(const KineticModel& model, const TestFunction& f,
                       std::span<const double> z) {
  const int d = model.d();
  const int n = 2 * d;
  if (f.dim() != n || static_cast<int>(z.size()) != n) {
    std::ostringstream os;
    os << "test function / point dimension " << f.dim() << "/" << z.size()
       << " does not match state dimension " << n;
    throw InvalidInput(os.str());
  }
  SmallVec h{}, b{};
  std::array<double, 2 * kMaxDim> g{};
  model.drifts(z, {h.data(), std::size_t(d)}, {b.data(), std::size_t(d)});
  f.gradient(z, {g.data(), std::size_t(n)});
  Matrix hess = f.hessian(z);

  double second = 0.0;
  if (model.diffusion().is_identity()) {
    for (int i = 0; i < d; ++i) second += hess(i, i);
  } else {
    Matrix a = model.diffusion().matrix(z.subspan(0, d), d);
    second = (a * hess.topLeftCorner(d, d)).trace();
  }
  double lap_y = 0.0;
  for (int i = 0; i < d; ++i) lap_y += hess(d + i, d + i);

  double transport = 0.0;
  for (int i = 0; i < d; ++i) transport += -h[i] * g[d + i] + b[i] * g[i];
  return -second - model.kappa() * lap_y + transport;
}

DriftValue drift_field(const KineticModel& model, std::span<const double> z) {
  if (static_cast<int>(z.size()) != model.state_dim()) throw InvalidInput("point dimension mismatch");
  if (!all_finite(z)) throw InvalidInput("drift_field: non-finite point");
  const int d = model.d();
  DriftValue out{Vector(d), Vector(d)};
  model.drifts(z, {out.H.data(), std::size_t(d)}, {out.B.data(), std::size_t(d)});
  return out;
}

// ------------------------------------------------------------- sampled checks

namespace {

void record(SampledCheck& c, double slack, double scale) {
  c.worst_slack = std::min(c.worst_slack, slack);
  if (slack < -1e-9 * (1.0 + scale)) {
    ++c.violations;
    c.passed = false;
  }
}

}  // namespace

SampledCheck check_dissipativity(const KineticModel& model, const PotentialSpec& potential,
                                 SampleSettings settings) {
  const int d = model.d();
  HaltonSequence seq(Box::symmetric(2 * d, settings.half_width));
  std::vector<double> z(2 * d);
  SmallVec h{}, b{}, g{};
  SampledCheck c;
  for (long long i = 0; i < settings.count; ++i) {
    seq.point(i, z);
    std::span<const double> v(z.data(), d), y(z.data() + d, d);
    model.drifts(z, {h.data(), std::size_t(d)}, {b.data(), std::size_t(d)});
    potential.grad_phi(y, {g.data(), std::size_t(d)});
    double bv = 0.0, by = 0.0;
    for (int k = 0; k < d; ++k) {
      double bk = b[k] - g[k];
      bv += bk * v[k];
      by += bk * y[k];
    }
    double nv = norm2(v), ny = norm2(y);
    record(c, bv - (potential.alpha * nv * nv - potential.c0), nv * nv);
    record(c, by + potential.c0 * ny * (1.0 + nv), ny * (1.0 + nv));
    ++c.samples;
  }
  return c;
}

SampledCheck check_potential_confinement(const PotentialSpec& potential, int d,
                                         SampleSettings settings) {
  HaltonSequence seq(Box::symmetric(d, settings.half_width));
  std::vector<double> y(d);
  SmallVec g{};
  SampledCheck c;
  for (long long i = 0; i < settings.count; ++i) {
    seq.point(i, y);
    potential.grad_phi(y, {g.data(), std::size_t(d)});
    double gy = dot({g.data(), std::size_t(d)}, y);
    double ny2 = dot(y, y);
    record(c, gy - (potential.beta * ny2 - potential.c1), ny2);
    ++c.samples;
  }
  return c;
}

SampledCheck check_diffusion_bounds(const DiffusionSpec& diffusion, int d,
                                    SampleSettings settings) {
  HaltonSequence seq(Box::symmetric(d, settings.half_width));
  std::vector<double> v(d);
  SampledCheck c;
  for (long long i = 0; i < settings.count; ++i) {
    seq.point(i, v);
    Matrix a = diffusion.matrix(v, d);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues()(0);
    double hi = es.eigenvalues()(d - 1);
    record(c, lo - diffusion.alpha0, 1.0);
    record(c, 1.0 / diffusion.alpha0 - hi, 1.0);
    ++c.samples;
  }
  return c;
}

}  // namespace hypoflow
