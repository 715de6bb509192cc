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

#include "hypoflow/lyapunov.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <sstream>

namespace hypoflow {

LyapunovFunction LyapunovFunction::create(int d, double eps, double delta, PotentialSpec potential) {
  if (d < 1 || d > kMaxDim) throw InvalidInput("lyapunov: d must be in [1, 4]");
  if (!(eps > 0.0) || !(delta > 0.0)) throw InvalidInput("lyapunov: eps and delta must be positive");
  if (!(delta - eps * eps > 0.0)) {
    throw InvalidInput("lyapunov: delta - eps^2 must be positive for coercivity");
  }
  LyapunovFunction f;
  f.d_ = d;
  f.eps_ = eps;
  f.delta_ = delta;
  // The quadratic part is nonnegative, so Phi >= lower_bound gives phi >= 1.
  f.shift_ = 1.0 - potential.lower_bound;
  f.potential_ = std::move(potential);
  return f;
}

double LyapunovFunction::value(std::span<const double> z) const {
  auto v = z.subspan(0, d_);
  auto y = z.subspan(d_, d_);
  double q = dot(v, v) + 2.0 * eps_ * dot(v, y) + delta_ * dot(y, y);
  return potential_.phi(y) + 0.5 * q + shift_;
}

void LyapunovFunction::gradient(std::span<const double> z, std::span<double> out) const {
  auto v = z.subspan(0, d_);
  auto y = z.subspan(d_, d_);
  SmallVec g{};
  potential_.grad_phi(y, {g.data(), std::size_t(d_)});
  for (int i = 0; i < d_; ++i) {
    out[i] = v[i] + eps_ * y[i];
    out[d_ + i] = g[i] + eps_ * v[i] + delta_ * y[i];
  }
}

Matrix LyapunovFunction::hessian(std::span<const double> z) const {
  const int n = 2 * d_;
  Matrix h = Matrix::Zero(n, n);
  Matrix id = Matrix::Identity(d_, d_);
  h.topLeftCorner(d_, d_) = id;
  h.topRightCorner(d_, d_) = eps_ * id;
  h.bottomLeftCorner(d_, d_) = eps_ * id;
  h.bottomRightCorner(d_, d_) = potential_.hess_phi(z.subspan(d_, d_)) + delta_ * id;
  return h;
}

double LyapunovFunction::lower_bound_constant(double kappa) const {
  const auto& p = potential_;
  // kappa Lap Phi <= kappa d Lip(grad Phi) enters only for kappa > 0.
  return d_ * (1.0 + kappa * delta_) + kappa * d_ * p.grad_lipschitz + p.c0 + eps_ * p.c1 +
         eps_ * p.c0 * p.c0 / p.beta;
}

LyapunovFunction build_quadratic_lyapunov(const PotentialSpec& potential, int d) {
  const double a = potential.alpha, b = potential.beta, c0 = potential.c0;
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidInput("lyapunov.potential needs alpha > 0 and beta > 0");
  if (!(c0 >= 0.0) || !(potential.c1 >= 0.0)) throw InvalidInput("lyapunov.potential needs c0, c1 >= 0");
  // alpha/2 - eps - eps c0^2/beta >= alpha/4  and  beta/2 - eps/(2 alpha) >= beta/4.
  double eps = std::min({a / (4.0 * (1.0 + c0 * c0 / b)), a * b / 2.0, 0.5});
  return LyapunovFunction::create(d, eps, eps, potential);
}

// ------------------------------------------------------------------ quadrature

std::pair<std::vector<double>, std::vector<double>> gauss_legendre_unit(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    x[i] = 0.5 * (1.0 - t);
    w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
  return {x, w};
}

// --------------------------------------------------------------- certification

namespace {

struct PhiEval {
  double phi;
  double gen;        // L[phi]
  double gen_sq;     // L[phi^2]
};

PhiEval evaluate(const KineticModel& model, const TestFunction& phi, std::span<const double> z) {
  const int d = model.d();
  std::array<double, 2 * kMaxDim> g{};
  phi.gradient(z, {g.data(), std::size_t(2 * d)});
  double f = phi.value(z);
  double lf = apply_generator(model, phi, z);
  double energy = 0.0;
  if (model.diffusion().is_identity()) {
    for (int i = 0; i < d; ++i) energy += g[i] * g[i];
  } else {
    Matrix a = model.diffusion().matrix(z.subspan(0, d), d);
    Eigen::Map<const Vector> gv(g.data(), d);
    energy = gv.dot(a * gv);
  }
  double gy2 = 0.0;
  for (int i = 0; i < d; ++i) gy2 += g[d + i] * g[d + i];
  energy += model.kappa() * gy2;
  return {f, lf, 2.0 * f * lf - 2.0 * energy};
}

}  // namespace

LyapunovReport certify_lyapunov(const KineticModel& model, const TestFunction& phi, const Box& box,
                                long long n_samples, double omega0_candidate,
                                CertifyOptions options) {
  const int d = model.d();
  const int n = 2 * d;
  if (phi.dim() != n) throw InvalidInput("certify_lyapunov: phi dimension does not match the model");
  if (box.dim() != n) throw InvalidInput("certify_lyapunov: box dimension does not match the model");
  if (!box.contains_origin()) throw InvalidInput("certify_lyapunov: box must contain the origin");
  if (n_samples < 16) throw InvalidInput("certify_lyapunov: need at least 16 samples");

  LyapunovReport rep;
  double radius = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) radius = std::min({radius, -box.lower[k], box.upper[k]});
  if (!(radius > 0.0)) throw InvalidInput("certify_lyapunov: box must contain a ball around the origin");
  rep.radius_R = radius;

  double min_gap = std::numeric_limits<double>::infinity();  // min of L[phi] - omega0 phi
  double min_sq = std::numeric_limits<double>::infinity();
  double min_sq_outer = std::numeric_limits<double>::infinity();
  std::vector<double> z(n), dir(n);

  // Shells.
  const long long per_shell = std::max<long long>(64, n_samples / (2 * options.shells));
  HaltonSequence dirs(Box::symmetric(n, 1.0));
  for (int s = 1; s <= options.shells; ++s) {
    double r = radius * s / options.shells;
    double inf_ratio = std::numeric_limits<double>::infinity();
    for (long long i = 0; i < per_shell; ++i) {
      if (n == 2) {
        double ang = 2.0 * std::numbers::pi * (i + 0.5) / per_shell;
        dir[0] = std::cos(ang);
        dir[1] = std::sin(ang);
      } else {
        dirs.point(i, dir);
        double nd = norm2(dir);
        if (nd < 1e-12) continue;
        for (auto& x : dir) x /= nd;
      }
      for (int k = 0; k < n; ++k) z[k] = r * dir[k];
      PhiEval e = evaluate(model, phi, z);
      inf_ratio = std::min(inf_ratio, e.gen / e.phi);
      min_gap = std::min(min_gap, e.gen - omega0_candidate * e.phi);
      min_sq = std::min(min_sq, e.gen_sq);
      if (s == options.shells) min_sq_outer = std::min(min_sq_outer, e.gen_sq);
      ++rep.sample_count;
    }
    rep.shell_infima.emplace_back(r, inf_ratio);
  }
  rep.omega0_hat = rep.shell_infima.back().second;

  // Interior points of the box.
  HaltonSequence inner(box);
  const long long n_inner = std::max<long long>(16, n_samples / 2);
  for (long long i = 0; i < n_inner; ++i) {
    inner.point(i, z);
    PhiEval e = evaluate(model, phi, z);
    min_gap = std::min(min_gap, e.gen - omega0_candidate * e.phi);
    min_sq = std::min(min_sq, e.gen_sq);
    ++rep.sample_count;
  }
  rep.k0_hat = std::max(0.0, -min_gap);
  rep.vfi2_worst_value = min_sq;
  rep.cond_vfi2 = min_sq_outer > 0.0 && std::isfinite(min_sq);
  rep.certified = rep.omega0_hat > 0.0 && rep.omega0_hat >= omega0_candidate;

  // Pair conditions.
  Box pair_box{box.lower, box.upper};
  pair_box.lower.insert(pair_box.lower.end(), box.lower.begin(), box.lower.end());
  pair_box.upper.insert(pair_box.upper.end(), box.upper.begin(), box.upper.end());
  HaltonSequence pairs(pair_box);
  auto [gx, gw] = gauss_legendre_unit(16);
  std::vector<double> p(2 * n), seg(n);
  std::array<double, 2 * kMaxDim> g1{}, g2{};
  double worst_lip = 0.0, best_c = 0.0;
  const long long n_pairs = std::max<long long>(16, n_samples / 2);
  for (long long i = 0; i < n_pairs; ++i) {
    pairs.point(i, p);
    std::span<const double> z1(p.data(), n), z2(p.data() + n, n);
    double f1 = phi.value(z1), f2 = phi.value(z2);
    phi.gradient(z1, {g1.data(), std::size_t(n)});
    phi.gradient(z2, {g2.data(), std::size_t(n)});
    double dg = 0.0, dv = 0.0, dy = 0.0;
    for (int k = 0; k < d; ++k) {
      dg += (g1[k] - g2[k]) * (g1[k] - g2[k]);
      dv += (z1[k] - z2[k]) * (z1[k] - z2[k]);
      dy += (z1[d + k] - z2[d + k]) * (z1[d + k] - z2[d + k]);
    }
    double dist = std::sqrt(dv) + std::sqrt(dy);
    if (dist > 0.0) worst_lip = std::max(worst_lip, std::sqrt(dg) / ((f1 + f2) * dist));

    double integral = 0.0;
    for (std::size_t q = 0; q < gx.size(); ++q) {
      for (int k = 0; k < n; ++k) seg[k] = gx[q] * z1[k] + (1.0 - gx[q]) * z2[k];
      integral += gw[q] * phi.value(seg);
    }
    best_c = std::max(best_c, integral / (f1 + f2));
  }
  rep.liploc_worst_ratio = worst_lip;
  rep.cond_liploc = std::isfinite(worst_lip) && worst_lip <= options.liploc_cap;
  rep.vfi3_best_c = best_c;
  rep.cond_vfi3 = std::isfinite(best_c) && best_c <= options.vfi3_cap;
  return rep;
}

SampledCheck check_lyapunov_lower_bound(const KineticModel& model, const LyapunovFunction& phi,
                                        SampleSettings settings) {
  const int d = model.d();
  if (phi.d() != d) throw InvalidInput("lyapunov dimension does not match the model");
  const auto& p = phi.potential();
  const double c_eps = phi.lower_bound_constant(model.kappa());
  HaltonSequence seq(Box::symmetric(2 * d, settings.half_width));
  std::vector<double> z(2 * d);
  SampledCheck c;
  for (long long i = 0; i < settings.count; ++i) {
    seq.point(i, z);
    std::span<const double> v(z.data(), d), y(z.data() + d, d);
    double bound = p.alpha / 4.0 * dot(v, v) + phi.eps() * p.beta / 4.0 * dot(y, y) - c_eps;
    double lf = apply_generator(model, phi, z);
    double slack = lf - bound;
    c.worst_slack = std::min(c.worst_slack, slack);
    if (slack < -1e-9) {
      ++c.violations;
      c.passed = false;
    }
    ++c.samples;
  }
  return c;
}

}  // namespace hypoflow
