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

#include "hypoflow/metric.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace hypoflow {

namespace {

double reg_norm(double n, double eps) {
  if (eps == 0.0) return n;
  // sqrt(eps^2 + n^2) - eps, written to avoid cancellation for small n.
  return n * n / (std::sqrt(eps * eps + n * n) + eps);
}

}  // namespace

RotatedMetric RotatedMetric::create(double mu, double lambda, double eps_reg) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidInput("metric: mu must be positive");
  if (!(lambda >= 1.0 + mu) || !std::isfinite(lambda)) {
    std::ostringstream os;
    os << "metric: lambda = " << lambda << " must be >= 1 + mu = " << 1.0 + mu;
    throw InvalidInput(os.str());
  }
  if (!(eps_reg >= 0.0)) throw InvalidInput("metric: eps_reg must be >= 0");
  return RotatedMetric{mu, lambda, eps_reg};
}

double RotatedMetric::rho(std::span<const double> dv, std::span<const double> dy,
                          bool regularized) const {
  double xi2 = 0.0, y2 = 0.0;
  for (std::size_t i = 0; i < dv.size(); ++i) {
    double xi = dv[i] + mu * dy[i];
    xi2 += xi * xi;
    y2 += dy[i] * dy[i];
  }
  double a = std::sqrt(xi2), b = std::sqrt(y2);
  if (regularized) return reg_norm(a, eps_reg) + lambda * reg_norm(b, eps_reg);
  return a + lambda * b;
}

RotatedMetric default_metric(double gamma, double ell_H, double ell_B) {
  if (!(gamma > 0.0)) throw InvalidInput("default_metric: gamma must be positive");
  if (!(ell_B >= 0.0)) throw InvalidInput("default_metric: ell_B must be >= 0");
  if (ell_H < gamma) {
    std::ostringstream os;
    os << "default_metric: ell_H = " << ell_H << " < gamma = " << gamma
       << " is inconsistent (ellipticity bound exceeds the Lipschitz bound)";
    throw InvalidInput(os.str());
  }
  double mu = 2.0 * ell_H / gamma;
  double lambda = 4.0 / gamma * ((mu + 1.0) * ell_H + 2.0 * ell_B);
  return RotatedMetric::create(mu, lambda, 0.0);
}

PsiProfile PsiProfile::exponential(double c2, double theta) {
  if (!(c2 >= 1.0)) throw InvalidInput("psi: c2 must be >= 1");
  if (!(theta > 0.0 && theta <= 1.0)) throw InvalidInput("psi: theta must lie in (0, 1]");
  PsiProfile p;
  p.c2 = c2;
  p.theta = theta;
  p.variant = Variant::exponential;
  return p;
}

PsiProfile PsiProfile::almost_linear(double beta, double theta, double delta_cap) {
  if (!(theta > 0.0 && theta <= 1.0)) throw InvalidInput("psi: theta must lie in (0, 1]");
  if (!(beta >= 0.0)) throw InvalidInput("psi: beta must be >= 0");
  if (!(delta_cap > 0.0)) throw InvalidInput("psi: delta_cap must be positive");
  if (!(beta * std::pow(delta_cap, theta) < 0.5)) {
    throw InvalidInput("psi: almost_linear profile needs beta * delta_cap^theta < 1/2");
  }
  PsiProfile p;
  p.theta = theta;
  p.beta = beta;
  p.delta_cap = delta_cap;
  p.variant = Variant::almost_linear;
  return p;
}

double PsiProfile::value(double r) const {
  if (!(r >= 0.0)) throw DomainError("psi: r must be >= 0");
  if (variant == Variant::exponential) return -std::expm1(-c2 * std::pow(r, theta));
  if (r > delta_cap) throw DomainError("psi: almost_linear profile evaluated beyond delta_cap");
  return r - beta * std::pow(r, 1.0 + theta) / (1.0 + theta);
}

double PsiProfile::derivative(double r) const {
  if (!(r >= 0.0)) throw DomainError("psi: r must be >= 0");
  if (variant == Variant::exponential) {
    if (r == 0.0) return theta == 1.0 ? c2 : std::numeric_limits<double>::infinity();
    double rt = std::pow(r, theta);
    return theta * c2 * rt / r * std::exp(-c2 * rt);
  }
  if (r > delta_cap) throw DomainError("psi: almost_linear profile evaluated beyond delta_cap");
  return 1.0 - beta * std::pow(r, theta);
}

PsiProfile::Variant PsiProfile::variant_from_name(const std::string& name) {
  if (name == "exponential") return Variant::exponential;
  if (name == "almost_linear") return Variant::almost_linear;
  throw InvalidInput("unknown psi variant '" + name + "'");
}

double semimetric(double K, double L, const PsiProfile& profile, const TestFunction& phi,
                  const RotatedMetric& metric, std::span<const double> z,
                  std::span<const double> z_tilde) {
  const std::size_t n = z.size();
  const std::size_t d = n / 2;
  std::array<double, kMaxDim> dv{}, dy{};
  for (std::size_t i = 0; i < d; ++i) {
    dv[i] = z[i] - z_tilde[i];
    dy[i] = z[d + i] - z_tilde[d + i];
  }
  double r = metric.rho({dv.data(), d}, {dy.data(), d});
  if (r == 0.0) return 0.0;
  return (K * (phi.value(z) + phi.value(z_tilde)) + L) * profile.value(r);
}

double proof_inequality_margin(double c2, double theta, double eps, double C, double R1,
                               int grid_points) {
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= grid_points; ++i) {
    double r = R1 * static_cast<double>(i) / grid_points;
    double val = 2.0 * c2 * theta * std::pow(r, theta) - 4.0 * std::sqrt(eps) * r - C * r * r;
    worst = std::min(worst, val);
  }
  return worst;
}

}  // namespace hypoflow
