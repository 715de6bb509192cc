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

#include "hypoflow/coupling.hpp"

#include "hypoflow/parallel.hpp"
#include "hypoflow/sampling.hpp"

#include <algorithm>
#include <sstream>

namespace hypoflow {

CoupledState CoupledState::from_points(std::span<const double> z, std::span<const double> z_tilde,
                                       double time) {
  if (z.size() != z_tilde.size() || z.size() % 2 != 0 || z.empty() ||
      z.size() > 2 * static_cast<std::size_t>(kMaxDim)) {
    throw InvalidInput("coupled state: points must have equal even dimension 2d, d <= 4");
  }
  if (!all_finite(z) || !all_finite(z_tilde)) throw InvalidInput("coupled state: non-finite point");
  CoupledState s;
  s.d = static_cast<int>(z.size() / 2);
  s.time = time;
  for (int k = 0; k < s.d; ++k) {
    s.v[k] = z[k];
    s.y[k] = z[s.d + k];
    s.v_tilde[k] = z_tilde[k];
    s.y_tilde[k] = z_tilde[s.d + k];
  }
  return s;
}

bool CoupledState::merged() const {
  for (int k = 0; k < d; ++k) {
    if (v[k] != v_tilde[k] || y[k] != y_tilde[k]) return false;
  }
  return true;
}

double CoupledState::rho(const RotatedMetric& metric) const {
  SmallVec dv{}, dy{};
  for (int k = 0; k < d; ++k) {
    dv[k] = v[k] - v_tilde[k];
    dy[k] = y[k] - y_tilde[k];
  }
  return metric.rho({dv.data(), std::size_t(d)}, {dy.data(), std::size_t(d)});
}

void CoupledState::first(std::span<double> z) const {
  for (int k = 0; k < d; ++k) {
    z[k] = v[k];
    z[d + k] = y[k];
  }
}

void CoupledState::second(std::span<double> z) const {
  for (int k = 0; k < d; ++k) {
    z[k] = v_tilde[k];
    z[d + k] = y_tilde[k];
  }
}

void CouplingPolicy::validate() const {
  if (!(tau >= 0.0 && tau <= 2.0)) throw InvalidInput("coupling: tau must lie in [0, 2]");
  if (std::isnan(switch_threshold) || std::isnan(merge_tolerance)) {
    throw InvalidInput("coupling: thresholds must not be NaN");
  }
  if (!(far_radius > 0.0)) throw InvalidInput("coupling: far_radius must be positive");
}

CoupledState step_coupled(const KineticModel& model, const RotatedMetric& metric,
                          const CouplingPolicy& policy, const CoupledState& state, double dt,
                          std::span<const double> noise_v, std::span<const double> noise_y,
                          std::span<const double> noise_perp, double threshold, double merge_tol,
                          long long step) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("step_coupled: dt must be positive");
  const int d = state.d;
  if (d != model.d() || static_cast<int>(noise_v.size()) != d || static_cast<int>(noise_y.size()) != d) {
    throw InvalidInput("step_coupled: dimension mismatch");
  }
  const std::size_t ud = static_cast<std::size_t>(d);
  std::array<double, 2 * kMaxDim> z{}, zt{};
  SmallVec h{}, b{}, ht{}, bt{}, e{}, n2{};
  state.first({z.data(), 2 * ud});
  state.second({zt.data(), 2 * ud});
  model.drifts({z.data(), 2 * ud}, {h.data(), ud}, {b.data(), ud});
  model.drifts({zt.data(), 2 * ud}, {ht.data(), ud}, {bt.data(), ud});

  double exi = 0.0;
  for (int k = 0; k < d; ++k) {
    e[k] = (state.v[k] - state.v_tilde[k]) + metric.mu * (state.y[k] - state.y_tilde[k]);
    exi += e[k] * e[k];
  }
  exi = std::sqrt(exi);
  for (int k = 0; k < d; ++k) n2[k] = noise_v[k];
  bool couple = policy.tau > 0.0 && exi > threshold && state.rho(metric) <= policy.far_radius;
  if (couple) {
    double en = 0.0;
    for (int k = 0; k < d; ++k) {
      e[k] /= exi;
      en += e[k] * noise_v[k];
    }
    for (int k = 0; k < d; ++k) n2[k] -= policy.tau * e[k] * en;
    if (policy.tau < 2.0) {
      if (static_cast<int>(noise_perp.size()) != d) {
        throw InvalidInput("step_coupled: 0 < tau < 2 needs an independent noise_perp draw");
      }
      double ep = 0.0;
      for (int k = 0; k < d; ++k) ep += e[k] * noise_perp[k];
      double s = std::sqrt(std::max(0.0, 2.0 * policy.tau - policy.tau * policy.tau));
      for (int k = 0; k < d; ++k) n2[k] += s * e[k] * ep;
    }
  }

  const double sv = std::sqrt(2.0), sy = std::sqrt(2.0 * model.kappa());
  CoupledState out = state;
  for (int k = 0; k < d; ++k) {
    out.v[k] = state.v[k] - b[k] * dt + sv * noise_v[k];
    out.y[k] = state.y[k] + h[k] * dt + sy * noise_y[k];
    out.v_tilde[k] = state.v_tilde[k] - bt[k] * dt + sv * n2[k];
    out.y_tilde[k] = state.y_tilde[k] + ht[k] * dt + sy * noise_y[k];
  }
  out.time = state.time + dt;
  for (int k = 0; k < d; ++k) {
    if (!std::isfinite(out.v[k]) || !std::isfinite(out.y[k]) || !std::isfinite(out.v_tilde[k]) ||
        !std::isfinite(out.y_tilde[k])) {
      std::ostringstream os;
      os << "coupled step produced a non-finite state at step " << step;
      throw NonFiniteError(os.str(), step);
    }
  }
  if (!out.merged() && out.rho(metric) < merge_tol) {
    out.v_tilde = out.v;
    out.y_tilde = out.y;
  }
  return out;
}

CoupledState step_coupled(const KineticModel& model, const RotatedMetric& metric,
                          const CouplingPolicy& policy, const CoupledState& state, double dt,
                          std::span<const double> noise_v, std::span<const double> noise_y) {
  policy.validate();
  double threshold = policy.switch_threshold > 0.0 ? policy.switch_threshold : std::sqrt(dt);
  double merge = policy.merge_tolerance > 0.0 ? policy.merge_tolerance : 1e-9 * (1.0 + state.rho(metric));
  return step_coupled(model, metric, policy, state, dt, noise_v, noise_y, {}, threshold, merge);
}

double quantile(std::vector<double> data, double q) {
  if (data.empty()) throw InvalidInput("quantile of empty data");
  std::sort(data.begin(), data.end());
  double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(data.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, data.size() - 1);
  double f = pos - static_cast<double>(lo);
  return data[lo] + f * (data[hi] - data[lo]);
}

namespace {

std::vector<double> resolve_record_times(const EnsembleRun& run) {
  if (run.record_times.empty()) return {run.horizon};
  double prev = -1.0;
  for (double t : run.record_times) {
    if (!(t >= 0.0) || t > run.horizon * (1.0 + 1e-12) || t <= prev) {
      throw InvalidInput("ensemble: record_times must be increasing within [0, horizon]");
    }
    prev = t;
  }
  return run.record_times;
}

}  // namespace

EnsembleOutput run_ensemble(const KineticModel& model, const RotatedMetric& metric,
                            const CouplingPolicy& policy, const MeasureSampler& sampler_1,
                            const MeasureSampler& sampler_2, const EnsembleRun& run,
                            const SemimetricOptions& semi, std::size_t support_cap) {
  policy.validate();
  if (run.n_pairs < 1) throw InvalidInput("ensemble: n_pairs must be positive");
  if (!(run.dt > 0.0) || !(run.horizon > 0.0)) throw InvalidInput("ensemble: dt and horizon must be positive");
  const int d = model.d();
  const int n = 2 * d;
  if (sampler_1.dim() != n || sampler_2.dim() != n) throw InvalidInput("ensemble: sampler dimension must be 2d");
  if (semi.phi && semi.phi->dim() != n) throw InvalidInput("ensemble: phi dimension mismatch");
  const std::vector<double> times = resolve_record_times(run);
  const std::size_t N = static_cast<std::size_t>(run.n_pairs);
  const std::size_t R = times.size();
  const std::size_t stride = 2 * static_cast<std::size_t>(n);
  const double threshold = policy.switch_threshold > 0.0 ? policy.switch_threshold : std::sqrt(run.dt);

  // Initial clouds and the stiffness guard.
  std::vector<double> init(N * stride);
  parallel_for(N, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      sampler_1.sample(run.seed, i, {init.data() + i * stride, std::size_t(n)});
      sampler_2.sample(run.seed, i, {init.data() + i * stride + n, std::size_t(n)});
    }
  });
  double zmax = 0.0;
  for (std::size_t i = 0; i < 2 * N; ++i) zmax = std::max(zmax, norm2({init.data() + i * n, std::size_t(n)}));
  const double stiff = run.dt * (model.ell_H() + model.ell_B()) * zmax;
  if (stiff > 0.1) {
    std::ostringstream os;
    os << "ensemble: dt (ell_H + ell_B) max|z| = " << stiff << " exceeds 0.1";
    throw CflError(os.str(), 0.1 / ((model.ell_H() + model.ell_B()) * zmax));
  }

  std::vector<double> snap(R * N * stride);
  std::vector<long long> steps_of(N, 0);
  const bool perp = policy.tau > 0.0 && policy.tau < 2.0;
  parallel_for(N, [&](std::size_t b, std::size_t e) {
    SmallVec nv{}, ny{}, np{};
    const std::size_t ud = static_cast<std::size_t>(d);
    for (std::size_t i = b; i < e; ++i) {
      const double* z0 = init.data() + i * stride;
      CoupledState s = CoupledState::from_points({z0, std::size_t(n)}, {z0 + n, std::size_t(n)});
      const double merge = policy.merge_tolerance > 0.0 ? policy.merge_tolerance : 1e-9 * (1.0 + s.rho(metric));
      if (!s.merged() && s.rho(metric) < merge) {
        s.v_tilde = s.v;
        s.y_tilde = s.y;
      }
      Stream rng(run.seed, i, 0xc0de);
      long long step = 0;
      for (std::size_t r = 0; r < R; ++r) {
        const double tr = times[r];
        while (s.time < tr - 1e-12 * std::max(1.0, tr)) {
          double h = std::min(run.dt, tr - s.time);
          if (tr - (s.time + h) < 1e-9 * run.dt) h = tr - s.time;
          const double sq = std::sqrt(h);
          for (int k = 0; k < d; ++k) nv[k] = sq * rng.normal();
          if (model.kappa() > 0.0) {
            for (int k = 0; k < d; ++k) ny[k] = sq * rng.normal();
          }
          if (perp) {
            for (int k = 0; k < d; ++k) np[k] = sq * rng.normal();
          }
          try {
            s = step_coupled(model, metric, policy, s, h, {nv.data(), ud}, {ny.data(), ud},
                             {np.data(), perp ? ud : 0}, threshold, merge, step);
          } catch (const NonFiniteError&) {
            std::ostringstream os;
            os << "ensemble: pair " << i << " blew up at step " << step;
            throw NonFiniteError(os.str(), step, static_cast<long long>(i));
          }
          ++step;
        }
        s.time = tr;
        double* out = snap.data() + (r * N + i) * stride;
        s.first({out, std::size_t(n)});
        s.second({out + n, std::size_t(n)});
      }
      steps_of[i] = step;
    }
  }, 16);

  EnsembleOutput result;
  result.switch_threshold = threshold;
  result.steps = steps_of[0];
  result.w1_pairs = std::min<std::size_t>(N, support_cap / 2);
  ConstantFunction one(n, 1.0);
  const TestFunction& phi = semi.phi ? *semi.phi : static_cast<const TestFunction&>(one);
  for (std::size_t r = 0; r < R; ++r) {
    EnsembleRecord rec;
    rec.time = times[r];
    std::vector<double> rhos(N), gs(N);
    std::size_t merged = 0;
    const double* base = snap.data() + r * N * stride;
    for (std::size_t i = 0; i < N; ++i) {
      const double* z = base + i * stride;
      CoupledState s = CoupledState::from_points({z, std::size_t(n)}, {z + n, std::size_t(n)});
      rhos[i] = s.rho(metric);
      gs[i] = semimetric(semi.K, semi.L, semi.psi, phi, metric, {z, std::size_t(n)},
                         {z + n, std::size_t(n)});
      if (s.merged()) ++merged;
    }
    double sr = 0.0, sg = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      sr += rhos[i];
      sg += gs[i];
    }
    rec.mean_rho = sr / N;
    rec.mean_G = sg / N;
    rec.q10_rho = quantile(rhos, 0.1);
    rec.q90_rho = quantile(rhos, 0.9);
    rec.coalesced_frac = static_cast<double>(merged) / N;

    rec.mean_first = Vector::Zero(n);
    rec.mean_second = Vector::Zero(n);
    for (std::size_t i = 0; i < N; ++i) {
      for (int k = 0; k < n; ++k) {
        rec.mean_first[k] += base[i * stride + k];
        rec.mean_second[k] += base[i * stride + n + k];
      }
    }
    rec.mean_first /= static_cast<double>(N);
    rec.mean_second /= static_cast<double>(N);
    rec.cov_first = Matrix::Zero(n, n);
    Vector var2 = Vector::Zero(n);
    for (std::size_t i = 0; i < N; ++i) {
      for (int a = 0; a < n; ++a) {
        double da = base[i * stride + a] - rec.mean_first[a];
        for (int c = 0; c < n; ++c) rec.cov_first(a, c) += da * (base[i * stride + c] - rec.mean_first[c]);
        double db = base[i * stride + n + a] - rec.mean_second[a];
        var2[a] += db * db;
      }
    }
    const double denom = N > 1 ? static_cast<double>(N - 1) : 1.0;
    rec.cov_first /= denom;
    var2 /= denom;
    rec.se_first = Vector(n);
    rec.se_second = Vector(n);
    for (int a = 0; a < n; ++a) {
      rec.se_first[a] = std::sqrt(rec.cov_first(a, a) / N);
      rec.se_second[a] = std::sqrt(var2[a] / N);
    }

    const std::size_t M = result.w1_pairs;
    std::vector<double> p1(M * n), p2(M * n);
    for (std::size_t i = 0; i < M; ++i) {
      for (int k = 0; k < n; ++k) {
        p1[i * n + k] = base[i * stride + k];
        p2[i * n + k] = base[i * stride + n + k];
      }
    }
    rec.w1 = wasserstein1_exact(EmpiricalMeasure::uniform(n, std::move(p1)),
                                EmpiricalMeasure::uniform(n, std::move(p2)), support_cap);
    result.records.push_back(std::move(rec));
  }
  return result;
}

DecayFit fit_decay(const std::vector<std::pair<double, double>>& series, double t_min, double t_max) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [t, v] : series) {
    if (!std::isfinite(t) || !std::isfinite(v)) throw InvalidInput("fit_decay: non-finite point");
    if (t < t_min || t > t_max) continue;
    if (!(v > 0.0)) throw InvalidInput("fit_decay: values must be positive");
    pts.emplace_back(t, std::log(v));
  }
  if (pts.size() < 4) throw InvalidInput("fit_decay: need at least 4 points in the window");
  const double m = static_cast<double>(pts.size());
  double st = 0.0, sl = 0.0;
  for (const auto& [t, l] : pts) {
    st += t;
    sl += l;
  }
  const double tb = st / m, lb = sl / m;
  double stt = 0.0, stl = 0.0, sll = 0.0;
  for (const auto& [t, l] : pts) {
    stt += (t - tb) * (t - tb);
    stl += (t - tb) * (l - lb);
    sll += (l - lb) * (l - lb);
  }
  if (!(stt > 0.0)) throw InvalidInput("fit_decay: times must not all coincide");
  const double slope = stl / stt;
  const double icpt = lb - slope * tb;
  double ssr = 0.0;
  for (const auto& [t, l] : pts) {
    double r = l - (icpt + slope * t);
    ssr += r * r;
  }
  DecayFit fit;
  fit.omega = -slope;
  fit.K = std::exp(icpt);
  fit.points = static_cast<int>(pts.size());
  // A constant series is fitted exactly.
  fit.r2 = sll > 1e-300 ? 1.0 - ssr / sll : 1.0;
  return fit;
}

}  // namespace hypoflow
