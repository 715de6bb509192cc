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

#include "hypoflow/grid.hpp"

#include "hypoflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <sstream>

namespace hypoflow {

Boundary boundary_from_name(const std::string& name) {
  if (name == "neumann_copy") return Boundary::neumann_copy;
  if (name == "dirichlet_extrapolate") return Boundary::dirichlet_extrapolate;
  throw InvalidInput("unknown boundary '" + name + "' (expected neumann_copy or dirichlet_extrapolate)");
}

std::string boundary_name(Boundary b) {
  return b == Boundary::neumann_copy ? "neumann_copy" : "dirichlet_extrapolate";
}

namespace {

// du_i/dt = center_i u_i + sum_k coef[i,k] u[nbr[i,k]], two neighbours per axis.
struct Stencil {
  int width = 0;
  std::vector<double> center;
  std::vector<double> coef;
  std::vector<std::uint32_t> nbr;
  double max_rate = 0.0;
};

void require_grid_model(const KineticModel& model, const Grid& grid) {
  if (model.d() != grid.d) throw InvalidInput("grid dimension does not match the model");
  if (!model.diffusion().is_identity()) {
    throw InvalidInput("grid solvers support only the identity velocity diffusion");
  }
}

Stencil build_stencil(const KineticModel& model, const Grid& g, SchemeKind kind, Boundary boundary) {
  require_grid_model(model, g);
  const int D = g.axes(), d = g.d;
  const std::size_t N = g.size();
  Stencil s;
  s.width = 2 * D;
  s.center.assign(N, 0.0);
  s.coef.assign(N * s.width, 0.0);
  s.nbr.resize(N * s.width);
  const double kappa = model.kappa();

  parallel_for(N, [&](std::size_t begin, std::size_t end) {
    std::array<int, 2 * kMaxDim> m{};
    std::array<double, 2 * kMaxDim> z{}, zf{};
    SmallVec hv{}, bv{};
    std::span<double> zs(z.data(), D), zfs(zf.data(), D);
    for (std::size_t i = begin; i < end; ++i) {
      g.unflatten(i, {m.data(), std::size_t(D)});
      g.node(i, zs);
      double* cf = &s.coef[i * s.width];
      std::uint32_t* nb = &s.nbr[i * s.width];
      double& c = s.center[i];
      if (kind == SchemeKind::adjoint) model.drifts(zs, {hv.data(), std::size_t(d)}, {bv.data(), std::size_t(d)});
      for (int a = 0; a < D; ++a) {
        const bool is_v = a < d;
        const double h = g.h(a);
        const double diff = is_v ? 1.0 : kappa;
        const std::size_t st = g.stride(a);
        const bool has_lo = m[a] > 0, has_hi = m[a] < g.n(a) - 1;
        nb[2 * a] = static_cast<std::uint32_t>(has_lo ? i - st : i);
        nb[2 * a + 1] = static_cast<std::uint32_t>(has_hi ? i + st : i);
        double& lo = cf[2 * a];
        double& hi = cf[2 * a + 1];
        if (kind == SchemeKind::adjoint) {
          // u_t + c.grad u = 0 with c = (B, -H); upwind against c.
          double vel = is_v ? bv[a] : -hv[a - d];
          double r_lo = diff / (h * h) + std::max(vel, 0.0) / h;
          double r_hi = diff / (h * h) + std::max(-vel, 0.0) / h;
          if (has_lo) {
            lo += r_lo;
            c -= r_lo;
          } else if (boundary == Boundary::dirichlet_extrapolate && has_hi) {
            // ghost = 2 u_0 - u_1
            c += r_lo;
            hi -= r_lo;
          }
          if (has_hi) {
            hi += r_hi;
            c -= r_hi;
          } else if (boundary == Boundary::dirichlet_extrapolate && has_lo) {
            c += r_hi;
            lo -= r_hi;
          }
        } else {
          // Face velocity: -B on v-axes, H on y-axes, evaluated at the face
          // midpoint computed from the face index so both neighbours agree.
          auto face_velocity = [&](int face) {
            std::copy(z.begin(), z.begin() + D, zf.begin());
            zf[a] = -g.L(a) + face * h;
            SmallVec fh{}, fb{};
            model.drifts(zfs, {fh.data(), std::size_t(d)}, {fb.data(), std::size_t(d)});
            return is_v ? -fb[a] : fh[a - d];
          };
          if (has_hi) {
            double w = face_velocity(m[a] + 1);
            c += -std::max(w, 0.0) / h - diff / (h * h);
            hi += -std::min(w, 0.0) / h + diff / (h * h);
          }
          if (has_lo) {
            double w = face_velocity(m[a]);
            c += std::min(w, 0.0) / h - diff / (h * h);
            lo += std::max(w, 0.0) / h + diff / (h * h);
          }
        }
      }
    }
  });
  for (std::size_t i = 0; i < N; ++i) {
    double out = -s.center[i];
    if (!std::isfinite(out)) throw NonFiniteError("stencil: non-finite drift on the grid", 0, static_cast<long long>(i));
    s.max_rate = std::max(s.max_rate, out);
  }
  return s;
}

std::vector<double> resolve_records(const SolverParams& p) {
  if (!(p.t_end > 0.0) || !std::isfinite(p.t_end)) throw InvalidInput("solver: t_end must be positive");
  if (!(p.cfl_safety > 0.0 && p.cfl_safety <= 1.0)) throw InvalidInput("solver: cfl_safety must lie in (0, 1]");
  if (!(p.dt > 0.0) || !std::isfinite(p.dt)) throw InvalidInput("solver: dt must be positive");
  std::vector<double> rec = p.record_times;
  if (rec.empty()) rec.push_back(p.t_end);
  if (!std::is_sorted(rec.begin(), rec.end())) throw InvalidInput("solver: record_times must be sorted");
  if (rec.front() < 0.0 || rec.back() > p.t_end * (1.0 + 1e-12)) {
    throw InvalidInput("solver: record_times must lie in [0, t_end]");
  }
  return rec;
}

void check_cfl(const Stencil& s, const SolverParams& p) {
  double limit = s.max_rate > 0.0 ? p.cfl_safety / s.max_rate : std::numeric_limits<double>::infinity();
  if (p.dt > limit) {
    std::ostringstream os;
    os << "solver: dt = " << p.dt << " violates the CFL bound; admissible dt <= " << limit
       << " (cfl_safety " << p.cfl_safety << ", max stencil rate " << s.max_rate << ")";
    throw CflError(os.str(), limit);
  }
}

template <class AfterStep>
std::vector<Field> march(const Stencil& s, const Field& init, const SolverParams& p,
                         const std::vector<double>& rec, SolveStats* stats, AfterStep after_step) {
  const std::size_t N = init.values.size();
  const int W = s.width;
  std::vector<double> u = init.values, next(N);
  std::vector<Field> out;
  double t = 0.0;
  std::size_t r = 0;
  auto record_due = [&]() {
    while (r < rec.size() && rec[r] <= t + 1e-12 * std::max(1.0, t)) {
      out.push_back(Field{init.grid, u, rec[r]});
      ++r;
    }
  };
  record_due();
  long long step = 0;
  while (r < rec.size()) {
    double h = std::min(p.dt, rec[r] - t);
    bool lands = h >= rec[r] - t;
    std::atomic<long long> bad{-1};
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const double* cf = &s.coef[i * W];
        const std::uint32_t* nb = &s.nbr[i * W];
        double acc = s.center[i] * u[i];
        for (int k = 0; k < W; ++k) acc += cf[k] * u[nb[k]];
        double x = u[i] + h * acc;
        next[i] = x;
        if (!std::isfinite(x)) {
          long long expected = -1;
          bad.compare_exchange_strong(expected, static_cast<long long>(i));
        }
      }
    });
    ++step;
    if (bad.load() >= 0) {
      std::ostringstream os;
      os << "solver: non-finite value at step " << step << ", node " << bad.load();
      throw NonFiniteError(os.str(), step, bad.load());
    }
    u.swap(next);
    t = lands ? rec[r] : t + h;
    after_step(u, step);
    record_due();
  }
  if (stats) {
    stats->steps = step;
    stats->max_rate = s.max_rate;
  }
  return out;
}

}  // namespace

double admissible_dt(const KineticModel& model, const Grid& grid, SchemeKind kind, Boundary boundary,
                     double cfl_safety) {
  Stencil s = build_stencil(model, grid, kind, boundary);
  if (s.max_rate <= 0.0) return std::numeric_limits<double>::infinity();
  return cfl_safety / s.max_rate;
}

std::vector<Field> solve_adjoint(const KineticModel& model, const Field& u0,
                                 const SolverParams& params, SolveStats* stats) {
  auto rec = resolve_records(params);
  Field init = Field::create(u0.grid, u0.values, 0.0);
  Stencil s = build_stencil(model, init.grid, SchemeKind::adjoint, params.boundary);
  check_cfl(s, params);
  const double lo = init.min() - 1e-12, hi = init.max() + 1e-12;
  auto out = march(s, init, params, rec, stats, [](const std::vector<double>&, long long) {});
  if (params.boundary == Boundary::neumann_copy) {
    for (const auto& f : out) {
      if (f.min() < lo || f.max() > hi) {
        throw SchemeFailure("adjoint solver: discrete maximum principle violated");
      }
    }
  }
  return out;
}

Field normalize_density(const Field& m) {
  double mass = m.integral();
  if (!(mass > 0.0)) throw InvalidInput("density has no positive mass");
  Field out = m;
  for (double& x : out.values) {
    if (x < 0.0) throw InvalidInput("density must be nonnegative");
    x /= mass;
  }
  return out;
}

std::vector<Field> solve_fokker_planck(const KineticModel& model, const Field& m0,
                                       const SolverParams& params, SolveStats* stats) {
  auto rec = resolve_records(params);
  Field init = Field::create(m0.grid, m0.values, 0.0);
  if (init.min() < 0.0) throw InvalidInput("fokker-planck: initial density must be nonnegative");
  const double vol = init.grid.cell_volume();
  const double mass0 = init.integral();
  if (std::abs(mass0 - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "fokker-planck: initial mass " << mass0 << " is not 1 (normalize the density first)";
    throw InvalidInput(os.str());
  }
  Stencil s = build_stencil(model, init.grid, SchemeKind::fokker_planck, params.boundary);
  check_cfl(s, params);
  double prev_mass = mass0, worst_drift = 0.0;
  auto after = [&](const std::vector<double>& m, long long step) {
    double lo = *std::min_element(m.begin(), m.end());
    if (lo < -1e-12) {
      std::ostringstream os;
      os << "fokker-planck: negative density " << lo << " at step " << step;
      throw SchemeFailure(os.str());
    }
    double sum = 0.0, c = 0.0;
    for (double x : m) {
      double t = sum + x;
      c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
      sum = t;
    }
    double mass = (sum + c) * vol;
    double drift = std::abs(mass - prev_mass);
    worst_drift = std::max(worst_drift, drift);
    if (drift > 1e-12) {
      std::ostringstream os;
      os << "fokker-planck: mass changed by " << drift << " at step " << step;
      throw SchemeFailure(os.str());
    }
    prev_mass = mass;
  };
  auto out = march(s, init, params, rec, stats, after);
  if (stats) stats->max_mass_drift = worst_drift;
  return out;
}

DualityResult duality_check(const KineticModel& model, const Field& m0, const Field& zeta, double t,
                            const SolverParams& params) {
  if (!(m0.grid == zeta.grid)) throw InvalidInput("duality: m0 and zeta live on different grids");
  SolverParams p = params;
  p.t_end = t;
  p.record_times = {t};
  auto m = solve_fokker_planck(model, m0, p);
  auto u = solve_adjoint(model, zeta, p);
  const double vol = m0.grid.cell_volume();
  DualityResult r;
  for (std::size_t i = 0; i < m0.values.size(); ++i) {
    r.lhs += zeta.values[i] * m.back().values[i];
    r.rhs += u.back().values[i] * m0.values[i];
  }
  r.lhs *= vol;
  r.rhs *= vol;
  r.gap = std::abs(r.lhs - r.rhs);
  return r;
}

std::vector<std::pair<double, double>> villani_functional(const std::vector<Field>& series,
                                                          double lambda, double eps, double delta,
                                                          double margin) {
  if (!(eps * eps < delta)) throw InvalidInput("villani: need eps^2 < delta so that W > 0");
  if (!(lambda > 0.0)) throw InvalidInput("villani: lambda must be positive");
  std::vector<std::pair<double, double>> out;
  for (const auto& f : series) {
    const Grid& g = f.grid;
    const double t = f.time;
    std::array<double, 2 * kMaxDim> gr{};
    double sup = -std::numeric_limits<double>::infinity();
    for (std::size_t i : interior_nodes(g, margin)) {
      node_gradient(f, i, {gr.data(), std::size_t(g.axes())});
      double vv = 0.0, vy = 0.0, yy = 0.0;
      for (int a = 0; a < g.d; ++a) {
        vv += gr[a] * gr[a];
        vy += gr[a] * gr[g.d + a];
        yy += gr[g.d + a] * gr[g.d + a];
      }
      double u = f.values[i];
      double w = 0.5 * (lambda * u * u + t * vv - 2.0 * eps * t * t * vy + delta * t * t * t * yy);
      sup = std::max(sup, w);
    }
    out.emplace_back(t, sup);
  }
  return out;
}

double weighted_gradient_ratio(const Field& u0, const Field& ut, const TestFunction& phi,
                               double margin) {
  if (!(u0.grid == ut.grid)) throw InvalidInput("weighted_gradient_ratio: grid mismatch");
  const Grid& g = u0.grid;
  if (phi.dim() != g.axes()) throw InvalidInput("weighted_gradient_ratio: phi dimension mismatch");
  std::vector<double> z(g.axes());
  double norm0 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.node(i, z);
    norm0 = std::max(norm0, std::abs(u0.values[i]) / phi.value(z));
  }
  if (norm0 == 0.0) return 0.0;
  std::array<double, 2 * kMaxDim> gr{};
  double sup = 0.0;
  for (std::size_t i : interior_nodes(g, margin)) {
    node_gradient(ut, i, {gr.data(), std::size_t(g.axes())});
    g.node(i, z);
    double gv = 0.0;
    for (int a = 0; a < g.d; ++a) gv += gr[a] * gr[a];
    sup = std::max(sup, std::sqrt(gv) * std::sqrt(ut.time) / (phi.value(z) * norm0));
  }
  return sup;
}

// ----------------------------------------------------------------- calc-hyp

namespace {

struct Quadratic {
  double F_t = 0.0;
  Vector grad;
  Matrix hess;
};

// (d_t + L) F from the time derivative, gradient and Hessian of F.
double generator_of(const KineticModel& model, const Quadratic& q, const Matrix& a, const Vector& H,
                    const Vector& B) {
  const int d = model.d();
  double val = -(a * q.hess.topLeftCorner(d, d)).trace() - model.kappa() * q.hess.bottomRightCorner(d, d).trace();
  val += -H.dot(q.grad.tail(d)) + B.dot(q.grad.head(d));
  return q.F_t + val;
}

}  // namespace

std::array<double, 4> calc_hyp_residuals(const KineticModel& model, const SpaceTimeFunction& u,
                                         double t, std::span<const double> z) {
  const int d = model.d();
  const int n = 2 * d;
  if (u.dim != n || static_cast<int>(z.size()) != n) throw InvalidInput("calc_hyp: dimension mismatch");
  if (!u.provides_hessian || !u.jet) throw InvalidInput("calc_hyp: u must provide second derivatives");
  Jet j = u.jet(t, z);
  if (j.grad.size() != n || j.grad_t.size() != n || j.hess.rows() != n || j.hess.cols() != n) {
    throw InvalidInput("calc_hyp: jet has wrong dimensions");
  }
  std::vector<double> T(n * n * n, 0.0);
  if (u.provides_third) {
    if (static_cast<int>(j.third.size()) != n * n * n) throw InvalidInput("calc_hyp: third derivatives missing");
    T = j.third;
  } else {
    std::vector<double> zp(z.begin(), z.end()), zm(z.begin(), z.end());
    for (int k = 0; k < n; ++k) {
      double h = 1e-4 * std::max(1.0, std::abs(z[k]));
      zp[k] = z[k] + h;
      zm[k] = z[k] - h;
      Matrix hp = u.jet(t, zp).hess, hm = u.jet(t, zm).hess;
      zp[k] = zm[k] = z[k];
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) T[a * n * n + b * n + k] = (hp(a, b) - hm(a, b)) / (2.0 * h);
    }
  }
  auto third = [&](int a, int b, int c) { return T[a * n * n + b * n + c]; };

  auto v = z.subspan(0, d), y = z.subspan(d, d);
  DriftValue dv = drift_field(model, z);
  Matrix JH = model.H().jacobian(v, y), JB = model.B().jacobian(v, y);
  Matrix HvJ = JH.leftCols(d), HyJ = JH.rightCols(d), BvJ = JB.leftCols(d), ByJ = JB.rightCols(d);
  Matrix A = model.diffusion().matrix(v, d);
  std::vector<Matrix> dA(d);
  for (int k = 0; k < d; ++k) dA[k] = model.diffusion().derivative(v, d, k);
  const double kappa = model.kappa();
  const Vector& g = j.grad;
  const Vector& gt = j.grad_t;
  const Matrix& Hs = j.hess;
  Vector gv = g.head(d), gy = g.tail(d);

  // (i) F = u^2
  Quadratic q1;
  q1.F_t = 2.0 * j.u * j.u_t;
  q1.grad = 2.0 * j.u * g;
  q1.hess = 2.0 * (g * g.transpose() + j.u * Hs);
  double lhs1 = 0.5 * generator_of(model, q1, A, dv.H, dv.B);
  double rhs1 = -gv.dot(A * gv) - kappa * gy.squaredNorm();

  // (ii) F = |grad_v u|^2, (iv) F = |grad_y u|^2, (iii) F = grad_v u . grad_y u
  Quadratic q2, q3, q4;
  q2.grad = Vector::Zero(n);
  q3.grad = Vector::Zero(n);
  q4.grad = Vector::Zero(n);
  q2.hess = Matrix::Zero(n, n);
  q3.hess = Matrix::Zero(n, n);
  q4.hess = Matrix::Zero(n, n);
  for (int k = 0; k < d; ++k) {
    q2.F_t += 2.0 * g[k] * gt[k];
    q4.F_t += 2.0 * g[d + k] * gt[d + k];
    q3.F_t += gt[k] * g[d + k] + g[k] * gt[d + k];
    for (int a = 0; a < n; ++a) {
      q2.grad[a] += 2.0 * g[k] * Hs(k, a);
      q4.grad[a] += 2.0 * g[d + k] * Hs(d + k, a);
      q3.grad[a] += Hs(k, a) * g[d + k] + g[k] * Hs(d + k, a);
      for (int b = 0; b < n; ++b) {
        q2.hess(a, b) += 2.0 * (Hs(k, a) * Hs(k, b) + g[k] * third(k, a, b));
        q4.hess(a, b) += 2.0 * (Hs(d + k, a) * Hs(d + k, b) + g[d + k] * third(d + k, a, b));
        q3.hess(a, b) += third(k, a, b) * g[d + k] + Hs(k, a) * Hs(d + k, b) + Hs(k, b) * Hs(d + k, a) +
                         g[k] * third(d + k, a, b);
      }
    }
  }
  double lhs2 = 0.5 * generator_of(model, q2, A, dv.H, dv.B);
  double lhs3 = generator_of(model, q3, A, dv.H, dv.B);
  double lhs4 = 0.5 * generator_of(model, q4, A, dv.H, dv.B);

  Matrix Hvv = Hs.topLeftCorner(d, d), Hvy = Hs.topRightCorner(d, d), Hyy = Hs.bottomRightCorner(d, d);
  double rhs2 = 0.0, rhs3 = 0.0, rhs4 = 0.0;
  for (int k = 0; k < d; ++k) {
    Vector col_vk = Hvv.col(k);      // grad_v u_{v_k}
    Vector col_yk = Hvy.col(k);      // grad_v u_{y_k}
    rhs2 -= col_vk.dot(A * col_vk);
    rhs4 -= col_yk.dot(A * col_yk);
    for (int i = 0; i < d; ++i)
      for (int jj = 0; jj < d; ++jj) {
        rhs2 += dA[k](i, jj) * g[k] * Hvv(i, jj);
        rhs3 += dA[k](i, jj) * g[d + k] * Hvv(i, jj) - 2.0 * A(i, jj) * Hvv(i, k) * Hvy(jj, k);
      }
  }
  rhs2 += gy.dot(HvJ * gv) - gv.dot(BvJ * gv) - kappa * Hvy.squaredNorm();
  rhs3 += -2.0 * kappa * (Hvy.array() * Hyy.array()).sum() + gy.dot(HvJ * gy) + gy.dot(HyJ * gv) -
          gv.dot(BvJ * gy) - gv.dot(ByJ * gv);
  rhs4 += gy.dot(HyJ * gy) - gv.dot(ByJ * gy) - kappa * Hyy.squaredNorm();

  return {std::abs(lhs1 - rhs1), std::abs(lhs2 - rhs2), std::abs(lhs3 - rhs3), std::abs(lhs4 - rhs4)};
}

}  // namespace hypoflow
