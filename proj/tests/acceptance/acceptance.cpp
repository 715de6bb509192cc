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


// Acceptance run: one PASS/FAIL line per criterion with its wall time.
// Criteria 1-8 run the shipped experiment files; criterion 9 runs the
// property checks in-process.

#include "hypoflow/coupling.hpp"
#include "hypoflow/experiments.hpp"
#include "hypoflow/grid.hpp"
#include "hypoflow/oracles.hpp"
#include "hypoflow/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hypoflow;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Line {
  int id;
  std::string name;
  double budget;
  Outcome outcome;
  double seconds;
};

std::string config_path(const std::string& name) { return std::string(HYPOFLOW_SOURCE_DIR) + "/configs/" + name; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Passes when every named criterion of the result passed.
Outcome select(const ExperimentResult& res, const std::vector<std::string>& names) {
  Outcome o{true, ""};
  for (const auto& want : names) {
    auto it = std::find_if(res.criteria.begin(), res.criteria.end(), [&](const Criterion& c) { return c.name == want; });
    if (!o.detail.empty()) o.detail += "; ";
    if (it == res.criteria.end()) {
      o.passed = false;
      o.detail += want + ": missing";
      continue;
    }
    o.passed = o.passed && it->passed;
    o.detail += want + ": " + it->detail;
  }
  return o;
}

struct Timed {
  ExperimentResult result;
  double seconds = 0.0;
};

Timed run_config(const std::string& name, const std::function<void(ExperimentConfig&)>& tweak = {}) {
  auto cfg = ExperimentConfig::load(config_path(name));
  if (tweak) tweak(cfg);
  auto t0 = std::chrono::steady_clock::now();
  Timed t;
  t.result = compute_experiment(cfg);
  t.seconds = seconds_since(t0);
  return t;
}

// ---- criterion 9

std::vector<double> normals(std::mt19937_64& g, int n, double s = 1.0) {
  std::normal_distribution<double> N(0.0, s);
  std::vector<double> out(n);
  for (auto& x : out) x = N(g);
  return out;
}

Matrix m1(double x) { return Matrix::Constant(1, 1, x); }

KineticModel linear(double kappa, double hv, double hy, double bv, double by) {
  return KineticModel::create(1, kappa, DriftSpec::linear(m1(hv), m1(hy)), DriftSpec::linear(m1(bv), m1(by)));
}

bool rho_axioms(std::string& why) {
  auto m = RotatedMetric::create(2.0, 20.0);
  std::mt19937_64 g(901);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  auto rho = [&](const std::vector<double>& z) { return m.rho({z.data(), 2}, {z.data() + 2, 2}); };
  for (int k = 0; k < 10000; ++k) {
    auto a = normals(g, 4, 2.0), b = normals(g, 4, 2.0);
    const double c = U(g);
    std::vector<double> s(4), sc(4);
    for (int i = 0; i < 4; ++i) {
      s[i] = a[i] + b[i];
      sc[i] = c * a[i];
    }
    const double ra = rho(a), rb = rho(b);
    if (rho(s) > (ra + rb) * (1 + 1e-12) || std::abs(rho(sc) - std::abs(c) * ra) > 1e-12 * (1 + std::abs(c) * ra) ||
        std::hypot(a[0], a[1]) + std::hypot(a[2], a[3]) > ra * (1 + 1e-12)) {
      why = "rho axiom violated";
      return false;
    }
  }
  return true;
}

bool psi_bounds(std::string& why) {
  for (double c2 : {1.0, 3.0, 10.0}) {
    for (double theta : {0.25, 0.5, 1.0}) {
      auto p = PsiProfile::exponential(c2, theta);
      for (int e = -3; e <= 3; ++e) {
        for (double mant : {1.0, 2.0, 5.0}) {
          const double r = mant * std::pow(10.0, e);
          if (p.value(r) < 0.5 * std::min(c2 * std::pow(r, theta), 1.0) - 1e-15) {
            why = "psi lower bound violated";
            return false;
          }
          const double a = 0.5 * r, b = 1.5 * r;
          if (p.value(r) < 0.5 * (p.value(a) + p.value(b)) - 1e-14) {
            why = "psi concavity violated";
            return false;
          }
        }
      }
    }
  }
  return true;
}

bool reflection_unitarity(std::string& why) {
  auto model = KineticModel::create(2, 0.0, DriftSpec::zero(2), DriftSpec::zero(2));
  auto metric = RotatedMetric::create(2.0, 20.0);
  CouplingPolicy p;
  p.tau = 2.0;
  std::mt19937_64 g(902);
  for (int k = 0; k < 1000; ++k) {
    auto z = normals(g, 4, 2.0), zt = normals(g, 4, 2.0), nv = normals(g, 2, 0.1);
    std::vector<double> ny(2, 0.0);
    auto s = CoupledState::from_points(z, zt);
    auto out = step_coupled(model, metric, p, s, 1e-6, nv, ny);
    const double moved = std::hypot(out.v_tilde[0] - s.v_tilde[0], out.v_tilde[1] - s.v_tilde[1]);
    if (std::abs(moved - std::sqrt(2.0) * std::hypot(nv[0], nv[1])) > 1e-12 * (1 + moved)) {
      why = "reflection changed the noise magnitude";
      return false;
    }
  }
  return true;
}

bool w1_properties(std::string& why) {
  std::mt19937_64 g(903);
  auto cloud = [&](int n, double shift) {
    auto pts = normals(g, 2 * n);
    for (int i = 0; i < n; ++i) pts[2 * i] += shift;
    return EmpiricalMeasure::uniform(2, pts);
  };
  for (int k = 0; k < 20; ++k) {
    auto a = cloud(60, 0.5), b = cloud(60, 0.0), c = cloud(60, -1.0);
    if (wasserstein1_exact(a, c) > wasserstein1_exact(a, b) + wasserstein1_exact(b, c) + 1e-9) {
      why = "W1 triangle inequality violated";
      return false;
    }
  }
  for (int n : {7, 100, 500}) {
    auto x = normals(g, n), y = normals(g, n, 2.0);
    const double got = wasserstein1_exact(EmpiricalMeasure::uniform(1, x), EmpiricalMeasure::uniform(1, y));
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double ref = 0.0;
    for (int i = 0; i < n; ++i) ref += std::abs(x[i] - y[i]);
    ref /= n;
    if (std::abs(got - ref) > 1e-12 * (1 + ref)) {
      why = "W1 differs from the sorted-samples formula";
      return false;
    }
  }
  return true;
}

bool calc_hyp(std::string& why) {
  auto model = linear(0.0, 1, 0, 1, 1);
  auto mats = LinearModelMatrices::from_model(model);
  Vector a0(2);
  a0 << 1.0, 0.3;
  SpaceTimeFunction u;
  u.jet = [&](double t, std::span<const double> z) {
    Vector c = linear_adjoint_solution(mats, a0, t);
    Vector ct = mats.A.transpose() * c;
    Jet j;
    j.u = c(0) * z[0] + c(1) * z[1];
    j.u_t = ct(0) * z[0] + ct(1) * z[1];
    j.grad = c;
    j.grad_t = ct;
    j.hess = Matrix::Zero(2, 2);
    j.third.assign(8, 0.0);
    return j;
  };
  std::mt19937_64 g(904);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    auto z = normals(g, 2, 2.0);
    for (double r : calc_hyp_residuals(model, u, 0.1 * k, z)) worst = std::max(worst, r);
  }
  if (worst > 1e-8) {
    why = "calc-hyp residual " + std::to_string(worst);
    return false;
  }
  return true;
}

bool max_principle(std::string& why) {
  std::mt19937_64 g(905);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    auto model = linear(0.5 * (U(g) + 1.0), 1.0 + 0.5 * U(g), U(g), 1.0 + 0.5 * U(g), U(g));
    auto grid = Grid::create(1, 3.0, 3.0, 24, 24);
    auto u0 = Field::create(grid, normals(g, static_cast<int>(grid.size())));
    SolverParams p;
    p.t_end = 0.5;
    p.dt = admissible_dt(model, grid, SchemeKind::adjoint);
    p.record_times = {0.1, 0.25, 0.5};
    for (const auto& f : solve_adjoint(model, u0, p)) {
      if (f.max() > u0.max() + 1e-12 || f.min() < u0.min() - 1e-12) {
        why = "maximum principle violated";
        return false;
      }
    }
  }
  return true;
}

Outcome property_suites() {
  const std::vector<std::pair<const char*, bool (*)(std::string&)>> suites = {
      {"rho norm axioms", rho_axioms},         {"psi bounds", psi_bounds},
      {"reflection unitarity", reflection_unitarity}, {"W1 triangle and 1D oracle", w1_properties},
      {"calc-hyp residuals", calc_hyp},        {"maximum principle", max_principle}};
  Outcome o{true, ""};
  for (const auto& [name, fn] : suites) {
    std::string why;
    const bool ok = fn(why);
    o.passed = o.passed && ok;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += std::string(name) + (ok ? " ok" : " FAILED (" + why + ")");
  }
  return o;
}

}  // namespace

int main() {
  std::vector<Line> lines;
  auto record = [&](int id, std::string name, double budget, Outcome o, double secs) {
    lines.push_back({id, std::move(name), budget, std::move(o), secs});
    const auto& l = lines.back();
    const bool ok = l.outcome.passed && l.seconds < l.budget;
    std::printf("criterion %d %s  %-34s %7.1f s (budget %3.0f s)  %s%s\n", l.id, ok ? "PASS" : "FAIL", l.name.c_str(),
                l.seconds, l.budget, l.outcome.detail.c_str(), l.seconds < l.budget ? "" : " [over time budget]");
    std::fflush(stdout);
  };
  auto guarded = [&](int id, const std::string& name, double budget, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      record(id, name, budget, Outcome{false, std::string("error: ") + e.what()}, 0.0);
    }
  };

  guarded(1, "coupling W1 decay rate", 60, [&] {
    set_thread_count(1);
    auto t = run_config("kinetic_ou_coupling.toml");
    set_thread_count(0);
    record(1, "coupling W1 decay rate", 60, select(t.result, {"w1_decay_rate"}), t.seconds);
  });

  guarded(2, "ensemble mean vs moment ODE", 30, [&] {
    // W1 is not needed here; a two-point support keeps its cost negligible.
    auto t = run_config("kinetic_ou_coupling.toml", [](ExperimentConfig& c) { c.resolved["run"]["w1_support_cap"] = 2; });
    record(2, "ensemble mean vs moment ODE", 30, select(t.result, {"mean_oracle"}), t.seconds);
  });

  guarded(3, "oscillation seminorm decay", 120, [&] {
    auto t = run_config("kinetic_ou_oscillation.toml");
    record(3, "oscillation seminorm decay", 120, select(t.result, {"strictly_decreasing", "seminorm_decay_rate"}),
           t.seconds);
  });

  guarded(4, "hypoelliptic smoothing", 60, [&] {
    auto t = run_config("kinetic_ou_smoothing.toml");
    record(4, "hypoelliptic smoothing", 60, select(t.result, {"gradient_bound_bounded", "y_regularization"}),
           t.seconds);
    record(5, "Villani functional bound", 60, select(t.result, {"villani_max_principle"}), t.seconds);
  });

  guarded(6, "duality", 120, [&] {
    auto t = run_config("kinetic_ou_duality.toml");
    Outcome o{t.result.passed(), ""};
    for (const auto& c : t.result.criteria) o.detail += (o.detail.empty() ? "" : "; ") + c.name + ": " + c.detail;
    record(6, "duality", 120, o, t.seconds);
  });

  guarded(7, "weighted TV decay", 180, [&] {
    auto t = run_config("kinetic_ou_tv.toml");
    record(7, "weighted TV decay", 180, select(t.result, {"tv_phi_decay_rate", "mass_conservation"}), t.seconds);
  });

  guarded(8, "Lyapunov certification", 10, [&] {
    auto cfg = ExperimentConfig::load(config_path("lyapunov_quadratic.toml"));
    auto t0 = std::chrono::steady_clock::now();
    auto res = compute_experiment(cfg);
    auto phi = build_quadratic_lyapunov(build_potential(cfg.at("model.B.potential")), 1);
    const double secs = seconds_since(t0);
    Outcome o = select(res, {"pointwise_lower_bound", "liploc", "phi_squared_lower_bound", "segment_integral"});
    const bool eps_ok = std::abs(phi.eps() - 0.125) < 1e-15 && std::abs(phi.delta() - 0.125) < 1e-15;
    o.passed = o.passed && eps_ok;
    std::ostringstream os;
    os << "eps = " << phi.eps() << ", delta = " << phi.delta() << "; " << o.detail;
    o.detail = os.str();
    record(8, "Lyapunov certification", 10, o, secs);
  });

  guarded(9, "property suites", 120, [&] {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o = property_suites();
    record(9, "property suites", 120, o, seconds_since(t0));
  });

  int passed = 0;
  for (const auto& l : lines) passed += (l.outcome.passed && l.seconds < l.budget) ? 1 : 0;
  std::printf("acceptance: %d of %zu criteria passed\n", passed, lines.size());
  return passed == static_cast<int>(lines.size()) ? 0 : 1;
}
