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

#include "support.hpp"

#include "hypoflow/grid.hpp"
#include "hypoflow/lyapunov.hpp"
#include "hypoflow/oracles.hpp"

#include <doctest.h>

#include <filesystem>

using namespace hypoflow;
using namespace hftest;

namespace {

SolverParams params_for(const KineticModel& model, const Grid& grid, SchemeKind kind, double t_end,
                        std::vector<double> record = {}) {
  SolverParams p;
  p.t_end = t_end;
  p.dt = admissible_dt(model, grid, kind);
  p.record_times = std::move(record);
  return p;
}

double field_v(std::span<const double> z) { return z[0]; }

// Exact space-time solution u = a(t) v + b(t) y of the adjoint equation for a linear d=1 model.
SpaceTimeFunction linear_solution(const LinearModelMatrices& mats, Vector a0) {
  SpaceTimeFunction u;
  u.dim = 2;
  u.jet = [mats, a0](double t, std::span<const double> z) {
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
  return u;
}

// Second moments of a density on a d=1 grid: (E v^2 - (E v)^2, cov, var y).
Matrix grid_covariance(const Field& m) {
  const Grid& g = m.grid;
  Vector mean = Vector::Zero(2);
  Matrix second = Matrix::Zero(2, 2);
  double z[2];
  const double vol = g.cell_volume();
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.node(i, z);
    const double w = m.values[i] * vol;
    for (int a = 0; a < 2; ++a) {
      mean(a) += w * z[a];
      for (int b = 0; b < 2; ++b) second(a, b) += w * z[a] * z[b];
    }
  }
  return second - mean * mean.transpose();
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("grid validation") {
    CHECK_THROWS(Grid::create(1, 1.0, 1.0, 4, 8));
    CHECK_THROWS(Grid::create(1, -1.0, 1.0, 8, 8));
    CHECK_THROWS_AS(Grid::create(1, 1.0, 1.0, 4096, 4096), CapacityError);
    auto g = Grid::create(1, 2.0, 3.0, 8, 12);
    CHECK(g.size() == 96);
    CHECK(g.h_v() == doctest::Approx(0.5));
    CHECK(g.h_y() == doctest::Approx(0.5));
    CHECK(g.cell_volume() == doctest::Approx(0.25));
    std::array<int, 2> mi{};
    g.unflatten(g.flatten(std::array<int, 2>{3, 7}), mi);
    CHECK(mi[0] == 3);
    CHECK(mi[1] == 7);
  }

  TEST_CASE("constants are preserved by the adjoint solver") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 4.0, 4.0, 32, 32);
    auto u0 = Field::sample(g, [](auto) { return 0.7; });
    auto out = solve_adjoint(model, u0, params_for(model, g, SchemeKind::adjoint, 1.0));
    CHECK(out.back().min() == 0.7);
    CHECK(out.back().max() == 0.7);
  }

  TEST_CASE("CFL violation reports the admissible step") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 4.0, 4.0, 32, 32);
    auto u0 = Field::sample(g, field_v);
    SolverParams p = params_for(model, g, SchemeKind::adjoint, 1.0);
    const double ok = p.dt;
    p.dt = 4.0 * ok;
    try {
      solve_adjoint(model, u0, p);
      FAIL("expected a CFL error");
    } catch (const CflError& e) {
      CHECK(e.admissible_dt() == doctest::Approx(ok));
    }
  }

  TEST_CASE("linear datum tracks the coefficient ODE") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 8.0, 8.0, 256, 256);
    auto u0 = Field::sample(g, [](auto z) { return 0.5 * z[0] - 0.25 * z[1]; });
    auto out = solve_adjoint(model, u0, params_for(model, g, SchemeKind::adjoint, 1.0));
    Vector a0(2);
    a0 << 0.5, -0.25;
    Vector c = linear_adjoint_solution(LinearModelMatrices::from_model(model), a0, 1.0);
    double err = 0.0, scale = 0.0;
    double z[2];
    for (std::size_t i : interior_nodes(g, 0.2)) {
      g.node(i, z);
      const double exact = c(0) * z[0] + c(1) * z[1];
      err = std::max(err, std::abs(out.back().values[i] - exact));
      scale = std::max(scale, std::abs(exact));
    }
    CHECK(err / scale <= 0.05);
  }

  TEST_CASE("sign(v) stays within [-1, 1]") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 4.0, 4.0, 64, 64);
    auto u0 = Field::sample(g, [](auto z) { return z[0] > 0 ? 1.0 : -1.0; });
    auto out = solve_adjoint(model, u0, params_for(model, g, SchemeKind::adjoint, 1.0, {0.25, 0.5, 1.0}));
    REQUIRE(out.size() == 3);
    for (auto& f : out) {
      CHECK(f.max() <= 1.0);
      CHECK(f.min() >= -1.0);
    }
  }

  TEST_CASE("property: discrete maximum principle on 20 random models") {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 0; k < 20; ++k) {
      auto model = linear_model(0.5 * (U(gen) + 1.0), 1.0 + U(gen) * 0.5, U(gen), 1.0 + 0.5 * U(gen), U(gen));
      auto g = Grid::create(1, 3.0, 3.0, 24, 24);
      auto noise = gaussian_vector(gen, static_cast<int>(g.size()));
      auto u0 = Field::create(g, noise);
      auto p = params_for(model, g, SchemeKind::adjoint, 0.5, {0.1, 0.25, 0.5});
      for (auto& f : solve_adjoint(model, u0, p)) {
        REQUIRE(f.max() <= u0.max() + 1e-12);
        REQUIRE(f.min() >= u0.min() - 1e-12);
      }
    }
  }

  TEST_CASE("heat kernel from a single cell: mass and variance 2t") {
    auto model = KineticModel::create(1, 0.0, DriftSpec::zero(1), DriftSpec::zero(1));
    auto g = Grid::create(1, 4.0, 4.0, 64, 64);
    std::vector<double> vals(g.size(), 0.0);
    vals[g.flatten(std::array<int, 2>{32, 32})] = 1.0 / g.cell_volume();
    auto m0 = Field::create(g, vals);
    auto p = params_for(model, g, SchemeKind::fokker_planck, 1.0);
    p.t_end = 100 * p.dt;
    SolveStats st;
    auto out = solve_fokker_planck(model, m0, p, &st);
    CHECK(st.steps == 100);
    CHECK(std::abs(out.back().integral() - 1.0) <= 1e-10);
    CHECK(st.max_mass_drift <= 1e-12);
    CHECK(grid_covariance(out.back())(0, 0) == doctest::Approx(2.0 * p.t_end).epsilon(1e-3));
    CHECK(grid_covariance(out.back())(1, 1) == doctest::Approx(0.0));
    CHECK(out.back().min() >= 0.0);
  }

  TEST_CASE("Fokker-Planck second moments follow the covariance ODE") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 4.0, 4.0, 256, 256);
    auto m0 = normalize_density(Field::sample(g, [](auto z) {
      return std::exp(-((z[0] - 1.0) * (z[0] - 1.0) + z[1] * z[1]) / (2 * 0.25));
    }));
    auto out = solve_fokker_planck(model, m0, params_for(model, g, SchemeKind::fokker_planck, 1.0, {0.5, 1.0}));
    auto mats = LinearModelMatrices::from_model(model);
    Vector mean0(2);
    mean0 << 1, 0;
    Matrix c0 = grid_covariance(m0);
    auto ref = integrate_moments(mats, mean0, c0, 1.0, 1e-3, {0.5, 1.0});
    for (int r = 0; r < 2; ++r) {
      Matrix s = grid_covariance(out[r]);
      CHECK((s - ref[r].cov).norm() <= 0.05 * ref[r].cov.norm());
    }
  }

  TEST_CASE("two densities keep equal mass") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 4.0, 4.0, 48, 48);
    auto a = normalize_density(Field::sample(g, [](auto z) { return std::exp(-z[0] * z[0] - z[1] * z[1]); }));
    auto b = normalize_density(Field::sample(g, [](auto z) { return z[0] > 0 ? 1.0 : 0.2; }));
    auto p = params_for(model, g, SchemeKind::fokker_planck, 1.0, {0.25, 0.5, 1.0});
    auto ma = solve_fokker_planck(model, a, p);
    auto mb = solve_fokker_planck(model, b, p);
    for (std::size_t k = 0; k < ma.size(); ++k) {
      CHECK(std::abs(ma[k].integral() - mb[k].integral()) <= 1e-12);
      CHECK(ma[k].min() >= 0.0);
    }
  }

  TEST_CASE("negative initial density is rejected") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 4.0, 4.0, 16, 16);
    auto m = Field::sample(g, [](auto z) { return z[0]; });
    CHECK_THROWS(solve_fokker_planck(model, m, params_for(model, g, SchemeKind::fokker_planck, 0.1)));
  }

  TEST_CASE("duality: constant test function") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 5.0, 5.0, 64, 64);
    auto m0 = normalize_density(Field::sample(g, [](auto z) { return std::exp(-z[0] * z[0] - z[1] * z[1]); }));
    auto one = Field::sample(g, [](auto) { return 1.0; });
    SolverParams p;
    p.t_end = 1.0;
    p.dt = std::min(admissible_dt(model, g, SchemeKind::adjoint), admissible_dt(model, g, SchemeKind::fokker_planck));
    auto r = duality_check(model, m0, one, 1.0, p);
    CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.rhs == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.gap <= 1e-10);
  }

  TEST_CASE("duality: zeta = v from a Dirac at (1, 0) matches a(1)") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 4.0, 4.0, 256, 256);
    std::vector<double> vals(g.size(), 0.0);
    double z[2] = {1.0, 0.0};
    vals[g.locate(z)] = 1.0 / g.cell_volume();
    auto m0 = Field::create(g, vals);
    double node[2];
    g.node(g.locate(z), node);
    auto zeta = Field::sample(g, field_v);
    SolverParams p;
    p.t_end = 1.0;
    p.dt = std::min(admissible_dt(model, g, SchemeKind::adjoint), admissible_dt(model, g, SchemeKind::fokker_planck));
    auto r = duality_check(model, m0, zeta, 1.0, p);
    Vector a0(2);
    a0 << 1, 0;
    Vector c = linear_adjoint_solution(LinearModelMatrices::from_model(model), a0, 1.0);
    const double expect = c(0) * node[0] + c(1) * node[1];
    CHECK(std::abs(r.lhs - expect) <= 0.05 * std::abs(expect));
    CHECK(std::abs(r.rhs - expect) <= 0.05 * std::abs(expect));
  }

  TEST_CASE("duality gap is first order under refinement") {
    auto model = kinetic_ou();
    auto gap_at = [&](int n, double dt) {
      auto g = Grid::create(1, 5.0, 5.0, n, n);
      auto m0 = normalize_density(Field::sample(
          g, [](auto z) { return std::exp(-((z[0] - 0.5) * (z[0] - 0.5) + (z[1] + 0.5) * (z[1] + 0.5))); }));
      auto zeta = Field::sample(g, [](auto z) { return std::tanh(z[0]); });
      SolverParams p;
      p.t_end = 1.0;
      p.dt = dt;
      return duality_check(model, m0, zeta, 1.0, p).gap;
    };
    auto g_fine = Grid::create(1, 5.0, 5.0, 128, 128);
    const double dt_fine = std::min(admissible_dt(model, g_fine, SchemeKind::adjoint),
                                    admissible_dt(model, g_fine, SchemeKind::fokker_planck));
    const double coarse = gap_at(64, 2.0 * dt_fine);
    const double fine = gap_at(128, dt_fine);
    CHECK(coarse / fine >= 2.0 / 1.3);
    CHECK(coarse / fine <= 2.0 * 1.3);
  }

  TEST_CASE("gradient norms examples") {
    auto g = Grid::create(1, 3.0, 3.0, 64, 64);
    auto gv = gradient_norms(Field::sample(g, field_v));
    CHECK(gv.sup_grad_v == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gv.sup_grad_y == doctest::Approx(0.0).epsilon(1e-12));
    auto gc = gradient_norms(Field::sample(g, [](auto) { return 2.0; }));
    CHECK(gc.sup_grad_v == 0.0);
    CHECK(gc.sup_grad_y == 0.0);
    auto gs = gradient_norms(Field::sample(g, [](auto z) { return std::sin(z[0]); }));
    double best = 0.0;
    double z[2];
    for (std::size_t i : interior_nodes(g, 0.1)) {
      g.node(i, z);
      best = std::max(best, std::abs(std::cos(z[0])));
    }
    CHECK(std::abs(gs.sup_grad_v - best) <= g.h_v() * g.h_v());
  }

  TEST_CASE("Villani functional") {
    auto g = Grid::create(1, 3.0, 3.0, 32, 32);
    auto zero = Field::sample(g, [](auto) { return 0.0; }, 0.5);
    auto w0 = villani_functional({zero}, 1.0, 0.25, 0.5);
    CHECK(w0.at(0).second == 0.0);
    CHECK_THROWS(villani_functional({zero}, 1.0, 0.5, 0.25));
    std::mt19937_64 gen(32);
    for (int k = 0; k < 20; ++k) {
      auto f = Field::create(g, gaussian_vector(gen, static_cast<int>(g.size())), 0.7);
      CHECK(villani_functional({f}, 1.0, 0.7, 0.5).at(0).second >= 0.0);
    }
  }

  TEST_CASE("Villani bound for a steep sign profile") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 6.0, 6.0, 128, 128);
    auto u0 = Field::sample(g, [](auto z) { return (z[0] > 0 ? 1.0 : -1.0) * std::min(1.0, std::abs(z[0]) / 0.1); });
    std::vector<double> rec;
    for (int k = 1; k <= 20; ++k) rec.push_back(0.05 * k);
    auto series = solve_adjoint(model, u0, params_for(model, g, SchemeKind::adjoint, 1.0, rec));
    for (auto [t, w] : villani_functional(series, 1.0, 0.25, 0.5)) {
      CHECK(w <= 0.5 * 1.05);
    }
  }

  TEST_CASE("weighted gradient ratio is finite and nonnegative") {
    auto model = kinetic_ou();
    auto g = Grid::create(1, 6.0, 6.0, 64, 64);
    auto u0 = Field::sample(g, [](auto z) { return z[0] > 0 ? 1.0 : -1.0; });
    auto out = solve_adjoint(model, u0, params_for(model, g, SchemeKind::adjoint, 0.5));
    auto phi = build_quadratic_lyapunov(PotentialSpec::quadratic(1, 1, 1, 0), 1);
    const double r = weighted_gradient_ratio(u0, out.back(), phi);
    CHECK(std::isfinite(r));
    CHECK(r >= 0.0);
  }

  TEST_CASE("calc-hyp identities hold for the linear exact solution") {
    auto model = kinetic_ou();
    auto mats = LinearModelMatrices::from_model(model);
    Vector a0(2);
    a0 << 1.0, 0.3;
    auto u = linear_solution(mats, a0);
    std::mt19937_64 gen(33);
    for (int k = 0; k < 50; ++k) {
      auto z = gaussian_vector(gen, 2, 2.0);
      auto r = calc_hyp_residuals(model, u, 0.1 * k, z);
      for (double x : r) CHECK(x <= 1e-8);
    }
  }

  TEST_CASE("calc-hyp identities for a constant and with finite-difference third derivatives") {
    auto model = linear_model(0.5, 1.0, 0.2, 1.0, 1.0);
    SpaceTimeFunction c;
    c.jet = [](double, std::span<const double>) {
      Jet j;
      j.u = 3.0;
      j.grad = Vector::Zero(2);
      j.grad_t = Vector::Zero(2);
      j.hess = Matrix::Zero(2, 2);
      j.third.assign(8, 0.0);
      return j;
    };
    std::array<double, 2> z{0.4, -1.0};
    for (double x : calc_hyp_residuals(model, c, 0.0, z)) CHECK(x == 0.0);

    auto u = linear_solution(LinearModelMatrices::from_model(model), Vector::Ones(2));
    u.provides_third = false;
    for (double x : calc_hyp_residuals(model, u, 0.3, z)) CHECK(x <= 1e-8);

    u.provides_hessian = false;
    CHECK_THROWS(calc_hyp_residuals(model, u, 0.3, z));
  }

  TEST_CASE("oscillation seminorm examples") {
    auto g = Grid::create(1, 3.0, 3.0, 32, 32);
    ConstantFunction one(2, 1.0);
    CHECK(oscillation_seminorm(Field::sample(g, [](auto) { return 5.0; }), one, 1.0, 1000, 1) == 0.0);
    SeminormOptions full;
    full.margin = 0.0;
    const double s = oscillation_seminorm(Field::sample(g, field_v), one, 1.0, 1000, 1, full);
    // Extreme nodes are h/2 inside the box on each side.
    CHECK(s == doctest::Approx((2.0 * g.L_v - g.h_v()) / 2.0).epsilon(1e-12));
    CHECK(s <= g.L_v);
  }

  TEST_CASE("property: seminorm is homogeneous and deterministic") {
    auto g = Grid::create(1, 3.0, 3.0, 32, 32);
    auto phi = build_quadratic_lyapunov(PotentialSpec::quadratic(1, 1, 1, 0), 1);
    auto f = Field::sample(g, [](auto z) { return std::tanh(z[0]) + 0.3 * std::sin(z[1]); });
    const double s = oscillation_seminorm(f, phi, 0.5, 2000, 9);
    CHECK(s > 0.0);
    CHECK(oscillation_seminorm(f, phi, 0.5, 2000, 9) == s);
    for (double c : {-2.0, 0.5, 3.0}) {
      auto fc = f;
      for (auto& x : fc.values) x *= c;
      CHECK(oscillation_seminorm(fc, phi, 0.5, 2000, 9) == doctest::Approx(std::abs(c) * s).epsilon(1e-12));
    }
    CHECK_THROWS(oscillation_seminorm(f, phi, 0.5, 10, 9));
    CHECK_THROWS(oscillation_seminorm(f, phi, 1.5, 2000, 9));
  }

  TEST_CASE("binary field round trip") {
    auto g = Grid::create(1, 2.5, 3.5, 16, 24);
    auto f = Field::sample(g, [](auto z) { return std::exp(z[0]) - z[1]; }, 0.75);
    auto path = (std::filesystem::temp_directory_path() / "hypoflow_field_roundtrip.bin").string();
    write_field_binary(f, path);
    auto back = read_field_binary(path);
    CHECK(back.grid == g);
    CHECK(back.time == 0.75);
    CHECK(back.values == f.values);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_field_binary(path), IoError);
  }

  TEST_CASE("non-finite field values are rejected") {
    auto g = Grid::create(1, 1.0, 1.0, 8, 8);
    std::vector<double> v(g.size(), 0.0);
    v[3] = std::nan("");
    CHECK_THROWS(Field::create(g, v));
  }
}
