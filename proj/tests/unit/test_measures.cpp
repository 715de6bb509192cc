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
#include "hypoflow/measures.hpp"

#include <doctest.h>

#include <algorithm>

using namespace hypoflow;
using namespace hftest;

namespace {

EmpiricalMeasure cloud(std::mt19937_64& g, int dim, int n, double shift = 0.0) {
  auto pts = gaussian_vector(g, dim * n);
  for (int i = 0; i < n; ++i) pts[i * dim] += shift;
  return EmpiricalMeasure::uniform(dim, pts);
}

EmpiricalMeasure weighted_cloud(std::mt19937_64& g, int dim, int n) {
  std::uniform_real_distribution<double> U(0.1, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = U(g);
  return EmpiricalMeasure::create(dim, gaussian_vector(g, dim * n), w);
}

Field unit_cell(const Grid& g, int iv, int iy) {
  std::vector<double> v(g.size(), 0.0);
  v[g.flatten(std::array<int, 2>{iv, iy})] = 1.0 / g.cell_volume();
  return Field::create(g, v);
}

}  // namespace

TEST_SUITE("measures") {
  TEST_CASE("empirical measure validation") {
    CHECK_THROWS(EmpiricalMeasure::create(1, {0.0, 1.0}, {1.0, -1.0}));
    CHECK_THROWS(EmpiricalMeasure::create(1, {0.0, std::nan("")}, {1.0, 1.0}));
    CHECK_THROWS(EmpiricalMeasure::create(2, {0.0, 1.0, 2.0}, {1.0, 1.0}));
    auto m = EmpiricalMeasure::create(1, {0.0, 4.0}, {1.0, 3.0});
    CHECK(m.weights[1] == doctest::Approx(0.75));
    CHECK(m.mean()(0) == doctest::Approx(3.0));
  }

  TEST_CASE("identical clouds have zero distance") {
    std::mt19937_64 g(41);
    auto a = cloud(g, 2, 200);
    CHECK(wasserstein1_exact(a, a) == 0.0);
    auto w = weighted_cloud(g, 2, 50);
    CHECK(wasserstein1_exact(w, w) <= 1e-12);
  }

  TEST_CASE("Dirac to Dirac is the point distance") {
    auto a = EmpiricalMeasure::uniform(2, {1.0, 2.0});
    auto b = EmpiricalMeasure::uniform(2, {4.0, -2.0});
    CHECK(wasserstein1_exact(a, b) == doctest::Approx(5.0).epsilon(1e-15));
  }

  TEST_CASE("1D clouds match the sorted-samples formula") {
    std::mt19937_64 g(42);
    for (int n : {1, 7, 100, 500}) {
      auto x = gaussian_vector(g, n), y = gaussian_vector(g, n, 2.0);
      for (auto& v : y) v += 0.3;
      const double got = wasserstein1_exact(EmpiricalMeasure::uniform(1, x), EmpiricalMeasure::uniform(1, y));
      std::sort(x.begin(), x.end());
      std::sort(y.begin(), y.end());
      double ref = 0.0;
      for (int i = 0; i < n; ++i) ref += std::abs(x[i] - y[i]);
      CHECK(got == doctest::Approx(ref / n).epsilon(1e-12));
    }
  }

  TEST_CASE("1D weighted clouds match the CDF formula") {
    std::mt19937_64 g(43);
    for (int k = 0; k < 10; ++k) {
      auto a = weighted_cloud(g, 1, 40), b = weighted_cloud(g, 1, 25);
      // W1 on the line is the L1 distance between the CDFs.
      std::vector<std::pair<double, double>> ev;
      for (std::size_t i = 0; i < a.size(); ++i) ev.emplace_back(a.points[i], a.weights[i]);
      for (std::size_t i = 0; i < b.size(); ++i) ev.emplace_back(b.points[i], -b.weights[i]);
      std::sort(ev.begin(), ev.end());
      double F = 0.0, ref = 0.0;
      for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
        F += ev[i].second;
        ref += std::abs(F) * (ev[i + 1].first - ev[i].first);
      }
      CHECK(wasserstein1_exact(a, b) == doctest::Approx(ref).epsilon(1e-10));
    }
  }

  TEST_CASE("assignment and transport solvers agree") {
    std::mt19937_64 g(44);
    std::uniform_real_distribution<double> U(0.0, 10.0);
    for (int n : {1, 5, 30}) {
      std::vector<double> cost(n * n);
      for (auto& c : cost) c = U(g);
      auto perm = solve_assignment(cost, n);
      double ac = 0.0;
      std::vector<int> seen(n, 0);
      for (int i = 0; i < n; ++i) {
        ac += cost[i * n + perm[i]];
        seen[perm[i]]++;
      }
      for (int s : seen) CHECK(s == 1);
      std::vector<double> ones(n, 1.0);
      CHECK(solve_transport(ones, ones, cost) == doctest::Approx(ac).epsilon(1e-12));
    }
  }

  TEST_CASE("support cap is enforced") {
    std::mt19937_64 g(45);
    auto a = cloud(g, 2, 60), b = cloud(g, 2, 60);
    CHECK_THROWS_AS(wasserstein1_exact(a, b, 100), CapacityError);
    CHECK_NOTHROW(wasserstein1_exact(a, b, 120));
  }

  TEST_CASE("property: symmetry, triangle inequality and mean bound") {
    std::mt19937_64 g(46);
    for (int k = 0; k < 20; ++k) {
      const bool weighted = k % 2;
      auto a = weighted ? weighted_cloud(g, 2, 30) : cloud(g, 2, 60, 0.5);
      auto b = weighted ? weighted_cloud(g, 2, 35) : cloud(g, 2, 60);
      auto c = weighted ? weighted_cloud(g, 2, 20) : cloud(g, 2, 60, -1.0);
      const double ab = wasserstein1_exact(a, b), bc = wasserstein1_exact(b, c), ac = wasserstein1_exact(a, c);
      CHECK(ab == doctest::Approx(wasserstein1_exact(b, a)).epsilon(1e-10));
      CHECK(ac <= ab + bc + 1e-9);
      CHECK(ab >= (a.mean() - b.mean()).norm() - 1e-12);
    }
  }

  TEST_CASE("grid W1 examples") {
    auto g = Grid::create(1, 2.0, 2.0, 16, 16);
    auto m = unit_cell(g, 3, 4);
    CHECK(grid_w1(m, m).value == 0.0);
    auto r = grid_w1(m, unit_cell(g, 6, 8));
    CHECK(r.value == doctest::Approx(std::hypot(3 * g.h_v(), 4 * g.h_y())).epsilon(1e-12));
    CHECK(r.coarsenings == 0);
    auto half = m;
    for (auto& x : half.values) x *= 0.5;
    CHECK_THROWS(grid_w1(m, half));
  }

  TEST_CASE("grid W1 of translated Gaussians, with coarsening") {
    auto g = Grid::create(1, 5.0, 5.0, 128, 128);
    const double r = 1.3;
    auto gauss = [&](double c) {
      return normalize_density(Field::sample(g, [c](auto z) {
        return std::exp(-((z[0] - c) * (z[0] - c) + z[1] * z[1]) / (2 * 0.5));
      }));
    };
    auto res = grid_w1(gauss(-r / 2), gauss(r / 2), 2000);
    CHECK(res.coarsenings >= 1);
    CHECK(res.support <= 2000);
    const double h = g.h_v() * (1 << res.coarsenings);
    CHECK(std::abs(res.value - r) <= 3 * h);
  }

  TEST_CASE("weighted TV examples") {
    auto g = Grid::create(1, 2.0, 2.0, 16, 16);
    auto phi = build_quadratic_lyapunov(PotentialSpec::quadratic(1, 1, 1, 0), 1);
    ConstantFunction one(2, 1.0);
    auto a = unit_cell(g, 2, 3), b = unit_cell(g, 10, 12);
    CHECK(weighted_tv(a, a, phi) == 0.0);
    double ca[2], cb[2];
    g.node(g.flatten(std::array<int, 2>{2, 3}), ca);
    g.node(g.flatten(std::array<int, 2>{10, 12}), cb);
    CHECK(weighted_tv(a, b, phi) == doctest::Approx(phi.value(ca) + phi.value(cb)).epsilon(1e-12));
    CHECK(weighted_tv(a, b, one) == doctest::Approx(2.0).epsilon(1e-12));
    auto other = Grid::create(1, 2.0, 2.0, 16, 32);
    CHECK_THROWS(weighted_tv(a, unit_cell(other, 2, 3), phi));
  }

  TEST_CASE("property: weighted TV is a norm on signed grid measures") {
    auto g = Grid::create(1, 2.0, 2.0, 16, 16);
    auto phi = build_quadratic_lyapunov(PotentialSpec::quadratic(1, 1, 1, 0), 1);
    auto zero = Field::sample(g, [](auto) { return 0.0; });
    std::mt19937_64 gen(47);
    for (int k = 0; k < 50; ++k) {
      auto x = Field::create(g, gaussian_vector(gen, 256));
      auto y = Field::create(g, gaussian_vector(gen, 256));
      auto sum = x, scaled = x;
      for (std::size_t i = 0; i < sum.values.size(); ++i) {
        sum.values[i] += y.values[i];
        scaled.values[i] *= -2.5;
      }
      const double nx = weighted_tv(x, zero, phi), ny = weighted_tv(y, zero, phi);
      CHECK(weighted_tv(sum, zero, phi) <= nx + ny + 1e-12);
      CHECK(weighted_tv(scaled, zero, phi) == doctest::Approx(2.5 * nx).epsilon(1e-14));
    }
  }

  TEST_CASE("d1phi lower bound properties") {
    auto g = Grid::create(1, 4.0, 4.0, 32, 32);
    auto phi = build_quadratic_lyapunov(PotentialSpec::quadratic(1, 1, 1, 0), 1);
    auto a = normalize_density(Field::sample(g, [](auto z) { return std::exp(-(z[0] - 1) * (z[0] - 1) - z[1] * z[1]); }));
    auto b = normalize_density(Field::sample(g, [](auto z) { return std::exp(-(z[0] + 1) * (z[0] + 1) - z[1] * z[1]); }));
    CHECK(d1phi_lower_bound(a, a, phi, 16, 3).value == 0.0);
    auto small = d1phi_lower_bound(a, b, phi, 8, 3);
    auto large = d1phi_lower_bound(a, b, phi, 32, 3);
    CHECK(small.value > 0.0);
    CHECK(large.value >= small.value);
    CHECK(large.best_index >= 0);
    // Each candidate obeys int zeta d(m1 - m2) <= ||m1 - m2||_TV_phi * sup |zeta| / phi.
    const double tv = weighted_tv(a, b, phi);
    for (std::size_t k = 0; k < large.candidates.size(); ++k) {
      CHECK(large.candidates[k] <= tv * large.sup_ratio[k] + 1e-12);
    }
    CHECK(d1phi_lower_bound(a, b, phi, 32, 3).value == large.value);
  }

  TEST_CASE("samplers are deterministic per (seed, index) and have the right moments") {
    Vector mean(2);
    mean << 1.0, -0.5;
    Matrix cov(2, 2);
    cov << 0.5, 0.1, 0.1, 0.25;
    auto s = MeasureSampler::gaussian(mean, cov);
    std::array<double, 2> x{}, y{};
    s.sample(7, 123, x);
    s.sample(7, 123, y);
    CHECK(x == y);
    s.sample(8, 123, y);
    CHECK(x != y);
    const int n = 20000;
    Vector m = Vector::Zero(2);
    Matrix c = Matrix::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
      s.sample(7, i, x);
      Vector v = Eigen::Map<Vector>(x.data(), 2);
      m += v;
      c += v * v.transpose();
    }
    m /= n;
    c = c / n - m * m.transpose();
    CHECK((m - mean).norm() <= 4 * std::sqrt(0.75 / n));
    CHECK((c - cov).norm() <= 0.03);

    auto mix = MeasureSampler::mixture({MeasureSampler::dirac(mean), MeasureSampler::dirac(-mean)}, {1.0, 3.0});
    CHECK(mix.mean()(0) == doctest::Approx(-0.5));
    CHECK(mix.covariance()(0, 0) == doctest::Approx(0.75));
    CHECK_THROWS(MeasureSampler::gaussian(mean, -cov));
  }
}
