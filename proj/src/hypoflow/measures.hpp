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

#include "hypoflow/field.hpp"
#include "hypoflow/model.hpp"
#include "hypoflow/sampling.hpp"

#include <cstdint>
#include <vector>

namespace hypoflow {

/// Weighted point cloud in R^dim; points are stored flat, point i at
/// points[i * dim, (i + 1) * dim).
struct EmpiricalMeasure {
  int dim = 0;
  std::vector<double> points;
  std::vector<double> weights;

  /// Validates finiteness and positivity and normalizes the weights.
  static EmpiricalMeasure create(int dim, std::vector<double> points, std::vector<double> weights);
  static EmpiricalMeasure uniform(int dim, std::vector<double> points);

  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, std::size_t(dim)}; }
  bool is_uniform() const;
  Vector mean() const;
};

/// Initial-law sampler. Draw `index` uses its own stream derived from
/// (seed, index), so draws do not depend on order or thread.
class MeasureSampler {
 public:
  enum class Kind { dirac, gaussian, uniform_box, mixture };

  static MeasureSampler dirac(Vector point);
  /// N(mean, cov); cov must be symmetric positive semidefinite.
  static MeasureSampler gaussian(Vector mean, Matrix cov);
  static MeasureSampler uniform_box(Box box);
  static MeasureSampler mixture(std::vector<MeasureSampler> parts, std::vector<double> weights);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  void sample(std::uint64_t seed, std::uint64_t index, std::span<double> out) const;
  /// Exact mean and covariance of the law.
  Vector mean() const;
  Matrix covariance() const;

  static Kind kind_from_name(const std::string& name);

 private:
  MeasureSampler() = default;
  void sample_with(Stream& rng, std::span<double> out) const;

  Kind kind_ = Kind::dirac;
  int dim_ = 0;
  Vector point_;
  Matrix chol_;
  Matrix cov_;
  Box box_;
  std::vector<MeasureSampler> parts_;
  std::vector<double> cum_weights_;
  std::vector<double> weights_;
};

inline constexpr std::size_t kDefaultSupportCap = 4000;

/// Exact W1 with Euclidean ground cost. Equal-size uniform clouds are solved
/// as a linear assignment (Jonker-Volgenant shortest augmenting paths); other
/// weights by a transportation simplex.
double wasserstein1_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                          std::size_t support_cap = kDefaultSupportCap);

/// Optimal assignment for a dense n x n cost matrix (row-major). Returns the
/// column assigned to each row.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n);

/// Transportation problem with supplies a, demands b (equal totals) and
/// dense cost (row-major, a.size() x b.size()). Returns the optimal cost.
double solve_transport(const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<double>& cost);

struct GridW1Result {
  double value = 0.0;
  /// Number of 2x block-averaging passes needed to fit the support cap.
  int coarsenings = 0;
  std::size_t support = 0;
};

/// W1 between two densities on the same grid (cells as weighted points).
GridW1Result grid_w1(const Field& m1, const Field& m2, std::size_t support_cap = kDefaultSupportCap);

/// sum phi(center) |m1 - m2| vol.
double weighted_tv(const Field& m1, const Field& m2, const TestFunction& phi);

struct D1PhiBound {
  double value = 0.0;
  /// Index of the dictionary member attaining the value.
  int best_index = -1;
  /// Per-candidate value of int zeta d(m1 - m2) after rescaling.
  std::vector<double> candidates;
  /// Per-candidate max |zeta| / phi after rescaling.
  std::vector<double> sup_ratio;
};

/// Lower bound of d_{1,phi}(m1, m2): max over a seeded dictionary of test
/// functions, each rescaled so that its grid-estimated weighted Lipschitz
/// seminorm is 1.
D1PhiBound d1phi_lower_bound(const Field& m1, const Field& m2, const TestFunction& phi,
                             int family_size, std::uint64_t seed);

}  // namespace hypoflow
