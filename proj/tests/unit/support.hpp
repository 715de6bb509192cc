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

#include "hypoflow/model.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace hftest {

using hypoflow::DriftSpec;
using hypoflow::KineticModel;
using hypoflow::Matrix;
using hypoflow::Vector;

inline Matrix m1(double x) { return Matrix::Constant(1, 1, x); }

// d=1, kappa=0, H=v, B=v+y.
inline KineticModel kinetic_ou() {
  return KineticModel::create(1, 0.0, DriftSpec::linear(m1(1), m1(0)), DriftSpec::linear(m1(1), m1(1)));
}

inline KineticModel linear_model(double kappa, double hv, double hy, double bv, double by) {
  return KineticModel::create(1, kappa, DriftSpec::linear(m1(hv), m1(hy)), DriftSpec::linear(m1(bv), m1(by)));
}

inline std::vector<double> gaussian_vector(std::mt19937_64& g, int n, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, scale);
  std::vector<double> out(n);
  for (auto& x : out) x = N(g);
  return out;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace hftest
