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

#include "hypoflow/common.hpp"
#include "hypoflow/model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hypoflow {

/// Cell-centred tensor grid on [-L_v, L_v]^d x [-L_y, L_y]^d. Axes are ordered
/// v_1..v_d, y_1..y_d; the last axis varies fastest in the flat index.
struct Grid {
  int d = 1;
  double L_v = 1.0;
  double L_y = 1.0;
  int n_v = 8;
  int n_y = 8;

  static constexpr std::size_t kDefaultCellCap = 4'000'000;

  static Grid create(int d, double L_v, double L_y, int n_v, int n_y,
                     std::size_t cell_cap = kDefaultCellCap);

  int axes() const { return 2 * d; }
  bool is_v_axis(int axis) const { return axis < d; }
  int n(int axis) const { return is_v_axis(axis) ? n_v : n_y; }
  double L(int axis) const { return is_v_axis(axis) ? L_v : L_y; }
  double h(int axis) const { return 2.0 * L(axis) / n(axis); }
  double h_v() const { return 2.0 * L_v / n_v; }
  double h_y() const { return 2.0 * L_y / n_y; }
  std::size_t size() const;
  std::size_t stride(int axis) const;
  double cell_volume() const;
  double coord(int axis, int i) const { return -L(axis) + (i + 0.5) * h(axis); }

  /// Multi-index of a flat index.
  void unflatten(std::size_t idx, std::span<int> out) const;
  std::size_t flatten(std::span<const int> multi) const;
  void node(std::size_t idx, std::span<double> z) const;
  /// Flat index of the cell containing z (clamped to the box).
  std::size_t locate(std::span<const double> z) const;

  bool operator==(const Grid& o) const {
    return d == o.d && L_v == o.L_v && L_y == o.L_y && n_v == o.n_v && n_y == o.n_y;
  }
};

struct Field {
  Grid grid;
  std::vector<double> values;
  double time = 0.0;

  /// Validates the length and finiteness of `values`.
  static Field create(const Grid& grid, std::vector<double> values, double time = 0.0);
  static Field sample(const Grid& grid, const std::function<double(std::span<const double>)>& f,
                      double time = 0.0);

  double sum() const;
  double integral() const { return sum() * grid.cell_volume(); }
  double min() const;
  double max() const;
};

/// Nodes whose index on every axis lies in [floor(margin n), n - floor(margin n)).
std::vector<std::size_t> interior_nodes(const Grid& grid, double margin);

/// Discrete gradient at a node: centred in the interior, one-sided at the edges.
void node_gradient(const Field& f, std::size_t idx, std::span<double> out);

struct GradientNorms {
  double sup_grad_v = 0.0;
  double sup_grad_y = 0.0;
};

/// Suprema of |grad_v u| and |grad_y u| over the interior (outer `margin` excluded).
GradientNorms gradient_norms(const Field& f, double margin = 0.1);

struct SeminormOptions {
  /// Fraction of each axis excluded on both sides.
  double margin = 0.1;
  /// Nodes taken from each end of the value range for exhaustive extreme pairs.
  int extremes = 16;
};

/// Lower-bound estimator of sup |w(z) - w(z~)| / ((phi(z) + phi(z~)) (|z - z~|^theta ^ 1))
/// over all axis-adjacent pairs, `pair_budget` seeded random pairs and all
/// pairs between the extreme values of w.
double oscillation_seminorm(const Field& f, const TestFunction& phi, double theta,
                            long long pair_budget, std::uint64_t seed,
                            SeminormOptions options = {});

/// Binary layout: "HFLOW1", uint32 d, n_v, n_y, float64 L_v, L_y, time, then
/// the values (all little-endian, row-major).
void write_field_binary(const Field& f, const std::string& path);
Field read_field_binary(const std::string& path);
/// Columns v1..vd, y1..yd, value; rejects grids above `max_rows` nodes.
void write_field_csv(const Field& f, const std::string& path, std::size_t max_rows = 1'000'000);

}  // namespace hypoflow
