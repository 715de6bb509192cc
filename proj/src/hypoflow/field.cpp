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

#include "hypoflow/field.hpp"

#include "hypoflow/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace hypoflow {

Grid Grid::create(int d, double L_v, double L_y, int n_v, int n_y, std::size_t cell_cap) {
  if (d < 1 || d > 2) throw InvalidInput("grid: d must be 1 or 2");
  if (!(L_v > 0.0) || !(L_y > 0.0) || !std::isfinite(L_v) || !std::isfinite(L_y)) {
    throw InvalidInput("grid: half-widths L_v, L_y must be positive");
  }
  if (n_v < 8 || n_y < 8) throw InvalidInput("grid: need at least 8 points per axis");
  Grid g{d, L_v, L_y, n_v, n_y};
  double cells = std::pow(double(n_v), d) * std::pow(double(n_y), d);
  if (cells > double(cell_cap)) {
    std::ostringstream os;
    os << "grid: " << cells << " cells exceed the cap of " << cell_cap;
    throw CapacityError(os.str());
  }
  return g;
}

std::size_t Grid::size() const {
  std::size_t s = 1;
  for (int a = 0; a < axes(); ++a) s *= static_cast<std::size_t>(n(a));
  return s;
}

std::size_t Grid::stride(int axis) const {
  std::size_t s = 1;
  for (int a = axes() - 1; a > axis; --a) s *= static_cast<std::size_t>(n(a));
  return s;
}

double Grid::cell_volume() const { return std::pow(h_v(), d) * std::pow(h_y(), d); }

void Grid::unflatten(std::size_t idx, std::span<int> out) const {
  for (int a = axes() - 1; a >= 0; --a) {
    out[a] = static_cast<int>(idx % n(a));
    idx /= n(a);
  }
}

std::size_t Grid::flatten(std::span<const int> multi) const {
  std::size_t idx = 0;
  for (int a = 0; a < axes(); ++a) idx = idx * n(a) + multi[a];
  return idx;
}

void Grid::node(std::size_t idx, std::span<double> z) const {
  for (int a = axes() - 1; a >= 0; --a) {
    int i = static_cast<int>(idx % n(a));
    idx /= n(a);
    z[a] = coord(a, i);
  }
}

std::size_t Grid::locate(std::span<const double> z) const {
  std::array<int, 2 * kMaxDim> m{};
  for (int a = 0; a < axes(); ++a) {
    double s = (z[a] + L(a)) / h(a);
    int i = static_cast<int>(std::floor(s));
    m[a] = std::clamp(i, 0, n(a) - 1);
  }
  return flatten({m.data(), std::size_t(axes())});
}

Field Field::create(const Grid& grid, std::vector<double> values, double time) {
  if (values.size() != grid.size()) {
    std::ostringstream os;
    os << "field: " << values.size() << " values for a grid of " << grid.size() << " nodes";
    throw InvalidInput(os.str());
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NonFiniteError("field: non-finite value", -1, static_cast<long long>(i));
    }
  }
  return Field{grid, std::move(values), time};
}

Field Field::sample(const Grid& grid, const std::function<double(std::span<const double>)>& f,
                    double time) {
  std::vector<double> vals(grid.size());
  std::array<double, 2 * kMaxDim> z{};
  for (std::size_t i = 0; i < vals.size(); ++i) {
    grid.node(i, {z.data(), std::size_t(grid.axes())});
    vals[i] = f({z.data(), std::size_t(grid.axes())});
  }
  return create(grid, std::move(vals), time);
}

double Field::sum() const {
  // Neumaier summation; mass checks compare to 1e-12.
  double s = 0.0, c = 0.0;
  for (double x : values) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x)) {
      c += (s - t) + x;
    } else {
      c += (x - t) + s;
    }
    s = t;
  }
  return s + c;
}

double Field::min() const { return *std::min_element(values.begin(), values.end()); }
double Field::max() const { return *std::max_element(values.begin(), values.end()); }

std::vector<std::size_t> interior_nodes(const Grid& grid, double margin) {
  if (!(margin >= 0.0 && margin < 0.5)) throw InvalidInput("margin must lie in [0, 0.5)");
  std::vector<std::size_t> out;
  std::array<int, 2 * kMaxDim> m{};
  const std::size_t n = grid.size();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid.unflatten(i, {m.data(), std::size_t(grid.axes())});
    bool keep = true;
    for (int a = 0; a < grid.axes() && keep; ++a) {
      int cut = static_cast<int>(std::floor(margin * grid.n(a)));
      keep = m[a] >= cut && m[a] < grid.n(a) - cut;
    }
    if (keep) out.push_back(i);
  }
  return out;
}

void node_gradient(const Field& f, std::size_t idx, std::span<double> out) {
  const Grid& g = f.grid;
  std::array<int, 2 * kMaxDim> m{};
  g.unflatten(idx, {m.data(), std::size_t(g.axes())});
  for (int a = 0; a < g.axes(); ++a) {
    std::size_t s = g.stride(a);
    double h = g.h(a);
    if (m[a] == 0) {
      out[a] = (f.values[idx + s] - f.values[idx]) / h;
    } else if (m[a] == g.n(a) - 1) {
      out[a] = (f.values[idx] - f.values[idx - s]) / h;
    } else {
      out[a] = (f.values[idx + s] - f.values[idx - s]) / (2.0 * h);
    }
  }
}

GradientNorms gradient_norms(const Field& f, double margin) {
  const Grid& g = f.grid;
  GradientNorms r;
  std::array<double, 2 * kMaxDim> grad{};
  for (std::size_t i : interior_nodes(g, margin)) {
    node_gradient(f, i, {grad.data(), std::size_t(g.axes())});
    double gv = 0.0, gy = 0.0;
    for (int a = 0; a < g.d; ++a) {
      gv += grad[a] * grad[a];
      gy += grad[g.d + a] * grad[g.d + a];
    }
    r.sup_grad_v = std::max(r.sup_grad_v, std::sqrt(gv));
    r.sup_grad_y = std::max(r.sup_grad_y, std::sqrt(gy));
  }
  return r;
}

double oscillation_seminorm(const Field& f, const TestFunction& phi, double theta,
                            long long pair_budget, std::uint64_t seed, SeminormOptions options) {
  if (!(theta > 0.0 && theta <= 1.0)) throw InvalidInput("seminorm: theta must lie in (0, 1]");
  if (pair_budget < 1000) throw InvalidInput("seminorm: pair_budget must be >= 1000");
  const Grid& g = f.grid;
  const int D = g.axes();
  if (phi.dim() != D) throw InvalidInput("seminorm: phi dimension does not match the grid");
  auto nodes = interior_nodes(g, options.margin);
  if (nodes.size() < 2) return 0.0;

  // phi at every node of the full grid (cheap; keeps index arithmetic simple).
  std::vector<double> phis(g.size());
  std::vector<double> zbuf(D);
  for (std::size_t i : nodes) {
    g.node(i, zbuf);
    phis[i] = phi.value(zbuf);
  }
  std::vector<double> za(D), zb(D);
  auto ratio = [&](std::size_t i, std::size_t j) {
    double dw = std::abs(f.values[i] - f.values[j]);
    if (dw == 0.0) return 0.0;
    g.node(i, za);
    g.node(j, zb);
    double dist2 = 0.0;
    for (int a = 0; a < D; ++a) dist2 += (za[a] - zb[a]) * (za[a] - zb[a]);
    double dist = std::sqrt(dist2);
    double cap = std::min(std::pow(dist, theta), 1.0);
    return dw / ((phis[i] + phis[j]) * cap);
  };

  double best = 0.0;
  std::vector<char> kept(g.size(), 0);
  for (std::size_t i : nodes) kept[i] = 1;
  std::array<int, 2 * kMaxDim> m{};
  for (std::size_t i : nodes) {
    g.unflatten(i, {m.data(), std::size_t(D)});
    for (int a = 0; a < D; ++a) {
      if (m[a] + 1 >= g.n(a)) continue;
      std::size_t j = i + g.stride(a);
      if (kept[j]) best = std::max(best, ratio(i, j));
    }
  }

  Stream rng(seed, 0, 0x5e41);
  const std::uint64_t count = nodes.size();
  for (long long p = 0; p < pair_budget; ++p) {
    std::size_t i = nodes[rng.next() % count];
    std::size_t j = nodes[rng.next() % count];
    if (i != j) best = std::max(best, ratio(i, j));
  }

  const std::size_t k = std::min<std::size_t>(std::max(0, options.extremes), nodes.size());
  if (k > 0) {
    std::vector<std::size_t> order(nodes);
    auto by_value = [&](std::size_t a, std::size_t b) {
      return f.values[a] < f.values[b] || (f.values[a] == f.values[b] && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), by_value);
    std::vector<std::size_t> low(order.begin(), order.begin() + k);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](std::size_t a, std::size_t b) { return by_value(b, a); });
    for (std::size_t i : low) {
      for (std::size_t q = 0; q < k; ++q) {
        if (i != order[q]) best = std::max(best, ratio(i, order[q]));
      }
    }
  }
  return best;
}

// ------------------------------------------------------------------------ I/O

namespace {

constexpr char kMagic[6] = {'H', 'F', 'L', 'O', 'W', '1'};

void put_u32(std::ostream& os, std::uint32_t x) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double x) {
  std::uint64_t u = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("field file truncated");
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return x;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("field file truncated");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace

void write_field_binary(const Field& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(kMagic, 6);
  put_u32(os, static_cast<std::uint32_t>(f.grid.d));
  put_u32(os, static_cast<std::uint32_t>(f.grid.n_v));
  put_u32(os, static_cast<std::uint32_t>(f.grid.n_y));
  put_f64(os, f.grid.L_v);
  put_f64(os, f.grid.L_y);
  put_f64(os, f.time);
  for (double x : f.values) put_f64(os, x);
  if (!os) throw IoError("write failed for '" + path + "'");
}

Field read_field_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  char magic[6];
  if (!is.read(magic, 6) || std::memcmp(magic, kMagic, 6) != 0) {
    throw IoError("'" + path + "' is not an HFLOW1 field file");
  }
  int d = static_cast<int>(get_u32(is));
  int nv = static_cast<int>(get_u32(is));
  int ny = static_cast<int>(get_u32(is));
  double lv = get_f64(is), ly = get_f64(is), t = get_f64(is);
  Grid g = Grid::create(d, lv, ly, nv, ny);
  std::vector<double> vals(g.size());
  for (auto& x : vals) x = get_f64(is);
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("'" + path + "' has trailing bytes");
  return Field::create(g, std::move(vals), t);
}

void write_field_csv(const Field& f, const std::string& path, std::size_t max_rows) {
  if (f.grid.size() > max_rows) {
    throw CapacityError("field CSV export limited to " + std::to_string(max_rows) + " nodes");
  }
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open '" + path + "' for writing");
  const int d = f.grid.d;
  for (int a = 0; a < d; ++a) std::fprintf(fp, "v%d,", a + 1);
  for (int a = 0; a < d; ++a) std::fprintf(fp, "y%d,", a + 1);
  std::fprintf(fp, "value\r\n");
  std::vector<double> z(f.grid.axes());
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    f.grid.node(i, z);
    for (double c : z) std::fprintf(fp, "%.17g,", c);
    std::fprintf(fp, "%.17g\r\n", f.values[i]);
  }
  if (std::fclose(fp) != 0) throw IoError("write failed for '" + path + "'");
}

}  // namespace hypoflow
