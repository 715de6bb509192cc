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

#include "hypoflow/measures.hpp"

#include "hypoflow/parallel.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

namespace hypoflow {

// ------------------------------------------------------------- EmpiricalMeasure

EmpiricalMeasure EmpiricalMeasure::create(int dim, std::vector<double> points,
                                          std::vector<double> weights) {
  if (dim < 1) throw InvalidInput("measure: dimension must be positive");
  if (weights.empty()) throw InvalidInput("measure: empty support");
  if (points.size() != weights.size() * static_cast<std::size_t>(dim)) {
    throw InvalidInput("measure: points and weights have inconsistent sizes");
  }
  if (!all_finite(points)) throw InvalidInput("measure: non-finite point");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidInput("measure: weights must be positive");
    total += w;
  }
  for (double& w : weights) w /= total;
  return EmpiricalMeasure{dim, std::move(points), std::move(weights)};
}

EmpiricalMeasure EmpiricalMeasure::uniform(int dim, std::vector<double> points) {
  if (dim < 1 || points.size() % dim != 0) throw InvalidInput("measure: bad point array");
  std::size_t n = points.size() / dim;
  return create(dim, std::move(points), std::vector<double>(n, 1.0));
}

bool EmpiricalMeasure::is_uniform() const {
  for (double w : weights) {
    if (w != weights.front()) return false;
  }
  return true;
}

Vector EmpiricalMeasure::mean() const {
  Vector m = Vector::Zero(dim);
  for (std::size_t i = 0; i < size(); ++i) {
    for (int k = 0; k < dim; ++k) m[k] += weights[i] * points[i * dim + k];
  }
  return m;
}

// --------------------------------------------------------------- MeasureSampler

namespace {

Matrix psd_sqrt_factor(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw InvalidInput("gaussian: covariance must be square");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff())) {
    throw InvalidInput("gaussian: covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  Vector ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-12 * (1.0 + ev.cwiseAbs().maxCoeff())) {
    throw InvalidInput("gaussian: covariance must be positive semidefinite");
  }
  for (int i = 0; i < ev.size(); ++i) ev[i] = std::sqrt(std::max(ev[i], 0.0));
  return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace

MeasureSampler MeasureSampler::dirac(Vector point) {
  if (point.size() < 1 || !point.allFinite()) throw InvalidInput("dirac: point must be finite");
  MeasureSampler s;
  s.kind_ = Kind::dirac;
  s.dim_ = static_cast<int>(point.size());
  s.point_ = std::move(point);
  return s;
}

MeasureSampler MeasureSampler::gaussian(Vector mean, Matrix cov) {
  if (mean.size() < 1 || !mean.allFinite()) throw InvalidInput("gaussian: mean must be finite");
  if (cov.rows() != mean.size()) throw InvalidInput("gaussian: covariance size mismatch");
  MeasureSampler s;
  s.kind_ = Kind::gaussian;
  s.dim_ = static_cast<int>(mean.size());
  s.chol_ = psd_sqrt_factor(cov);
  s.cov_ = std::move(cov);
  s.point_ = std::move(mean);
  return s;
}

MeasureSampler MeasureSampler::uniform_box(Box box) {
  if (box.dim() < 1 || box.upper.size() != box.lower.size()) throw InvalidInput("uniform_box: bad box");
  for (int k = 0; k < box.dim(); ++k) {
    if (!(box.upper[k] >= box.lower[k]) || !std::isfinite(box.upper[k] - box.lower[k])) {
      throw InvalidInput("uniform_box: need finite lower <= upper");
    }
  }
  MeasureSampler s;
  s.kind_ = Kind::uniform_box;
  s.dim_ = box.dim();
  s.box_ = std::move(box);
  return s;
}

MeasureSampler MeasureSampler::mixture(std::vector<MeasureSampler> parts, std::vector<double> weights) {
  if (parts.empty() || parts.size() != weights.size()) throw InvalidInput("mixture: parts/weights mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw InvalidInput("mixture: weights must be positive");
    total += w;
  }
  MeasureSampler s;
  s.kind_ = Kind::mixture;
  s.dim_ = parts.front().dim();
  for (const auto& p : parts) {
    if (p.dim() != s.dim_) throw InvalidInput("mixture: components must share a dimension");
  }
  double acc = 0.0;
  for (double& w : weights) {
    w /= total;
    acc += w;
    s.cum_weights_.push_back(acc);
  }
  s.cum_weights_.back() = 1.0;
  s.weights_ = std::move(weights);
  s.parts_ = std::move(parts);
  return s;
}

void MeasureSampler::sample_with(Stream& rng, std::span<double> out) const {
  switch (kind_) {
    case Kind::dirac:
      for (int k = 0; k < dim_; ++k) out[k] = point_[k];
      return;
    case Kind::gaussian: {
      std::array<double, 2 * kMaxDim> g{};
      for (int k = 0; k < dim_; ++k) g[k] = rng.normal();
      for (int r = 0; r < dim_; ++r) {
        double x = point_[r];
        for (int k = 0; k < dim_; ++k) x += chol_(r, k) * g[k];
        out[r] = x;
      }
      return;
    }
    case Kind::uniform_box:
      for (int k = 0; k < dim_; ++k) out[k] = box_.lower[k] + rng.uniform() * (box_.upper[k] - box_.lower[k]);
      return;
    case Kind::mixture: {
      double u = rng.uniform();
      std::size_t c = std::upper_bound(cum_weights_.begin(), cum_weights_.end(), u) - cum_weights_.begin();
      parts_[std::min(c, parts_.size() - 1)].sample_with(rng, out);
      return;
    }
  }
}

void MeasureSampler::sample(std::uint64_t seed, std::uint64_t index, std::span<double> out) const {
  if (static_cast<int>(out.size()) != dim_) throw InvalidInput("sampler: output dimension mismatch");
  Stream rng(seed, index, 0x1a17);
  sample_with(rng, out);
}

Vector MeasureSampler::mean() const {
  switch (kind_) {
    case Kind::dirac:
    case Kind::gaussian:
      return point_;
    case Kind::uniform_box: {
      Vector m(dim_);
      for (int k = 0; k < dim_; ++k) m[k] = 0.5 * (box_.lower[k] + box_.upper[k]);
      return m;
    }
    case Kind::mixture: {
      Vector m = Vector::Zero(dim_);
      for (std::size_t i = 0; i < parts_.size(); ++i) m += weights_[i] * parts_[i].mean();
      return m;
    }
  }
  return {};
}

Matrix MeasureSampler::covariance() const {
  switch (kind_) {
    case Kind::dirac:
      return Matrix::Zero(dim_, dim_);
    case Kind::gaussian:
      return cov_;
    case Kind::uniform_box: {
      Matrix c = Matrix::Zero(dim_, dim_);
      for (int k = 0; k < dim_; ++k) {
        double w = box_.upper[k] - box_.lower[k];
        c(k, k) = w * w / 12.0;
      }
      return c;
    }
    case Kind::mixture: {
      Vector m = mean();
      Matrix c = Matrix::Zero(dim_, dim_);
      for (std::size_t i = 0; i < parts_.size(); ++i) {
        Vector mi = parts_[i].mean();
        c += weights_[i] * (parts_[i].covariance() + mi * mi.transpose());
      }
      return c - m * m.transpose();
    }
  }
  return {};
}

MeasureSampler::Kind MeasureSampler::kind_from_name(const std::string& name) {
  if (name == "dirac") return Kind::dirac;
  if (name == "gaussian") return Kind::gaussian;
  if (name == "uniform_box") return Kind::uniform_box;
  if (name == "mixture") return Kind::mixture;
  throw InvalidInput("unknown sampler kind '" + name + "'");
}

// ------------------------------------------------------------------ assignment

std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
  if (n < 1 || cost.size() != static_cast<std::size_t>(n) * n) {
    throw InvalidInput("assignment: cost matrix must be n x n");
  }
  auto c = [&](int i, int j) { return cost[static_cast<std::size_t>(i) * n + j]; };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<int> rowsol(n, -1), colsol(n, -1), matches(n, 0), freerows, collist(n), pred(n);
  std::vector<double> v(n), dist(n);

  // Column reduction.
  for (int j = n - 1; j >= 0; --j) {
    double mn = c(0, j);
    int imin = 0;
    for (int i = 1; i < n; ++i) {
      if (c(i, j) < mn) {
        mn = c(i, j);
        imin = i;
      }
    }
    v[j] = mn;
    if (++matches[imin] == 1) {
      rowsol[imin] = j;
      colsol[j] = imin;
    } else if (v[j] < v[rowsol[imin]]) {
      int j1 = rowsol[imin];
      rowsol[imin] = j;
      colsol[j] = imin;
      colsol[j1] = -1;
    } else {
      colsol[j] = -1;
    }
  }

  // Reduction transfer.
  for (int i = 0; i < n; ++i) {
    if (matches[i] == 0) {
      freerows.push_back(i);
    } else if (matches[i] == 1) {
      int j1 = rowsol[i];
      double mn = inf;
      for (int j = 0; j < n; ++j) {
        if (j != j1 && c(i, j) - v[j] < mn) mn = c(i, j) - v[j];
      }
      if (mn < inf) v[j1] -= mn;
    }
  }

  // Augmenting row reduction, two passes.
  for (int pass = 0; pass < 2; ++pass) {
    std::size_t k = 0;
    std::vector<int> prev = freerows;
    freerows.clear();
    long long guard = 0;
    while (k < prev.size()) {
      // Floating-point near-ties can make this phase cycle; what is left
      // over is finished by the shortest-path augmentation below.
      if (++guard > 20LL * n) break;
      int i = prev[k++];
      double umin = c(i, 0) - v[0], usubmin = inf;
      int j1 = 0, j2 = -1;
      for (int j = 1; j < n; ++j) {
        double h = c(i, j) - v[j];
        if (h < usubmin) {
          if (h >= umin) {
            usubmin = h;
            j2 = j;
          } else {
            usubmin = umin;
            umin = h;
            j2 = j1;
            j1 = j;
          }
        }
      }
      int i0 = colsol[j1];
      if (umin < usubmin) {
        v[j1] -= usubmin - umin;
      } else if (i0 >= 0 && j2 >= 0) {
        j1 = j2;
        i0 = colsol[j2];
      }
      if (rowsol[i] >= 0 && colsol[rowsol[i]] == i) colsol[rowsol[i]] = -1;
      rowsol[i] = j1;
      colsol[j1] = i;
      if (i0 >= 0) {
        rowsol[i0] = -1;
        if (umin < usubmin) {
          prev[--k] = i0;
        } else {
          freerows.push_back(i0);
        }
      }
    }
    // Rows left unprocessed by the guard stay free.
    for (std::size_t q = k; q < prev.size(); ++q) freerows.push_back(prev[q]);
  }

  // Augmentation by shortest paths (Dijkstra on reduced costs).
  for (int freerow : freerows) {
    if (rowsol[freerow] >= 0) continue;
    for (int j = 0; j < n; ++j) {
      dist[j] = c(freerow, j) - v[j];
      pred[j] = freerow;
      collist[j] = j;
    }
    int low = 0, up = 0, last = 0, endofpath = -1;
    double mn = 0.0;
    bool found = false;
    while (!found) {
      if (up == low) {
        last = low - 1;
        mn = dist[collist[up++]];
        for (int k = up; k < n; ++k) {
          int j = collist[k];
          double h = dist[j];
          if (h <= mn) {
            if (h < mn) {
              up = low;
              mn = h;
            }
            collist[k] = collist[up];
            collist[up++] = j;
          }
        }
        for (int k = low; k < up; ++k) {
          if (colsol[collist[k]] < 0) {
            endofpath = collist[k];
            found = true;
            break;
          }
        }
      }
      if (!found) {
        int j1 = collist[low++];
        int i = colsol[j1];
        double h = c(i, j1) - v[j1] - mn;
        for (int k = up; k < n; ++k) {
          int j = collist[k];
          double v2 = c(i, j) - v[j] - h;
          if (v2 < dist[j]) {
            pred[j] = i;
            if (v2 == mn) {
              if (colsol[j] < 0) {
                endofpath = j;
                found = true;
                break;
              }
              collist[k] = collist[up];
              collist[up++] = j;
            }
            dist[j] = v2;
          }
        }
      }
    }
    for (int k = 0; k <= last; ++k) {
      int j1 = collist[k];
      v[j1] += dist[j1] - mn;
    }
    int i;
    do {
      i = pred[endofpath];
      colsol[endofpath] = i;
      int j1 = endofpath;
      endofpath = rowsol[i];
      rowsol[i] = j1;
    } while (i != freerow);
  }
  for (int i = 0; i < n; ++i) {
    if (rowsol[i] < 0) throw SchemeFailure("assignment: incomplete matching");
  }
  return rowsol;
}

// ------------------------------------------------------------------- transport

double solve_transport(const std::vector<double>& a_in, const std::vector<double>& b_in,
                       const std::vector<double>& cost) {
  const int m = static_cast<int>(a_in.size()), n = static_cast<int>(b_in.size());
  if (m < 1 || n < 1 || cost.size() != static_cast<std::size_t>(m) * n) {
    throw InvalidInput("transport: cost must be a.size() x b.size()");
  }
  double ta = std::accumulate(a_in.begin(), a_in.end(), 0.0);
  double tb = std::accumulate(b_in.begin(), b_in.end(), 0.0);
  if (!(ta > 0.0) || std::abs(ta - tb) > 1e-9 * ta) throw InvalidInput("transport: supplies and demands differ");
  auto C = [&](int i, int j) { return cost[static_cast<std::size_t>(i) * n + j]; };
  if (m == 1 || n == 1) {
    double s = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) s += C(i, j) * (m == 1 ? b_in[j] / tb : a_in[i] / ta);
    return s;
  }
  // Normalized supplies with the classical perturbation a_i + eps, b_n + m eps,
  // which keeps every basis nondegenerate.
  const double eps = 1e-12;
  std::vector<double> a(m), b(n);
  for (int i = 0; i < m; ++i) a[i] = a_in[i] / ta + eps;
  for (int j = 0; j < n; ++j) b[j] = b_in[j] / tb;
  b[n - 1] += m * eps;

  const int N = m + n;  // rows 0..m-1, columns m..m+n-1
  struct Arc {
    int i, j;
    double flow;
  };
  std::vector<Arc> basis;
  basis.reserve(N - 1);

  // Least-cost start.
  {
    std::vector<std::uint32_t> order(static_cast<std::size_t>(m) * n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
      return cost[x] < cost[y] || (cost[x] == cost[y] && x < y);
    });
    std::vector<double> ra = a, rb = b;
    std::vector<char> row_done(m, 0), col_done(n, 0);
    int rows_left = m, cols_left = n;
    for (std::uint32_t cell : order) {
      int i = static_cast<int>(cell / n), j = static_cast<int>(cell % n);
      if (row_done[i] || col_done[j]) continue;
      double q = std::min(ra[i], rb[j]);
      basis.push_back({i, j, q});
      ra[i] -= q;
      rb[j] -= q;
      // Close exactly one side unless this is the final cell.
      if (rows_left + cols_left == 2) {
        row_done[i] = col_done[j] = 1;
        --rows_left;
        --cols_left;
        break;
      }
      if ((ra[i] <= rb[j] && rows_left > 1) || cols_left == 1) {
        row_done[i] = 1;
        --rows_left;
        rb[j] = std::max(rb[j], 0.0);
      } else {
        col_done[j] = 1;
        --cols_left;
        ra[i] = std::max(ra[i], 0.0);
      }
    }
    if (static_cast<int>(basis.size()) != N - 1) throw SchemeFailure("transport: initial basis is not a tree");
  }

  // Tree bookkeeping: adjacency (node -> arc ids), parent pointers from root 0.
  std::vector<std::vector<int>> adj(N);
  for (int e = 0; e < N - 1; ++e) {
    adj[basis[e].i].push_back(e);
    adj[m + basis[e].j].push_back(e);
  }
  std::vector<int> parent(N), parent_arc(N), depth(N), queue(N);
  std::vector<double> pot(N);
  auto rebuild = [&]() {
    std::fill(parent.begin(), parent.end(), -2);
    parent[0] = -1;
    parent_arc[0] = -1;
    depth[0] = 0;
    pot[0] = 0.0;
    int head = 0, tail = 0;
    queue[tail++] = 0;
    while (head < tail) {
      int x = queue[head++];
      for (int e : adj[x]) {
        int y = x < m ? m + basis[e].j : basis[e].i;
        if (parent[y] != -2) continue;
        parent[y] = x;
        parent_arc[y] = e;
        depth[y] = depth[x] + 1;
        // u_i + v_j = c_ij on basic arcs; pot holds u for rows and v for columns.
        pot[y] = C(basis[e].i, basis[e].j) - pot[x];
        queue[tail++] = y;
      }
    }
    if (tail != N) throw SchemeFailure("transport: basis lost connectivity");
  };
  rebuild();

  double cmax = 0.0;
  for (double x : cost) cmax = std::max(cmax, std::abs(x));
  const double tol = 1e-12 * std::max(cmax, 1e-300);
  const long long cells = static_cast<long long>(m) * n;
  const long long block = std::max<long long>(64, static_cast<long long>(std::sqrt(double(cells))));
  const long long max_pivots = 50LL * cells + 1000;
  long long cursor = 0;
  std::vector<int> path_i, path_j;  // cells on the cycle with sign
  for (long long pivot = 0;; ++pivot) {
    if (pivot > max_pivots) throw SchemeFailure("transport: pivot limit reached");
    // Block pricing.
    long long scanned = 0;
    int ei = -1, ej = -1;
    double best = -tol;
    while (scanned < cells) {
      long long end = std::min(cells, scanned + block);
      for (long long s = scanned; s < end; ++s) {
        long long cell = (cursor + s) % cells;
        int i = static_cast<int>(cell / n), j = static_cast<int>(cell % n);
        double r = C(i, j) - pot[i] - pot[m + j];
        if (r < best) {
          best = r;
          ei = i;
          ej = j;
        }
      }
      scanned = end;
      if (ei >= 0) break;
    }
    if (ei < 0) break;
    cursor = (cursor + scanned) % cells;

    // Cycle: tree path between row ei and column ej.
    std::vector<int> up_a, up_b;  // arcs climbing from each end to the LCA
    int x = ei, y = m + ej;
    while (depth[x] > depth[y]) {
      up_a.push_back(parent_arc[x]);
      x = parent[x];
    }
    while (depth[y] > depth[x]) {
      up_b.push_back(parent_arc[y]);
      y = parent[y];
    }
    while (x != y) {
      up_a.push_back(parent_arc[x]);
      x = parent[x];
      up_b.push_back(parent_arc[y]);
      y = parent[y];
    }
    // Path from ei to ej: up_a then reversed up_b; signs alternate -,+,-,...
    std::vector<int> cyc(up_a);
    cyc.insert(cyc.end(), up_b.rbegin(), up_b.rend());
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (std::size_t k = 0; k < cyc.size(); k += 2) {
      if (basis[cyc[k]].flow < theta) {
        theta = basis[cyc[k]].flow;
        leave = cyc[k];
      }
    }
    for (std::size_t k = 0; k < cyc.size(); ++k) basis[cyc[k]].flow += (k % 2 == 0) ? -theta : theta;
    // Replace the leaving arc by the entering one.
    auto drop = [&](int node, int e) {
      auto& v = adj[node];
      v.erase(std::find(v.begin(), v.end(), e));
    };
    drop(basis[leave].i, leave);
    drop(m + basis[leave].j, leave);
    basis[leave] = {ei, ej, theta};
    adj[ei].push_back(leave);
    adj[m + ej].push_back(leave);
    rebuild();
  }

  // Flows of the final basis for the unperturbed supplies: peel leaves.
  std::vector<double> ra(m), rb(n);
  for (int i = 0; i < m; ++i) ra[i] = a_in[i] / ta;
  for (int j = 0; j < n; ++j) rb[j] = b_in[j] / tb;
  double total = 0.0;
  for (int k = N - 1; k > 0; --k) {
    int node = queue[k];  // BFS order from rebuild(): children after parents
    int e = parent_arc[node];
    double f;
    if (node < m) {
      f = ra[node];
      rb[basis[e].j] -= f;
    } else {
      f = rb[node - m];
      ra[basis[e].i] -= f;
    }
    total += f * C(basis[e].i, basis[e].j);
  }
  return total * ta;
}

double wasserstein1_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::size_t support_cap) {
  if (mu.dim != nu.dim) throw InvalidInput("W1: measures live in different dimensions");
  if (mu.size() + nu.size() > support_cap) {
    std::ostringstream os;
    os << "W1: combined support " << mu.size() + nu.size() << " exceeds the cap " << support_cap
       << "; subsample the clouds";
    throw CapacityError(os.str());
  }
  if (mu.points == nu.points && mu.weights == nu.weights) return 0.0;
  const int dim = mu.dim;
  const std::size_t m = mu.size(), n = nu.size();
  std::vector<double> cost(m * n);
  parallel_for(m, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto x = mu.point(i);
      for (std::size_t j = 0; j < n; ++j) {
        auto y = nu.point(j);
        double s = 0.0;
        for (int k = 0; k < dim; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
        cost[i * n + j] = std::sqrt(s);
      }
    }
  }, 64);
  if (m == n && mu.is_uniform() && nu.is_uniform()) {
    auto sol = solve_assignment(cost, static_cast<int>(n));
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i * n + sol[i]];
    return s / static_cast<double>(n);
  }
  return solve_transport(mu.weights, nu.weights, cost);
}

// ----------------------------------------------------------------- grid views

namespace {

struct Cloud {
  std::vector<double> points;
  std::vector<double> weights;
};

// Cell masses aggregated over blocks of `factor` cells per axis; blocks are
// placed at the mean of their member centres.
Cloud coarse_cloud(const Field& f, int factor) {
  const Grid& g = f.grid;
  const int D = g.axes();
  std::array<int, 2 * kMaxDim> nb{}, m{};
  std::size_t blocks = 1;
  for (int a = 0; a < D; ++a) {
    nb[a] = (g.n(a) + factor - 1) / factor;
    blocks *= nb[a];
  }
  std::vector<double> mass(blocks, 0.0);
  const double vol = g.cell_volume();
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, {m.data(), std::size_t(D)});
    std::size_t b = 0;
    for (int a = 0; a < D; ++a) b = b * nb[a] + m[a] / factor;
    mass[b] += f.values[i] * vol;
  }
  Cloud c;
  for (std::size_t b = 0; b < blocks; ++b) {
    if (mass[b] < 1e-12) continue;
    std::size_t rest = b;
    std::array<double, 2 * kMaxDim> z{};
    for (int a = D - 1; a >= 0; --a) {
      int bi = static_cast<int>(rest % nb[a]);
      rest /= nb[a];
      int first = bi * factor, last = std::min(g.n(a), first + factor) - 1;
      z[a] = 0.5 * (g.coord(a, first) + g.coord(a, last));
    }
    c.points.insert(c.points.end(), z.begin(), z.begin() + D);
    c.weights.push_back(mass[b]);
  }
  return c;
}

void require_same_grid(const Field& a, const Field& b, const char* who) {
  if (!(a.grid == b.grid)) throw InvalidInput(std::string(who) + ": fields live on different grids");
}

}  // namespace

GridW1Result grid_w1(const Field& m1, const Field& m2, std::size_t support_cap) {
  require_same_grid(m1, m2, "grid_w1");
  if (m1.min() < 0.0 || m2.min() < 0.0) throw InvalidInput("grid_w1: densities must be nonnegative");
  double a = m1.integral(), b = m2.integral();
  if (std::abs(a - b) > 1e-9) {
    std::ostringstream os;
    os << "grid_w1: masses differ (" << a << " vs " << b << ")";
    throw InvalidInput(os.str());
  }
  GridW1Result r;
  if (m1.values == m2.values) return r;
  const int D = m1.grid.axes();
  for (int level = 0;; ++level) {
    int factor = 1 << level;
    Cloud c1 = coarse_cloud(m1, factor), c2 = coarse_cloud(m2, factor);
    std::size_t support = c1.weights.size() + c2.weights.size();
    if (support <= support_cap || factor >= std::max(m1.grid.n_v, m1.grid.n_y)) {
      if (c1.weights.empty() || c2.weights.empty()) throw InvalidInput("grid_w1: empty support");
      r.coarsenings = level;
      r.support = support;
      auto mu = EmpiricalMeasure::create(D, std::move(c1.points), std::move(c1.weights));
      auto nu = EmpiricalMeasure::create(D, std::move(c2.points), std::move(c2.weights));
      r.value = a * wasserstein1_exact(mu, nu, std::max(support_cap, support));
      return r;
    }
  }
}

double weighted_tv(const Field& m1, const Field& m2, const TestFunction& phi) {
  require_same_grid(m1, m2, "weighted_tv");
  const Grid& g = m1.grid;
  if (phi.dim() != g.axes()) throw InvalidInput("weighted_tv: phi dimension mismatch");
  std::vector<double> z(g.axes());
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.node(i, z);
    s += phi.value(z) * std::abs(m1.values[i] - m2.values[i]);
  }
  return s * g.cell_volume();
}

D1PhiBound d1phi_lower_bound(const Field& m1, const Field& m2, const TestFunction& phi, int family_size,
                             std::uint64_t seed) {
  require_same_grid(m1, m2, "d1phi_lower_bound");
  if (family_size < 1) throw InvalidInput("d1phi_lower_bound: family_size must be positive");
  const Grid& g = m1.grid;
  const int D = g.axes();
  if (phi.dim() != D) throw InvalidInput("d1phi_lower_bound: phi dimension mismatch");
  const double vol = g.cell_volume();
  std::vector<double> phis(g.size()), z(D);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.node(i, z);
    phis[i] = phi.value(z);
  }

  D1PhiBound out;
  for (int k = 0; k < family_size; ++k) {
    std::function<double(std::span<const double>)> zeta;
    if (k < D) {
      zeta = [k](std::span<const double> x) { return x[k]; };
    } else {
      Stream rng(seed, static_cast<std::uint64_t>(k), 0xd1f1);
      std::vector<double> w(D), c(D);
      double nw = 0.0;
      for (int a = 0; a < D; ++a) {
        w[a] = rng.normal();
        nw += w[a] * w[a];
        c[a] = (2.0 * rng.uniform() - 1.0) * 0.8 * g.L(a);
      }
      nw = std::sqrt(std::max(nw, 1e-300));
      for (double& x : w) x /= nw;
      double slope = 0.5 + 2.5 * rng.uniform();
      double shift = (2.0 * rng.uniform() - 1.0) * 0.5 * std::min(g.L_v, g.L_y);
      double width = (0.3 + 1.7 * rng.uniform()) * 0.25 * std::min(g.L_v, g.L_y);
      int type = k % 3;
      zeta = [=](std::span<const double> x) {
        double proj = 0.0, r2 = 0.0;
        for (int a = 0; a < D; ++a) {
          proj += w[a] * x[a];
          r2 += (x[a] - c[a]) * (x[a] - c[a]);
        }
        double ramp = std::tanh(slope * (proj - shift));
        double bump = std::exp(-r2 / (2.0 * width * width));
        if (type == 0) return ramp;
        if (type == 1) return bump;
        return ramp * bump;
      };
    }
    Field zf = Field::sample(g, zeta);
    double semi = oscillation_seminorm(zf, phi, 1.0, 2000, derive_seed(seed, k, 0x5e), SeminormOptions{0.0, 16});
    double value = 0.0, ratio = 0.0;
    if (semi > 0.0) {
      double s = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        s += zf.values[i] * (m1.values[i] - m2.values[i]);
        ratio = std::max(ratio, std::abs(zf.values[i]) / phis[i]);
      }
      value = std::abs(s) * vol / semi;
      ratio /= semi;
    }
    out.candidates.push_back(value);
    out.sup_ratio.push_back(ratio);
    if (value > out.value) {
      out.value = value;
      out.best_index = k;
    }
  }
  return out;
}

}  // namespace hypoflow
