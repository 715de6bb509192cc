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

#include "hypoflow/oracles.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace hypoflow {

namespace {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

void require_small_square(const Matrix& a, const char* who) {
  if (a.rows() != a.cols() || a.rows() < 1 || a.rows() > 2 * kMaxDim) {
    throw InvalidInput(std::string(who) + ": expected a square matrix of size 1..8");
  }
  if (!a.allFinite()) throw InvalidInput(std::string(who) + ": matrix has non-finite entries");
}

double norm1(const Matrix& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

void givens(Complex a, Complex b, Complex& c, Complex& s) {
  double r = std::hypot(std::abs(a), std::abs(b));
  if (r == 0.0) {
    c = 1.0;
    s = 0.0;
    return;
  }
  c = a / r;
  s = b / r;
}

// Shifted QR on an upper Hessenberg complex matrix. Deflates from the bottom.
std::vector<Complex> hessenberg_qr_eigenvalues(CMatrix h) {
  const int n = static_cast<int>(h.rows());
  std::vector<Complex> out;
  int m = n;
  int since_deflation = 0;
  const int max_iter = 2000 * n;
  for (int iter = 0; m > 0; ++iter) {
    if (iter > max_iter) throw SchemeFailure("eigenvalues: QR iteration did not converge");
    if (m == 1) {
      out.push_back(h(0, 0));
      break;
    }
    double scale = std::abs(h(m - 1, m - 1)) + std::abs(h(m - 2, m - 2));
    if (scale == 0.0) scale = h.topLeftCorner(m, m).cwiseAbs().maxCoeff();
    if (std::abs(h(m - 1, m - 2)) <= 1e-15 * std::max(scale, 1e-300)) {
      out.push_back(h(m - 1, m - 1));
      --m;
      since_deflation = 0;
      continue;
    }
    // Wilkinson shift from the trailing 2x2 block.
    Complex a = h(m - 2, m - 2), b = h(m - 2, m - 1), c = h(m - 1, m - 2), d = h(m - 1, m - 1);
    Complex tr = a + d, det = a * d - b * c;
    Complex disc = std::sqrt(tr * tr / 4.0 - det);
    Complex l1 = tr / 2.0 + disc, l2 = tr / 2.0 - disc;
    Complex shift = std::abs(l1 - d) < std::abs(l2 - d) ? l1 : l2;
    if (++since_deflation % 11 == 0) shift += Complex(0.75 * std::abs(h(m - 1, m - 2)), 0.5);

    for (int i = 0; i < m; ++i) h(i, i) -= shift;
    std::vector<Complex> cs(m - 1), sn(m - 1);
    for (int k = 0; k < m - 1; ++k) {
      givens(h(k, k), h(k + 1, k), cs[k], sn[k]);
      for (int j = k; j < m; ++j) {
        Complex x = h(k, j), y = h(k + 1, j);
        h(k, j) = std::conj(cs[k]) * x + std::conj(sn[k]) * y;
        h(k + 1, j) = -sn[k] * x + cs[k] * y;
      }
    }
    for (int k = 0; k < m - 1; ++k) {
      for (int i = 0; i <= std::min(k + 1, m - 1); ++i) {
        Complex x = h(i, k), y = h(i, k + 1);
        h(i, k) = x * cs[k] + y * sn[k];
        h(i, k + 1) = -x * std::conj(sn[k]) + y * std::conj(cs[k]);
      }
    }
    for (int i = 0; i < m; ++i) h(i, i) += shift;
  }
  return out;
}

// Roots of a polynomial with an m-fold root come back spread over a circle of
// radius ~eps^(1/m) while their centroid stays accurate to ~eps. Groups closer
// than the worst-case spread are replaced by their centroid.
std::vector<Complex> merge_root_clusters(std::vector<Complex> roots) {
  const std::size_t n = roots.size();
  double scale = 1.0;
  for (const auto& r : roots) scale = std::max(scale, std::abs(r));
  const double tol = 4.0 * std::pow(std::numeric_limits<double>::epsilon(), 1.0 / n) * scale;
  std::vector<int> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(roots[i] - roots[j]) > tol) continue;
      const int from = label[j], to = label[i];
      for (auto& l : label) {
        if (l == from) l = to;
      }
    }
  }
  std::vector<Complex> out(roots);
  for (std::size_t i = 0; i < n; ++i) {
    Complex sum = 0.0;
    int count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (label[j] == label[i]) {
        sum += roots[j];
        ++count;
      }
    }
    out[i] = sum / static_cast<double>(count);
  }
  return out;
}

}  // namespace

LinearModelMatrices LinearModelMatrices::from_model(const KineticModel& model) {
  if (!model.H().is_affine() || !model.B().is_affine()) {
    throw InvalidInput("linear oracle: model drifts must be linear");
  }
  const int d = model.d();
  if (2 * d > 4) throw InvalidInput("linear oracle: supported only for d <= 2");
  auto [hv, hy] = model.H().affine_parts();
  auto [bv, by] = model.B().affine_parts();
  LinearModelMatrices m;
  m.d = d;
  m.A = Matrix::Zero(2 * d, 2 * d);
  m.A.topLeftCorner(d, d) = -bv;
  m.A.topRightCorner(d, d) = -by;
  m.A.bottomLeftCorner(d, d) = hv;
  m.A.bottomRightCorner(d, d) = hy;
  m.Q = Matrix::Zero(2 * d, 2 * d);
  for (int i = 0; i < d; ++i) {
    m.Q(i, i) = 2.0;
    m.Q(d + i, d + i) = 2.0 * model.kappa();
  }
  return m;
}

LinearModelMatrices LinearModelMatrices::from_matrix(Matrix a, double kappa) {
  if (a.rows() != a.cols() || a.rows() % 2 != 0 || a.rows() > 4 || a.rows() < 2) {
    throw InvalidInput("linear oracle: drift matrix must be 2x2 or 4x4");
  }
  if (!(kappa >= 0.0)) throw InvalidInput("linear oracle: kappa must be >= 0");
  LinearModelMatrices m;
  m.d = static_cast<int>(a.rows()) / 2;
  m.A = std::move(a);
  m.Q = Matrix::Zero(2 * m.d, 2 * m.d);
  for (int i = 0; i < m.d; ++i) {
    m.Q(i, i) = 2.0;
    m.Q(m.d + i, m.d + i) = 2.0 * kappa;
  }
  return m;
}

std::vector<double> characteristic_polynomial(const Matrix& a) {
  require_small_square(a, "characteristic_polynomial");
  // Faddeev-LeVerrier.
  const int n = static_cast<int>(a.rows());
  std::vector<double> c(n + 1, 0.0);
  c[n] = 1.0;
  Matrix m = Matrix::Zero(n, n);
  const Matrix id = Matrix::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    m = a * m + c[n - k + 1] * id;
    c[n - k] = -(a * m).trace() / k;
  }
  c.pop_back();
  return c;
}

std::vector<std::complex<double>> eigenvalues_small(const Matrix& a) {
  require_small_square(a, "eigenvalues");
  const int n = static_cast<int>(a.rows());
  if (n == 1) return {Complex(a(0, 0), 0.0)};
  auto c = characteristic_polynomial(a);
  if (n == 2) {
    // s^2 + c1 s + c0 = 0
    double b = c[1], q = c[0];
    double disc = b * b - 4.0 * q;
    if (disc >= 0.0) {
      double r = std::sqrt(disc);
      // Stable pairing: avoid cancellation in -b +- r.
      double s1 = b >= 0.0 ? (-b - r) / 2.0 : (-b + r) / 2.0;
      double s2 = s1 != 0.0 ? q / s1 : -b - s1;
      return {Complex(s1, 0.0), Complex(s2, 0.0)};
    }
    double im = std::sqrt(-disc) / 2.0;
    return {Complex(-b / 2.0, im), Complex(-b / 2.0, -im)};
  }
  CMatrix comp = CMatrix::Zero(n, n);
  for (int j = 0; j < n; ++j) comp(0, j) = -c[n - 1 - j];
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  return merge_root_clusters(hessenberg_qr_eigenvalues(comp));
}

double spectral_abscissa(const LinearModelMatrices& mats) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : eigenvalues_small(mats.A)) best = std::max(best, e.real());
  return best;
}

Matrix expm(const Matrix& a) {
  require_small_square(a, "expm");
  const int n = static_cast<int>(a.rows());
  double nrm = norm1(a);
  int s = 0;
  if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  Matrix x = a / std::ldexp(1.0, s);
  constexpr int q = 6;
  Matrix num = Matrix::Identity(n, n), den = Matrix::Identity(n, n), pw = Matrix::Identity(n, n);
  double c = 1.0;
  for (int k = 1; k <= q; ++k) {
    c *= static_cast<double>(q - k + 1) / (k * (2.0 * q - k + 1));
    pw = pw * x;
    num += c * pw;
    den += ((k % 2) ? -c : c) * pw;
  }
  Matrix e = den.partialPivLu().solve(num);
  for (int i = 0; i < s; ++i) e = e * e;
  return e;
}

std::vector<MomentSample> integrate_moments(const LinearModelMatrices& mats, const Vector& mean0,
                                            const Matrix& cov0, double t_end, double dt,
                                            const std::vector<double>& record_times) {
  const Matrix& A = mats.A;
  const Matrix& Q = mats.Q;
  const int n = static_cast<int>(A.rows());
  if (mean0.size() != n || cov0.rows() != n || cov0.cols() != n) {
    throw InvalidInput("integrate_moments: dimension mismatch");
  }
  if (!(dt > 0.0) || !(t_end >= 0.0)) throw InvalidInput("integrate_moments: need dt > 0, t_end >= 0");
  if ((cov0 - cov0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov0.cwiseAbs().maxCoeff())) {
    throw InvalidInput("integrate_moments: cov0 must be symmetric");
  }
  const double anorm = A.operatorNorm();
  if (dt * anorm > 2.5) {
    std::ostringstream os;
    os << "integrate_moments: dt = " << dt << " is unstable for |A| = " << anorm
       << "; use dt <= " << 2.5 / std::max(anorm, 1e-300);
    throw InvalidInput(os.str());
  }
  for (double t : record_times) {
    if (t < 0.0 || t > t_end + 1e-12) throw InvalidInput("integrate_moments: record time outside [0, t_end]");
  }
  if (!std::is_sorted(record_times.begin(), record_times.end())) {
    throw InvalidInput("integrate_moments: record times must be sorted");
  }

  auto fm = [&](const Vector& m) -> Vector { return A * m; };
  auto fs = [&](const Matrix& s) -> Matrix { return A * s + s * A.transpose() + Q; };

  std::vector<MomentSample> out;
  Vector m = mean0;
  Matrix s = cov0;
  double t = 0.0;
  std::size_t next = 0;
  const double cov_scale = cov0.operatorNorm();
  const double qn = Q.operatorNorm();
  auto emit = [&]() { out.push_back({t, m, s}); };
  auto check = [&]() {
    double growth = std::exp(2.0 * anorm * t);
    double bound = growth * cov_scale + qn * (anorm > 0 ? (growth - 1.0) / (2.0 * anorm) : t);
    if (!s.allFinite() || s.operatorNorm() > 2.0 * bound + 1e-12) {
      throw SchemeFailure("integrate_moments: covariance growth exceeds the exponential bound");
    }
  };

  if (record_times.empty()) emit();
  while (next < record_times.size() && record_times[next] <= 0.0) {
    emit();
    ++next;
  }
  while (t < t_end - 1e-14 * std::max(1.0, t_end)) {
    double target = t_end;
    if (next < record_times.size()) target = std::min(target, record_times[next]);
    double h = std::min(dt, target - t);
    Vector k1 = fm(m), k2 = fm(m + 0.5 * h * k1), k3 = fm(m + 0.5 * h * k2), k4 = fm(m + h * k3);
    Matrix l1 = fs(s), l2 = fs(s + 0.5 * h * l1), l3 = fs(s + 0.5 * h * l2), l4 = fs(s + h * l3);
    m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    s = 0.5 * (s + s.transpose()).eval();
    t = (h == target - t) ? target : t + h;
    check();
    if (record_times.empty()) {
      emit();
    } else {
      while (next < record_times.size() && record_times[next] <= t + 1e-14 * std::max(1.0, t)) {
        emit();
        ++next;
      }
    }
  }
  for (const auto& smp : out) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(smp.cov, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + smp.cov.cwiseAbs().maxCoeff())) {
      throw SchemeFailure("integrate_moments: covariance lost positive semidefiniteness");
    }
  }
  return out;
}

Vector linear_adjoint_solution(const LinearModelMatrices& mats, const Vector& a0, double t) {
  if (a0.size() != mats.A.rows()) throw InvalidInput("linear_adjoint_solution: dimension mismatch");
  if (!(t >= 0.0)) throw InvalidInput("linear_adjoint_solution: t must be >= 0");
  return expm(mats.A.transpose() * t) * a0;
}

Matrix stationary_covariance(const LinearModelMatrices& mats) {
  if (!(spectral_abscissa(mats) < 0.0)) {
    throw DomainError("stationary_covariance: drift matrix is not stable");
  }
  const int n = static_cast<int>(mats.A.rows());
  Matrix k = Matrix::Zero(n * n, n * n);
  const Matrix id = Matrix::Identity(n, n);
  // vec(A S + S A^T) = (I (x) A + A (x) I) vec(S), column-major vec.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) += id(i, j) * mats.A;
      k.block(i * n, j * n, n, n) += mats.A(i, j) * id;
    }
  }
  Vector rhs = -Eigen::Map<const Vector>(mats.Q.data(), n * n);
  Vector sol = k.partialPivLu().solve(rhs);
  Matrix s = Eigen::Map<Matrix>(sol.data(), n, n);
  return 0.5 * (s + s.transpose());
}

}  // namespace hypoflow
