// Independent reference computations used by the unit and acceptance suites.
// Everything here deliberately avoids the code paths it is used to check:
// the discriminant oracle goes through traces and a Sylvester resultant, the
// eigenvalue oracle through a companion matrix, the projector oracle through
// resolvent quadrature, and the Chern oracle through solid angles on S^2.
#pragma once

#include "conicscan/hermitian.hpp"
#include "conicscan/model.hpp"
#include "conicscan/rng.hpp"
#include "conicscan/types.hpp"

#include <cmath>
#include <vector>

namespace conicscan::oracle {

// Monic characteristic polynomial coefficients c_0..c_{n-1} (p(x) = x^n +
// c_{n-1} x^{n-1} + ... + c_0) from power sums p_m = Tr(A^m) via Newton's
// identities.
inline std::vector<double> charpoly_from_traces(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> power(n + 1, 0.0);
  Matrix acc = Matrix::Identity(n, n);
  for (int m = 1; m <= n; ++m) {
    acc = (acc * a).eval();
    power[m] = acc.trace().real();
  }
  std::vector<double> e(n + 1, 0.0);
  e[0] = 1.0;
  for (int k = 1; k <= n; ++k) {
    double s = 0.0;
    for (int i = 1; i <= k; ++i) {
      s += ((i % 2 == 1) ? 1.0 : -1.0) * e[k - i] * power[i];
    }
    e[k] = s / k;
  }
  std::vector<double> c(n, 0.0);
  for (int k = 1; k <= n; ++k) {
    c[n - k] = ((k % 2 == 0) ? 1.0 : -1.0) * e[k];
  }
  return c;
}

// Roots of a monic polynomial via its companion matrix (general complex
// eigensolver, a different algorithm than the Hermitian path under test).
inline std::vector<double> companion_real_roots(const std::vector<double>& c) {
  const int n = static_cast<int>(c.size());
  Matrix comp = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) comp(i, n - 1) = -c[i];
  Eigen::ComplexEigenSolver<Matrix> es(comp);
  std::vector<double> roots(n);
  for (int i = 0; i < n; ++i) roots[i] = es.eigenvalues()[i].real();
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Resultant of p (degree n, monic) and p' via the Sylvester determinant;
// discriminant D = (-1)^{n(n-1)/2} Res(p, p').
inline double discriminant_resultant(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  std::vector<double> c = charpoly_from_traces(a);
  // p coefficients, highest first: 1, c_{n-1}, ..., c_0
  std::vector<double> p(n + 1);
  p[0] = 1.0;
  for (int i = 0; i < n; ++i) p[i + 1] = c[n - 1 - i];
  std::vector<double> dp(n);
  for (int i = 0; i < n; ++i) dp[i] = (n - i) * p[i];

  const int dim = 2 * n - 1;
  Eigen::MatrixXd syl = Eigen::MatrixXd::Zero(dim, dim);
  for (int row = 0; row < n - 1; ++row) {
    for (int k = 0; k <= n; ++k) syl(row, row + k) = p[k];
  }
  for (int row = 0; row < n; ++row) {
    for (int k = 0; k <= n - 1; ++k) syl(n - 1 + row, row + k) = dp[k];
  }
  const double res = syl.determinant();
  const int sign_exp = (n * (n - 1)) / 2;
  return (sign_exp % 2 == 0) ? res : -res;
}

// Spectral projector onto the first n eigenspaces as the Cauchy integral of
// the resolvent over a circle threading the gap, trapezoid rule.
inline Matrix projector_contour(const Matrix& a, int n, int quad_points = 256) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const auto& ev = es.eigenvalues();
  const int dim = static_cast<int>(a.rows());
  const double lo = ev[0];
  const double hi = ev[n - 1];
  const double gap_above = ev[n] - ev[n - 1];
  const Complex center(0.5 * (lo + hi), 0.0);
  const double radius = 0.5 * (hi - lo) + 0.5 * gap_above;
  Matrix acc = Matrix::Zero(dim, dim);
  for (int k = 0; k < quad_points; ++k) {
    const double theta = kTwoPi * k / quad_points;
    const Complex z = center + radius * std::polar(1.0, theta);
    const Complex dz = radius * Complex(0, 1) * std::polar(1.0, theta);
    const Matrix resolvent =
        (z * Matrix::Identity(dim, dim) - a).partialPivLu().solve(
            Matrix::Identity(dim, dim));
    acc += resolvent * dz;
  }
  // (1/2pi i) * sum f(z_k) dz_k * (2pi/M) = sum f(z_k) dz_k / (i M)
  return acc / (Complex(0, 1) * static_cast<double>(quad_points));
}

// Pauli vector d of a 2x2 Hermitian matrix, d_k = Re Tr(H sigma_k) / 2.
inline Vec3 pauli_vector(const Matrix& h) {
  Vec3 d;
  for (int k = 1; k <= 3; ++k) {
    d[k - 1] = 0.5 * (h * pauli(k)).trace().real();
  }
  return d;
}

// Degree of the normalized Pauli map d_hat : T^2 -> S^2 for a two-band slice,
// by summing signed solid angles of a triangulated mesh (van Oosterom-Strackee
// formula). `slice` evaluates the 2x2 matrix at (xi1, xi2).
template <typename SliceFn>
int degree_of_map(SliceFn&& slice, int mesh) {
  auto unit_d = [&](int i, int j) -> Vec3 {
    const double x1 = kTwoPi * i / mesh;
    const double x2 = kTwoPi * j / mesh;
    Vec3 d = pauli_vector(slice(x1, x2));
    return d.normalized();
  };
  auto solid_angle = [](const Vec3& a, const Vec3& b, const Vec3& c) {
    const double num = a.dot(b.cross(c));
    const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    return 2.0 * std::atan2(num, den);
  };
  double total = 0.0;
  for (int i = 0; i < mesh; ++i) {
    for (int j = 0; j < mesh; ++j) {
      const Vec3 v1 = unit_d(i, j);
      const Vec3 v2 = unit_d(i + 1, j);
      const Vec3 v3 = unit_d(i + 1, j + 1);
      const Vec3 v4 = unit_d(i, j + 1);
      total += solid_angle(v1, v2, v3) + solid_angle(v1, v3, v4);
    }
  }
  return static_cast<int>(std::lround(total / (2.0 * kTwoPi)));
}

// Central finite difference of a family value, for gradient checks.
inline Matrix fd_derivative(const Family& fam, const Vec3& p, int axis,
                            double h = 1e-5) {
  Vec3 e = Vec3::Zero();
  e[axis] = h;
  return (fam.value(p + e).mat() - fam.value(p - e).mat()) / (2.0 * h);
}

// Random Hermitian with O(1) entries.
inline HermitianMatrix random_hermitian(Rng& rng, int n) {
  return HermitianMatrix::trusted(rng.gue(n));
}

}  // namespace conicscan::oracle
