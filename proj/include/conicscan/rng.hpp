#pragma once

#include "conicscan/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace conicscan {

// Deterministic random source. mt19937_64 output is pinned by the standard;
// the transforms below avoid std::*_distribution, whose algorithms are
// implementation-defined, so replay is bit-exact across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return std::ldexp(static_cast<double>(gen_() >> 11), -53);
  }

  double normal() {  // Box-Muller
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(kTwoPi * u2);
    have_cached_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  // Uniform in the radius-eps ball of R^3.
  Vec3 ball3(double eps) {
    Vec3 v(normal(), normal(), normal());
    double n = v.norm();
    while (n <= 0.0) {
      v = Vec3(normal(), normal(), normal());
      n = v.norm();
    }
    return v * (eps * std::cbrt(uniform()) / n);
  }

  // GUE-distributed Hermitian matrix.
  Matrix gue(int n) {
    Matrix a(n, n);
    for (int j = 0; j < n; ++j) {
      a(j, j) = Complex(normal(), 0.0);
      for (int k = j + 1; k < n; ++k) {
        const Complex z(normal(), normal());
        a(j, k) = z / std::sqrt(2.0);
        a(k, j) = std::conj(a(j, k));
      }
    }
    return a;
  }

  // Uniform in the Frobenius eps-ball of Hermitian N x N matrices
  // (GUE direction, radius rescaled by u^(1/dim), dim = N^2).
  Matrix ball_hermitian(int n, double eps) {
    Matrix g = gue(n);
    double nrm = g.norm();
    while (nrm <= 0.0) {
      g = gue(n);
      nrm = g.norm();
    }
    const double dim = static_cast<double>(n) * n;
    return g * (eps * std::pow(uniform(), 1.0 / dim) / nrm);
  }

  // Haar-ish random unitary (QR of a complex Ginibre matrix).
  Matrix unitary(int n) {
    Matrix g(n, n);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) g(j, k) = Complex(normal(), normal());
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
      const Complex d = r(j, j);
      if (std::abs(d) > 0.0) q.col(j) *= d / std::abs(d);
    }
    return q;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace conicscan
