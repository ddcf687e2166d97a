#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace conicscan {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Error taxonomy shared by all modules. CLI maps these onto exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct HermiticityError : Error {
  using Error::Error;
};
struct GapClosedError : Error {
  using Error::Error;
};
struct IsolationError : Error {
  using Error::Error;
};
struct FrameError : Error {
  using Error::Error;
};
struct ExhaustedDrawsError : Error {
  using Error::Error;
};
struct TrackingError : Error {
  using Error::Error;
};
struct PlaquetteError : Error {
  using Error::Error;
};
struct PreconditionError : Error {
  using Error::Error;
};

namespace tol {

// Construction-time Hermiticity check.
inline constexpr double kHermiticity = 1e-12;

// Two bands count as coincident below this gap; every "gap closed" decision
// routes through this one function (relative to the matrix norm).
inline double coincidence(double matrix_norm) {
  return 1e-10 * (1.0 + matrix_norm);
}

// Isolation of the (n, n+1) window from its neighbours.
inline constexpr double kIsolation = 1e-8;

// q just below zero is rounding noise and gets clamped.
inline constexpr double kQClamp = -1e-12;

}  // namespace tol

// N x N complex self-adjoint matrix. The stored form is exactly the
// symmetrized (A + A*)/2 of the input; construction rejects inputs that are
// not Hermitian within tol::kHermiticity (relative) or not finite.
class HermitianMatrix {
 public:
  explicit HermitianMatrix(Matrix a);

  // Fast path for matrices that are Hermitian by construction (sums of
  // conjugate-paired Fourier terms, projector assemblies). Symmetrizes
  // without the tolerance check.
  static HermitianMatrix trusted(Matrix a);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& mat() const { return m_; }

  // Frobenius norm, ||A||^2 = Tr(A^2).
  double norm() const { return m_.norm(); }

  HermitianMatrix operator+(const HermitianMatrix& o) const {
    return trusted(m_ + o.m_);
  }
  HermitianMatrix operator-(const HermitianMatrix& o) const {
    return trusted(m_ - o.m_);
  }
  HermitianMatrix scaled(double c) const { return trusted(c * m_); }

 private:
  HermitianMatrix() = default;
  Matrix m_;
};

// Pauli matrices in the frozen ordering sigma_1, sigma_2, sigma_3.
const Matrix& pauli(int k);  // k in [0,3], pauli(0) = Id_2

// a0*sigma_0 + a.sigma
HermitianMatrix pauli_combination(double a0, const Vec3& a);

}  // namespace conicscan
