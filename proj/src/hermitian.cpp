#include "conicscan/hermitian.hpp"

#include <cmath>
#include <sstream>

namespace conicscan {

HermitianMatrix::HermitianMatrix(Matrix a) {
  if (a.rows() != a.cols() || a.rows() < 2) {
    throw InputError("HermitianMatrix: need square matrix with N >= 2, got " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  if (!a.allFinite()) {
    throw InputError("HermitianMatrix: non-finite entries");
  }
  const double scale = 1.0 + a.norm();
  const double asym = (a - a.adjoint()).norm();
  if (asym > tol::kHermiticity * scale) {
    std::ostringstream os;
    os << "HermitianMatrix: input not Hermitian, |A - A*| = " << asym;
    throw HermiticityError(os.str());
  }
  m_ = 0.5 * (a + a.adjoint().eval());
}

HermitianMatrix HermitianMatrix::trusted(Matrix a) {
  HermitianMatrix h;
  h.m_ = 0.5 * (a + a.adjoint().eval());
  return h;
}

const Matrix& pauli(int k) {
  static const Matrix s0 = (Matrix(2, 2) << 1, 0, 0, 1).finished();
  static const Matrix s1 = (Matrix(2, 2) << 0, 1, 1, 0).finished();
  static const Matrix s2 =
      (Matrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished();
  static const Matrix s3 = (Matrix(2, 2) << 1, 0, 0, -1).finished();
  switch (k) {
    case 0: return s0;
    case 1: return s1;
    case 2: return s2;
    case 3: return s3;
    default: throw InputError("pauli: index out of range");
  }
}

HermitianMatrix pauli_combination(double a0, const Vec3& a) {
  Matrix m = a0 * pauli(0) + a[0] * pauli(1) + a[1] * pauli(2) + a[2] * pauli(3);
  return HermitianMatrix::trusted(std::move(m));
}

Spectrum eigensystem(const HermitianMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.mat());
  if (solver.info() != Eigen::Success) {
    throw InputError("eigensystem: diagonalization failed");
  }
  return Spectrum{solver.eigenvalues(), solver.eigenvectors()};
}

double discriminant(const HermitianMatrix& a) {
  const Spectrum s = eigensystem(a);
  const int n = s.dim();
  double d = 1.0;
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const double diff = s.eigenvalues[k] - s.eigenvalues[j];
      d *= diff * diff;
    }
  }
  return d;
}

HermitianMatrix spectral_projector(const Spectrum& s, int n,
                                   double matrix_norm) {
  const int dim = s.dim();
  if (n < 1 || n > dim - 1) {
    throw InputError("spectral_projector: band index out of range");
  }
  const double gap = s.gap_above(n);
  if (gap <= tol::coincidence(matrix_norm)) {
    std::ostringstream os;
    os << "spectral_projector: gap above band " << n << " is " << gap;
    throw GapClosedError(os.str());
  }
  const auto w = s.eigenvectors.leftCols(n);
  return HermitianMatrix::trusted(w * w.adjoint());
}

HermitianMatrix spectral_projector(const HermitianMatrix& a, int n) {
  return spectral_projector(eigensystem(a), n, a.norm());
}

TwoBandWindow two_band_window(const Spectrum& s, int n) {
  const int dim = s.dim();
  if (n < 1 || n > dim - 1) {
    throw InputError("two_band_window: band index out of range");
  }
  if (n >= 2 && s.eigenvalues[n - 1] - s.eigenvalues[n - 2] <= tol::kIsolation) {
    throw IsolationError("two_band_window: bands " + std::to_string(n - 1) +
                         "/" + std::to_string(n) + " not isolated");
  }
  if (n + 1 < dim && s.eigenvalues[n + 1] - s.eigenvalues[n] <= tol::kIsolation) {
    throw IsolationError("two_band_window: bands " + std::to_string(n + 1) +
                         "/" + std::to_string(n + 2) + " not isolated");
  }
  TwoBandWindow w;
  w.n = n;
  const double l1 = s.eigenvalues[n - 1];
  const double l2 = s.eigenvalues[n];
  w.F1 = l1 + l2;
  w.F2 = l1 * l1 + l2 * l2;
  w.ell = w.F1 / 2.0;
  w.q = (2.0 * w.F2 - w.F1 * w.F1) / 4.0;
  if (w.q < 0.0) {
    if (w.q < tol::kQClamp) {
      throw InputError("two_band_window: q below clamp threshold");
    }
    w.q = 0.0;
  }
  return w;
}

TwoBandWindow two_band_window(const HermitianMatrix& a, int n) {
  return two_band_window(eigensystem(a), n);
}

}  // namespace conicscan
