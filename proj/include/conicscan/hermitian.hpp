#pragma once

#include "conicscan/types.hpp"

namespace conicscan {

// Full eigensystem of a Hermitian matrix. Eigenvalues ascending with
// multiplicity; eigenvector column k pairs with eigenvalue k, orthonormal.
struct Spectrum {
  RealVector eigenvalues;
  Matrix eigenvectors;

  int dim() const { return static_cast<int>(eigenvalues.size()); }
  // Gap above band n (1-based): lambda_{n+1} - lambda_n.
  double gap_above(int n) const {
    return eigenvalues[n] - eigenvalues[n - 1];
  }
};

Spectrum eigensystem(const HermitianMatrix& a);

// Matrix discriminant D(A) = prod_{j<k} (lambda_j - lambda_k)^2. Nonnegative;
// zero exactly when an eigenvalue repeats (within tol::coincidence).
double discriminant(const HermitianMatrix& a);

// Projector onto the first n eigenspaces. Requires the gap above band n to
// exceed tol::coincidence(|A|); throws GapClosedError otherwise.
HermitianMatrix spectral_projector(const HermitianMatrix& a, int n);
HermitianMatrix spectral_projector(const Spectrum& s, int n, double matrix_norm);

// Smooth two-band invariants of the (n, n+1) window:
//   F1 = lambda_n + lambda_{n+1}, F2 = lambda_n^2 + lambda_{n+1}^2,
//   ell = F1/2, q = (2 F2 - F1^2)/4 = (gap/2)^2, clamped at 0.
struct TwoBandWindow {
  int n = 0;
  double ell = 0.0;
  double q = 0.0;
  double F1 = 0.0;
  double F2 = 0.0;
};

// Requires bands n-1/n and n+1/n+2 to be separated from the window by more
// than tol::kIsolation; throws IsolationError otherwise (the high-multiplicity
// regime is handled by the genericity module).
TwoBandWindow two_band_window(const HermitianMatrix& a, int n);
TwoBandWindow two_band_window(const Spectrum& s, int n);

}  // namespace conicscan
