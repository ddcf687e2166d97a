#pragma once

#include "conicscan/scan.hpp"

#include <string>

namespace conicscan {

// Effective 2x2 model at a conical crossing: the frame (f1, f2) spanning the
// near-kernel, the drift a0 and the Pauli-coefficient matrix A0 of the
// first-order expansion J H(zeta* + eps) J* = (E0 + <a0, eps>) Id +
// sum_{jk} a_jk sigma_k eps_j + O(eps^2).
struct ConeData {
  DegeneracyPoint point;
  Matrix frame;          // N x 2, orthonormal columns f1, f2
  Vec3 a0 = Vec3::Zero();
  Mat3 A0 = Mat3::Zero();  // A0(j, k) = a_{j+1,k+1}, rows = (s, xi1, xi2)
  int chirality = 0;       // sign(det A0)
};

// (E0, a0, A0) driving the effective operator: the symbol is
// slashed_D(v) = <a0, v> sigma_0 + sum_k (A0^T v)_k sigma_k for
// v = (x2, xi1, xi2) in the frozen coordinate ordering.
struct DiracModel {
  double E0 = 0.0;
  Vec3 a0 = Vec3::Zero();
  Mat3 A0 = Mat3::Zero();
  std::string orientation = "s,xi1,xi2";
};

struct PauliCoefficients {
  Vec3 a0 = Vec3::Zero();
  Mat3 A0 = Mat3::Zero();
};

// Trace-pairing decomposition B_j = a_j0 sigma_0 + sum_k a_jk sigma_k of the
// frame-compressed derivatives B_j = F* (d_j H) F. Exposed so gauge checks
// can inject rotated frames.
PauliCoefficients pauli_coefficients(const Family& fam, const Vec3& zeta,
                                     const Matrix& frame);

// Requires dp.verdict == conical. Throws FrameError if the degenerate pair is
// not isolated from the other bands at zeta*.
ConeData analyze_cone(const Family& fam, const DegeneracyPoint& dp);

DiracModel dirac_model(const ConeData& cd);

// Symbol of the effective operator at v = (x2, xi1, xi2).
Matrix dirac_symbol(const DiracModel& dm, const Vec3& v);

}  // namespace conicscan
