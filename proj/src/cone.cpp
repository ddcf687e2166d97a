#include "conicscan/cone.hpp"

#include <cmath>

namespace conicscan {

PauliCoefficients pauli_coefficients(const Family& fam, const Vec3& zeta,
                                     const Matrix& frame) {
  PauliCoefficients pc;
  for (int j = 0; j < 3; ++j) {
    const Matrix b = frame.adjoint() * fam.derivative(zeta, j, 1).mat() * frame;
    pc.a0[j] = 0.5 * b.trace().real();
    for (int k = 1; k <= 3; ++k) {
      pc.A0(j, k - 1) = 0.5 * (b * pauli(k)).trace().real();
    }
  }
  return pc;
}

ConeData analyze_cone(const Family& fam, const DegeneracyPoint& dp) {
  if (dp.verdict != Verdict::conical) {
    throw InputError("analyze_cone: point is not classified conical");
  }
  const int n = dp.band;
  const Vec3 zeta = fam.domain().canonical(dp.location);
  const Spectrum s = eigensystem(fam.value(zeta));

  if ((n >= 2 && s.gap_above(n - 1) < 1e-8) ||
      (n + 1 < s.dim() && s.gap_above(n + 1) < 1e-8)) {
    throw FrameError("analyze_cone: near-kernel pair not separated from the "
                     "remaining bands");
  }

  ConeData cd;
  cd.point = dp;
  // the two middle eigenvectors, symmetrically re-orthonormalized
  Matrix w = s.eigenvectors.middleCols(n - 1, 2);
  Eigen::SelfAdjointEigenSolver<Matrix> es(w.adjoint() * w);
  cd.frame = w * (es.eigenvectors() *
                  es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                  es.eigenvectors().adjoint());

  const PauliCoefficients pc = pauli_coefficients(fam, zeta, cd.frame);
  cd.a0 = pc.a0;
  cd.A0 = pc.A0;

  const double det = cd.A0.determinant();
  const double scale = cd.A0.cwiseAbs().maxCoeff();
  if (scale <= 0.0 || std::abs(det) <= 1e-6 * scale * scale * scale) {
    throw FrameError("analyze_cone: A0 is numerically singular at a point "
                     "classified conical");
  }
  cd.chirality = det > 0.0 ? 1 : -1;
  return cd;
}

DiracModel dirac_model(const ConeData& cd) {
  DiracModel dm;
  dm.E0 = cd.point.energy;
  dm.a0 = cd.a0;
  dm.A0 = cd.A0;
  return dm;
}

Matrix dirac_symbol(const DiracModel& dm, const Vec3& v) {
  const Vec3 pauli_vec = dm.A0.transpose() * v;
  Matrix m = dm.a0.dot(v) * pauli(0);
  for (int k = 1; k <= 3; ++k) m += pauli_vec[k - 1] * pauli(k);
  return m;
}

}  // namespace conicscan
