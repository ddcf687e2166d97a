#include "conicscan/hermitian.hpp"
#include "conicscan/rng.hpp"

#include <doctest.h>

#include "oracles.hpp"

using namespace conicscan;

namespace {

HermitianMatrix diag3(double a, double b, double c) {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  return HermitianMatrix(std::move(m));
}

}  // namespace

TEST_CASE("HermitianMatrix construction validates and symmetrizes") {
  Matrix ok(2, 2);
  ok << 1.0, Complex(0.5, 0.25), Complex(0.5, -0.25), -2.0;
  const HermitianMatrix h(ok);
  CHECK((h.mat() - h.mat().adjoint()).norm() == 0.0);

  Matrix bad(2, 2);
  bad << 1.0, Complex(0.5, 0.25), Complex(0.5, 0.25), -2.0;
  CHECK_THROWS_AS(HermitianMatrix{bad}, HermiticityError);

  Matrix nan(2, 2);
  nan << std::nan(""), 0.0, 0.0, 1.0;
  CHECK_THROWS_AS(HermitianMatrix{nan}, InputError);

  CHECK_THROWS_AS(HermitianMatrix{Matrix::Identity(1, 1)}, InputError);
}

TEST_CASE("eigensystem: diagonal and Pauli fixtures") {
  const Spectrum s = eigensystem(diag3(3.0, 1.0, 2.0));
  CHECK(s.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.eigenvalues[2] == doctest::Approx(3.0).epsilon(1e-14));

  const Spectrum sp = eigensystem(HermitianMatrix(pauli(1)));
  CHECK(sp.eigenvalues[0] == doctest::Approx(-1.0));
  CHECK(sp.eigenvalues[1] == doctest::Approx(1.0));
}

TEST_CASE("eigensystem: spectrum invariants on random matrices") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 5);
    const HermitianMatrix a = oracle::random_hermitian(rng, n);
    const Spectrum s = eigensystem(a);
    for (int i = 0; i + 1 < n; ++i) {
      CHECK(s.eigenvalues[i] <= s.eigenvalues[i + 1]);
    }
    const Matrix recon = s.eigenvectors *
                         s.eigenvalues.cast<Complex>().asDiagonal() *
                         s.eigenvectors.adjoint();
    CHECK((a.mat() - recon).norm() <= 1e-10 * (1.0 + a.norm()));
    CHECK((s.eigenvectors.adjoint() * s.eigenvectors -
           Matrix::Identity(n, n))
              .norm() <= 1e-10);
  }
}

TEST_CASE("eigensystem matches companion-matrix root oracle (6x6)") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const HermitianMatrix a = oracle::random_hermitian(rng, 6);
    const Spectrum s = eigensystem(a);
    const auto roots =
        oracle::companion_real_roots(oracle::charpoly_from_traces(a.mat()));
    for (int i = 0; i < 6; ++i) {
      CHECK(std::abs(s.eigenvalues[i] - roots[i]) <= 1e-8 * (1.0 + a.norm()));
    }
  }
}

TEST_CASE("discriminant: fixtures and resultant oracle") {
  CHECK(discriminant(HermitianMatrix(pauli(3))) == doctest::Approx(4.0));
  CHECK(discriminant(HermitianMatrix(Matrix::Identity(4, 4))) ==
        doctest::Approx(0.0));

  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 3;
    const HermitianMatrix a = oracle::random_hermitian(rng, n);
    const double d = discriminant(a);
    CHECK(d >= 0.0);
    const double ref = oracle::discriminant_resultant(a.mat());
    CHECK(std::abs(d - ref) <= 1e-7 * std::max({1.0, std::abs(d), std::abs(ref)}));
  }
}

TEST_CASE("discriminant is a shift- and conjugation-invariant spectral function") {
  Rng rng(14);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 4;
    const HermitianMatrix a = oracle::random_hermitian(rng, n);
    const double d = discriminant(a);

    const Matrix u = rng.unitary(n);
    const double d_conj =
        discriminant(HermitianMatrix::trusted(u * a.mat() * u.adjoint()));
    CHECK(std::abs(d - d_conj) <= 1e-8 * (1.0 + std::abs(d)));

    const double t = 3.0 * (rng.uniform() - 0.5);
    const double d_shift = discriminant(HermitianMatrix::trusted(
        a.mat() + t * Matrix::Identity(n, n)));
    CHECK(std::abs(d - d_shift) <= 1e-8 * (1.0 + std::abs(d)));
  }
}

TEST_CASE("spectral_projector: fixtures") {
  const HermitianMatrix p2 = spectral_projector(diag3(1.0, 2.0, 3.0), 2);
  Matrix expect = Matrix::Zero(3, 3);
  expect(0, 0) = 1.0;
  expect(1, 1) = 1.0;
  CHECK((p2.mat() - expect).norm() <= 1e-12);

  // sigma_3 band 1: eigenvector for eigenvalue -1 is e2
  const HermitianMatrix ps = spectral_projector(HermitianMatrix(pauli(3)), 1);
  Matrix expect2 = Matrix::Zero(2, 2);
  expect2(1, 1) = 1.0;
  CHECK((ps.mat() - expect2).norm() <= 1e-12);

  CHECK_THROWS_AS(spectral_projector(HermitianMatrix(Matrix::Identity(2, 2)), 1),
                  GapClosedError);
}

TEST_CASE("spectral_projector matches the Cauchy-integral quadrature oracle") {
  Rng rng(15);
  int done = 0;
  while (done < 5) {
    const HermitianMatrix a = oracle::random_hermitian(rng, 4);
    const Spectrum s = eigensystem(a);
    if (s.gap_above(2) < 0.3) continue;  // want a safe contour
    const HermitianMatrix p = spectral_projector(a, 2);
    const Matrix ref = oracle::projector_contour(a.mat(), 2);
    CHECK((p.mat() - ref).norm() <= 1e-6);
    ++done;
  }
}

TEST_CASE("spectral_projector invariants, property-tested") {
  Rng rng(16);
  int checked = 0;
  for (int trial = 0; trial < 1200 && checked < 1000; ++trial) {
    const int n = 2 + trial % 5;
    const HermitianMatrix a = oracle::random_hermitian(rng, n);
    const Spectrum s = eigensystem(a);
    const int band = 1 + trial % (n - 1);
    if (s.gap_above(band) <= tol::coincidence(a.norm())) continue;
    const HermitianMatrix p = spectral_projector(s, band, a.norm());
    const Matrix& pm = p.mat();
    CHECK((pm * pm - pm).norm() <= 1e-9);
    CHECK((pm - pm.adjoint()).norm() <= 1e-9);
    CHECK(std::abs(pm.trace().real() - band) <= 1e-9);
    CHECK((pm * a.mat() - a.mat() * pm).norm() <= 1e-9 * (1.0 + a.norm()));
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("eigenvalue Lipschitz bound |lambda_j(A)-lambda_j(B)| <= |A-B|") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    const HermitianMatrix a = oracle::random_hermitian(rng, n);
    const HermitianMatrix b = oracle::random_hermitian(rng, n);
    const Spectrum sa = eigensystem(a);
    const Spectrum sb = eigensystem(b);
    const double dist = (a.mat() - b.mat()).norm();
    for (int j = 0; j < n; ++j) {
      CHECK(std::abs(sa.eigenvalues[j] - sb.eigenvalues[j]) <= dist + 1e-9);
    }
  }
}

TEST_CASE("two_band_window: fixtures and invariants") {
  const TwoBandWindow w = two_band_window(diag3(0.0, 1.0, 5.0), 1);
  CHECK(w.ell == doctest::Approx(0.5));
  CHECK(w.q == doctest::Approx(0.25));
  CHECK(w.F1 == doctest::Approx(1.0));
  CHECK(w.F2 == doctest::Approx(1.0));

  // degenerate pair: q = 0
  const TwoBandWindow wd = two_band_window(diag3(2.0, 2.0, 7.0), 1);
  CHECK(wd.q == doctest::Approx(0.0));

  // isolation violated
  CHECK_THROWS_AS(two_band_window(diag3(0.0, 1.0, 1.0 + 1e-9), 1),
                  IsolationError);

  Rng rng(18);
  int checked = 0;
  while (checked < 50) {
    const HermitianMatrix a = oracle::random_hermitian(rng, 5);
    const Spectrum s = eigensystem(a);
    if (s.gap_above(1) <= tol::kIsolation || s.gap_above(3) <= tol::kIsolation)
      continue;
    const TwoBandWindow w5 = two_band_window(s, 2);
    const double gap = s.eigenvalues[2] - s.eigenvalues[1];
    CHECK(std::abs(w5.q - gap * gap / 4.0) <= 1e-10 * (1.0 + gap * gap));
    CHECK(std::abs(w5.q - (2.0 * w5.F2 - w5.F1 * w5.F1) / 4.0) <= 1e-10);
    CHECK(w5.ell == w5.F1 / 2.0);
    CHECK(w5.q >= 0.0);
    ++checked;
  }
}
