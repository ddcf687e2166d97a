#pragma once

#include "conicscan/cone.hpp"
#include "conicscan/scan.hpp"

#include <functional>
#include <vector>

namespace conicscan {

// Torus orientation entering every c1 integral. The sign conventions of the
// curvature trace, the Pauli ordering and the chirality are fixed jointly by
// the Chern-jump identity; this factor is frozen once against the two-band
// calibration homotopy (m: 3 -> 1) and recorded in every report header.
inline constexpr int kTorusOrientation = -1;

struct CurvatureField {
  double s = 0.0;
  int band = 1;
  int grid = 0;
  Eigen::MatrixXd values;  // B/i, real; values(i, j) at xi = 2pi (i, j) / grid
};

struct ChernConfig {
  int grid = 24;
  int max_doublings = 3;
  double jump_delta = 1e-2;
  int max_delta_halvings = 6;
  int slice_samples = 3;  // reported c1 samples per gapped subinterval
  int threads = 1;
};

struct JumpRecord {
  double s_star = 0.0;
  double delta_used = 0.0;
  int c1_below = 0;
  int c1_above = 0;
  int delta_c1 = 0;
  std::vector<ConeData> cones;
  int chirality_sum = 0;
  bool pass = false;
};

struct ChernReport {
  int band = 1;
  int c1_start = 0;
  int c1_end = 0;
  std::vector<std::pair<double, int>> slices;  // (s, c1), sorted by s
  std::vector<double> jump_set;
  std::vector<JumpRecord> per_jump;
  bool theorem3_pass = false;
};

// Berry curvature of the projector onto bands lo..hi (1-based, inclusive) on
// a grid x grid xi-mesh at slice s. Projector derivatives are centered
// differences with step 2pi/(8 grid); projectors are gauge invariant, so no
// gauge fixing is needed. Throws GapClosedError (naming the offending xi)
// when a window boundary gap drops below 1e-6 on the sampled grid.
CurvatureField berry_curvature_window(const Family& fam, double s, int lo,
                                      int hi, int grid, int threads = 1);
inline CurvatureField berry_curvature(const Family& fam, double s, int n,
                                      int grid, int threads = 1) {
  return berry_curvature_window(fam, s, 1, n, grid, threads);
}

// Oriented Riemann sum of the curvature: kTorusOrientation/(2pi) * sum B/i dA.
double berry_integral(const CurvatureField& field);

// Lattice Chern number from link variables det(W* W') of n-frame overlaps,
// with plaquette phases as principal logarithm arguments. Exact integer once
// every plaquette phase is small; throws PlaquetteError past pi - 0.2 (the
// caller-facing chern_number retries with a doubled grid). The frame callback
// provides the N x n eigenframe at (xi1, xi2).
using FrameFn = std::function<Matrix(double, double)>;
int chern_from_frames(const FrameFn& frames, int bands, int n, int grid);

// Chern number of the rank-n eigenbundle of the slice, with the Riemann-sum
// cross-check asserted to within 0.5 before rounding.
int chern_number(const Family& fam, double s, int n, int grid,
                 int max_doublings = 3, int threads = 1);

// Near-cone curvature integral over |xi - xi_star| <= r at slice s, oriented
// like berry_integral, by polar quadrature with logarithmic radial refinement
// (the integrand concentrates at scale |s - s_star|).
double near_cone_curvature_integral(const Family& fam, double s, int n,
                                    const Eigen::Vector2d& xi_star, double r,
                                    int radial_nodes = 160,
                                    int angular_nodes = 64);

// Full per-slice profile and the Chern-jump-versus-chirality verifier.
// Requires every crossing in `crossings` to be conical (PreconditionError
// otherwise, the identity's hypothesis).
ChernReport chern_profile(const Family& fam, int n,
                          const ScanResult& crossings,
                          const ChernConfig& cfg);

}  // namespace conicscan
