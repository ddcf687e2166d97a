#pragma once

#include "conicscan/cone.hpp"
#include "conicscan/model.hpp"

#include <vector>

namespace conicscan {

// Sign convention for counting gap-crossing branches by d lambda / d xi1.
// Frozen against the QWZ m: 3 -> 1 calibration fixture so that the spectral
// flow equals the Chern jump (and the chirality sum) for the same homotopy.
inline constexpr int kFlowOrientation = -1;

// Domain-wall operator on the cylinder: s = delta * m2 - margin, clamped to
// [0, 1] outside the wall, Bloch-reduced along e1. Blocks are the symmetric
// part of the literal row rule (H^delta psi)_m = (H_{delta m2} psi)_m, which
// is Hermitian and within O(delta) of it.
class CylinderOperator {
 public:
  CylinderOperator(const Homotopy& homotopy, double delta, int width,
                   int k1_count);

  double delta() const { return delta_; }
  int width() const { return width_; }
  int bands() const { return bands_; }
  double margin() const { return margin_; }
  int band_index() const { return band_index_; }
  const std::vector<double>& k1_samples() const { return k1_samples_; }

  double s_of_row(int m2) const { return delta_ * m2 - margin_; }
  // row index whose wall coordinate is closest to s
  int row_of_s(double s) const;

  // (N W) x (N W) Hermitian block at Bloch momentum xi1; index m2 * N + band.
  Matrix block(double xi1) const;

  // bulk band edges around band n at the clamped end s in {0, 1}
  std::pair<double, double> bulk_window(double s, int grid = 64) const;

 private:
  struct AlignedTerm {
    Eigen::Vector3i r;
    Matrix t0;
    Matrix t1;
  };
  Matrix hopping_at(const AlignedTerm& term, double s) const;

  double delta_;
  int width_;
  int bands_;
  int band_index_;
  double margin_;
  std::vector<double> k1_samples_;
  std::vector<AlignedTerm> terms_;
  Schedule schedule_;
};

struct FlowCrossing {
  double xi1 = 0.0;       // midpoint of the step where the branch crossed E0
  int slope_sign = 0;     // sign of d lambda / d xi1 at the crossing
  double center_row = 0;  // m2 localization center of the crossing state
  bool in_wall = false;   // center inside the wall (not cylinder-boundary)
};

struct SpectralFlowReport {
  double e0 = 0.0;
  double window = 0.0;  // half-width w of the tracked energy window
  int k1_count = 0;
  std::vector<FlowCrossing> crossings;
  int signed_count = 0;  // wall crossings only, slope-signed
};

// Tracks in-window eigenvalue branches over xi1 by eigenvector-overlap
// continuation; throws TrackingError (retry with doubled k1_count) when the
// continuation becomes ambiguous.
SpectralFlowReport spectral_flow(const CylinderOperator& cyl, double e0,
                                 double window, int threads = 1,
                                 int max_doublings = 3);

// xi1-resolved spectrum samples for plotting: rows (xi1, eigenvalue).
std::vector<std::pair<double, double>> spectrum_scatter(
    const CylinderOperator& cyl, double e0, double window, int threads = 1);

// 1D fiber of the effective operator at transverse momentum k1, discretized
// on the matched lattice x2 = sqrt(delta) (m2 - center_row), spectral
// derivative in x2; size (2 W) x (2 W).
Matrix dirac_fiber_operator(const DiracModel& dm, double k1, int width,
                            double lattice_step, int center_row);

struct WavepacketComparison {
  double delta = 0.0;
  double sigma_scale = 1.0;
  double t_max = 0.0;
  std::vector<std::pair<double, double>> deviation;  // (t, relative L2)
  double unitarity_drift = 0.0;  // max | ||psi(t)|| - ||psi(0)|| |
};

// Gaussian two-band wavepacket at the cone (width sqrt(delta) sigma_scale in
// lattice units), evolved exactly fiber-by-fiber under the cylinder blocks and
// under the effective operator with tau = sqrt(delta) t and the e^{i E0 t}
// phase removed; returns the relative L2 deviation of the frame-compressed
// field at sampled times up to t_max = tau_max / sqrt(delta).
WavepacketComparison wavepacket_compare(const CylinderOperator& cyl,
                                        const ConeData& cone,
                                        double sigma_scale, double tau_max,
                                        int ring_size = 0, int time_samples = 8,
                                        int threads = 1);

}  // namespace conicscan
