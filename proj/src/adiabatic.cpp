#include "conicscan/adiabatic.hpp"

#include "conicscan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace conicscan {

namespace {

double wrap_to_pi(double x) { return std::remainder(x, kTwoPi); }

int pow2_at_least(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace

CylinderOperator::CylinderOperator(const Homotopy& homotopy, double delta,
                                   int width, int k1_count)
    : delta_(delta),
      width_(width),
      bands_(homotopy.bands()),
      band_index_(homotopy.band_index()),
      schedule_(homotopy.schedule()) {
  if (delta_ <= 0.0 || delta_ > 0.2) {
    throw InputError("build_cylinder: delta must lie in (0, 0.2]");
  }
  if (width_ * delta_ < 1.4) {
    throw InputError("build_cylinder: width * delta must be >= 1.4");
  }
  margin_ = 0.5 * (delta_ * (width_ - 1) - 1.0);

  // union of the two endpoint supports
  for (const auto& t : homotopy.h0().terms()) {
    terms_.push_back({t.r, t.t, Matrix::Zero(bands_, bands_)});
  }
  for (const auto& t : homotopy.h1().terms()) {
    bool found = false;
    for (auto& a : terms_) {
      if (a.r == t.r) {
        a.t1 = t.t;
        found = true;
        break;
      }
    }
    if (!found) {
      terms_.push_back({t.r, Matrix::Zero(bands_, bands_), t.t});
    }
  }
  std::sort(terms_.begin(), terms_.end(),
            [](const AlignedTerm& a, const AlignedTerm& b) {
              return std::lexicographical_compare(a.r.data(), a.r.data() + 3,
                                                  b.r.data(), b.r.data() + 3);
            });

  int max_r2 = 0;
  for (const auto& t : terms_) max_r2 = std::max(max_r2, std::abs(t.r[1]));
  if (delta_ * max_r2 > margin_) {
    throw InputError("build_cylinder: hopping range along e2 exceeds the "
                     "width margins");
  }

  for (int k = 0; k < k1_count; ++k) {
    k1_samples_.push_back(kTwoPi * k / k1_count);
  }
}

int CylinderOperator::row_of_s(double s) const {
  const int row = static_cast<int>(std::lround((s + margin_) / delta_));
  return std::clamp(row, 0, width_ - 1);
}

Matrix CylinderOperator::hopping_at(const AlignedTerm& term, double s) const {
  const double w = schedule_.weight(std::clamp(s, 0.0, 1.0));
  if (w == 0.0) return term.t0;
  if (w == 1.0) return term.t1;
  return (1.0 - w) * term.t0 + w * term.t1;
}

Matrix CylinderOperator::block(double xi1) const {
  const int n = bands_;
  Matrix m = Matrix::Zero(n * width_, n * width_);
  for (int row = 0; row < width_; ++row) {
    const double s = std::clamp(s_of_row(row), 0.0, 1.0);
    for (const auto& term : terms_) {
      const int col = row + term.r[1];
      if (col < 0 || col >= width_) continue;
      const Complex phase = std::polar(1.0, xi1 * term.r[0]);
      m.block(row * n, col * n, n, n) += phase * hopping_at(term, s);
    }
  }
  return 0.5 * (m + m.adjoint().eval());
}

std::pair<double, double> CylinderOperator::bulk_window(double s,
                                                        int grid) const {
  double band_top = -1e300;
  double band_bottom = 1e300;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      Matrix h = Matrix::Zero(bands_, bands_);
      for (const auto& term : terms_) {
        const double phase =
            kTwoPi * (i * term.r[0] + j * term.r[1]) / grid;
        h += std::polar(1.0, phase) * hopping_at(term, s);
      }
      const Spectrum spec = eigensystem(HermitianMatrix::trusted(h));
      band_top = std::max(band_top, spec.eigenvalues[band_index_ - 1]);
      band_bottom = std::min(band_bottom, spec.eigenvalues[band_index_]);
    }
  }
  return {band_top, band_bottom};
}

namespace {

struct GapState {
  double lambda = 0.0;
  double center = 0.0;
  CVector vec;
};

std::vector<std::vector<GapState>> gap_states(const CylinderOperator& cyl,
                                              int k1_count, double lo,
                                              double hi, int threads) {
  std::vector<std::vector<GapState>> states(k1_count);
  parallel_for(k1_count, threads, [&](std::int64_t k) {
    const double xi1 = kTwoPi * static_cast<double>(k) / k1_count;
    const Spectrum spec =
        eigensystem(HermitianMatrix::trusted(cyl.block(xi1)));
    const int n = cyl.bands();
    for (int i = 0; i < spec.dim(); ++i) {
      const double lam = spec.eigenvalues[i];
      if (lam <= lo || lam >= hi) continue;
      GapState st;
      st.lambda = lam;
      st.vec = spec.eigenvectors.col(i);
      double center = 0.0;
      for (int m2 = 0; m2 < cyl.width(); ++m2) {
        center += m2 * st.vec.segment(m2 * n, n).squaredNorm();
      }
      st.center = center;
      states[k].push_back(std::move(st));
    }
  });
  return states;
}

}  // namespace

SpectralFlowReport spectral_flow(const CylinderOperator& cyl, double e0,
                                 double window, int threads,
                                 int max_doublings) {
  // E0 and the window must sit inside both endpoint bulk gaps
  double collect_lo = -1e300;
  double collect_hi = 1e300;
  for (double s : {0.0, 1.0}) {
    const auto [band_top, band_bottom] = cyl.bulk_window(s);
    if (e0 <= band_top || e0 >= band_bottom) {
      throw PreconditionError("spectral_flow: E0 outside a bulk gap");
    }
    if (window >= 0.5 * (band_bottom - band_top)) {
      throw PreconditionError(
          "spectral_flow: window exceeds half the bulk gap");
    }
    collect_lo = std::max(collect_lo, band_top);
    collect_hi = std::min(collect_hi, band_bottom);
  }
  // keep clear of the bulk continuum edges
  const double pad = 0.05 * (collect_hi - collect_lo);
  collect_lo += pad;
  collect_hi -= pad;

  const double buffer = std::max(2.0, 0.1 * cyl.width());
  int k1_count = static_cast<int>(cyl.k1_samples().size());

  for (int attempt = 0;; ++attempt) {
    const auto states =
        gap_states(cyl, k1_count, collect_lo, collect_hi, threads);
    SpectralFlowReport report;
    report.e0 = e0;
    report.window = window;
    report.k1_count = k1_count;

    bool ambiguous = false;
    for (int k = 0; k < k1_count && !ambiguous; ++k) {
      const auto& cur = states[k];
      const auto& nxt = states[(k + 1) % k1_count];
      if (cur.empty()) continue;

      // greedy one-to-one overlap matching, largest overlap first
      std::vector<std::tuple<double, int, int>> overlaps;
      for (size_t a = 0; a < cur.size(); ++a) {
        for (size_t b = 0; b < nxt.size(); ++b) {
          const double o = std::abs(cur[a].vec.dot(nxt[b].vec));
          overlaps.emplace_back(o, static_cast<int>(a), static_cast<int>(b));
        }
      }
      std::sort(overlaps.begin(), overlaps.end(),
                [](const auto& x, const auto& y) {
                  return std::get<0>(x) > std::get<0>(y);
                });
      std::vector<int> match(cur.size(), -1);
      std::vector<bool> used(nxt.size(), false);
      for (const auto& [o, a, b] : overlaps) {
        if (match[a] != -1 || used[b]) continue;
        match[a] = b;
        used[b] = true;
        if (o < 0.5 && std::abs(cur[a].lambda - e0) < window) {
          ambiguous = true;  // the continuation near E0 is unreliable
        }
      }

      for (size_t a = 0; a < cur.size(); ++a) {
        if (match[a] < 0) continue;
        const GapState& s0 = cur[a];
        const GapState& s1 = nxt[match[a]];
        const bool up = s0.lambda <= e0 && e0 < s1.lambda;
        const bool down = s1.lambda <= e0 && e0 < s0.lambda;
        if (!up && !down) continue;
        FlowCrossing c;
        c.xi1 = kTwoPi * (k + 0.5) / k1_count;
        c.slope_sign = up ? 1 : -1;
        const GapState& nearer =
            std::abs(s0.lambda - e0) <= std::abs(s1.lambda - e0) ? s0 : s1;
        c.center_row = nearer.center;
        c.in_wall = nearer.center > buffer &&
                    nearer.center < cyl.width() - 1 - buffer;
        report.crossings.push_back(c);
      }
    }

    if (ambiguous) {
      if (attempt >= max_doublings) {
        throw TrackingError("spectral_flow: overlap continuation ambiguous "
                            "at the finest k1 grid");
      }
      k1_count *= 2;
      continue;
    }

    for (const auto& c : report.crossings) {
      if (c.in_wall) report.signed_count += kFlowOrientation * c.slope_sign;
    }
    return report;
  }
}

std::vector<std::pair<double, double>> spectrum_scatter(
    const CylinderOperator& cyl, double e0, double window, int threads) {
  const int k1_count = static_cast<int>(cyl.k1_samples().size());
  const auto states =
      gap_states(cyl, k1_count, e0 - window, e0 + window, threads);
  std::vector<std::pair<double, double>> rows;
  for (int k = 0; k < k1_count; ++k) {
    for (const auto& st : states[k]) {
      rows.emplace_back(kTwoPi * k / k1_count, st.lambda);
    }
  }
  return rows;
}

Matrix dirac_fiber_operator(const DiracModel& dm, double k1, int width,
                            double lattice_step, int center_row) {
  using RowMajorMatrix = Matrix;
  // spectral derivative D2 = F* diag(freq) F on the x2 ring
  RowMajorMatrix dft(width, width);
  const double root = 1.0 / std::sqrt(static_cast<double>(width));
  for (int f = 0; f < width; ++f) {
    for (int m = 0; m < width; ++m) {
      dft(f, m) = std::polar(root, -kTwoPi * f * m / width);
    }
  }
  // Nyquist kept at +pi/h: zeroing it would plant a spurious low-energy
  // doubler; pushed to the band edge it stays out of the packet's window.
  Eigen::VectorXd freq(width);
  for (int f = 0; f < width; ++f) {
    const int rel = f <= width / 2 ? f : f - width;
    freq[f] = kTwoPi * rel / (width * lattice_step);
  }
  const Matrix d2 =
      dft.adjoint() * freq.cast<Complex>().asDiagonal() * dft;

  Eigen::VectorXd x2(width);
  for (int m = 0; m < width; ++m) x2[m] = lattice_step * (m - center_row);

  // per-Pauli W x W coefficient operators from the (s, xi1, xi2) slots
  std::array<Matrix, 4> ops;
  for (int k = 0; k <= 3; ++k) {
    const Vec3 coeff = k == 0 ? dm.a0 : Vec3(dm.A0(0, k - 1), dm.A0(1, k - 1),
                                             dm.A0(2, k - 1));
    ops[k] = coeff[0] * x2.cast<Complex>().asDiagonal().toDenseMatrix() +
             coeff[1] * k1 * Matrix::Identity(width, width) + coeff[2] * d2;
  }

  Matrix out = Matrix::Zero(2 * width, 2 * width);
  for (int a = 0; a < width; ++a) {
    for (int b = 0; b < width; ++b) {
      Matrix cell = Matrix::Zero(2, 2);
      for (int k = 0; k <= 3; ++k) cell += ops[k](a, b) * pauli(k);
      out.block(2 * a, 2 * b, 2, 2) = cell;
    }
  }
  return 0.5 * (out + out.adjoint().eval());
}

WavepacketComparison wavepacket_compare(const CylinderOperator& cyl,
                                        const ConeData& cone,
                                        double sigma_scale, double tau_max,
                                        int ring_size, int time_samples,
                                        int threads) {
  const double delta = cyl.delta();
  const double sqrt_delta = std::sqrt(delta);
  const double t_max = tau_max / sqrt_delta;
  const int n = cyl.bands();
  const int w = cyl.width();

  const double s0 = cone.point.location[0];
  const double xi1_star = cone.point.location[1];
  const double xi2_star = cone.point.location[2];
  const int center_row = cyl.row_of_s(s0);

  const double sigma_sites = sigma_scale / sqrt_delta;
  if (6.0 * sigma_sites > w) {
    throw InputError("wavepacket_compare: packet width does not fit the "
                     "cylinder");
  }
  int ring = ring_size > 0
                 ? ring_size
                 : pow2_at_least(static_cast<int>(
                       std::ceil(6.0 * sigma_sites + 6.0 * t_max + 48.0)));
  const int center_m1 = ring / 2;

  auto gauss = [&](double x) {
    return std::exp(-x * x / (4.0 * sigma_scale * sigma_scale));
  };
  const Eigen::Vector2cd spinor(1.0 / std::sqrt(2.0),
                                Complex(0.0, 1.0) / std::sqrt(2.0));

  // separable packet: fiber weights G_i over the m1 ring
  std::vector<Complex> fiber_weight(ring);
  double max_weight = 0.0;
  for (int i = 0; i < ring; ++i) {
    const double theta = kTwoPi * i / ring;
    Complex acc(0.0, 0.0);
    for (int m1 = 0; m1 < ring; ++m1) {
      const double x1 = sqrt_delta * (m1 - center_m1);
      acc += gauss(x1) * std::polar(1.0, (xi1_star - theta) * m1);
    }
    fiber_weight[i] = acc / static_cast<double>(ring);
    max_weight = std::max(max_weight, std::abs(fiber_weight[i]));
  }
  std::vector<int> active;
  for (int i = 0; i < ring; ++i) {
    if (std::abs(fiber_weight[i]) > 1e-12 * max_weight) active.push_back(i);
  }

  const DiracModel dm = dirac_model(cone);
  std::vector<double> times(time_samples + 1);
  for (int ti = 0; ti <= time_samples; ++ti) {
    times[ti] = t_max * ti / time_samples;
  }

  struct Accum {
    std::vector<double> diff2;
    std::vector<double> edge_mass;
    std::vector<double> norm_drift;
    double denom2 = 0.0;
  };
  std::vector<Accum> acc(active.size());

  parallel_for(static_cast<std::int64_t>(active.size()), threads,
               [&](std::int64_t ai) {
                 const int i = active[ai];
                 Accum& out = acc[ai];
                 out.diff2.assign(times.size(), 0.0);
                 out.edge_mass.assign(times.size(), 0.0);
                 out.norm_drift.assign(times.size(), 0.0);

                 const double theta = kTwoPi * i / ring;
                 const double kappa = wrap_to_pi(theta - xi1_star);

                 // matched initial data on the fiber
                 CVector beta0(2 * w);
                 CVector phi0(n * w);
                 phi0.setZero();
                 for (int m2 = 0; m2 < w; ++m2) {
                   const double x2 = sqrt_delta * (m2 - center_row);
                   const Complex amp = fiber_weight[i] * gauss(x2);
                   beta0.segment(2 * m2, 2) = amp * spinor;
                   const Complex bloch = std::polar(1.0, xi2_star * m2);
                   phi0.segment(m2 * n, n) =
                       amp * bloch * (cone.frame * spinor);
                 }
                 out.denom2 = beta0.squaredNorm();
                 if (out.denom2 == 0.0) return;

                 // exact evolution through the eigenbases
                 const Spectrum cyl_spec = eigensystem(
                     HermitianMatrix::trusted(cyl.block(theta)));
                 const CVector cyl_coeff =
                     cyl_spec.eigenvectors.adjoint() * phi0;
                 const Matrix dirac_op = dirac_fiber_operator(
                     dm, kappa / sqrt_delta, w, sqrt_delta, center_row);
                 const Spectrum dir_spec =
                     eigensystem(HermitianMatrix::trusted(dirac_op));
                 const CVector dir_coeff =
                     dir_spec.eigenvectors.adjoint() * beta0;

                 const double norm0 = phi0.norm();
                 for (size_t ti = 0; ti < times.size(); ++ti) {
                   const double t = times[ti];
                   const double tau = sqrt_delta * t;
                   CVector cyl_phase(cyl_coeff.size());
                   for (int q = 0; q < cyl_coeff.size(); ++q) {
                     cyl_phase[q] =
                         std::polar(1.0, cyl_spec.eigenvalues[q] * t) *
                         cyl_coeff[q];
                   }
                   const CVector psi = cyl_spec.eigenvectors * cyl_phase;

                   CVector dir_phase(dir_coeff.size());
                   for (int q = 0; q < dir_coeff.size(); ++q) {
                     dir_phase[q] =
                         std::polar(1.0, dir_spec.eigenvalues[q] * tau) *
                         dir_coeff[q];
                   }
                   const CVector beta = dir_spec.eigenvectors * dir_phase;

                   const Complex dephase = std::polar(1.0, -dm.E0 * t);
                   double d2 = 0.0;
                   for (int m2 = 0; m2 < w; ++m2) {
                     const Complex unbloch =
                         std::polar(1.0, -xi2_star * m2) * dephase;
                     const Eigen::Vector2cd projected =
                         cone.frame.adjoint() * psi.segment(m2 * n, n) *
                         unbloch;
                     d2 += (projected -
                            Eigen::Vector2cd(beta.segment(2 * m2, 2)))
                               .squaredNorm();
                   }
                   out.diff2[ti] = d2;
                   for (int m2 : {0, 1, 2, w - 3, w - 2, w - 1}) {
                     out.edge_mass[ti] +=
                         psi.segment(m2 * n, n).squaredNorm();
                   }
                   out.norm_drift[ti] = std::abs(psi.norm() - norm0);
                 }
               });

  WavepacketComparison result;
  result.delta = delta;
  result.sigma_scale = sigma_scale;
  result.t_max = t_max;
  double denom = 0.0;
  for (const auto& a : acc) denom += a.denom2;
  for (size_t ti = 0; ti < times.size(); ++ti) {
    double diff = 0.0;
    double edge = 0.0;
    double drift = 0.0;
    for (const auto& a : acc) {
      if (a.diff2.empty()) continue;
      diff += a.diff2[ti];
      edge += a.edge_mass[ti];
      drift = std::max(drift, a.norm_drift.empty() ? 0.0 : a.norm_drift[ti]);
    }
    if (edge / denom >= 0.01) {
      std::ostringstream os;
      os << "wavepacket_compare: " << 100.0 * edge / denom
         << "% of the packet reached the cylinder boundary at t = "
         << times[ti];
      throw Error(os.str());
    }
    result.deviation.emplace_back(times[ti], std::sqrt(diff / denom));
    result.unitarity_drift = std::max(result.unitarity_drift, drift);
  }
  return result;
}

}  // namespace conicscan
