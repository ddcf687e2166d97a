#include "conicscan/chern.hpp"

#include "conicscan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace conicscan {

namespace {

Matrix projector_at(const Family& fam, double s, double x1, double x2, int lo,
                    int hi, double min_gap) {
  const Spectrum spec = eigensystem(fam.value(Vec3(s, x1, x2)));
  const double gap_hi = spec.gap_above(hi);
  const double gap_lo = lo >= 2 ? spec.gap_above(lo - 1) : 1e300;
  if (std::min(gap_hi, gap_lo) <= min_gap) {
    std::ostringstream os;
    os << "projector window [" << lo << ", " << hi << "] gap "
       << std::min(gap_hi, gap_lo) << " at xi = (" << x1 << ", " << x2
       << "), s = " << s;
    throw GapClosedError(os.str());
  }
  const auto w = spec.eigenvectors.middleCols(lo - 1, hi - lo + 1);
  return w * w.adjoint();
}

}  // namespace

CurvatureField berry_curvature_window(const Family& fam, double s, int lo,
                                      int hi, int grid, int threads) {
  if (lo < 1 || hi > fam.bands() || lo > hi || hi > fam.bands() - 1) {
    throw InputError("berry_curvature: band window out of range");
  }
  CurvatureField field;
  field.s = s;
  field.band = hi;
  field.grid = grid;
  field.values.resize(grid, grid);
  const double h = kTwoPi / (8.0 * grid);

  parallel_for(static_cast<std::int64_t>(grid) * grid, threads,
               [&](std::int64_t idx) {
                 const int i = static_cast<int>(idx / grid);
                 const int j = static_cast<int>(idx % grid);
                 const double x1 = kTwoPi * i / grid;
                 const double x2 = kTwoPi * j / grid;
                 const Matrix p = projector_at(fam, s, x1, x2, lo, hi, 1e-6);
                 const Matrix d1 =
                     (projector_at(fam, s, x1 + h, x2, lo, hi, 1e-6) -
                      projector_at(fam, s, x1 - h, x2, lo, hi, 1e-6)) /
                     (2.0 * h);
                 const Matrix d2 =
                     (projector_at(fam, s, x1, x2 + h, lo, hi, 1e-6) -
                      projector_at(fam, s, x1, x2 - h, lo, hi, 1e-6)) /
                     (2.0 * h);
                 const Complex b = (p * (d1 * d2 - d2 * d1)).trace();
                 field.values(i, j) = b.imag();  // B/i
               });
  return field;
}

double berry_integral(const CurvatureField& field) {
  const double cell = kTwoPi / field.grid;
  return kTorusOrientation * field.values.sum() * cell * cell / kTwoPi;
}

int chern_from_frames(const FrameFn& frames, int bands, int n, int grid) {
  std::vector<Matrix> w(static_cast<size_t>(grid) * grid,
                        Matrix(bands, n));
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      w[static_cast<size_t>(i) * grid + j] =
          frames(kTwoPi * i / grid, kTwoPi * j / grid);
    }
  }
  auto at = [&](int i, int j) -> const Matrix& {
    return w[static_cast<size_t>((i % grid + grid) % grid) * grid +
             ((j % grid + grid) % grid)];
  };
  auto link1 = [&](int i, int j) {
    return (at(i, j).adjoint() * at(i + 1, j)).determinant();
  };
  auto link2 = [&](int i, int j) {
    return (at(i, j).adjoint() * at(i, j + 1)).determinant();
  };

  double total = 0.0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const Complex loop = link1(i, j) * link2(i + 1, j) *
                           std::conj(link1(i, j + 1)) * std::conj(link2(i, j));
      if (std::abs(loop) < 1e-12) {
        throw PlaquetteError("chern: vanishing link product (frame overlap "
                             "collapsed); grid too coarse");
      }
      const double phase = std::arg(loop);
      if (std::abs(phase) > kTwoPi / 2.0 - 0.2) {
        std::ostringstream os;
        os << "chern: plaquette phase " << phase << " at cell (" << i << ", "
           << j << ") too close to the branch cut";
        throw PlaquetteError(os.str());
      }
      total += phase;
    }
  }
  const double c = kTorusOrientation * total / kTwoPi;
  const int rounded = static_cast<int>(std::lround(c));
  if (std::abs(c - rounded) > 1e-6) {
    throw PlaquetteError("chern: plaquette phases do not sum to an integer");
  }
  return rounded;
}

int chern_number(const Family& fam, double s, int n, int grid,
                 int max_doublings, int threads) {
  if (n < 1 || n > fam.bands() - 1) {
    throw InputError("chern_number: band index out of range");
  }
  int g = grid;
  for (int attempt = 0;; ++attempt) {
    try {
      // eigenframes are computed once per node and reused for the links
      std::vector<Matrix> frames(static_cast<size_t>(g) * g);
      parallel_for(static_cast<std::int64_t>(g) * g, threads,
                   [&](std::int64_t idx) {
                     const int i = static_cast<int>(idx / g);
                     const int j = static_cast<int>(idx % g);
                     const double x1 = kTwoPi * i / g;
                     const double x2 = kTwoPi * j / g;
                     const Spectrum spec =
                         eigensystem(fam.value(Vec3(s, x1, x2)));
                     if (spec.gap_above(n) <= 1e-6) {
                       std::ostringstream os;
                       os << "chern: gap " << spec.gap_above(n) << " at xi = ("
                          << x1 << ", " << x2 << "), s = " << s;
                       throw GapClosedError(os.str());
                     }
                     frames[idx] = spec.eigenvectors.leftCols(n);
                   });
      const int c = chern_from_frames(
          [&](double x1, double x2) {
            const int i =
                static_cast<int>(std::lround(x1 * g / kTwoPi)) % g;
            const int j =
                static_cast<int>(std::lround(x2 * g / kTwoPi)) % g;
            return frames[static_cast<size_t>(i) * g + j];
          },
          fam.bands(), n, g);
      const double riemann =
          berry_integral(berry_curvature(fam, s, n, g, threads));
      if (std::abs(riemann - c) > 0.5) {
        std::ostringstream os;
        os << "chern: Riemann sum " << riemann
           << " disagrees with the lattice integer " << c;
        throw PlaquetteError(os.str());
      }
      return c;
    } catch (const PlaquetteError&) {
      if (attempt >= max_doublings) throw;
      g *= 2;
    }
  }
}

double near_cone_curvature_integral(const Family& fam, double s, int n,
                                    const Eigen::Vector2d& xi_star, double r,
                                    int radial_nodes, int angular_nodes) {
  // integrand value B/i at polar offset (rho, theta)
  auto curvature = [&](double rho, double theta) {
    const double x1 = xi_star[0] + rho * std::cos(theta);
    const double x2 = xi_star[1] + rho * std::sin(theta);
    const double h = std::max(1e-7, 1e-3 * rho);
    const Matrix p = projector_at(fam, s, x1, x2, 1, n, 0.0);
    const Matrix d1 = (projector_at(fam, s, x1 + h, x2, 1, n, 0.0) -
                       projector_at(fam, s, x1 - h, x2, 1, n, 0.0)) /
                      (2.0 * h);
    const Matrix d2 = (projector_at(fam, s, x1, x2 + h, 1, n, 0.0) -
                       projector_at(fam, s, x1, x2 - h, 1, n, 0.0)) /
                      (2.0 * h);
    return (p * (d1 * d2 - d2 * d1)).trace().imag();
  };

  // log-spaced radial trapezoid: integral f rho drho = integral f e^{2u} du
  const double rho_min = 1e-6;
  const double u_lo = std::log(rho_min);
  const double u_hi = std::log(r);
  const double du = (u_hi - u_lo) / radial_nodes;
  double total = 0.0;
  for (int i = 0; i <= radial_nodes; ++i) {
    const double u = u_lo + i * du;
    const double rho = std::exp(u);
    double ring = 0.0;
    for (int a = 0; a < angular_nodes; ++a) {
      ring += curvature(rho, kTwoPi * a / angular_nodes);
    }
    ring *= kTwoPi / angular_nodes;
    const double weight = (i == 0 || i == radial_nodes) ? 0.5 : 1.0;
    total += weight * ring * rho * rho * du;
  }
  return kTorusOrientation * total / kTwoPi;
}

ChernReport chern_profile(const Family& fam, int n,
                          const ScanResult& crossings,
                          const ChernConfig& cfg) {
  for (const auto& dp : crossings.points) {
    if (dp.verdict != Verdict::conical) {
      throw PreconditionError(
          "chern_profile: non-conical crossings present; the Chern-jump "
          "identity requires all crossings conical");
    }
  }

  ChernReport report;
  report.band = n;

  // distinct jump slices
  std::vector<double> s_values;
  for (const auto& dp : crossings.points) s_values.push_back(dp.location[0]);
  std::sort(s_values.begin(), s_values.end());
  for (double s : s_values) {
    if (report.jump_set.empty() || s - report.jump_set.back() > 1e-6) {
      report.jump_set.push_back(s);
    }
  }

  auto chern_at = [&](double s) {
    return chern_number(fam, s, n, cfg.grid, cfg.max_doublings, cfg.threads);
  };

  report.c1_start = chern_at(0.0);
  report.c1_end = chern_at(1.0);
  report.slices.emplace_back(0.0, report.c1_start);
  report.slices.emplace_back(1.0, report.c1_end);

  // delta: away from neighbouring jumps and the endpoints
  const auto& jumps = report.jump_set;
  for (size_t k = 0; k < jumps.size(); ++k) {
    double spacing = 1e300;
    if (k > 0) spacing = std::min(spacing, jumps[k] - jumps[k - 1]);
    if (k + 1 < jumps.size()) spacing = std::min(spacing, jumps[k + 1] - jumps[k]);
    spacing = std::min({spacing, jumps[k], 1.0 - jumps[k]});

    JumpRecord rec;
    rec.s_star = jumps[k];
    double delta = std::min(cfg.jump_delta, 0.5 * spacing);
    for (int attempt = 0;; ++attempt) {
      try {
        rec.c1_below = chern_at(jumps[k] - delta);
        rec.c1_above = chern_at(jumps[k] + delta);
        break;
      } catch (const GapClosedError&) {
        if (attempt >= cfg.max_delta_halvings) throw;
        delta *= 0.5;
      }
    }
    rec.delta_used = delta;
    rec.delta_c1 = rec.c1_above - rec.c1_below;
    for (const auto& dp : crossings.points) {
      if (std::abs(dp.location[0] - jumps[k]) <= 1e-6) {
        rec.cones.push_back(analyze_cone(fam, dp));
        rec.chirality_sum += rec.cones.back().chirality;
      }
    }
    rec.pass = rec.delta_c1 == rec.chirality_sum;
    report.per_jump.push_back(std::move(rec));
  }

  // sampled c1 between jumps
  std::vector<double> fences{0.0};
  fences.insert(fences.end(), jumps.begin(), jumps.end());
  fences.push_back(1.0);
  for (size_t k = 0; k + 1 < fences.size(); ++k) {
    const double lo = fences[k];
    const double hi = fences[k + 1];
    if (hi - lo < 1e-6) continue;
    for (int i = 1; i <= cfg.slice_samples; ++i) {
      const double margin = std::min(cfg.jump_delta, 0.25 * (hi - lo));
      const double a = lo + margin;
      const double b = hi - margin;
      const double s = a + (b - a) * i / (cfg.slice_samples + 1.0);
      report.slices.emplace_back(s, chern_at(s));
    }
  }
  std::sort(report.slices.begin(), report.slices.end());

  int total_jump = 0;
  bool all_pass = true;
  for (const auto& rec : report.per_jump) {
    total_jump += rec.delta_c1;
    all_pass = all_pass && rec.pass;
  }
  report.theorem3_pass =
      all_pass && (total_jump == report.c1_end - report.c1_start);
  return report;
}

}  // namespace conicscan
