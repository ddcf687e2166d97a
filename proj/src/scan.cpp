#include "conicscan/scan.hpp"

#include "conicscan/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace conicscan {

const char* to_string(MultiplicityFlag f) {
  return f == MultiplicityFlag::simple_pair ? "simple-pair" : "higher";
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::conical: return "conical";
    case Verdict::non_conical: return "non-conical";
    default: return "indeterminate";
  }
}

namespace {

struct GapProbe {
  double gap = 0.0;
  double q = 0.0;
  double lambda_n = 0.0;
  double neighbor_gap = 1e300;  // min of the two window-boundary gaps
};

GapProbe probe(const Family& fam, int n, const Vec3& p) {
  const Spectrum s = eigensystem(fam.value(p));
  GapProbe g;
  g.gap = s.gap_above(n);
  g.q = 0.25 * g.gap * g.gap;
  g.lambda_n = s.eigenvalues[n - 1];
  if (n >= 2) g.neighbor_gap = std::min(g.neighbor_gap, s.gap_above(n - 1));
  if (n + 1 < s.dim())
    g.neighbor_gap = std::min(g.neighbor_gap, s.gap_above(n + 1));
  return g;
}

// Analytic gradient of q through the pair projector P:
//   dF1 = Tr(dH P), dF2 = 2 Tr(dH H P), dq = (dF2 - F1 dF1) / 2.
// Valid while the pair is isolated from the rest of the spectrum; the caller
// falls back to finite differences otherwise.
Vec3 q_gradient_analytic(const Family& fam, int n, const Vec3& p,
                         const Spectrum& s) {
  const Matrix w = s.eigenvectors.middleCols(n - 1, 2);  // N x 2 pair frame
  const double f1 = s.eigenvalues[n - 1] + s.eigenvalues[n];
  const Matrix h = fam.value(p).mat();
  Vec3 grad;
  for (int a = 0; a < 3; ++a) {
    const Matrix dh = fam.derivative(p, a, 1).mat();
    const Matrix dh_w = dh * w;
    const double df1 = (w.adjoint() * dh_w).trace().real();
    const double df2 = 2.0 * (w.adjoint() * h * dh_w).trace().real();
    grad[a] = 0.5 * (df2 - f1 * df1);
  }
  return grad;
}

Vec3 q_gradient(const Family& fam, int n, const Vec3& p) {
  const Spectrum s = eigensystem(fam.value(p));
  const double pair_gap = s.gap_above(n);
  double neighbor = 1e300;
  if (n >= 2) neighbor = std::min(neighbor, s.gap_above(n - 1));
  if (n + 1 < s.dim()) neighbor = std::min(neighbor, s.gap_above(n + 1));
  if (neighbor > std::max(1e-6, 2.0 * pair_gap)) {
    return q_gradient_analytic(fam, n, p, s);
  }
  // high-multiplicity regime: difference the total function q directly
  Vec3 grad;
  const double h = 1e-6;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h;
    grad[a] = (q_value(fam, n, p + e) - q_value(fam, n, p - e)) / (2.0 * h);
  }
  return grad;
}

Mat3 q_gradient_jacobian(const Family& fam, int n, const Vec3& p,
                         double step) {
  Mat3 hess;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = step;
    const Vec3 hi = q_gradient(fam, n, p + e);
    const Vec3 lo = q_gradient(fam, n, p - e);
    hess.col(a) = (hi - lo) / (2.0 * step);
  }
  return 0.5 * (hess + hess.transpose().eval());
}

struct RefineOutcome {
  Vec3 location = Vec3::Zero();
  double gap = 0.0;
  bool converged = false;
  // false when the refinement was abandoned while descent was still possible
  bool locally_optimal = false;
};

struct TrustRegionState {
  Vec3 x = Vec3::Zero();
  double fx = 0.0;
};

void trust_region_minimize(const Family& fam, int n, const ScanConfig& cfg,
                           double initial_radius, TrustRegionState& st) {
  const Domain& dom = fam.domain();
  double radius = initial_radius;
  const double max_radius = dom.diameter();

  for (int iter = 0; iter < cfg.max_refine_iterations; ++iter) {
    const double gap = 2.0 * std::sqrt(std::max(st.fx, 0.0));
    if (gap <= cfg.refine_tol) return;

    const Vec3 g = q_gradient(fam, n, st.x);
    const Mat3 h = q_gradient_jacobian(fam, n, st.x, cfg.fd_step);

    // regularized Newton step clipped to the trust radius
    Eigen::SelfAdjointEigenSolver<Mat3> es(h);
    const Vec3 evals = es.eigenvalues();
    const double scale = std::max(evals.cwiseAbs().maxCoeff(), 1e-300);
    const double shift = std::max(0.0, -evals.minCoeff()) + 1e-10 * scale;
    Vec3 step = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      const double lam = evals[k] + shift;
      const Vec3 v = es.eigenvectors().col(k);
      step -= v * (v.dot(g) / lam);
    }
    if (step.norm() > radius) step *= radius / step.norm();

    const Vec3 x_new = dom.canonical(st.x + step);
    const double f_new = q_value(fam, n, x_new);
    const double predicted = -(g.dot(step) + 0.5 * step.dot(h * step));
    const double rho = predicted > 0.0 ? (st.fx - f_new) / predicted : -1.0;

    if (f_new < st.fx) {
      st.x = x_new;
      st.fx = f_new;
    }
    if (rho > 0.75 && step.norm() > 0.8 * radius) {
      radius = std::min(2.0 * radius, max_radius);
    } else if (rho < 0.25) {
      radius *= 0.25;
    }
    if (radius < 1e-13) return;
  }
}

// A flat valley (q constant along a near-null Hessian direction) can hide the
// true crossing from Newton steps; sweep the null lines for a strictly lower
// value. Returns true when a descent point was found and written to st.
bool escape_flat_valley(const Family& fam, int n, const ScanConfig& cfg,
                        TrustRegionState& st) {
  const Domain& dom = fam.domain();
  const Mat3 h = q_gradient_jacobian(fam, n, st.x, cfg.fd_step);
  Eigen::SelfAdjointEigenSolver<Mat3> es(h);
  const double scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);

  TrustRegionState best = st;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(es.eigenvalues()[k]) > 1e-4 * scale) continue;
    const Vec3 v = es.eigenvectors().col(k);
    const double extent = 0.75 * dom.diameter();
    const int sweeps = 96;
    for (int i = 1; i <= sweeps; ++i) {
      for (double sign : {1.0, -1.0}) {
        const Vec3 p = dom.canonical(st.x + sign * (extent * i / sweeps) * v);
        const double f = q_value(fam, n, p);
        if (f < best.fx * (1.0 - 1e-9)) {
          best = TrustRegionState{p, f};
        }
      }
    }
  }
  if (best.fx < st.fx) {
    st = best;
    return true;
  }
  return false;
}

RefineOutcome refine_seed(const Family& fam, int n, const Vec3& seed,
                          const ScanConfig& cfg, double initial_radius) {
  const Domain& dom = fam.domain();
  TrustRegionState st{dom.canonical(seed), 0.0};
  st.fx = q_value(fam, n, st.x);

  bool descent_open = false;
  for (int attempt = 0; attempt < 4; ++attempt) {
    trust_region_minimize(fam, n, cfg, initial_radius, st);
    if (2.0 * std::sqrt(std::max(st.fx, 0.0)) <= cfg.refine_tol) break;
    descent_open = escape_flat_valley(fam, n, cfg, st);
    if (!descent_open) break;
  }

  RefineOutcome out;
  out.location = st.x;
  out.gap = 2.0 * std::sqrt(std::max(q_value(fam, n, st.x), 0.0));
  out.converged = out.gap <= cfg.refine_tol;
  out.locally_optimal = !out.converged && !descent_open;
  return out;
}

}  // namespace

double q_value(const Family& fam, int n, const Vec3& p) {
  const Spectrum s = eigensystem(fam.value(p));
  const double gap = s.gap_above(n);
  return 0.25 * gap * gap;
}

Mat3 hessian_of_4q(const Family& fam, int n, const Vec3& p, double fd_step) {
  auto f = [&](const Vec3& x) { return 4.0 * q_value(fam, n, x); };
  auto hess_at_step = [&](double h) {
    Mat3 m;
    const double f0 = f(p);
    for (int a = 0; a < 3; ++a) {
      Vec3 ea = Vec3::Zero();
      ea[a] = h;
      m(a, a) = (f(p + ea) - 2.0 * f0 + f(p - ea)) / (h * h);
      for (int b = a + 1; b < 3; ++b) {
        Vec3 eb = Vec3::Zero();
        eb[b] = h;
        const double v = (f(p + ea + eb) - f(p + ea - eb) - f(p - ea + eb) +
                          f(p - ea - eb)) /
                         (4.0 * h * h);
        m(a, b) = v;
        m(b, a) = v;
      }
    }
    return m;
  };
  // one Richardson step: error h^2 -> h^4
  const Mat3 coarse = hess_at_step(fd_step);
  const Mat3 fine = hess_at_step(0.5 * fd_step);
  return (4.0 * fine - coarse) / 3.0;
}

double witness_f(const Family& fam, const Vec3& p, const ScanConfig& cfg) {
  auto d = [&](const Vec3& x) { return discriminant(fam.value(x)); };
  const double h = cfg.fd_step;
  Mat3 m;
  const double d0 = d(p);
  for (int a = 0; a < 3; ++a) {
    Vec3 ea = Vec3::Zero();
    ea[a] = h;
    m(a, a) = (d(p + ea) - 2.0 * d0 + d(p - ea)) / (h * h);
    for (int b = a + 1; b < 3; ++b) {
      Vec3 eb = Vec3::Zero();
      eb[b] = h;
      const double v = (d(p + ea + eb) - d(p + ea - eb) - d(p - ea + eb) +
                        d(p - ea - eb)) /
                       (4.0 * h * h);
      m(a, b) = v;
      m(b, a) = v;
    }
  }
  const double det = m.determinant();
  return det * det + d0;
}

DegeneracyPoint classify(const Family& fam, int n, const Vec3& zeta,
                         const ScanConfig& cfg) {
  DegeneracyPoint dp;
  dp.location = fam.domain().canonical(zeta);
  dp.band = n;

  const Spectrum s = eigensystem(fam.value(dp.location));
  dp.energy = s.eigenvalues[n - 1];
  dp.gap_at_refinement = s.gap_above(n);

  bool higher = false;
  for (int j = 1; j < s.dim(); ++j) {
    if (j == n) continue;
    if (s.gap_above(j) < 1e-8) higher = true;
  }
  dp.multiplicity = higher ? MultiplicityFlag::higher
                           : MultiplicityFlag::simple_pair;

  dp.hessian_q = hessian_of_4q(fam, n, dp.location, cfg.fd_step);
  dp.hessian_det = dp.hessian_q.determinant();

  if (higher) {
    dp.verdict = Verdict::non_conical;
    return dp;
  }

  const double scale = dp.hessian_q.cwiseAbs().maxCoeff();
  if (scale <= 0.0) {
    dp.verdict = Verdict::non_conical;
    return dp;
  }
  const double hess_tol = cfg.hess_tol_factor * scale * scale * scale;
  const double det = std::abs(dp.hessian_det);

  Eigen::SelfAdjointEigenSolver<Mat3> es(dp.hessian_q);
  const bool psd_ok = es.eigenvalues().minCoeff() >= -1e-4 * scale;

  if (det > 10.0 * hess_tol) {
    dp.verdict = psd_ok ? Verdict::conical : Verdict::indeterminate;
  } else if (det < hess_tol) {
    dp.verdict = Verdict::non_conical;
  } else {
    dp.verdict = Verdict::indeterminate;
  }
  return dp;
}

ScanResult scan(const Family& fam, int n, const ScanConfig& cfg) {
  const Domain& dom = fam.domain();
  if (n < 1 || n > fam.bands() - 1) {
    throw InputError("scan: band index out of range");
  }
  for (int g : cfg.grid) {
    if (g < 4) throw InputError("scan: grid must be at least 4 per axis");
  }

  // grid geometry: periodic axes get G points without the duplicate endpoint,
  // bounded axes get G points inclusive
  std::array<std::vector<double>, 3> nodes;
  Vec3 cell_step;
  for (int a = 0; a < 3; ++a) {
    const Axis& ax = dom.axes[a];
    const int g = cfg.grid[a];
    if (ax.periodic) {
      cell_step[a] = ax.length() / g;
      for (int i = 0; i < g; ++i) nodes[a].push_back(ax.lo + i * cell_step[a]);
    } else {
      cell_step[a] = ax.length() / (g - 1);
      for (int i = 0; i < g; ++i) nodes[a].push_back(ax.lo + i * cell_step[a]);
    }
  }
  const double cell_diag = cell_step.norm();

  // graduated coarse threshold: 4 x cell diameter x Lipschitz estimate of H,
  // with the gap Lipschitz constant bounded by 2 |dH|
  Vec3 bounds;
  for (int a = 0; a < 3; ++a) bounds[a] = fam.derivative_bound(a);
  const double threshold = 4.0 * cell_diag * std::max(1.0, bounds.norm());

  const int g0 = static_cast<int>(nodes[0].size());
  const int g1 = static_cast<int>(nodes[1].size());
  const int g2 = static_cast<int>(nodes[2].size());
  const std::int64_t total = static_cast<std::int64_t>(g0) * g1 * g2;

  std::vector<double> gap(total);
  parallel_for(total, cfg.threads, [&](std::int64_t idx) {
    const int i = static_cast<int>(idx / (g1 * g2));
    const int j = static_cast<int>((idx / g2) % g1);
    const int k = static_cast<int>(idx % g2);
    const Vec3 p(nodes[0][i], nodes[1][j], nodes[2][k]);
    gap[idx] = probe(fam, n, p).gap;
  });

  auto at = [&](int i, int j, int k) -> double {
    return gap[(static_cast<std::int64_t>(i) * g1 + j) * g2 + k];
  };
  auto wrap = [&](int v, int g, bool periodic) -> int {
    if (periodic) return (v % g + g) % g;
    return std::clamp(v, 0, g - 1);
  };

  // seeds: grid-local minima (26-neighborhood, non-strict) below threshold
  std::vector<Vec3> seeds;
  for (int i = 0; i < g0; ++i) {
    for (int j = 0; j < g1; ++j) {
      for (int k = 0; k < g2; ++k) {
        const double v = at(i, j, k);
        if (v >= threshold) continue;
        bool is_min = true;
        for (int di = -1; di <= 1 && is_min; ++di) {
          for (int dj = -1; dj <= 1 && is_min; ++dj) {
            for (int dk = -1; dk <= 1 && is_min; ++dk) {
              if (di == 0 && dj == 0 && dk == 0) continue;
              const int ii = wrap(i + di, g0, dom.axes[0].periodic);
              const int jj = wrap(j + dj, g1, dom.axes[1].periodic);
              const int kk = wrap(k + dk, g2, dom.axes[2].periodic);
              if (ii == i && jj == j && kk == k) continue;
              if (at(ii, jj, kk) < v) is_min = false;
            }
          }
        }
        if (is_min) {
          seeds.emplace_back(nodes[0][i], nodes[1][j], nodes[2][k]);
        }
      }
    }
  }

  std::vector<RefineOutcome> refined(seeds.size());
  parallel_for(static_cast<std::int64_t>(seeds.size()), cfg.threads,
               [&](std::int64_t i) {
                 refined[i] = refine_seed(fam, n, seeds[i], cfg, cell_diag);
               });

  ScanResult result;
  result.coarse_threshold = threshold;
  const double min_cluster_radius =
      dom.diameter() / *std::min_element(cfg.grid.begin(), cfg.grid.end());
  if (cfg.cluster_radius > 0.0 && cfg.cluster_radius <= min_cluster_radius) {
    throw InputError("scan: cluster_radius must exceed domain diameter / min(grid)");
  }
  result.cluster_radius =
      cfg.cluster_radius > 0.0 ? cfg.cluster_radius : 1.1 * min_cluster_radius;

  // Certified-genuine positive minima are dropped silently; a refinement
  // abandoned while descent was still possible is suspicious and reported.
  std::vector<RefineOutcome> converged;
  for (const auto& r : refined) {
    if (r.converged) {
      converged.push_back(r);
    } else if (!r.locally_optimal && r.gap < threshold) {
      result.stalls.push_back({r.location, r.gap});
    }
  }

  // deterministic clustering: sort, then greedy union within cluster_radius;
  // the smallest-gap member represents the cluster
  std::sort(converged.begin(), converged.end(),
            [](const RefineOutcome& a, const RefineOutcome& b) {
              return std::lexicographical_compare(
                  a.location.data(), a.location.data() + 3, b.location.data(),
                  b.location.data() + 3);
            });
  std::vector<RefineOutcome> reps;
  for (const auto& r : converged) {
    bool merged = false;
    for (auto& rep : reps) {
      if (dom.distance(rep.location, r.location) <= result.cluster_radius) {
        if (r.gap < rep.gap) rep = r;
        merged = true;
        break;
      }
    }
    if (!merged) reps.push_back(r);
  }

  result.points.resize(reps.size());
  parallel_for(static_cast<std::int64_t>(reps.size()), cfg.threads,
               [&](std::int64_t i) {
                 result.points[i] = classify(fam, n, reps[i].location, cfg);
               });

  std::sort(result.points.begin(), result.points.end(),
            [](const DegeneracyPoint& a, const DegeneracyPoint& b) {
              return std::lexicographical_compare(
                  a.location.data(), a.location.data() + 3, b.location.data(),
                  b.location.data() + 3);
            });
  return result;
}

}  // namespace conicscan
