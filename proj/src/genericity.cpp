#include "conicscan/genericity.hpp"

#include "conicscan/parallel.hpp"
#include "conicscan/rng.hpp"

#include <cmath>
#include <sstream>

namespace conicscan {

ScanSummary summarize(const ScanResult& r) {
  ScanSummary s;
  s.total = static_cast<int>(r.points.size());
  s.stalls = static_cast<int>(r.stalls.size());
  for (const auto& dp : r.points) {
    if (dp.multiplicity == MultiplicityFlag::higher) ++s.higher_multiplicity;
    switch (dp.verdict) {
      case Verdict::conical: ++s.conical; break;
      case Verdict::non_conical: ++s.non_conical; break;
      default: ++s.indeterminate; break;
    }
  }
  return s;
}

bool all_conical(const ScanSummary& s) {
  // a suspicious stall is an unresolved candidate crossing: not certifiable
  return s.non_conical == 0 && s.indeterminate == 0 &&
         s.higher_multiplicity == 0 && s.stalls == 0;
}

namespace {

std::string offending_points(const ScanResult& r) {
  std::ostringstream os;
  for (const auto& dp : r.points) {
    if (dp.verdict == Verdict::conical &&
        dp.multiplicity == MultiplicityFlag::simple_pair) {
      continue;
    }
    os << " (" << dp.location[0] << ", " << dp.location[1] << ", "
       << dp.location[2] << ") " << to_string(dp.verdict) << "/"
       << to_string(dp.multiplicity) << ";";
  }
  return os.str();
}

}  // namespace

PerturbationResult remove_high_multiplicity(FamilyPtr fam, int n, double eps,
                                            std::uint64_t seed,
                                            const ScanConfig& cfg,
                                            int max_draws) {
  if (fam->bands() < 3) {
    throw InputError("remove_high_multiplicity: requires N >= 3");
  }
  PerturbationResult result;
  result.kind = "constant";
  result.seed = seed;
  result.before = summarize(scan(*fam, n, cfg));

  Rng rng(seed);
  ScanResult last;
  for (int draw = 1; draw <= max_draws; ++draw) {
    const Matrix b = rng.ball_hermitian(fam->bands(), eps);
    const FamilyPtr candidate = std::make_shared<ShiftedFamily>(fam, b);
    last = scan(*candidate, n, cfg);
    const ScanSummary summary = summarize(last);
    if (summary.higher_multiplicity == 0) {
      result.payload = b;
      result.norm = b.norm();
      result.draws_used = draw;
      result.after = summary;
      result.after_scan = std::move(last);
      result.success = all_conical(result.after);
      result.perturbed = candidate;
      return result;
    }
  }
  throw ExhaustedDrawsError(
      "remove_high_multiplicity: no accepted draw in " +
      std::to_string(max_draws) + " attempts; persistent points:" +
      offending_points(last));
}

PerturbationResult sard_shift_2x2(FamilyPtr fam, int n, double eps,
                                  std::uint64_t seed, const ScanConfig& cfg,
                                  int max_draws) {
  if (fam->bands() != 2) {
    throw InputError("sard_shift_2x2: requires N = 2");
  }
  PerturbationResult result;
  result.kind = "pauli";
  result.seed = seed;
  result.before = summarize(scan(*fam, n, cfg));

  Rng rng(seed);
  ScanResult last;
  for (int draw = 1; draw <= max_draws; ++draw) {
    const Vec3 b = rng.ball3(eps);
    const Matrix shift =
        -(b[0] * pauli(1) + b[1] * pauli(2) + b[2] * pauli(3));
    const FamilyPtr candidate = std::make_shared<ShiftedFamily>(fam, shift);
    last = scan(*candidate, n, cfg);
    const ScanSummary summary = summarize(last);
    if (all_conical(summary)) {
      result.payload = -shift;  // the B of H - B
      result.pauli_b = b;
      result.norm = b.norm();   // operator norm of b.sigma
      result.draws_used = draw;
      result.after = summary;
      result.after_scan = std::move(last);
      result.success = true;
      result.perturbed = candidate;
      return result;
    }
  }
  throw ExhaustedDrawsError("sard_shift_2x2: no accepted draw in " +
                            std::to_string(max_draws) +
                            " attempts; persistent points:" +
                            offending_points(last));
}

PerturbationResult framed_bump_perturbation(FamilyPtr fam, int n,
                                            const Vec3& chart_center,
                                            double chart_radius, double eps,
                                            std::uint64_t seed,
                                            const ScanConfig& cfg,
                                            int max_draws) {
  const Domain& dom = fam->domain();
  const Vec3 center = dom.canonical(chart_center);

  // pair isolation over the chart ball, probed at the center and on the
  // coordinate axes at the boundary; the frame transport re-checks pointwise
  double min_isolation = 1e300;
  for (int probe = -1; probe < 6; ++probe) {
    Vec3 p = center;
    if (probe >= 0) {
      p[probe / 2] += (probe % 2 == 0 ? 1.0 : -1.0) * chart_radius;
      p = dom.canonical(p);
    }
    const Spectrum s = eigensystem(fam->value(p));
    if (n >= 2) min_isolation = std::min(min_isolation, s.gap_above(n - 1));
    if (n + 1 < s.dim())
      min_isolation = std::min(min_isolation, s.gap_above(n + 1));
  }
  if (min_isolation <= tol::kIsolation) {
    throw FrameError("framed_bump_perturbation: bands not isolated on chart");
  }
  if (2.0 * eps >= min_isolation) {
    throw FrameError(
        "framed_bump_perturbation: eps would collide the window with the "
        "remaining bands (isolation " +
        std::to_string(min_isolation) + ")");
  }

  PerturbationResult result;
  result.kind = "framed-bump";
  result.seed = seed;
  result.chart_center = center;
  result.chart_radius = chart_radius;
  const ScanResult before_scan = scan(*fam, n, cfg);
  result.before = summarize(before_scan);

  auto in_chart = [&](const Vec3& p) {
    return dom.distance(center, p) < chart_radius;
  };

  Rng rng(seed);
  ScanResult last;
  for (int draw = 1; draw <= max_draws; ++draw) {
    const Vec3 b = rng.ball3(eps);
    FramedBumpOverlay overlay;
    overlay.center = center;
    overlay.radius = chart_radius;
    overlay.band = n;
    overlay.b = b[0] * pauli(1) + b[1] * pauli(2) + b[2] * pauli(3);
    FamilyPtr candidate;
    try {
      candidate = std::make_shared<FramedBumpFamily>(fam, overlay);
      last = scan(*candidate, n, cfg);
    } catch (const FrameError&) {
      continue;  // rejected draw: transport lost the pair
    }
    bool chart_clean = true;
    for (const auto& dp : last.points) {
      if (!in_chart(dp.location)) continue;
      if (dp.verdict != Verdict::conical ||
          dp.multiplicity != MultiplicityFlag::simple_pair) {
        chart_clean = false;
      }
    }
    for (const auto& stall : last.stalls) {
      if (in_chart(stall.location)) chart_clean = false;
    }
    if (chart_clean) {
      result.payload = overlay.b;
      result.pauli_b = b;
      result.norm = b.norm();
      result.draws_used = draw;
      result.after = summarize(last);
      result.after_scan = std::move(last);
      result.success = all_conical(result.after);
      result.perturbed = candidate;
      return result;
    }
  }
  throw ExhaustedDrawsError("framed_bump_perturbation: no accepted draw in " +
                            std::to_string(max_draws) +
                            " attempts; persistent points:" +
                            offending_points(last));
}

VerifyReport verify_all_conical(const Family& fam, int n,
                                const ScanConfig& cfg) {
  VerifyReport report;
  report.scan_result = scan(fam, n, cfg);
  report.summary = summarize(report.scan_result);
  report.all_conical = all_conical(report.summary);

  // witness minima over a coarse verification grid
  const Domain& dom = fam.domain();
  std::array<int, 3> g;
  for (int a = 0; a < 3; ++a) g[a] = std::max(4, cfg.grid[a] / 2);
  std::vector<double> values(static_cast<size_t>(g[0]) * g[1] * g[2]);
  std::vector<Vec3> points(values.size());
  parallel_for(static_cast<std::int64_t>(values.size()), cfg.threads,
               [&](std::int64_t idx) {
                 const int i = static_cast<int>(idx / (g[1] * g[2]));
                 const int j = static_cast<int>((idx / g[2]) % g[1]);
                 const int k = static_cast<int>(idx % g[2]);
                 Vec3 p;
                 const int gi[3] = {i, j, k};
                 for (int a = 0; a < 3; ++a) {
                   const Axis& ax = dom.axes[a];
                   p[a] = ax.periodic
                              ? ax.lo + ax.length() * gi[a] / g[a]
                              : ax.lo + ax.length() * gi[a] / (g[a] - 1);
                 }
                 points[idx] = p;
                 values[idx] = witness_f(fam, p, cfg);
               });
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  report.min_witness = values[best];
  report.witness_argmin = points[best];
  return report;
}

}  // namespace conicscan
