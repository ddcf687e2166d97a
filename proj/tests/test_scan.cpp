#include "conicscan/scan.hpp"

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"

using namespace conicscan;

namespace {

ScanConfig small_cfg() {
  ScanConfig cfg;
  cfg.grid = {12, 12, 12};
  return cfg;
}

const Vec3 kQwzCrossing(0.5, kTwoPi / 2, kTwoPi / 2);

// root of the stacked_noncone schedule equation w(s) = 3/4 beyond s = 1/2,
// located by bisection (independent 1D oracle)
double noncone_third_crossing_s() {
  auto f = [](double s) { return 4 * s * s * s - 5 * s * s + 2 * s - 0.75; };
  double lo = 0.6, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("scan: constant gapped family yields no degeneracies") {
  const auto fam = builtin_model("constant_homotopy").family;
  const ScanResult r = scan(*fam, 1, small_cfg());
  CHECK(r.points.empty());
  CHECK(r.stalls.empty());
}

TEST_CASE("scan: QWZ homotopy m 3->1 has exactly one conical point") {
  const auto fam = builtin_model("qwz_homotopy_3_1").family;
  ScanConfig cfg;
  cfg.grid = {16, 16, 16};
  const ScanResult r = scan(*fam, 1, cfg);
  REQUIRE(r.points.size() == 1);
  const DegeneracyPoint& dp = r.points[0];
  CHECK((dp.location - kQwzCrossing).norm() <= 1e-6);
  CHECK(std::abs(dp.energy) <= 1e-8);
  CHECK(dp.gap_at_refinement <= cfg.refine_tol);
  CHECK(dp.multiplicity == MultiplicityFlag::simple_pair);
  CHECK(dp.verdict == Verdict::conical);
  // q re-verifies below refine_tol^2 on recomputation
  CHECK(q_value(*fam, 1, dp.location) < cfg.refine_tol * cfg.refine_tol);
}

TEST_CASE("scan: grid doubling changes neither count nor locations") {
  const auto fam = builtin_model("qwz_homotopy_3_1").family;
  ScanConfig coarse = small_cfg();
  ScanConfig fine = small_cfg();
  fine.grid = {24, 24, 24};
  const ScanResult a = scan(*fam, 1, coarse);
  const ScanResult b = scan(*fam, 1, fine);
  REQUIRE(a.points.size() == b.points.size());
  for (size_t i = 0; i < a.points.size(); ++i) {
    CHECK((a.points[i].location - b.points[i].location).norm() <= 1e-6);
    CHECK(a.points[i].verdict == b.points[i].verdict);
  }
}

TEST_CASE("scan: deterministic across thread counts") {
  const auto fam = builtin_model("qwz_homotopy_3_m3").family;
  ScanConfig c1 = small_cfg();
  c1.threads = 1;
  ScanConfig c4 = small_cfg();
  c4.threads = 4;
  const ScanResult a = scan(*fam, 1, c1);
  const ScanResult b = scan(*fam, 1, c4);
  REQUIRE(a.points.size() == b.points.size());
  for (size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].location == b.points[i].location);  // bitwise
    CHECK(a.points[i].gap_at_refinement == b.points[i].gap_at_refinement);
    CHECK(a.points[i].verdict == b.points[i].verdict);
  }
}

TEST_CASE("scan: QWZ homotopy m 3->-3 finds the four cones at the quarter points") {
  const auto fam = builtin_model("qwz_homotopy_3_m3").family;
  ScanConfig cfg;
  cfg.grid = {16, 16, 16};
  const ScanResult r = scan(*fam, 1, cfg);
  REQUIRE(r.points.size() == 4);
  const double pi = kTwoPi / 2;
  CHECK((r.points[0].location - Vec3(0.25, pi, pi)).norm() <= 1e-6);
  CHECK((r.points[1].location - Vec3(0.50, 0.0, pi)).norm() <= 1e-6);
  CHECK((r.points[2].location - Vec3(0.50, pi, 0.0)).norm() <= 1e-6);
  CHECK((r.points[3].location - Vec3(0.75, 0.0, 0.0)).norm() <= 1e-6);
  for (const auto& dp : r.points) {
    CHECK(dp.verdict == Verdict::conical);
  }
}

TEST_CASE("classify: isotropic cone fixture has Hessian(4q) = 8 Id") {
  const auto fam = builtin_model("chart_cone").family;
  ScanConfig cfg;
  const DegeneracyPoint dp = classify(*fam, 1, Vec3::Zero(), cfg);
  CHECK(dp.verdict == Verdict::conical);
  CHECK((dp.hessian_q - 8.0 * Mat3::Identity()).cwiseAbs().maxCoeff() <=
        0.01 * 8.0);
  CHECK(dp.hessian_det == doctest::Approx(512.0).epsilon(0.01));

  const auto flip = builtin_model("chart_cone_flip").family;
  const DegeneracyPoint dpf = classify(*flip, 1, Vec3::Zero(), cfg);
  CHECK(dpf.verdict == Verdict::conical);
  CHECK((dpf.hessian_q - 8.0 * Mat3::Identity()).cwiseAbs().maxCoeff() <=
        0.01 * 8.0);
}

TEST_CASE("scan + classify: non-conical chart fixture") {
  const auto fam = builtin_model("chart_noncone").family;
  const ScanResult r = scan(*fam, 1, small_cfg());
  REQUIRE(r.points.size() == 1);
  // the gap is quartic along x3, so a gap <= refine_tol pins the location
  // only to ~sqrt(refine_tol) there
  CHECK(r.points[0].location.norm() <= 5e-5);
  CHECK(r.points[0].verdict == Verdict::non_conical);
  // Hessian of 4q = 4(x1^2 + x2^2 + x3^4) is singular in the x3 direction
  const double scale = r.points[0].hessian_q.cwiseAbs().maxCoeff();
  CHECK(std::abs(r.points[0].hessian_det) < 1e-6 * scale * scale * scale);
}

TEST_CASE("scan: curve of crossings is clustered and non-conical throughout") {
  const auto fam = builtin_model("chart_line").family;
  ScanConfig cfg;
  cfg.grid = {10, 10, 10};
  const ScanResult r = scan(*fam, 1, cfg);
  CHECK(r.points.size() >= 2);  // several cluster representatives on the line
  for (const auto& dp : r.points) {
    CHECK(std::abs(dp.location[0]) <= 1e-6);
    CHECK(std::abs(dp.location[1]) <= 1e-6);
    CHECK(dp.verdict == Verdict::non_conical);
  }
}

TEST_CASE("scan: engineered triple point is flagged higher-multiplicity") {
  const auto fam = builtin_model("stacked_triple_homotopy").family;
  ScanConfig cfg;
  cfg.grid = {16, 16, 16};
  const ScanResult r = scan(*fam, 1, cfg);
  REQUIRE(!r.points.empty());
  bool found = false;
  for (const auto& dp : r.points) {
    if ((dp.location - kQwzCrossing).norm() <= 1e-5) {
      found = true;
      CHECK(dp.multiplicity == MultiplicityFlag::higher);
      CHECK(dp.verdict == Verdict::non_conical);
    }
  }
  CHECK(found);
}

TEST_CASE("scan: mixed fixture separates conical and non-conical crossings") {
  const auto fam = builtin_model("stacked_noncone_homotopy").family;
  ScanConfig cfg;
  // crossings sit 0.25 apart in s; the cluster radius scales with
  // diameter/min(grid), so this needs the finer grid
  cfg.grid = {24, 24, 24};
  const ScanResult r = scan(*fam, 1, cfg);
  const double pi = kTwoPi / 2;
  const double s3 = noncone_third_crossing_s();
  REQUIRE(r.points.size() == 4);
  CHECK((r.points[0].location - Vec3(0.25, pi, pi)).norm() <= 1e-6);
  CHECK(r.points[0].verdict == Verdict::conical);
  // the s-direction is flat (quadratic gap) at this degenerate crossing
  CHECK((r.points[1].location - Vec3(0.5, pi, pi)).norm() <= 5e-5);
  CHECK(r.points[1].verdict == Verdict::non_conical);
  CHECK((r.points[2].location - Vec3(s3, 0.0, pi)).norm() <= 1e-6);
  CHECK(r.points[2].verdict == Verdict::conical);
  CHECK((r.points[3].location - Vec3(s3, pi, 0.0)).norm() <= 1e-6);
  CHECK(r.points[3].verdict == Verdict::conical);
}

TEST_CASE("scan invariants: conical points isolated, Hessians positive definite") {
  for (const char* name : {"qwz_homotopy_3_1", "qwz_homotopy_3_m3"}) {
    const auto fam = builtin_model(name).family;
    ScanConfig cfg;
    cfg.grid = {16, 16, 16};
    const ScanResult r = scan(*fam, 1, cfg);
    for (size_t i = 0; i < r.points.size(); ++i) {
      if (r.points[i].verdict != Verdict::conical) continue;
      Eigen::SelfAdjointEigenSolver<Mat3> es(r.points[i].hessian_q);
      CHECK(es.eigenvalues().minCoeff() >
            -1e-6 * es.eigenvalues().maxCoeff());
      for (size_t j = i + 1; j < r.points.size(); ++j) {
        if (r.points[j].verdict != Verdict::conical) continue;
        CHECK(fam->domain().distance(r.points[i].location,
                                     r.points[j].location) >
              r.cluster_radius);
      }
    }
  }
}

TEST_CASE("local cone form: gap matches the q-Hessian quadratic (ratio test)") {
  const auto fam = builtin_model("qwz_homotopy_3_1").family;
  ScanConfig cfg;
  cfg.grid = {16, 16, 16};
  const ScanResult r = scan(*fam, 1, cfg);
  REQUIRE(r.points.size() == 1);
  const DegeneracyPoint& dp = r.points[0];
  const Mat3 hess_q = dp.hessian_q / 4.0;  // Hessian of q itself

  Rng rng(31);
  for (double eps : {1e-2, 1e-3}) {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      Vec3 dir(rng.normal(), rng.normal(), rng.normal());
      dir.normalize();
      const Vec3 p = dp.location + eps * dir;
      const double q = q_value(*fam, 1, p);
      const double quad = 0.5 * eps * eps * dir.dot(hess_q * dir);
      worst = std::max(worst, std::abs(q / quad - 1.0));
    }
    // ratio -> 1; at the finer scale it must be within 10%
    if (eps == 1e-3) CHECK(worst <= 0.10);
    CHECK(worst <= 0.5);
  }
}

TEST_CASE("witness_f: positive where gapped, calibrated values at fixtures") {
  ScanConfig cfg;
  const auto gapped = builtin_model("qwz_m3").family;
  const Vec3 p(0.0, 1.0, 2.0);
  const double d = discriminant(gapped->value(p));
  CHECK(witness_f(*gapped, p, cfg) >= d);
  CHECK(d > 0.0);

  const auto cone = builtin_model("chart_cone").family;
  // D o H = 4 |x|^2, Hessian = 8 Id, det = 512
  CHECK(witness_f(*cone, Vec3::Zero(), cfg) ==
        doctest::Approx(512.0 * 512.0).epsilon(1e-3));

  const auto noncone = builtin_model("chart_noncone").family;
  CHECK(witness_f(*noncone, Vec3::Zero(), cfg) <= 1e-6);
}
