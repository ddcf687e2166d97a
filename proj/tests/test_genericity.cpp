#include "conicscan/genericity.hpp"

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"

using namespace conicscan;

namespace {

ScanConfig cfg16() {
  ScanConfig cfg;
  cfg.grid = {16, 16, 16};
  return cfg;
}

ScanConfig cfg12() {
  ScanConfig cfg;
  cfg.grid = {12, 12, 12};
  return cfg;
}

}  // namespace

TEST_CASE("remove_high_multiplicity resolves the engineered triple point") {
  const auto fam = builtin_model("stacked_triple_homotopy").family;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const PerturbationResult r =
        remove_high_multiplicity(fam, 1, 1e-2, seed, cfg16());
    CHECK(r.draws_used == 1);  // failure set has measure zero
    CHECK(r.norm <= 1e-2);
    CHECK(r.after.higher_multiplicity == 0);
    CHECK(r.success);
    CHECK(r.before.higher_multiplicity >= 1);
  }
}

TEST_CASE("remove_high_multiplicity on an already-generic family") {
  const auto fam = builtin_model("stacked_cone_homotopy").family;
  const PerturbationResult r =
      remove_high_multiplicity(fam, 1, 1e-2, 7, cfg16());
  CHECK(r.draws_used == 1);
  CHECK(r.success);
  // degeneracy count unchanged, location drifts O(eps)
  CHECK(r.after.total == r.before.total);
  CHECK(r.after.total == 1);
  const Vec3 expected(0.5, kTwoPi / 2, kTwoPi / 2);
  CHECK((r.after_scan.points[0].location - expected).norm() <= 0.1);
}

TEST_CASE("remove_high_multiplicity: eps = 0 exhausts the draws") {
  const auto fam = builtin_model("stacked_triple_homotopy").family;
  CHECK_THROWS_AS(remove_high_multiplicity(fam, 1, 0.0, 1, cfg16(), 5),
                  ExhaustedDrawsError);
}

TEST_CASE("remove_high_multiplicity requires N >= 3") {
  const auto fam = builtin_model("qwz_homotopy_3_1").family;
  CHECK_THROWS_AS(remove_high_multiplicity(fam, 1, 1e-2, 1, cfg16()),
                  InputError);
}

TEST_CASE("sard_shift_2x2 repairs the non-conical chart fixture") {
  const auto fam = builtin_model("chart_noncone").family;
  for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
    const PerturbationResult r = sard_shift_2x2(fam, 1, 1e-2, seed, cfg12());
    CHECK(r.norm <= 1e-2);
    CHECK(r.success);
    CHECK(all_conical(r.after));
    const VerifyReport v = verify_all_conical(*r.perturbed, 1, cfg12());
    CHECK(v.all_conical);
  }
}

TEST_CASE("sard_shift_2x2 relocates the conical point of h(x) = x to b") {
  const auto fam = builtin_model("chart_cone").family;
  const PerturbationResult r = sard_shift_2x2(fam, 1, 1e-2, 21, cfg12());
  CHECK(r.draws_used == 1);
  CHECK(r.success);
  REQUIRE(r.after.total == 1);
  CHECK((r.after_scan.points[0].location - r.pauli_b).norm() <= 1e-6);
  CHECK(r.after_scan.points[0].verdict == Verdict::conical);
}

TEST_CASE("sard_shift_2x2 requires N = 2") {
  const auto fam = builtin_model("stacked_triple_homotopy").family;
  CHECK_THROWS_AS(sard_shift_2x2(fam, 1, 1e-2, 1, cfg16()), InputError);
}

TEST_CASE("sard_shift_2x2: plateau fixture exhausts draws below its reach") {
  // rho has image reach 2e-4; every draw with |b| <= 1e-4 lands a degeneracy
  // whose q-Hessian determinant sits below the classifier tolerance
  const auto fam = builtin_model("chart_plateau").family;
  CHECK_THROWS_AS(sard_shift_2x2(fam, 1, 1e-4, 31, cfg12(), 6),
                  ExhaustedDrawsError);
}

TEST_CASE("framed bump repairs the chart crossing and nothing else") {
  const auto fam = builtin_model("stacked_noncone_homotopy").family;
  const Vec3 center(0.5, kTwoPi / 2, kTwoPi / 2);
  const double radius = 0.15;

  ScanConfig cfg = cfg16();
  const ScanResult before = scan(*fam, 1, cfg);

  const PerturbationResult r =
      framed_bump_perturbation(fam, 1, center, radius, 1e-2, 41, cfg);
  CHECK(r.norm <= 1e-2);
  const Domain& dom = fam->domain();

  // inside the chart: only conical (or none); outside: untouched beyond 1e-9
  std::vector<Vec3> outside_before;
  for (const auto& dp : before.points) {
    if (dom.distance(center, dp.location) >= radius) {
      outside_before.push_back(dp.location);
    }
  }
  std::vector<Vec3> outside_after;
  for (const auto& dp : r.after_scan.points) {
    if (dom.distance(center, dp.location) < radius) {
      CHECK(dp.verdict == Verdict::conical);
    } else {
      outside_after.push_back(dp.location);
    }
  }
  REQUIRE(outside_after.size() == outside_before.size());
  for (size_t i = 0; i < outside_after.size(); ++i) {
    CHECK((outside_after[i] - outside_before[i]).norm() <= 1e-9);
  }

  // endpoints bitwise preserved (chart excludes s in {0, 1})
  Rng rng(42);
  for (int t = 0; t < 10; ++t) {
    const Vec3 xi(0.0, kTwoPi * rng.uniform(), kTwoPi * rng.uniform());
    for (double s : {0.0, 1.0}) {
      const Vec3 p(s, xi[1], xi[2]);
      CHECK((r.perturbed->value(p).mat() - fam->value(p).mat()).norm() == 0.0);
    }
  }
}

TEST_CASE("framed bump on a crossing-free chart accepts immediately") {
  const auto fam = builtin_model("stacked_cone_homotopy").family;
  const Vec3 center(0.25, 1.0, 1.0);  // away from the crossing at (.5, pi, pi)
  ScanConfig cfg = cfg16();
  const PerturbationResult r =
      framed_bump_perturbation(fam, 1, center, 0.12, 1e-3, 51, cfg);
  CHECK(r.draws_used == 1);
  CHECK(r.success);
  CHECK(r.after.total == r.before.total);
}

TEST_CASE("framed bump rejects eps beyond the isolation gap") {
  const auto fam = builtin_model("stacked_noncone_homotopy").family;
  const Vec3 center(0.5, kTwoPi / 2, kTwoPi / 2);
  CHECK_THROWS_AS(
      framed_bump_perturbation(fam, 1, center, 0.15, 3.0, 61, cfg16()),
      FrameError);
}

TEST_CASE("verify_all_conical across the shipped fixtures") {
  ScanConfig cfg = cfg16();
  const VerifyReport good =
      verify_all_conical(*builtin_model("qwz_homotopy_3_1").family, 1, cfg);
  CHECK(good.all_conical);
  CHECK(good.summary.conical == 1);
  CHECK(good.min_witness > 0.0);

  const VerifyReport bad =
      verify_all_conical(*builtin_model("chart_noncone").family, 1, cfg12());
  CHECK(!bad.all_conical);
  CHECK(bad.summary.non_conical == 1);

  const VerifyReport vac =
      verify_all_conical(*builtin_model("constant_homotopy").family, 1,
                         cfg12());
  CHECK(vac.all_conical);
  CHECK(vac.summary.total == 0);
  CHECK(vac.min_witness > 0.0);
}
