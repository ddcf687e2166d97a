#pragma once

#include "conicscan/scan.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace conicscan {

struct ScanSummary {
  int total = 0;
  int conical = 0;
  int non_conical = 0;
  int indeterminate = 0;
  int higher_multiplicity = 0;
  int stalls = 0;
};

ScanSummary summarize(const ScanResult& r);

// Zero non-conical, zero indeterminate and zero higher-multiplicity verdicts
// (vacuously true for crossing-free scans).
bool all_conical(const ScanSummary& s);

struct PerturbationResult {
  std::string kind;              // "constant" | "pauli" | "framed-bump"
  Matrix payload;                // the drawn Hermitian shift (N x N or 2 x 2)
  Vec3 pauli_b = Vec3::Zero();   // the R^3 draw for the pauli kind
  std::optional<Vec3> chart_center;
  double chart_radius = 0.0;
  double norm = 0.0;             // norm of the accepted draw, <= requested eps
  int draws_used = 0;
  std::uint64_t seed = 0;
  ScanSummary before;
  ScanSummary after;
  bool success = false;
  FamilyPtr perturbed;           // the accepted family
  ScanResult after_scan;
};

// Constant Hermitian shifts sampled uniformly from the Frobenius eps-ball
// (GUE direction) until the scan shows no higher-multiplicity crossing.
// Requires N >= 3. Throws ExhaustedDrawsError after max_draws rejections.
PerturbationResult remove_high_multiplicity(FamilyPtr fam, int n, double eps,
                                            std::uint64_t seed,
                                            const ScanConfig& cfg,
                                            int max_draws = 50);

// Traceless Pauli shifts H - b.sigma with b uniform in the eps-ball of R^3,
// accepted when every crossing of the shifted family is conical. N = 2 only.
PerturbationResult sard_shift_2x2(FamilyPtr fam, int n, double eps,
                                  std::uint64_t seed, const ScanConfig& cfg,
                                  int max_draws = 50);

// Chart-local rank-2 perturbation chi^2 U diag(b.sigma, 0) U* through the
// transported frame; accepted when every crossing inside the chart ball is
// conical. Leaves the family bitwise unchanged outside the bump support.
PerturbationResult framed_bump_perturbation(FamilyPtr fam, int n,
                                            const Vec3& chart_center,
                                            double chart_radius, double eps,
                                            std::uint64_t seed,
                                            const ScanConfig& cfg,
                                            int max_draws = 50);

struct VerifyReport {
  bool all_conical = false;
  ScanSummary summary;
  ScanResult scan_result;
  double min_witness = 0.0;  // min of f over the verification grid
  Vec3 witness_argmin = Vec3::Zero();
};

// scan + classify; true iff every verdict is conical. Embeds the minimum of
// the witness f = det(Hess(D o H))^2 + D(H) over a coarse verification grid.
VerifyReport verify_all_conical(const Family& fam, int n,
                                const ScanConfig& cfg);

}  // namespace conicscan
