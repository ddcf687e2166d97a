#pragma once

#include "conicscan/model.hpp"

#include <array>
#include <vector>

namespace conicscan {

struct ScanConfig {
  std::array<int, 3> grid{16, 16, 16};
  double refine_tol = 1e-9;
  // conical iff |det Hessian(4q)| > hess_tol_factor * (max |entry|)^3
  double hess_tol_factor = 1e-6;
  double fd_step = 1e-4;
  double cluster_radius = 0.0;  // <= 0: 2x the grid cell diagonal
  int max_refine_iterations = 100;
  int threads = 1;
};

enum class MultiplicityFlag { simple_pair, higher };
enum class Verdict { conical, non_conical, indeterminate };

const char* to_string(MultiplicityFlag f);
const char* to_string(Verdict v);

struct DegeneracyPoint {
  Vec3 location = Vec3::Zero();  // refined zeta*
  int band = 1;
  double energy = 0.0;              // lambda_n at zeta*
  double gap_at_refinement = 0.0;   // lambda_{n+1} - lambda_n at zeta*
  Mat3 hessian_q = Mat3::Zero();    // Hessian of 4q = gap^2
  double hessian_det = 0.0;
  MultiplicityFlag multiplicity = MultiplicityFlag::simple_pair;
  Verdict verdict = Verdict::indeterminate;
};

// A refinement that converged to a suspiciously small but nonzero gap:
// reported, never silently dropped.
struct StallRecord {
  Vec3 location = Vec3::Zero();
  double gap = 0.0;
};

struct ScanResult {
  std::vector<DegeneracyPoint> points;  // sorted by s, then xi
  std::vector<StallRecord> stalls;
  double coarse_threshold = 0.0;
  double cluster_radius = 0.0;
};

// Squared-half-gap q = (lambda_{n+1} - lambda_n)^2 / 4, total (no isolation
// requirement), and the witness f = det(Hess(D o H))^2 + D(H(zeta)).
double q_value(const Family& fam, int n, const Vec3& p);
double witness_f(const Family& fam, const Vec3& p, const ScanConfig& cfg);

// Hessian of 4q by central second differences with one Richardson step.
Mat3 hessian_of_4q(const Family& fam, int n, const Vec3& p, double fd_step);

// Locate all crossings of lambda_n and lambda_{n+1}: coarse grid sweep,
// trust-region refinement of q seeded at below-threshold local minima,
// clustering, classification.
ScanResult scan(const Family& fam, int n, const ScanConfig& cfg);

// Classify one refined location (precondition: gap(zeta) below refine
// tolerance; scan enforces it).
DegeneracyPoint classify(const Family& fam, int n, const Vec3& zeta,
                         const ScanConfig& cfg);

}  // namespace conicscan
