#pragma once

#include "conicscan/hermitian.hpp"
#include "conicscan/types.hpp"

#include <json.hpp>

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace conicscan {

// ---------------------------------------------------------------------------
// Parameter domains

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool periodic = false;
  double length() const { return hi - lo; }
};

// Three-dimensional parameter domain: (s, xi1, xi2), T^3, or a chart box.
struct Domain {
  std::array<Axis, 3> axes;

  static Domain homotopy();               // [0,1] x T^2
  static Domain torus3();                 // T^3
  static Domain box(double half_width);   // [-w, w]^3

  // Reduce angles mod 2pi (IEEE remainder, exact), clamp bounded axes.
  Vec3 canonical(const Vec3& p) const;
  // Minimal-image displacement to - from.
  Vec3 displacement(const Vec3& from, const Vec3& to) const;
  double distance(const Vec3& a, const Vec3& b) const;
  double diameter() const;
  bool interior(const Vec3& p, double margin) const;
};

// A point with coordinates reduced to the domain's canonical form.
struct ParameterPoint {
  Vec3 coords;
  static ParameterPoint in(const Domain& d, const Vec3& raw) {
    return ParameterPoint{d.canonical(raw)};
  }
};

// ---------------------------------------------------------------------------
// Family interface: a smooth Hermitian-matrix family over a 3D domain.

class Family {
 public:
  virtual ~Family() = default;
  virtual int bands() const = 0;
  virtual const Domain& domain() const = 0;
  virtual std::string name() const = 0;
  // Band index n whose (n, n+1) window this family is studied at.
  virtual int default_band() const { return 1; }

  // Pointwise value H(p); p is canonicalized internally.
  virtual HermitianMatrix value(const Vec3& p) const = 0;
  // Partial derivative along one axis, order 1 or 2 (same axis twice).
  virtual HermitianMatrix derivative(const Vec3& p, int axis,
                                     int order = 1) const = 0;
  // Upper bound for |d_axis H| over the domain (coarse-threshold heuristic).
  virtual double derivative_bound(int axis) const = 0;
};

using FamilyPtr = std::shared_ptr<const Family>;

// ---------------------------------------------------------------------------
// Finite tight-binding hopping data: H(xi) = sum_r T_r e^{i<xi,r>}.

struct HoppingTerm {
  Eigen::Vector3i r = Eigen::Vector3i::Zero();  // third entry 0 when dim_k = 2
  Matrix t;
};

class HoppingSet {
 public:
  // Validates the Hermiticity closure (every (r, T) has its (-r, T*) partner,
  // T_0 Hermitian). With auto_hermitize, missing partners are added and T_0 is
  // symmetrized instead.
  HoppingSet(int dim_k, int bands, std::vector<HoppingTerm> terms,
             bool auto_hermitize);

  int dim_k() const { return dim_k_; }
  int bands() const { return bands_; }
  const std::vector<HoppingTerm>& terms() const { return terms_; }

  // xi uses the first dim_k entries of p.
  Matrix evaluate_raw(const Vec3& xi) const;
  Matrix derivative_raw(const Vec3& xi, int axis, int order) const;
  double derivative_bound(int axis) const;

  // Max Frobenius distance to another set with identical support, for bounds.
  double hopping_distance(const HoppingSet& other) const;

 private:
  int dim_k_;
  int bands_;
  std::vector<HoppingTerm> terms_;  // sorted by r, duplicates merged
};

// ---------------------------------------------------------------------------
// Interpolation schedule: weight w(s) = sum_k c_k s^k with w(0)=0, w(1)=1.

class Schedule {
 public:
  static Schedule linear() { return Schedule({0.0, 1.0}); }
  explicit Schedule(std::vector<double> coeffs);

  double weight(double s) const;              // endpoint values exact
  double weight_derivative(double s, int order) const;
  double max_weight_derivative() const;       // sup |w'| on [0,1]
  const std::vector<double>& coeffs() const { return coeffs_; }
  bool is_linear() const;

 private:
  std::vector<double> coeffs_;
};

// ---------------------------------------------------------------------------
// Homotopy H(s, xi) = (1 - w(s)) H0(xi) + w(s) H1(xi) over [0,1] x T^2.

class Homotopy {
 public:
  // Checks the endpoint gap condition for band n on a gap_grid^2 xi-grid.
  Homotopy(HoppingSet h0, HoppingSet h1, Schedule schedule, int band_index,
           int gap_grid = 64);

  const HoppingSet& h0() const { return h0_; }
  const HoppingSet& h1() const { return h1_; }
  const Schedule& schedule() const { return schedule_; }
  int band_index() const { return band_index_; }
  int bands() const { return h0_.bands(); }

  Matrix value_raw(const Vec3& p) const;  // p = (s, xi1, xi2), canonical
  Matrix derivative_raw(const Vec3& p, int axis, int order) const;
  double derivative_bound(int axis) const;

 private:
  HoppingSet h0_;
  HoppingSet h1_;
  Schedule schedule_;
  int band_index_;
};

class HomotopyFamily : public Family {
 public:
  HomotopyFamily(Homotopy h, std::string name)
      : h_(std::move(h)), name_(std::move(name)), domain_(Domain::homotopy()) {}

  int bands() const override { return h_.bands(); }
  const Domain& domain() const override { return domain_; }
  std::string name() const override { return name_; }
  int default_band() const override { return h_.band_index(); }
  HermitianMatrix value(const Vec3& p) const override;
  HermitianMatrix derivative(const Vec3& p, int axis, int order) const override;
  double derivative_bound(int axis) const override {
    return h_.derivative_bound(axis);
  }
  const Homotopy& homotopy() const { return h_; }

 private:
  Homotopy h_;
  std::string name_;
  Domain domain_;
};

// A xi-only hopping set viewed over [0,1] x T^2 (constant in s) for dim_k = 2,
// or over T^3 for dim_k = 3.
class HoppingFamily : public Family {
 public:
  HoppingFamily(HoppingSet set, int band, std::string name);

  int bands() const override { return set_.bands(); }
  const Domain& domain() const override { return domain_; }
  std::string name() const override { return name_; }
  int default_band() const override { return band_; }
  HermitianMatrix value(const Vec3& p) const override;
  HermitianMatrix derivative(const Vec3& p, int axis, int order) const override;
  double derivative_bound(int axis) const override;
  const HoppingSet& set() const { return set_; }

 private:
  HoppingSet set_;
  int band_;
  std::string name_;
  Domain domain_;
};

// ---------------------------------------------------------------------------
// Chart fixtures: H(x) = sum_j h_j(x) sigma_j on a coordinate box, N = 2,
// optionally stacked with constant extra bands.

class ScalarField {
 public:
  virtual ~ScalarField() = default;
  virtual double value(const Vec3& x) const = 0;
  virtual double derivative(const Vec3& x, int axis, int order) const = 0;
  virtual double derivative_bound(int axis, double box_half) const = 0;
};

class PolynomialField : public ScalarField {
 public:
  struct Monomial {
    std::array<int, 3> e{0, 0, 0};
    double c = 0.0;
  };
  explicit PolynomialField(std::vector<Monomial> terms)
      : terms_(std::move(terms)) {}
  double value(const Vec3& x) const override;
  double derivative(const Vec3& x, int axis, int order) const override;
  double derivative_bound(int axis, double box_half) const override;

 private:
  std::vector<Monomial> terms_;
};

// rho(x3): identically 0 on |x3| <= plateau, rising C^2 (quintic step) to
// sign(x3) * amplitude at |x3| = 1.
class PlateauField : public ScalarField {
 public:
  PlateauField(double amplitude, double plateau)
      : amp_(amplitude), plateau_(plateau) {}
  double value(const Vec3& x) const override;
  double derivative(const Vec3& x, int axis, int order) const override;
  double derivative_bound(int axis, double box_half) const override;

 private:
  double amp_;
  double plateau_;
};

class ChartFamily : public Family {
 public:
  ChartFamily(std::array<std::shared_ptr<const ScalarField>, 4> h,
              double box_half, int extra_bands, double extra_energy,
              std::string name);

  int bands() const override { return 2 + extra_bands_; }
  const Domain& domain() const override { return domain_; }
  std::string name() const override { return name_; }
  HermitianMatrix value(const Vec3& p) const override;
  HermitianMatrix derivative(const Vec3& p, int axis, int order) const override;
  double derivative_bound(int axis) const override;

 private:
  std::array<std::shared_ptr<const ScalarField>, 4> h_;
  double box_half_;
  int extra_bands_;
  double extra_energy_;
  std::string name_;
  Domain domain_;
};

// ---------------------------------------------------------------------------
// Wrappers produced by the perturbation engines.

// family + constant Hermitian shift B
class ShiftedFamily : public Family {
 public:
  ShiftedFamily(FamilyPtr base, Matrix shift);
  int bands() const override { return base_->bands(); }
  const Domain& domain() const override { return base_->domain(); }
  std::string name() const override { return base_->name() + "+shift"; }
  int default_band() const override { return base_->default_band(); }
  HermitianMatrix value(const Vec3& p) const override;
  HermitianMatrix derivative(const Vec3& p, int axis, int order) const override;
  double derivative_bound(int axis) const override {
    return base_->derivative_bound(axis);
  }
  const Matrix& shift() const { return shift_; }

 private:
  FamilyPtr base_;
  Matrix shift_;
};

struct FramedBumpOverlay {
  Vec3 center = Vec3::Zero();  // canonical coordinates
  double radius = 0.0;
  int band = 1;       // frame spans bands (band, band+1)
  Matrix b;           // 2x2 Hermitian deposited in the frame
};

// C^2 bump profile: chi = 1 on [0, 1/2], quintic step down to 0 at 1.
double bump_chi(double t);
double bump_chi_derivative_bound();

// Rank-2 frame on a chart: eigenvector pair of bands (n, n+1) at `center`,
// transported to `x` by pair-projector alignment along the ray with Loewdin
// orthonormalization every `step_length` of arc. Throws FrameError if the
// pair's isolation fails along the way.
Matrix transported_pair_frame(const Family& fam, int n, const Vec3& center,
                              const Vec3& x, double step_length = 0.05);

// Base family plus the Eq.-1r-style chart term chi^2 U diag(B, 0) U*.
class FramedBumpFamily : public Family {
 public:
  FramedBumpFamily(FamilyPtr base, FramedBumpOverlay overlay);
  int bands() const override { return base_->bands(); }
  const Domain& domain() const override { return base_->domain(); }
  std::string name() const override { return base_->name() + "+bump"; }
  int default_band() const override { return base_->default_band(); }
  HermitianMatrix value(const Vec3& p) const override;
  HermitianMatrix derivative(const Vec3& p, int axis, int order) const override;
  double derivative_bound(int axis) const override;
  const FramedBumpOverlay& overlay() const { return overlay_; }
  const FamilyPtr& base() const { return base_; }

 private:
  Matrix overlay_term(const Vec3& p) const;
  FamilyPtr base_;
  FramedBumpOverlay overlay_;
};

// ---------------------------------------------------------------------------
// Model files and built-in fixtures.

struct LoadedModel {
  FamilyPtr family;
  std::string kind;          // "hopping" | "homotopy" | "builtin"
  nlohmann::ordered_json document;
};

LoadedModel model_from_json(const nlohmann::ordered_json& doc,
                            const std::string& name_hint);
LoadedModel load_model(const std::string& path);
nlohmann::ordered_json hopping_to_json(const HoppingSet& set);
nlohmann::ordered_json homotopy_to_json(const Homotopy& h);
void save_model(const LoadedModel& model, const std::string& path);

// name -> one-line description
std::vector<std::pair<std::string, std::string>> builtin_model_list();
LoadedModel builtin_model(const std::string& name);
// Accepts a path or "builtin:<name>".
LoadedModel resolve_model(const std::string& spec);

HoppingSet make_qwz(double m);

}  // namespace conicscan
