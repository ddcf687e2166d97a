#include "conicscan/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace conicscan {

namespace {

double reduce_angle(double x) {
  double r = std::remainder(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

// quintic smoothstep, C^2 on [0,1]
double smoothstep5(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}
double smoothstep5_d1(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return u * u * (30.0 + u * (-60.0 + 30.0 * u));
}
double smoothstep5_d2(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return u * (60.0 + u * (-180.0 + 120.0 * u));
}

}  // namespace

// ---------------------------------------------------------------------------
// Domain

Domain Domain::homotopy() {
  return Domain{{Axis{0.0, 1.0, false}, Axis{0.0, kTwoPi, true},
                 Axis{0.0, kTwoPi, true}}};
}

Domain Domain::torus3() {
  return Domain{{Axis{0.0, kTwoPi, true}, Axis{0.0, kTwoPi, true},
                 Axis{0.0, kTwoPi, true}}};
}

Domain Domain::box(double half_width) {
  Axis a{-half_width, half_width, false};
  return Domain{{a, a, a}};
}

Vec3 Domain::canonical(const Vec3& p) const {
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    const Axis& ax = axes[i];
    if (ax.periodic) {
      out[i] = ax.lo + reduce_angle(p[i] - ax.lo);
    } else {
      out[i] = std::clamp(p[i], ax.lo, ax.hi);
    }
  }
  return out;
}

Vec3 Domain::displacement(const Vec3& from, const Vec3& to) const {
  Vec3 d;
  for (int i = 0; i < 3; ++i) {
    const Axis& ax = axes[i];
    double v = to[i] - from[i];
    if (ax.periodic) v = std::remainder(v, ax.length());
    d[i] = v;
  }
  return d;
}

double Domain::distance(const Vec3& a, const Vec3& b) const {
  return displacement(a, b).norm();
}

double Domain::diameter() const {
  double s = 0.0;
  for (const Axis& ax : axes) {
    const double span = ax.periodic ? ax.length() / 2.0 : ax.length();
    s += span * span;
  }
  return std::sqrt(s);
}

bool Domain::interior(const Vec3& p, double margin) const {
  for (int i = 0; i < 3; ++i) {
    const Axis& ax = axes[i];
    if (ax.periodic) continue;
    if (p[i] < ax.lo + margin || p[i] > ax.hi - margin) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// HoppingSet

HoppingSet::HoppingSet(int dim_k, int bands, std::vector<HoppingTerm> terms,
                       bool auto_hermitize)
    : dim_k_(dim_k), bands_(bands) {
  if (dim_k != 2 && dim_k != 3) {
    throw InputError("HoppingSet: dim_k must be 2 or 3");
  }
  if (bands < 2) throw InputError("HoppingSet: bands must be >= 2");
  for (size_t i = 0; i < terms.size(); ++i) {
    const HoppingTerm& t = terms[i];
    if (t.t.rows() != bands || t.t.cols() != bands) {
      throw InputError("HoppingSet: term " + std::to_string(i) +
                       " has wrong matrix size");
    }
    if (!t.t.allFinite()) {
      throw InputError("HoppingSet: term " + std::to_string(i) +
                       " has non-finite entries");
    }
    if (dim_k == 2 && t.r[2] != 0) {
      throw InputError("HoppingSet: term " + std::to_string(i) +
                       " uses a third lattice direction with dim_k = 2");
    }
  }

  auto r_less = [](const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(),
                                        b.data() + 3);
  };

  // merge duplicate displacement vectors
  std::stable_sort(terms.begin(), terms.end(),
                   [&](const HoppingTerm& a, const HoppingTerm& b) {
                     return r_less(a.r, b.r);
                   });
  std::vector<HoppingTerm> merged;
  for (auto& t : terms) {
    if (!merged.empty() && merged.back().r == t.r) {
      merged.back().t += t.t;
    } else {
      merged.push_back(std::move(t));
    }
  }

  auto find_term = [&](const Eigen::Vector3i& r) -> HoppingTerm* {
    for (auto& t : merged) {
      if (t.r == r) return &t;
    }
    return nullptr;
  };

  if (auto_hermitize) {
    std::vector<HoppingTerm> completed;
    std::vector<bool> done(merged.size(), false);
    for (size_t i = 0; i < merged.size(); ++i) {
      if (done[i]) continue;
      HoppingTerm& t = merged[i];
      if (t.r == Eigen::Vector3i::Zero()) {
        t.t = 0.5 * (t.t + t.t.adjoint().eval());
        completed.push_back(t);
        done[i] = true;
        continue;
      }
      HoppingTerm* partner = find_term(-t.r);
      if (partner == nullptr) {
        completed.push_back(t);
        completed.push_back(HoppingTerm{-t.r, t.t.adjoint()});
        done[i] = true;
      } else {
        const size_t j = static_cast<size_t>(partner - merged.data());
        Matrix sym = 0.5 * (t.t + partner->t.adjoint().eval());
        completed.push_back(HoppingTerm{t.r, sym});
        completed.push_back(HoppingTerm{-t.r, sym.adjoint()});
        done[i] = true;
        done[j] = true;
      }
    }
    merged = std::move(completed);
    std::stable_sort(merged.begin(), merged.end(),
                     [&](const HoppingTerm& a, const HoppingTerm& b) {
                       return r_less(a.r, b.r);
                     });
  } else {
    for (size_t i = 0; i < merged.size(); ++i) {
      const HoppingTerm& t = merged[i];
      const double scale = 1.0 + t.t.norm();
      if (t.r == Eigen::Vector3i::Zero()) {
        if ((t.t - t.t.adjoint()).norm() > tol::kHermiticity * scale) {
          throw HermiticityError("HoppingSet: on-site term (index " +
                                 std::to_string(i) + ") is not Hermitian");
        }
        continue;
      }
      const HoppingTerm* partner = find_term(-t.r);
      if (partner == nullptr ||
          (partner->t - t.t.adjoint()).norm() > tol::kHermiticity * scale) {
        std::ostringstream os;
        os << "HoppingSet: term index " << i << " with r = (" << t.r[0] << ","
           << t.r[1] << "," << t.r[2]
           << ") lacks its Hermitian partner (-r, T*)";
        throw HermiticityError(os.str());
      }
    }
  }

  terms_ = std::move(merged);
}

Matrix HoppingSet::evaluate_raw(const Vec3& xi) const {
  Matrix h = Matrix::Zero(bands_, bands_);
  for (const auto& term : terms_) {
    double phase = 0.0;
    for (int a = 0; a < dim_k_; ++a) phase += xi[a] * term.r[a];
    h += std::polar(1.0, phase) * term.t;
  }
  return h;
}

Matrix HoppingSet::derivative_raw(const Vec3& xi, int axis, int order) const {
  Matrix h = Matrix::Zero(bands_, bands_);
  for (const auto& term : terms_) {
    if (term.r[axis] == 0) continue;
    double phase = 0.0;
    for (int a = 0; a < dim_k_; ++a) phase += xi[a] * term.r[a];
    Complex factor = Complex(0.0, term.r[axis]);
    if (order == 2) factor *= factor;
    h += factor * std::polar(1.0, phase) * term.t;
  }
  return h;
}

double HoppingSet::derivative_bound(int axis) const {
  double b = 0.0;
  for (const auto& term : terms_) {
    b += std::abs(term.r[axis]) * term.t.norm();
  }
  return b;
}

double HoppingSet::hopping_distance(const HoppingSet& other) const {
  double d = 0.0;
  size_t i = 0, j = 0;
  auto r_less = [](const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(),
                                        b.data() + 3);
  };
  while (i < terms_.size() || j < other.terms_.size()) {
    if (j >= other.terms_.size() ||
        (i < terms_.size() && r_less(terms_[i].r, other.terms_[j].r))) {
      d += terms_[i].t.norm();
      ++i;
    } else if (i >= terms_.size() || r_less(other.terms_[j].r, terms_[i].r)) {
      d += other.terms_[j].t.norm();
      ++j;
    } else {
      d += (terms_[i].t - other.terms_[j].t).norm();
      ++i;
      ++j;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Schedule

Schedule::Schedule(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) throw InputError("Schedule: empty coefficient list");
  if (std::abs(coeffs_[0]) > 1e-12) {
    throw InputError("Schedule: w(0) must be 0");
  }
  coeffs_[0] = 0.0;
  double sum = 0.0;
  for (double c : coeffs_) sum += c;
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InputError("Schedule: w(1) must be 1");
  }
}

double Schedule::weight(double s) const {
  if (s == 0.0) return 0.0;
  if (s == 1.0) return 1.0;
  double w = 0.0;
  for (size_t k = coeffs_.size(); k-- > 0;) w = w * s + coeffs_[k];
  return w;
}

double Schedule::weight_derivative(double s, int order) const {
  double w = 0.0;
  if (order == 1) {
    for (size_t k = coeffs_.size(); k-- > 1;) w = w * s + k * coeffs_[k];
  } else if (order == 2) {
    for (size_t k = coeffs_.size(); k-- > 2;)
      w = w * s + static_cast<double>(k) * (k - 1.0) * coeffs_[k];
  } else {
    throw InputError("Schedule: derivative order must be 1 or 2");
  }
  return w;
}

double Schedule::max_weight_derivative() const {
  double m = 0.0;
  for (int i = 0; i <= 200; ++i) {
    m = std::max(m, std::abs(weight_derivative(i / 200.0, 1)));
  }
  return m;
}

bool Schedule::is_linear() const {
  return coeffs_.size() == 2 && coeffs_[1] == 1.0;
}

// ---------------------------------------------------------------------------
// Homotopy

Homotopy::Homotopy(HoppingSet h0, HoppingSet h1, Schedule schedule,
                   int band_index, int gap_grid)
    : h0_(std::move(h0)),
      h1_(std::move(h1)),
      schedule_(std::move(schedule)),
      band_index_(band_index) {
  if (h0_.bands() != h1_.bands()) {
    throw InputError("Homotopy: endpoint band counts differ");
  }
  if (h0_.dim_k() != 2 || h1_.dim_k() != 2) {
    throw InputError("Homotopy: endpoints must be 2D hopping sets");
  }
  if (band_index_ < 1 || band_index_ > h0_.bands() - 1) {
    throw InputError("Homotopy: band_index out of range");
  }

  // endpoint gap condition on a gap_grid x gap_grid xi-grid
  for (int side = 0; side < 2; ++side) {
    const HoppingSet& h = side == 0 ? h0_ : h1_;
    for (int i = 0; i < gap_grid; ++i) {
      for (int j = 0; j < gap_grid; ++j) {
        const Vec3 xi(kTwoPi * i / gap_grid, kTwoPi * j / gap_grid, 0.0);
        const auto spec =
            eigensystem(HermitianMatrix::trusted(h.evaluate_raw(xi)));
        const double gap = spec.gap_above(band_index_);
        if (gap <= 1e-9) {
          std::ostringstream os;
          os << "Homotopy: endpoint H" << side << " violates the gap condition "
             << "at xi = (" << xi[0] << ", " << xi[1] << "): lambda_"
             << band_index_ << " = " << spec.eigenvalues[band_index_ - 1]
             << ", lambda_" << band_index_ + 1 << " = "
             << spec.eigenvalues[band_index_];
          throw InputError(os.str());
        }
      }
    }
  }
}

Matrix Homotopy::value_raw(const Vec3& p) const {
  const double w = schedule_.weight(p[0]);
  const Vec3 xi(p[1], p[2], 0.0);
  if (w == 0.0) return h0_.evaluate_raw(xi);
  if (w == 1.0) return h1_.evaluate_raw(xi);
  return (1.0 - w) * h0_.evaluate_raw(xi) + w * h1_.evaluate_raw(xi);
}

Matrix Homotopy::derivative_raw(const Vec3& p, int axis, int order) const {
  const Vec3 xi(p[1], p[2], 0.0);
  if (axis == 0) {
    const double dw = schedule_.weight_derivative(p[0], order);
    return dw * (h1_.evaluate_raw(xi) - h0_.evaluate_raw(xi));
  }
  const double w = schedule_.weight(p[0]);
  return (1.0 - w) * h0_.derivative_raw(xi, axis - 1, order) +
         w * h1_.derivative_raw(xi, axis - 1, order);
}

double Homotopy::derivative_bound(int axis) const {
  if (axis == 0) {
    return schedule_.max_weight_derivative() * h0_.hopping_distance(h1_);
  }
  return std::max(h0_.derivative_bound(axis - 1),
                  h1_.derivative_bound(axis - 1));
}

HermitianMatrix HomotopyFamily::value(const Vec3& p) const {
  return HermitianMatrix::trusted(h_.value_raw(domain_.canonical(p)));
}

HermitianMatrix HomotopyFamily::derivative(const Vec3& p, int axis,
                                           int order) const {
  return HermitianMatrix::trusted(
      h_.derivative_raw(domain_.canonical(p), axis, order));
}

// ---------------------------------------------------------------------------
// HoppingFamily

HoppingFamily::HoppingFamily(HoppingSet set, int band, std::string name)
    : set_(std::move(set)), band_(band), name_(std::move(name)) {
  domain_ = set_.dim_k() == 3 ? Domain::torus3() : Domain::homotopy();
  if (band_ < 1 || band_ > set_.bands() - 1) {
    throw InputError("HoppingFamily: band index out of range");
  }
}

HermitianMatrix HoppingFamily::value(const Vec3& p) const {
  const Vec3 q = domain_.canonical(p);
  const Vec3 xi = set_.dim_k() == 3 ? q : Vec3(q[1], q[2], 0.0);
  return HermitianMatrix::trusted(set_.evaluate_raw(xi));
}

HermitianMatrix HoppingFamily::derivative(const Vec3& p, int axis,
                                          int order) const {
  const Vec3 q = domain_.canonical(p);
  if (set_.dim_k() == 3) {
    return HermitianMatrix::trusted(set_.derivative_raw(q, axis, order));
  }
  if (axis == 0) {
    return HermitianMatrix::trusted(
        Matrix::Zero(set_.bands(), set_.bands()));
  }
  const Vec3 xi(q[1], q[2], 0.0);
  return HermitianMatrix::trusted(set_.derivative_raw(xi, axis - 1, order));
}

double HoppingFamily::derivative_bound(int axis) const {
  if (set_.dim_k() == 3) return set_.derivative_bound(axis);
  if (axis == 0) return 0.0;
  return set_.derivative_bound(axis - 1);
}

// ---------------------------------------------------------------------------
// Scalar fields and chart families

double PolynomialField::value(const Vec3& x) const {
  double v = 0.0;
  for (const auto& m : terms_) {
    double t = m.c;
    for (int a = 0; a < 3; ++a) {
      for (int k = 0; k < m.e[a]; ++k) t *= x[a];
    }
    v += t;
  }
  return v;
}

double PolynomialField::derivative(const Vec3& x, int axis, int order) const {
  double v = 0.0;
  for (const auto& m : terms_) {
    const int e = m.e[axis];
    if (e < order) continue;
    double t = m.c;
    for (int k = 0; k < order; ++k) t *= (e - k);
    for (int a = 0; a < 3; ++a) {
      const int ea = (a == axis) ? e - order : m.e[a];
      for (int k = 0; k < ea; ++k) t *= x[a];
    }
    v += t;
  }
  return v;
}

double PolynomialField::derivative_bound(int axis, double box_half) const {
  const double h = std::max(box_half, 1.0);
  double b = 0.0;
  for (const auto& m : terms_) {
    if (m.e[axis] < 1) continue;
    int deg = m.e[0] + m.e[1] + m.e[2] - 1;
    double t = std::abs(m.c) * m.e[axis];
    for (int k = 0; k < deg; ++k) t *= h;
    b += t;
  }
  return b;
}

double PlateauField::value(const Vec3& x) const {
  const double t = std::abs(x[2]);
  if (t <= plateau_) return 0.0;
  const double u = (t - plateau_) / (1.0 - plateau_);
  return (x[2] < 0.0 ? -amp_ : amp_) * smoothstep5(u);
}

double PlateauField::derivative(const Vec3& x, int axis, int order) const {
  if (axis != 2) return 0.0;
  const double t = std::abs(x[2]);
  if (t <= plateau_) return 0.0;
  const double scale = 1.0 / (1.0 - plateau_);
  const double u = (t - plateau_) * scale;
  if (order == 1) return amp_ * smoothstep5_d1(u) * scale;
  const double sign = x[2] < 0.0 ? -1.0 : 1.0;
  return sign * amp_ * smoothstep5_d2(u) * scale * scale;
}

double PlateauField::derivative_bound(int axis, double /*box_half*/) const {
  if (axis != 2) return 0.0;
  return amp_ * 1.875 / (1.0 - plateau_);
}

ChartFamily::ChartFamily(std::array<std::shared_ptr<const ScalarField>, 4> h,
                         double box_half, int extra_bands, double extra_energy,
                         std::string name)
    : h_(std::move(h)),
      box_half_(box_half),
      extra_bands_(extra_bands),
      extra_energy_(extra_energy),
      name_(std::move(name)),
      domain_(Domain::box(box_half)) {}

HermitianMatrix ChartFamily::value(const Vec3& p) const {
  const Vec3 x = domain_.canonical(p);
  const int n = bands();
  Matrix m = Matrix::Zero(n, n);
  for (int j = 0; j < 4; ++j) {
    if (h_[j]) m.topLeftCorner(2, 2) += h_[j]->value(x) * pauli(j);
  }
  for (int b = 2; b < n; ++b) m(b, b) = extra_energy_;
  return HermitianMatrix::trusted(std::move(m));
}

HermitianMatrix ChartFamily::derivative(const Vec3& p, int axis,
                                        int order) const {
  const Vec3 x = domain_.canonical(p);
  const int n = bands();
  Matrix m = Matrix::Zero(n, n);
  for (int j = 0; j < 4; ++j) {
    if (h_[j]) m.topLeftCorner(2, 2) += h_[j]->derivative(x, axis, order) * pauli(j);
  }
  return HermitianMatrix::trusted(std::move(m));
}

double ChartFamily::derivative_bound(int axis) const {
  double b = 0.0;
  for (int j = 0; j < 4; ++j) {
    if (h_[j]) b += h_[j]->derivative_bound(axis, box_half_);
  }
  return b;
}

// ---------------------------------------------------------------------------
// ShiftedFamily

ShiftedFamily::ShiftedFamily(FamilyPtr base, Matrix shift)
    : base_(std::move(base)), shift_(std::move(shift)) {
  if (shift_.rows() != base_->bands() || shift_.cols() != base_->bands()) {
    throw InputError("ShiftedFamily: shift size mismatch");
  }
  shift_ = 0.5 * (shift_ + shift_.adjoint().eval());
}

HermitianMatrix ShiftedFamily::value(const Vec3& p) const {
  return HermitianMatrix::trusted(base_->value(p).mat() + shift_);
}

HermitianMatrix ShiftedFamily::derivative(const Vec3& p, int axis,
                                          int order) const {
  return base_->derivative(p, axis, order);
}

// ---------------------------------------------------------------------------
// Framed bump

double bump_chi(double t) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  return 1.0 - smoothstep5((t - 0.5) * 2.0);
}

double bump_chi_derivative_bound() { return 1.875 * 2.0; }

Matrix transported_pair_frame(const Family& fam, int n, const Vec3& center,
                              const Vec3& x, double step_length) {
  const Domain& dom = fam.domain();
  const Vec3 c = dom.canonical(center);
  const Vec3 disp = dom.displacement(c, dom.canonical(x));
  const double dist = disp.norm();

  auto pair_vectors = [&](const Vec3& p) -> Matrix {
    const Spectrum s = eigensystem(fam.value(p));
    const int dim = s.dim();
    const double iso_lo =
        n >= 2 ? s.eigenvalues[n - 1] - s.eigenvalues[n - 2] : 1e300;
    const double iso_hi =
        n + 1 < dim ? s.eigenvalues[n + 1] - s.eigenvalues[n] : 1e300;
    if (std::min(iso_lo, iso_hi) <= tol::kIsolation) {
      throw FrameError("transported_pair_frame: pair isolation lost");
    }
    return s.eigenvectors.middleCols(n - 1, 2);
  };

  Matrix f = pair_vectors(c);
  const int steps = std::max(1, static_cast<int>(std::ceil(dist / step_length)));
  for (int k = 1; k <= steps; ++k) {
    const Vec3 p = dom.canonical(c + (static_cast<double>(k) / steps) * disp);
    const Matrix w = pair_vectors(p);
    const Matrix g = w * (w.adjoint() * f);  // project previous frame
    // Loewdin orthonormalization g (g*g)^{-1/2}
    Eigen::SelfAdjointEigenSolver<Matrix> es(g.adjoint() * g);
    if (es.eigenvalues().minCoeff() < 1e-6) {
      throw FrameError("transported_pair_frame: transport became singular");
    }
    const Matrix inv_sqrt =
        es.eigenvectors() *
        es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
        es.eigenvectors().adjoint();
    f = g * inv_sqrt;
  }
  return f;
}

FramedBumpFamily::FramedBumpFamily(FamilyPtr base, FramedBumpOverlay overlay)
    : base_(std::move(base)), overlay_(std::move(overlay)) {
  overlay_.center = base_->domain().canonical(overlay_.center);
  if (overlay_.b.rows() != 2 || overlay_.b.cols() != 2) {
    throw InputError("FramedBumpFamily: payload must be 2x2");
  }
  overlay_.b = 0.5 * (overlay_.b + overlay_.b.adjoint().eval());
  if (overlay_.radius <= 0.0) {
    throw InputError("FramedBumpFamily: radius must be positive");
  }
}

Matrix FramedBumpFamily::overlay_term(const Vec3& p) const {
  const Domain& dom = base_->domain();
  const Vec3 q = dom.canonical(p);
  const double dist = dom.distance(overlay_.center, q);
  const int nb = base_->bands();
  if (dist >= overlay_.radius) return Matrix::Zero(nb, nb);
  const double chi = bump_chi(dist / overlay_.radius);
  const Matrix f =
      transported_pair_frame(*base_, overlay_.band, overlay_.center, q);
  return (chi * chi) * (f * overlay_.b * f.adjoint());
}

HermitianMatrix FramedBumpFamily::value(const Vec3& p) const {
  return HermitianMatrix::trusted(base_->value(p).mat() + overlay_term(p));
}

HermitianMatrix FramedBumpFamily::derivative(const Vec3& p, int axis,
                                             int order) const {
  // base derivatives are analytic; the chart term is differenced
  const Matrix base = base_->derivative(p, axis, order).mat();
  Vec3 e = Vec3::Zero();
  if (order == 1) {
    const double h = 1e-5;
    e[axis] = h;
    const Matrix d =
        (overlay_term(p + e) - overlay_term(p - e)) / (2.0 * h);
    return HermitianMatrix::trusted(base + d);
  }
  const double h = 1e-4;
  e[axis] = h;
  const Matrix d = (overlay_term(p + e) - 2.0 * overlay_term(p) +
                    overlay_term(p - e)) /
                   (h * h);
  return HermitianMatrix::trusted(base + d);
}

double FramedBumpFamily::derivative_bound(int axis) const {
  const double frame_fudge = 4.0;
  return base_->derivative_bound(axis) +
         overlay_.b.norm() * (bump_chi_derivative_bound() * 2.0 /
                                  overlay_.radius +
                              frame_fudge);
}

// ---------------------------------------------------------------------------
// JSON model files

namespace {

using nlohmann::ordered_json;

ordered_json matrix_to_json_re(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (int i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j).real());
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json matrix_to_json_im(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (int i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j).imag());
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const ordered_json& re, const ordered_json& im,
                        int bands, const std::string& where) {
  if (!re.is_array() || static_cast<int>(re.size()) != bands) {
    throw ParseError("model: bad 're' block in " + where);
  }
  Matrix m(bands, bands);
  for (int i = 0; i < bands; ++i) {
    const auto& rr = re.at(i);
    if (!rr.is_array() || static_cast<int>(rr.size()) != bands) {
      throw ParseError("model: bad 're' row in " + where);
    }
    for (int j = 0; j < bands; ++j) {
      m(i, j) = Complex(rr.at(j).get<double>(), 0.0);
    }
  }
  if (!im.is_null()) {
    if (!im.is_array() || static_cast<int>(im.size()) != bands) {
      throw ParseError("model: bad 'im' block in " + where);
    }
    for (int i = 0; i < bands; ++i) {
      const auto& rr = im.at(i);
      for (int j = 0; j < bands; ++j) {
        m(i, j) += Complex(0.0, rr.at(j).get<double>());
      }
    }
  }
  return m;
}

HoppingSet hopping_from_json(const ordered_json& doc) {
  if (!doc.contains("bands") || !doc.contains("dim_k") ||
      !doc.contains("terms")) {
    throw ParseError("model: hopping set needs 'bands', 'dim_k', 'terms'");
  }
  const int bands = doc.at("bands").get<int>();
  const int dim_k = doc.at("dim_k").get<int>();
  const bool auto_h = doc.value("auto_hermitize", false);
  std::vector<HoppingTerm> terms;
  size_t idx = 0;
  for (const auto& t : doc.at("terms")) {
    HoppingTerm term;
    const auto& r = t.at("r");
    if (!r.is_array() || static_cast<int>(r.size()) != dim_k) {
      throw ParseError("model: term " + std::to_string(idx) +
                       " has wrong 'r' length");
    }
    for (int a = 0; a < dim_k; ++a) term.r[a] = r.at(a).get<int>();
    term.t = matrix_from_json(t.at("re"), t.value("im", ordered_json()),
                              bands, "term " + std::to_string(idx));
    terms.push_back(std::move(term));
    ++idx;
  }
  return HoppingSet(dim_k, bands, std::move(terms), auto_h);
}

Schedule schedule_from_json(const ordered_json& doc) {
  if (doc.is_null()) return Schedule::linear();
  const std::string type = doc.value("type", "linear");
  if (type == "linear") return Schedule::linear();
  if (type == "poly") {
    return Schedule(doc.at("coeffs").get<std::vector<double>>());
  }
  throw ParseError("model: unknown schedule type '" + type + "'");
}

ordered_json schedule_to_json(const Schedule& s) {
  ordered_json j;
  if (s.is_linear()) {
    j["type"] = "linear";
  } else {
    j["type"] = "poly";
    j["coeffs"] = s.coeffs();
  }
  return j;
}

}  // namespace

nlohmann::ordered_json hopping_to_json(const HoppingSet& set) {
  ordered_json doc;
  doc["bands"] = set.bands();
  doc["dim_k"] = set.dim_k();
  doc["auto_hermitize"] = false;
  ordered_json terms = ordered_json::array();
  for (const auto& t : set.terms()) {
    ordered_json jt;
    ordered_json r = ordered_json::array();
    for (int a = 0; a < set.dim_k(); ++a) r.push_back(t.r[a]);
    jt["r"] = std::move(r);
    jt["re"] = matrix_to_json_re(t.t);
    jt["im"] = matrix_to_json_im(t.t);
    terms.push_back(std::move(jt));
  }
  doc["terms"] = std::move(terms);
  return doc;
}

nlohmann::ordered_json homotopy_to_json(const Homotopy& h) {
  ordered_json doc;
  doc["bands"] = h.bands();
  doc["dim_k"] = 2;
  doc["band_index"] = h.band_index();
  doc["schedule"] = schedule_to_json(h.schedule());
  doc["h0"] = hopping_to_json(h.h0());
  doc["h1"] = hopping_to_json(h.h1());
  return doc;
}

LoadedModel model_from_json(const nlohmann::ordered_json& doc,
                            const std::string& name_hint) {
  LoadedModel out;
  out.document = doc;
  if (doc.contains("h0")) {
    HoppingSet h0 = hopping_from_json(doc.at("h0"));
    HoppingSet h1 = hopping_from_json(doc.at("h1"));
    Schedule sched = schedule_from_json(doc.value("schedule", ordered_json()));
    const int n = doc.value("band_index", 1);
    Homotopy h(std::move(h0), std::move(h1), std::move(sched), n);
    FamilyPtr fam = std::make_shared<HomotopyFamily>(std::move(h), name_hint);
    if (doc.contains("overlay")) {
      const auto& ov = doc.at("overlay");
      FramedBumpOverlay overlay;
      const auto c = ov.at("center").get<std::vector<double>>();
      if (c.size() != 3) throw ParseError("model: overlay center needs 3 coords");
      overlay.center = Vec3(c[0], c[1], c[2]);
      overlay.radius = ov.at("radius").get<double>();
      overlay.band = ov.value("band", n);
      overlay.b = matrix_from_json(ov.at("b_re"),
                                   ov.value("b_im", ordered_json()), 2,
                                   "overlay");
      fam = std::make_shared<FramedBumpFamily>(fam, std::move(overlay));
    }
    out.family = fam;
    out.kind = "homotopy";
    return out;
  }
  HoppingSet set = hopping_from_json(doc);
  const int n = doc.value("band_index", 1);
  out.family = std::make_shared<HoppingFamily>(std::move(set), n, name_hint);
  out.kind = "hopping";
  return out;
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path);
  ordered_json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ParseError("model parse error in " + path + ": " + e.what());
  }
  std::string name = path;
  const auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string::npos) name = name.substr(0, dot);
  return model_from_json(doc, name);
}

void save_model(const LoadedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file: " + path);
  out << model.document.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Built-in fixtures

HoppingSet make_qwz(double m) {
  std::vector<HoppingTerm> terms;
  terms.push_back({Eigen::Vector3i(0, 0, 0), m * pauli(3)});
  const Matrix tx = 0.5 * (pauli(3) - Complex(0, 1) * pauli(1));
  const Matrix ty = 0.5 * (pauli(3) - Complex(0, 1) * pauli(2));
  terms.push_back({Eigen::Vector3i(1, 0, 0), tx});
  terms.push_back({Eigen::Vector3i(-1, 0, 0), tx.adjoint()});
  terms.push_back({Eigen::Vector3i(0, 1, 0), ty});
  terms.push_back({Eigen::Vector3i(0, -1, 0), ty.adjoint()});
  return HoppingSet(2, 2, std::move(terms), false);
}

namespace {

// 2x2 hopping set embedded as the top-left block of a 3-band set, with a flat
// third band at `flat_energy`.
HoppingSet stack_with_flat_band(const HoppingSet& base, double flat_energy) {
  std::vector<HoppingTerm> terms;
  for (const auto& t : base.terms()) {
    Matrix m = Matrix::Zero(3, 3);
    m.topLeftCorner(2, 2) = t.t;
    if (t.r == Eigen::Vector3i::Zero()) m(2, 2) = flat_energy;
    terms.push_back({t.r, std::move(m)});
  }
  return HoppingSet(base.dim_k(), 3, std::move(terms), false);
}

std::shared_ptr<const ScalarField> poly_axis(int axis, int power, double c) {
  PolynomialField::Monomial m;
  m.e[axis] = power;
  m.c = c;
  return std::make_shared<PolynomialField>(
      std::vector<PolynomialField::Monomial>{m});
}

std::shared_ptr<const ScalarField> zero_field() {
  return std::make_shared<PolynomialField>(
      std::vector<PolynomialField::Monomial>{});
}

FamilyPtr chart_sigma(std::shared_ptr<const ScalarField> h1,
                      std::shared_ptr<const ScalarField> h2,
                      std::shared_ptr<const ScalarField> h3,
                      const std::string& name) {
  return std::make_shared<ChartFamily>(
      std::array<std::shared_ptr<const ScalarField>, 4>{zero_field(), h1, h2,
                                                        h3},
      1.0, 0, 0.0, name);
}

struct BuiltinEntry {
  std::string description;
  LoadedModel (*make)();
};

LoadedModel wrap_homotopy(Homotopy h, const std::string& name) {
  LoadedModel out;
  out.kind = "builtin";
  out.document = homotopy_to_json(h);
  out.family = std::make_shared<HomotopyFamily>(std::move(h), name);
  return out;
}

LoadedModel wrap_hopping(HoppingSet set, int band, const std::string& name) {
  LoadedModel out;
  out.kind = "builtin";
  out.document = hopping_to_json(set);
  out.document["band_index"] = band;
  out.family = std::make_shared<HoppingFamily>(std::move(set), band, name);
  return out;
}

LoadedModel wrap_chart(FamilyPtr fam) {
  LoadedModel out;
  out.kind = "builtin";
  out.document = nullptr;  // chart fixtures are code-defined
  out.family = std::move(fam);
  return out;
}

const std::vector<std::pair<std::string, BuiltinEntry>>& builtin_registry() {
  static const std::vector<std::pair<std::string, BuiltinEntry>> reg = {
      {"qwz_m3",
       {"QWZ Chern-insulator slice at m = 3 (gapped, c1 = 0)", [] {
          return wrap_hopping(make_qwz(3.0), 1, "qwz_m3");
        }}},
      {"qwz_m1",
       {"QWZ Chern-insulator slice at m = 1 (gapped, |c1| = 1)", [] {
          return wrap_hopping(make_qwz(1.0), 1, "qwz_m1");
        }}},
      {"constant_homotopy",
       {"constant gapped two-band homotopy (H0 = H1 = sigma_3)", [] {
          std::vector<HoppingTerm> t;
          t.push_back({Eigen::Vector3i::Zero(), pauli(3)});
          HoppingSet h(2, 2, t, false);
          return wrap_homotopy(
              Homotopy(h, h, Schedule::linear(), 1), "constant_homotopy");
        }}},
      {"qwz_homotopy_3_1",
       {"QWZ homotopy m: 3 -> 1, one conical crossing at (0.5, pi, pi)", [] {
          return wrap_homotopy(Homotopy(make_qwz(3.0), make_qwz(1.0),
                                        Schedule::linear(), 1),
                               "qwz_homotopy_3_1");
        }}},
      {"qwz_homotopy_3_m3",
       {"QWZ homotopy m: 3 -> -3, crossings at s = 0.25, 0.5 (double), 0.75",
        [] {
          // odd cubic weight: m(s) = 3 - 6 w(s) passes 2, 0, -2 at the
          // quarter points
          Schedule sched({0.0, 1.0 / 9.0, 8.0 / 3.0, -16.0 / 9.0});
          return wrap_homotopy(
              Homotopy(make_qwz(3.0), make_qwz(-3.0), std::move(sched), 1),
              "qwz_homotopy_3_m3");
        }}},
      {"stacked_gapped",
       {"QWZ m = 1 stacked with a flat band at +5 (N = 3, gapped)", [] {
          return wrap_hopping(stack_with_flat_band(make_qwz(1.0), 5.0), 1,
                              "stacked_gapped");
        }}},
      {"stacked_triple_homotopy",
       {"QWZ m: 3 -> 1 stacked with a flat band at 0; engineered triple point "
        "at (0.5, pi, pi)",
        [] {
          return wrap_homotopy(
              Homotopy(stack_with_flat_band(make_qwz(3.0), 0.0),
                       stack_with_flat_band(make_qwz(1.0), 0.0),
                       Schedule::linear(), 1),
              "stacked_triple_homotopy");
        }}},
      {"stacked_cone_homotopy",
       {"QWZ m: 3 -> 1 stacked with a flat band at +5 (N = 3, one conical "
        "crossing)",
        [] {
          return wrap_homotopy(
              Homotopy(stack_with_flat_band(make_qwz(3.0), 5.0),
                       stack_with_flat_band(make_qwz(1.0), 5.0),
                       Schedule::linear(), 1),
              "stacked_cone_homotopy");
        }}},
      {"stacked_noncone_homotopy",
       {"N = 3 homotopy with a non-conical middle-pair crossing at "
        "(0.5, pi, pi) and conical ones elsewhere",
        [] {
          // w = 2s - 5s^2 + 4s^3 has w(1/2) = 1/4 with w'(1/2) = 0, so the
          // crossing where 3 + cos xi1 + cos xi2 - 4w = 0 at (pi, pi) is a
          // degenerate critical zero of q.
          Schedule sched({0.0, 2.0, -5.0, 4.0});
          return wrap_homotopy(
              Homotopy(stack_with_flat_band(make_qwz(3.0), 5.0),
                       stack_with_flat_band(make_qwz(-1.0), 5.0),
                       std::move(sched), 1),
              "stacked_noncone_homotopy");
        }}},
      {"chart_cone",
       {"chart fixture h(x) = (x1, x2, x3).sigma, one conical point at 0", [] {
          return wrap_chart(chart_sigma(poly_axis(0, 1, 1.0),
                                        poly_axis(1, 1, 1.0),
                                        poly_axis(2, 1, 1.0), "chart_cone"));
        }}},
      {"chart_cone_flip",
       {"chart fixture h(x) = (x1, x2, -x3).sigma, chirality flipped", [] {
          return wrap_chart(chart_sigma(poly_axis(0, 1, 1.0),
                                        poly_axis(1, 1, 1.0),
                                        poly_axis(2, 1, -1.0),
                                        "chart_cone_flip"));
        }}},
      {"chart_noncone",
       {"chart fixture h(x) = (x1, x2, x3^2).sigma, non-conical point at 0",
        [] {
          return wrap_chart(chart_sigma(poly_axis(0, 1, 1.0),
                                        poly_axis(1, 1, 1.0),
                                        poly_axis(2, 2, 1.0),
                                        "chart_noncone"));
        }}},
      {"chart_line",
       {"chart fixture h(x) = (x1, x2, 0).sigma, a curve of crossings", [] {
          return wrap_chart(chart_sigma(poly_axis(0, 1, 1.0),
                                        poly_axis(1, 1, 1.0), zero_field(),
                                        "chart_line"));
        }}},
      {"chart_plateau",
       {"chart fixture h = (x1, x2, rho(x3)) with rho = 0 on |x3| <= 1/2, "
        "reach 2e-4; documents the Sard engine's tolerance limit",
        [] {
          return wrap_chart(chart_sigma(
              poly_axis(0, 1, 1.0), poly_axis(1, 1, 1.0),
              std::make_shared<PlateauField>(2e-4, 0.5), "chart_plateau"));
        }}},
  };
  return reg;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> builtin_model_list() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, entry] : builtin_registry()) {
    out.emplace_back(name, entry.description);
  }
  return out;
}

LoadedModel builtin_model(const std::string& name) {
  for (const auto& [n, entry] : builtin_registry()) {
    if (n == name) return entry.make();
  }
  throw InputError("unknown builtin model: " + name);
}

LoadedModel resolve_model(const std::string& spec) {
  if (spec.rfind("builtin:", 0) == 0) {
    return builtin_model(spec.substr(8));
  }
  return load_model(spec);
}

}  // namespace conicscan
