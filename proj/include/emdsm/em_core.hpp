// Wave context, incident plane waves, piecewise-constant contrast and the
// scalar / dyadic Green's functions of the homogeneous background.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "emdsm/errors.hpp"
#include "emdsm/specfun.hpp"

namespace emdsm {

using cdouble = std::complex<double>;
inline constexpr cdouble kI{0.0, 1.0};

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
template <int D>
using CVec = Eigen::Matrix<cdouble, D, 1>;
template <int D>
using CMat = Eigen::Matrix<cdouble, D, D>;
template <int D>
using Point = Vec<D>;

template <int D>
concept SupportedDimension = (D == 2 || D == 3);

template <int D>
  requires SupportedDimension<D>
class WaveContext {
 public:
  static constexpr int dimension = D;

  explicit WaveContext(double wavelength) : wavelength_(wavelength), wavenumber_(2 * std::numbers::pi / wavelength) {
    if (!(wavelength > 0) || !std::isfinite(wavelength)) {
      throw std::invalid_argument("wavelength must be positive and finite");
    }
  }

  static WaveContext from_wavenumber(double k) {
    if (!(k > 0)) throw std::invalid_argument("wavenumber must be positive");
    WaveContext ctx(2 * std::numbers::pi / k);
    ctx.wavenumber_ = k;
    return ctx;
  }

  double wavenumber() const { return wavenumber_; }
  double wavelength() const { return wavelength_; }

 private:
  double wavelength_;
  double wavenumber_;
};

template <int D>
struct Box {
  Vec<D> lo;
  Vec<D> hi;

  Vec<D> extent() const { return hi - lo; }
  Vec<D> center() const { return (lo + hi) / 2; }
  bool contains(const Point<D>& x) const { return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all(); }
  bool contains(const Box& other) const { return contains(other.lo) && contains(other.hi); }
};

/// Plane wave p exp(i k d.x) with unit direction d and unit polarization p, d.p = 0.
template <int D>
class IncidentPlaneWave {
 public:
  static constexpr double kTolerance = 1e-12;

  IncidentPlaneWave(const Vec<D>& direction, const Vec<D>& polarization)
      : direction_(direction), polarization_(polarization) {
    if (std::abs(direction.norm() - 1) > kTolerance) throw std::invalid_argument("incident direction is not a unit vector");
    if (std::abs(polarization.norm() - 1) > kTolerance) throw std::invalid_argument("polarization is not a unit vector");
    if (std::abs(direction.dot(polarization)) > kTolerance) {
      throw std::invalid_argument("polarization must be perpendicular to the incident direction");
    }
  }

  const Vec<D>& direction() const { return direction_; }
  const Vec<D>& polarization() const { return polarization_; }

 private:
  Vec<D> direction_;
  Vec<D> polarization_;
};

template <int D>
CVec<D> incident_field(const IncidentPlaneWave<D>& wave, const WaveContext<D>& ctx, const Point<D>& x) {
  const double phase = ctx.wavenumber() * wave.direction().dot(x);
  return wave.polarization().template cast<cdouble>() * std::polar(1.0, phase);
}

enum class ShapeKind { axis_square, square_ring, axis_cube };

inline std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::axis_square:
      return "axis_square";
    case ShapeKind::square_ring:
      return "square_ring";
    case ShapeKind::axis_cube:
      return "axis_cube";
  }
  return "unknown";
}

/// Axis-aligned box scatterer (square, square ring or cube) with constant contrast
/// eta = n^2 - 1. Membership uses half-open cells [c - s/2, c + s/2) per axis.
template <int D>
class Shape {
 public:
  Shape(ShapeKind kind, const Point<D>& center, double outer_side, double inner_side, cdouble eta)
      : kind_(kind), center_(center), outer_(outer_side), inner_(inner_side), eta_(eta) {
    if (kind == ShapeKind::axis_cube && D != 3) throw std::invalid_argument("axis_cube requires dimension 3");
    if (kind != ShapeKind::axis_cube && D != 2) throw std::invalid_argument(to_string(kind) + " requires dimension 2");
    if (!(outer_side > 0)) throw std::invalid_argument("shape side length must be positive");
    if (kind == ShapeKind::square_ring) {
      if (!(inner_side >= 0 && inner_side < outer_side)) throw std::invalid_argument("ring needs 0 <= inner_side < outer_side");
    } else if (inner_side != 0) {
      throw std::invalid_argument("inner_side is only meaningful for square_ring");
    }
  }

  static Shape square(const Point<D>& center, double side, cdouble eta) {
    return Shape(ShapeKind::axis_square, center, side, 0, eta);
  }
  static Shape ring(const Point<D>& center, double outer_side, double inner_side, cdouble eta) {
    return Shape(ShapeKind::square_ring, center, outer_side, inner_side, eta);
  }
  static Shape cube(const Point<D>& center, double side, cdouble eta) { return Shape(ShapeKind::axis_cube, center, side, 0, eta); }

  ShapeKind kind() const { return kind_; }
  const Point<D>& center() const { return center_; }
  double outer_side() const { return outer_; }
  double inner_side() const { return inner_; }
  cdouble eta() const { return eta_; }

  bool contains(const Point<D>& x) const {
    if (!in_box(x, outer_)) return false;
    return kind_ != ShapeKind::square_ring || !in_box(x, inner_);
  }

  Box<D> bounding_box() const {
    const Vec<D> half = Vec<D>::Constant(outer_ / 2);
    return {center_ - half, center_ + half};
  }

 private:
  bool in_box(const Point<D>& x, double side) const {
    for (int i = 0; i < D; ++i) {
      const double lo = center_[i] - side / 2;
      const double hi = center_[i] + side / 2;
      if (!(x[i] >= lo && x[i] < hi)) return false;
    }
    return true;
  }

  ShapeKind kind_;
  Point<D> center_;
  double outer_;
  double inner_;
  cdouble eta_;
};

/// eta(x) as an ordered list of shapes; where shapes overlap the last one wins.
template <int D>
class ContrastField {
 public:
  ContrastField() = default;
  explicit ContrastField(std::vector<Shape<D>> shapes) : shapes_(std::move(shapes)) {}

  const std::vector<Shape<D>>& shapes() const { return shapes_; }
  bool empty() const { return shapes_.empty(); }

  cdouble eta(const Point<D>& x) const {
    for (auto it = shapes_.rbegin(); it != shapes_.rend(); ++it) {
      if (it->contains(x)) return it->eta();
    }
    return 0.0;
  }

  /// Union of the shape boxes; nullopt for an empty field.
  std::optional<Box<D>> bounding_box() const {
    if (shapes_.empty()) return std::nullopt;
    Box<D> box = shapes_.front().bounding_box();
    for (const auto& s : shapes_) {
      const Box<D> b = s.bounding_box();
      box.lo = box.lo.cwiseMin(b.lo);
      box.hi = box.hi.cwiseMax(b.hi);
    }
    return box;
  }

  /// Radius of the smallest origin-centred ball containing the support.
  double bounding_radius() const {
    const auto box = bounding_box();
    if (!box) return 0;
    return box->lo.cwiseAbs().cwiseMax(box->hi.cwiseAbs()).norm();
  }

 private:
  std::vector<Shape<D>> shapes_;
};

template <int D>
cdouble contrast_eval(const ContrastField<D>& field, const Point<D>& x) {
  return field.eta(x);
}

/// Outgoing fundamental solution of -(Laplace + k^2) as a function of distance.
template <int D>
cdouble green_scalar_radial(const WaveContext<D>& ctx, double r) {
  if (!(r > 0)) throw SingularityError("Green's function evaluated at coincident points");
  const double k = ctx.wavenumber();
  if constexpr (D == 2) {
    return 0.25 * kI * specfun::hankel1(0, k * r);
  } else {
    return std::polar(1.0 / (4 * std::numbers::pi * r), k * r);
  }
}

template <int D>
cdouble green_scalar(const WaveContext<D>& ctx, const Point<D>& x, const Point<D>& y) {
  return green_scalar_radial(ctx, (x - y).norm());
}

/// Phi(x, y) = k^2 G I + Hessian(G), from the closed-form component expressions.
template <int D>
CMat<D> green_tensor(const WaveContext<D>& ctx, const Point<D>& x, const Point<D>& y) {
  const Vec<D> diff = x - y;
  const double r = diff.norm();
  if (!(r > 0)) throw SingularityError("dyadic Green's function evaluated at coincident points");
  const Vec<D> unit = diff / r;
  const double k = ctx.wavenumber();

  cdouble diag;    // coefficient of delta_ij
  cdouble radial;  // coefficient of rhat_i rhat_j
  if constexpr (D == 2) {
    const auto h = specfun::hankel1_all(k * r);
    const cdouble scale = kI * (k * k / 4);
    diag = scale * (h[0] - h[1] / (k * r));
    radial = scale * h[2];
  } else {
    const cdouble g = std::polar(1.0 / (4 * std::numbers::pi * r), k * r);
    const cdouble near = cdouble(-1.0 / (r * r), k / r);  // -1/r^2 + ik/r
    diag = g * (k * k + near);
    radial = g * (-k * k - 3.0 * near);
  }

  CMat<D> phi;
  for (int i = 0; i < D; ++i) {
    phi(i, i) = diag + radial * (unit[i] * unit[i]);
    for (int j = i + 1; j < D; ++j) {
      phi(i, j) = radial * (unit[i] * unit[j]);
      phi(j, i) = phi(i, j);
    }
  }
  return phi;
}

/// (d-1) k^2 Im G(r): the imaginary part of tr Phi at separation r, continuous at r = 0.
template <int D>
double im_trace_green_tensor(const WaveContext<D>& ctx, double r) {
  if (r < 0) throw std::invalid_argument("separation must be nonnegative");
  const double k = ctx.wavenumber();
  if constexpr (D == 2) {
    return k * k * specfun::bessel_j(0, k * r) / 4;
  } else {
    const double sinc_over_r = r == 0 ? k : std::sin(k * r) / r;
    return 2 * k * k * sinc_over_r / (4 * std::numbers::pi);
  }
}

}  // namespace emdsm
