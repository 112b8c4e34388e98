// Measurement surfaces, synthetic scattered near-field data, the relative
// Gaussian noise model and the discrete L^2(Gamma) geometry.
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "emdsm/em_core.hpp"
#include "emdsm/forward.hpp"

namespace emdsm {

enum class SurfaceKind { circle, cube_faces };

struct SurfaceDescriptor {
  SurfaceKind kind = SurfaceKind::circle;
  double size = 0;  // circle radius or cube edge
  int count = 0;    // points on the circle, or lattice points per face edge

  bool operator==(const SurfaceDescriptor&) const = default;
};

/// Quadrature points on Gamma with weights (surface measure per point) and outward normals.
template <int D>
struct MeasurementSurface {
  std::vector<Point<D>> points;
  std::vector<Vec<D>> normals;
  std::vector<double> weights;
  SurfaceDescriptor descriptor;

  std::size_t size() const { return points.size(); }

  double total_measure() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }

  /// True when the box lies strictly inside the region enclosed by Gamma.
  bool encloses(const Box<D>& box) const {
    const double limit = descriptor.size / (descriptor.kind == SurfaceKind::circle ? 1.0 : 2.0);
    for (int corner = 0; corner < (1 << D); ++corner) {
      Point<D> c;
      for (int a = 0; a < D; ++a) c[a] = (corner >> a) & 1 ? box.hi[a] : box.lo[a];
      const double reach = descriptor.kind == SurfaceKind::circle ? c.norm() : c.cwiseAbs().maxCoeff();
      if (!(reach < limit)) return false;
    }
    return true;
  }

  bool encloses(const Point<D>& x) const { return encloses(Box<D>{x, x}); }
};

/// `count` equally spaced points on the circle of given radius, starting at angle 0.
inline MeasurementSurface<2> circle_surface(double radius, int count) {
  if (!(radius > 0)) throw std::invalid_argument("circle radius must be positive");
  if (count < 3) throw std::invalid_argument("circle surface needs at least 3 points");
  MeasurementSurface<2> s;
  s.descriptor = {SurfaceKind::circle, radius, count};
  const double w = 2 * std::numbers::pi * radius / count;
  for (int m = 0; m < count; ++m) {
    const double theta = 2 * std::numbers::pi * m / count;
    const Vec<2> n(std::cos(theta), std::sin(theta));
    s.normals.push_back(n);
    s.points.push_back(radius * n);
    s.weights.push_back(w);
  }
  return s;
}

/// Cell-centred per_face x per_face lattice on each face of the origin-centred cube.
inline MeasurementSurface<3> cube_surface(double edge, int per_face) {
  if (!(edge > 0)) throw std::invalid_argument("cube edge must be positive");
  if (per_face < 1) throw std::invalid_argument("cube surface needs at least one point per face");
  MeasurementSurface<3> s;
  s.descriptor = {SurfaceKind::cube_faces, edge, per_face};
  const double cell = edge / per_face;
  const double w = cell * cell;
  for (int axis = 0; axis < 3; ++axis) {
    for (int side : {-1, 1}) {
      const int u_axis = (axis + 1) % 3;
      const int v_axis = (axis + 2) % 3;
      for (int j = 0; j < per_face; ++j) {
        for (int i = 0; i < per_face; ++i) {
          Point<3> x;
          x[axis] = side * edge / 2;
          x[u_axis] = -edge / 2 + (i + 0.5) * cell;
          x[v_axis] = -edge / 2 + (j + 0.5) * cell;
          Vec<3> n = Vec<3>::Zero();
          n[axis] = side;
          s.points.push_back(x);
          s.normals.push_back(n);
          s.weights.push_back(w);
        }
      }
    }
  }
  return s;
}

struct Provenance {
  bool noisy = false;
  double epsilon = 0;
  std::uint64_t seed = 0;
};

/// Complex d-vector samples of a field on a measurement surface.
template <int D>
struct FieldSamples {
  MeasurementSurface<D> surface;
  std::vector<CVec<D>> values;
  Provenance provenance;
};

/// E^s(x_m) = sum_j Phi(x_m, y_j) J(y_j) h^D over nodes carrying current.
template <int D>
FieldSamples<D> synthesize_scattered_field(const InducedCurrentField<D>& current, const MeasurementSurface<D>& surface,
                                           const WaveContext<D>& ctx) {
  const Box<D> box = current.grid.box();
  for (const auto& x : surface.points) {
    bool outside = false;
    for (int a = 0; a < D; ++a) outside = outside || x[a] < box.lo[a] || x[a] > box.hi[a];
    if (!outside) throw GeometryError("measurement point lies inside the forward grid box");
  }
  std::vector<std::size_t> sources;
  for (std::size_t j = 0; j < current.values.size(); ++j) {
    if (current.values[j].squaredNorm() != 0) sources.push_back(j);
  }
  FieldSamples<D> out{surface, std::vector<CVec<D>>(surface.size(), CVec<D>::Zero()), {}};
  const double measure = current.grid.cell_measure();
  const auto m_count = static_cast<long>(surface.size());
#pragma omp parallel for schedule(static)
  for (long m = 0; m < m_count; ++m) {
    const auto& x = surface.points[static_cast<std::size_t>(m)];
    CVec<D> acc = CVec<D>::Zero();
    for (std::size_t j : sources) {
      acc += green_tensor(ctx, x, current.grid.node(j)) * current.values[j];
    }
    out.values[static_cast<std::size_t>(m)] = acc * measure;
  }
  return out;
}

/// Portable standard-normal stream: mt19937_64 words mapped to uniforms by
/// the top 53 bits, then Box-Muller. Each pair of draws consumes two words.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  /// Returns (re, im) of one standard complex Gaussian: two independent N(0,1).
  std::pair<double, double> next_pair() {
    const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;        // [0, 1)
    const double radius = std::sqrt(-2 * std::log(u1));
    const double angle = 2 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

 private:
  std::mt19937_64 engine_;
};

/// E^s + epsilon max_m |E^s(x_m)| zeta(x), zeta an independent standard complex
/// Gaussian per point and component (point-major, component-minor, real then imaginary).
template <int D>
FieldSamples<D> add_noise(const FieldSamples<D>& samples, double epsilon, std::uint64_t seed) {
  if (!(epsilon >= 0)) throw std::invalid_argument("noise level must be nonnegative");
  FieldSamples<D> out = samples;
  if (epsilon == 0) return out;
  double peak = 0;
  for (const auto& v : samples.values) peak = std::max(peak, v.norm());
  const double scale = epsilon * peak;
  GaussianStream zeta(seed);
  for (auto& v : out.values) {
    for (int i = 0; i < D; ++i) {
      const auto [re, im] = zeta.next_pair();
      v[i] += scale * cdouble(re, im);
    }
  }
  out.provenance = {true, epsilon, seed};
  return out;
}

/// <f, g> = sum_m w_m sum_i f_i(x_m) conj(g_i(x_m)).
template <int D>
cdouble l2_inner_product(const FieldSamples<D>& f, const FieldSamples<D>& g) {
  if (!(f.surface.descriptor == g.surface.descriptor) || f.values.size() != g.values.size()) {
    throw GeometryError("inner product of samples on different surfaces");
  }
  cdouble sum = 0;
  for (std::size_t m = 0; m < f.values.size(); ++m) {
    // Eigen's dot conjugates its first argument.
    sum += f.surface.weights[m] * g.values[m].dot(f.values[m]);
  }
  return sum;
}

template <int D>
double l2_norm(const FieldSamples<D>& f) {
  return std::sqrt(std::max(0.0, l2_inner_product(f, f).real()));
}

/// CSV with header x1..xd,w,Re_E1,Im_E1,...; 17 significant digits.
template <int D>
void write_samples_csv(std::ostream& os, const FieldSamples<D>& samples) {
  for (int i = 1; i <= D; ++i) os << 'x' << i << ',';
  os << 'w';
  for (int i = 1; i <= D; ++i) os << ",Re_E" << i << ",Im_E" << i;
  os << '\n';
  os << std::setprecision(17);
  for (std::size_t m = 0; m < samples.values.size(); ++m) {
    for (int i = 0; i < D; ++i) os << samples.surface.points[m][i] << ',';
    os << samples.surface.weights[m];
    for (int i = 0; i < D; ++i) os << ',' << samples.values[m][i].real() << ',' << samples.values[m][i].imag();
    os << '\n';
  }
}

template <int D>
void write_samples_csv(const std::string& path, const FieldSamples<D>& samples) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_samples_csv(os, samples);
}

/// Reads values written by write_samples_csv back onto a known surface. Points
/// must match the surface to 1e-12.
template <int D>
FieldSamples<D> read_samples_csv(std::istream& is, const MeasurementSurface<D>& surface) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty samples CSV");
  FieldSamples<D> out{surface, {}, {}};
  std::size_t m = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> cols;
    for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(std::stod(cell));
    if (cols.size() != static_cast<std::size_t>(3 * D + 1)) throw std::runtime_error("samples CSV: wrong column count");
    if (m >= surface.size()) throw std::runtime_error("samples CSV: more rows than surface points");
    for (int i = 0; i < D; ++i) {
      if (std::abs(cols[static_cast<std::size_t>(i)] - surface.points[m][i]) > 1e-12) {
        throw GeometryError("samples CSV point does not match the surface");
      }
    }
    CVec<D> v;
    for (int i = 0; i < D; ++i) {
      const auto base = static_cast<std::size_t>(D + 1 + 2 * i);
      v[i] = cdouble(cols[base], cols[base + 1]);
    }
    out.values.push_back(v);
    ++m;
  }
  if (m != surface.size()) throw std::runtime_error("samples CSV: row count does not match the surface");
  return out;
}

}  // namespace emdsm
