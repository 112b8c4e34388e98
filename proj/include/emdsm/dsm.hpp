// Direct sampling: index functions built from L^2(Gamma) correlations of the
// data with point-source probes Phi(., x_p) q.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <string>
#include <vector>

#include "emdsm/em_core.hpp"
#include "emdsm/measurement.hpp"

namespace emdsm {

/// Lattice of sampling points spanning an axis-aligned box, including both ends of every axis.
template <int D>
class SamplingGrid {
 public:
  using Counts = std::array<int, D>;

  SamplingGrid(const Box<D>& box, double spacing) : box_(box), spacing_(spacing) {
    if (!(spacing > 0)) throw std::invalid_argument("sampling spacing must be positive");
    for (int a = 0; a < D; ++a) {
      const double extent = box.hi[a] - box.lo[a];
      if (!(extent >= 0)) throw GeometryError("sampling box has negative extent");
      counts_[static_cast<std::size_t>(a)] = static_cast<int>(std::llround(extent / spacing)) + 1;
    }
  }

  const Box<D>& box() const { return box_; }
  double spacing() const { return spacing_; }
  const Counts& counts() const { return counts_; }

  std::size_t size() const {
    std::size_t n = 1;
    for (int c : counts_) n *= static_cast<std::size_t>(c);
    return n;
  }

  Counts multi_index(std::size_t flat) const {
    Counts idx{};
    for (std::size_t a = 0; a < static_cast<std::size_t>(D); ++a) {
      idx[a] = static_cast<int>(flat % static_cast<std::size_t>(counts_[a]));
      flat /= static_cast<std::size_t>(counts_[a]);
    }
    return idx;
  }

  std::size_t flat_index(const Counts& idx) const {
    std::size_t flat = 0;
    for (int a = D - 1; a >= 0; --a) {
      flat = flat * static_cast<std::size_t>(counts_[static_cast<std::size_t>(a)]) +
             static_cast<std::size_t>(idx[static_cast<std::size_t>(a)]);
    }
    return flat;
  }

  Point<D> point(std::size_t flat) const {
    const Counts idx = multi_index(flat);
    Point<D> x;
    for (int a = 0; a < D; ++a) x[a] = box_.lo[a] + spacing_ * idx[static_cast<std::size_t>(a)];
    return x;
  }

 private:
  Box<D> box_;
  double spacing_;
  Counts counts_{};
};

/// Index values over a sampling grid.
template <int D>
struct IndexGrid {
  SamplingGrid<D> grid;
  std::vector<double> values;
  std::string label;

  double max_value() const { return values.empty() ? 0 : *std::max_element(values.begin(), values.end()); }

  std::size_t argmax_index() const {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
  }

  Point<D> argmax() const { return grid.point(argmax_index()); }

  /// Copy scaled so the maximum is 1.
  IndexGrid normalized() const {
    IndexGrid out = *this;
    const double peak = max_value();
    if (peak > 0) {
      for (double& v : out.values) v /= peak;
    }
    return out;
  }
};

/// A single incident's data together with the probe polarization q used for it.
template <int D>
struct PolarizedData {
  FieldSamples<D> samples;
  Vec<D> q;
};

namespace detail {

template <int D>
void require_inside(const MeasurementSurface<D>& surface, const Point<D>& x) {
  if (!surface.encloses(x)) throw GeometryError("sampling point is not strictly inside the measurement surface");
}

template <int D>
double normalized_correlation(cdouble inner, double data_norm, double probe_norm) {
  const double denom = data_norm * probe_norm;
  if (!(denom > 0)) return 0;
  return std::min(1.0, std::abs(inner) / denom);
}

}  // namespace detail

/// Samples of Phi(x_m, x_p) q on the surface.
template <int D>
FieldSamples<D> probe_field(const WaveContext<D>& ctx, const MeasurementSurface<D>& surface, const Point<D>& x_p,
                            const Vec<D>& q) {
  detail::require_inside(surface, x_p);
  FieldSamples<D> out{surface, {}, {}};
  out.values.reserve(surface.size());
  const CVec<D> qc = q.template cast<cdouble>();
  for (const auto& x : surface.points) out.values.push_back(green_tensor(ctx, x, x_p) * qc);
  return out;
}

/// Psi(x_p; q) = |<E^s, Phi(., x_p) q>| / (||E^s|| ||Phi(., x_p) q||), in [0, 1].
template <int D>
double index_psi(const WaveContext<D>& ctx, const FieldSamples<D>& data, const Point<D>& x_p, const Vec<D>& q) {
  const double data_norm = l2_norm(data);
  if (!(data_norm > 0)) throw std::invalid_argument("index of identically zero data is undefined");
  const FieldSamples<D> probe = probe_field(ctx, data.surface, x_p, q);
  return detail::normalized_correlation<D>(l2_inner_product(data, probe), data_norm, l2_norm(probe));
}

/// Mean of Psi(x_p; q_l) over the datasets.
template <int D>
double index_combined(const WaveContext<D>& ctx, const std::vector<PolarizedData<D>>& datasets, const Point<D>& x_p) {
  if (datasets.empty()) throw std::invalid_argument("combined index needs at least one dataset");
  double sum = 0;
  for (const auto& d : datasets) sum += index_psi(ctx, d.samples, x_p, d.q);
  return sum / static_cast<double>(datasets.size());
}

/// Per-polarization grids (one per dataset, labelled "psi_<l>") followed by the
/// combined grid ("psi_c"). Each Phi(x_m, x_p) is evaluated once per point and
/// shared between polarizations.
template <int D>
std::vector<IndexGrid<D>> compute_index_grids(const WaveContext<D>& ctx, const std::vector<PolarizedData<D>>& datasets,
                                              const SamplingGrid<D>& grid) {
  if (datasets.empty()) throw std::invalid_argument("index sweep needs at least one dataset");
  const MeasurementSurface<D>& surface = datasets.front().samples.surface;
  for (const auto& d : datasets) {
    if (!(d.samples.surface.descriptor == surface.descriptor)) throw GeometryError("datasets use different surfaces");
  }
  if (!surface.encloses(grid.box())) throw GeometryError("sampling box is not inside the measurement surface");

  const std::size_t L = datasets.size();
  std::vector<double> data_norm(L);
  for (std::size_t l = 0; l < L; ++l) {
    data_norm[l] = l2_norm(datasets[l].samples);
    if (!(data_norm[l] > 0)) throw std::invalid_argument("index of identically zero data is undefined");
  }

  std::vector<IndexGrid<D>> out;
  for (std::size_t l = 0; l < L; ++l) out.push_back({grid, std::vector<double>(grid.size()), "psi_" + std::to_string(l + 1)});
  out.push_back({grid, std::vector<double>(grid.size()), "psi_c"});

  const auto n = static_cast<long>(grid.size());
  const std::size_t M = surface.size();
#pragma omp parallel for schedule(dynamic, 256)
  for (long t = 0; t < n; ++t) {
    const auto p = static_cast<std::size_t>(t);
    const Point<D> x_p = grid.point(p);
    std::vector<cdouble> inner(L, 0.0);
    std::vector<double> probe_sq(L, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
      const CMat<D> phi = green_tensor(ctx, surface.points[m], x_p);
      const double w = surface.weights[m];
      for (std::size_t l = 0; l < L; ++l) {
        const CVec<D> probe = phi * datasets[l].q.template cast<cdouble>();
        inner[l] += w * probe.dot(datasets[l].samples.values[m]);
        probe_sq[l] += w * probe.squaredNorm();
      }
    }
    double sum = 0;
    for (std::size_t l = 0; l < L; ++l) {
      const double v = detail::normalized_correlation<D>(inner[l], data_norm[l], std::sqrt(probe_sq[l]));
      out[l].values[p] = v;
      sum += v;
    }
    out[L].values[p] = sum / static_cast<double>(L);
  }
  return out;
}

/// Which correlation of probe fields a cross-product map shows.
template <int D>
struct CrossSelector {
  enum class Kind { component, diagonal_sum, polarization, polarization_sum };
  Kind kind = Kind::diagonal_sum;
  int row = 0;
  int col = 0;
  std::vector<Vec<D>> polarizations;

  static CrossSelector component(int i, int j) { return {Kind::component, i, j, {}}; }
  static CrossSelector diagonal_sum() { return {Kind::diagonal_sum, 0, 0, {}}; }
  static CrossSelector polarization(const Vec<D>& q) { return {Kind::polarization, 0, 0, {q}}; }
  static CrossSelector polarization_sum(std::vector<Vec<D>> qs) { return {Kind::polarization_sum, 0, 0, std::move(qs)}; }
};

/// Magnitude of the selected L^2(Gamma) correlation between probes at x_p
/// (swept over the grid) and at the fixed point x_q, max-normalized.
template <int D>
IndexGrid<D> cross_product_map(const WaveContext<D>& ctx, const MeasurementSurface<D>& surface, const Point<D>& x_q,
                               const SamplingGrid<D>& grid, const CrossSelector<D>& selector, std::string label = "") {
  detail::require_inside(surface, x_q);
  if (!surface.encloses(grid.box())) throw GeometryError("sampling box is not inside the measurement surface");
  using Kind = typename CrossSelector<D>::Kind;
  if (selector.kind == Kind::component &&
      (selector.row < 0 || selector.row >= D || selector.col < 0 || selector.col >= D)) {
    throw std::invalid_argument("component index out of range");
  }
  if ((selector.kind == Kind::polarization || selector.kind == Kind::polarization_sum) && selector.polarizations.empty()) {
    throw std::invalid_argument("polarization selector needs at least one vector");
  }

  const std::size_t M = surface.size();
  std::vector<CMat<D>> reference(M);
  for (std::size_t m = 0; m < M; ++m) reference[m] = green_tensor(ctx, surface.points[m], x_q);

  IndexGrid<D> out{grid, std::vector<double>(grid.size()), std::move(label)};
  const auto n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (long t = 0; t < n; ++t) {
    const auto p = static_cast<std::size_t>(t);
    const Point<D> x_p = grid.point(p);
    cdouble acc = 0;
    for (std::size_t m = 0; m < M; ++m) {
      const CMat<D> phi = green_tensor(ctx, surface.points[m], x_p);
      const CMat<D>& ref = reference[m];
      const double w = surface.weights[m];
      switch (selector.kind) {
        case Kind::component:
          acc += w * phi(selector.row, selector.col) * std::conj(ref(selector.row, selector.col));
          break;
        case Kind::diagonal_sum:
          for (int i = 0; i < D; ++i) acc += w * phi(i, i) * std::conj(ref(i, i));
          break;
        case Kind::polarization:
        case Kind::polarization_sum:
          for (const auto& q : selector.polarizations) {
            const CVec<D> qc = q.template cast<cdouble>();
            acc += w * (ref * qc).dot(phi * qc);
          }
          break;
      }
    }
    out.values[p] = std::abs(acc);
  }
  return out.normalized();
}

struct LocalMaximum {
  std::size_t index = 0;
  double value = 0;
};

/// Points strictly greater than every existing neighbour (8 in 2D, 26 in 3D)
/// with value >= floor_fraction * global max, sorted by value, descending.
template <int D>
std::vector<LocalMaximum> find_local_maxima(const IndexGrid<D>& map, double floor_fraction = 0.5) {
  const double floor = floor_fraction * map.max_value();
  const auto& counts = map.grid.counts();
  std::vector<LocalMaximum> found;
  int neighbours = 1;
  for (int a = 0; a < D; ++a) neighbours *= 3;
  for (std::size_t p = 0; p < map.values.size(); ++p) {
    const double v = map.values[p];
    if (v < floor) continue;
    const auto idx = map.grid.multi_index(p);
    bool is_max = true;
    for (int code = 0; code < neighbours && is_max; ++code) {
      auto nb = idx;
      int c = code;
      bool self = true;
      bool inside = true;
      for (std::size_t a = 0; a < static_cast<std::size_t>(D); ++a) {
        const int step = c % 3 - 1;
        c /= 3;
        self = self && step == 0;
        nb[a] += step;
        inside = inside && nb[a] >= 0 && nb[a] < counts[a];
      }
      if (self || !inside) continue;
      if (!(v > map.values[map.grid.flat_index(nb)])) is_max = false;
    }
    if (is_max) found.push_back({p, v});
  }
  std::sort(found.begin(), found.end(), [](const LocalMaximum& a, const LocalMaximum& b) { return a.value > b.value; });
  return found;
}

/// (largest local maximum farther than min_distance from x_q) / (global maximum).
template <int D>
double off_peak_ratio(const IndexGrid<D>& map, const Point<D>& x_q, double min_distance) {
  const double peak = map.max_value();
  if (!(peak > 0)) return 0;
  for (const auto& m : find_local_maxima(map, 0.0)) {
    if ((map.grid.point(m.index) - x_q).norm() > min_distance) return m.value / peak;
  }
  return 0;
}

/// Im Phi(x, y), including the finite limit at x = y.
template <int D>
Eigen::Matrix<double, D, D> im_green_tensor(const WaveContext<D>& ctx, const Point<D>& x, const Point<D>& y) {
  if ((x - y).norm() > 0) return green_tensor(ctx, x, y).imag();
  const double k = ctx.wavenumber();
  const double diag = D == 2 ? k * k / 8 : k * k * k / (6 * std::numbers::pi);
  return diag * Eigen::Matrix<double, D, D>::Identity();
}

namespace detail {

// Curl of x -> Phi(x, source) v by 4th-order central differences. In 2D the
// curl is the scalar (transverse) component, stored in entry 0.
template <int D>
Eigen::Matrix<cdouble, 3, 1> curl_fd(const WaveContext<D>& ctx, const Point<D>& x, const Point<D>& source,
                                     const Vec<D>& v, double step) {
  const CVec<D> vc = v.template cast<cdouble>();
  auto field = [&](const Point<D>& y) -> CVec<D> { return green_tensor(ctx, y, source) * vc; };
  // jac(i, a) = d F_i / d x_a
  CMat<D> jac;
  for (int a = 0; a < D; ++a) {
    Point<D> e = Point<D>::Zero();
    e[a] = step;
    const CVec<D> d = (-field(x + 2 * e) + 8.0 * field(x + e) - 8.0 * field(x - e) + field(x - 2 * e)) / (12 * step);
    jac.col(a) = d;
  }
  Eigen::Matrix<cdouble, 3, 1> curl = Eigen::Matrix<cdouble, 3, 1>::Zero();
  if constexpr (D == 2) {
    curl[0] = jac(1, 0) - jac(0, 1);
  } else {
    curl[0] = jac(2, 1) - jac(1, 2);
    curl[1] = jac(0, 2) - jac(2, 0);
    curl[2] = jac(1, 0) - jac(0, 1);
  }
  return curl;
}

// (curl F) x n as a D-vector.
template <int D>
CVec<D> curl_cross_normal(const Eigen::Matrix<cdouble, 3, 1>& curl, const Vec<D>& n) {
  CVec<D> out;
  if constexpr (D == 2) {
    out[0] = -curl[0] * n[1];
    out[1] = curl[0] * n[0];
  } else {
    // Eigen's cross() conjugates complex results, so spell it out.
    out[0] = curl[1] * n[2] - curl[2] * n[1];
    out[1] = curl[2] * n[0] - curl[0] * n[2];
    out[2] = curl[0] * n[1] - curl[1] * n[0];
  }
  return out;
}

// Real bilinear product (a, b) = sum a_i b_i.
template <int D>
cdouble real_product(const CVec<D>& a, const CVec<D>& b) {
  return (a.array() * b.array()).sum();
}

}  // namespace detail

struct IdentityCheck {
  cdouble lhs;
  cdouble rhs;
  double rel_err = 0;
};

/// Surface form of the Green identity for two point sources:
///
///   \int_Gamma (curl conj(Phi(.,x_q)) q x n, Phi(.,x_p) p) - (curl Phi(.,x_p) p x n, conj(Phi(.,x_q)) q) ds
///     = -2 i k^2 (p, Im Phi(x_p, x_q) q).
///
/// The k^2 comes from curl curl Phi - k^2 Phi = k^2 delta I for Phi = k^2 G I + D^2 G.
/// Curls use 4th-order central differences with step 1e-4 wavelengths.
template <int D>
IdentityCheck verify_boundary_lemma(const WaveContext<D>& ctx, const MeasurementSurface<D>& surface, const Point<D>& x_p,
                                    const Point<D>& x_q, const Vec<D>& p, const Vec<D>& q) {
  if ((x_p - x_q).norm() == 0) throw GeometryError("boundary identity needs two distinct points");
  detail::require_inside(surface, x_p);
  detail::require_inside(surface, x_q);
  for (const auto& x : surface.points) {
    if ((x - x_p).norm() < ctx.wavelength() || (x - x_q).norm() < ctx.wavelength()) {
      throw GeometryError("source points must stay at least one wavelength from the surface");
    }
  }
  const double step = 1e-4 * ctx.wavelength();
  const CVec<D> pc = p.template cast<cdouble>();
  const CVec<D> qc = q.template cast<cdouble>();
  cdouble lhs = 0;
  for (std::size_t m = 0; m < surface.size(); ++m) {
    const auto& x = surface.points[m];
    const auto& n = surface.normals[m];
    const CVec<D> fp = green_tensor(ctx, x, x_p) * pc;
    const CVec<D> fq_conj = (green_tensor(ctx, x, x_q) * qc).conjugate();
    const CVec<D> curl_fq_conj_n = detail::curl_cross_normal<D>(detail::curl_fd(ctx, x, x_q, q, step).conjugate(), n);
    const CVec<D> curl_fp_n = detail::curl_cross_normal<D>(detail::curl_fd(ctx, x, x_p, p, step), n);
    lhs += surface.weights[m] * (detail::real_product<D>(curl_fq_conj_n, fp) - detail::real_product<D>(curl_fp_n, fq_conj));
  }
  const double k = ctx.wavenumber();
  const cdouble rhs = cdouble(0, -2 * k * k) * p.dot(im_green_tensor(ctx, x_p, x_q) * q);
  return {lhs, rhs, std::abs(lhs - rhs) / std::abs(rhs)};
}

struct CorrelationRow {
  double radius = 0;
  cdouble lhs;
  cdouble rhs;
  double err = 0;
};

/// For each circle radius R: \int_Gamma (Phi(.,x_p) p, conj(Phi(.,x_q)) q) ds against its
/// radiation-condition approximation k Im (p, Phi(x_p, x_q) q). `err` is relative to |rhs|.
inline std::vector<CorrelationRow> verify_correlation_approx(const WaveContext<2>& ctx, const std::vector<double>& radii,
                                                             const Point<2>& x_p, const Point<2>& x_q, const Vec<2>& p,
                                                             const Vec<2>& q, int points_per_wavelength = 16) {
  std::vector<CorrelationRow> rows;
  const double k = ctx.wavenumber();
  const cdouble rhs = k * p.dot(im_green_tensor(ctx, x_p, x_q) * q);
  for (double radius : radii) {
    const int count =
        std::max(64, static_cast<int>(std::ceil(points_per_wavelength * 2 * std::numbers::pi * radius / ctx.wavelength())));
    const auto surface = circle_surface(radius, count);
    detail::require_inside(surface, x_p);
    detail::require_inside(surface, x_q);
    cdouble lhs = 0;
    for (std::size_t m = 0; m < surface.size(); ++m) {
      const CVec<2> fp = green_tensor(ctx, surface.points[m], x_p) * p.cast<cdouble>();
      const CVec<2> fq = green_tensor(ctx, surface.points[m], x_q) * q.cast<cdouble>();
      lhs += surface.weights[m] * detail::real_product<2>(fp, fq.conjugate());
    }
    rows.push_back({radius, lhs, rhs, std::abs(lhs - rhs) / std::abs(rhs)});
  }
  return rows;
}

/// CSV: x1..xd,value (one row per sampling point, 17 significant digits).
template <int D>
void write_index_csv(std::ostream& os, const IndexGrid<D>& map) {
  for (int i = 1; i <= D; ++i) os << 'x' << i << ',';
  os << "value\n" << std::setprecision(17);
  for (std::size_t p = 0; p < map.values.size(); ++p) {
    const Point<D> x = map.grid.point(p);
    for (int i = 0; i < D; ++i) os << x[i] << ',';
    os << map.values[p] << '\n';
  }
}

template <int D>
void write_index_csv(const std::string& path, const IndexGrid<D>& map) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_index_csv(os, map);
}

/// Binary 16-bit PGM (P5, big-endian samples), [0, max] mapped linearly onto
/// [0, 65535]. Top row is the largest x2. 3D maps export the x3-slice through the argmax.
template <int D>
void write_index_pgm(std::ostream& os, const IndexGrid<D>& map) {
  const auto& counts = map.grid.counts();
  const int width = counts[0];
  const int height = counts[1];
  int slice = 0;
  if constexpr (D == 3) slice = map.grid.multi_index(map.argmax_index())[2];
  const double peak = map.max_value();
  os << "P5\n" << width << ' ' << height << "\n65535\n";
  for (int row = height - 1; row >= 0; --row) {
    for (int col = 0; col < width; ++col) {
      typename SamplingGrid<D>::Counts idx{};
      idx[0] = col;
      idx[1] = row;
      if constexpr (D == 3) idx[2] = slice;
      const double v = map.values[map.grid.flat_index(idx)];
      const double scaled = peak > 0 ? std::clamp(v / peak, 0.0, 1.0) * 65535.0 : 0.0;
      const auto level = static_cast<std::uint16_t>(std::lround(scaled));
      os.put(static_cast<char>(level >> 8));
      os.put(static_cast<char>(level & 0xff));
    }
  }
}

template <int D>
void write_index_pgm(const std::string& path, const IndexGrid<D>& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_index_pgm(os, map);
}

}  // namespace emdsm
