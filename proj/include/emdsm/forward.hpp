// Forward scattering: the current equation
//
//   J(x) - eta(x) \int G(x, y) (P J)(y) dy = eta(x) E^i(x),   P J = k^2 J + grad div J,
//
// discretized by the mid-point rule on a uniform cell-centred grid, with a
// cell-averaged self term and central differences for P.
#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SparseCore>

#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "emdsm/em_core.hpp"
#include "emdsm/gmres.hpp"
#include "emdsm/quadrature.hpp"

namespace emdsm {

/// Uniform tensor grid of cells of side h; nodes are cell centres, axis 0 varies fastest.
template <int D>
class VolumeGrid {
 public:
  using Counts = std::array<int, D>;

  VolumeGrid(double h, const Point<D>& first_node, const Counts& counts) : h_(h), origin_(first_node), counts_(counts) {
    if (!(h > 0)) throw std::invalid_argument("mesh size must be positive");
    for (int c : counts) {
      if (c < 1) throw GeometryError("grid needs at least one cell per axis");
    }
  }

  double mesh_size() const { return h_; }
  const Point<D>& origin() const { return origin_; }
  const Counts& counts() const { return counts_; }
  double cell_measure() const { return std::pow(h_, D); }

  std::size_t size() const {
    std::size_t n = 1;
    for (int c : counts_) n *= static_cast<std::size_t>(c);
    return n;
  }

  Counts multi_index(std::size_t flat) const {
    Counts idx{};
    for (int a = 0; a < D; ++a) {
      const auto c = static_cast<std::size_t>(counts_[static_cast<std::size_t>(a)]);
      idx[static_cast<std::size_t>(a)] = static_cast<int>(flat % c);
      flat /= c;
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

  Point<D> node(std::size_t flat) const {
    const Counts idx = multi_index(flat);
    Point<D> x = origin_;
    for (int a = 0; a < D; ++a) x[a] += h_ * idx[static_cast<std::size_t>(a)];
    return x;
  }

  /// Union of all cells.
  Box<D> box() const {
    Box<D> b;
    for (int a = 0; a < D; ++a) {
      b.lo[a] = origin_[a] - h_ / 2;
      b.hi[a] = origin_[a] + h_ * (counts_[static_cast<std::size_t>(a)] - 0.5);
    }
    return b;
  }

 private:
  double h_;
  Point<D> origin_;
  Counts counts_;
};

/// Smallest grid of whole cells of side h, centred on the support's bounding box, covering it.
template <int D>
VolumeGrid<D> build_grid(const ContrastField<D>& contrast, double h) {
  if (!(h > 0)) throw std::invalid_argument("mesh size must be positive");
  const auto box = contrast.bounding_box();
  if (!box) throw GeometryError("cannot build a grid for an empty contrast");
  const Vec<D> extent = box->extent();
  typename VolumeGrid<D>::Counts counts{};
  Point<D> first;
  for (int a = 0; a < D; ++a) {
    const double cells = extent[a] / h;
    if (cells < 1 - 1e-9) throw GeometryError("mesh size exceeds the scatterer bounding box (degenerate grid)");
    const int n = static_cast<int>(std::ceil(cells - 1e-9));
    counts[static_cast<std::size_t>(a)] = n;
    first[a] = box->center()[a] - h * n / 2 + h / 2;
  }
  return VolumeGrid<D>(h, first, counts);
}

namespace detail {

// Exact cell averages of the static singular parts:
//   2D: -(1/2pi) log r over (-h/2, h/2)^2,   3D: 1/(4 pi r) over (-h/2, h/2)^3.
template <int D>
double static_part_cell_average(double h) {
  const double a = h / 2;
  if constexpr (D == 2) {
    // average of log r over [0,a]^2 is log a + log(2)/2 - 3/2 + pi/4
    const double mean_log = std::log(a) + std::log(2.0) / 2 - 1.5 + std::numbers::pi / 4;
    return -mean_log / (2 * std::numbers::pi);
  } else {
    // \int_{[0,1]^3} dx/|x| = (3/2) \int_{[0,1]^2} (1+u^2+v^2)^(-1/2) du dv, a smooth integral.
    const GaussRule rule = gauss_legendre(40);
    double face = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        const double u = (rule.nodes[i] + 1) / 2;
        const double v = (rule.nodes[j] + 1) / 2;
        face += rule.weights[i] * rule.weights[j] / 4 / std::sqrt(1 + u * u + v * v);
      }
    }
    const double unit_cube = 1.5 * face;
    return 8 * a * a * unit_cube / (4 * std::numbers::pi * h * h * h);
  }
}

// G minus its static singular part; bounded at r = 0.
template <int D>
cdouble green_regular_part(double k, double r) {
  if constexpr (D == 2) {
    return 0.25 * kI * specfun::hankel1(0, k * r) + std::log(r) / (2 * std::numbers::pi);
  } else {
    const double s = std::sin(k * r / 2);
    const cdouble phase_minus_one(-2 * s * s, std::sin(k * r));
    return phase_minus_one / (4 * std::numbers::pi * r);
  }
}

template <int D>
cdouble regular_part_cell_average(double k, double h, int order) {
  const GaussRule rule = gauss_legendre(order);
  const double a = h / 2;
  // Symmetric integrand: integrate one orthant [0, a]^D and keep the mean.
  cdouble sum = 0;
  const std::size_t n = rule.nodes.size();
  std::vector<double> x(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = a * (rule.nodes[i] + 1) / 2;
    w[i] = rule.weights[i] / 2;
  }
  if constexpr (D == 2) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        sum += w[i] * w[j] * green_regular_part<2>(k, std::hypot(x[i], x[j]));
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t l = 0; l < n; ++l) {
          sum += w[i] * w[j] * w[l] * green_regular_part<3>(k, std::sqrt(x[i] * x[i] + x[j] * x[j] + x[l] * x[l]));
        }
      }
    }
  }
  return sum;
}

}  // namespace detail

/// Cell average of G(., 0) over the centred cell (-h/2, h/2)^D.
///
/// The static singularity is integrated exactly; the bounded remainder uses a
/// tensor Gauss rule of even order (no node at the centre), doubled from 16
/// until consecutive orders agree to 1e-8 relative.
template <int D>
cdouble diagonal_self_term(const WaveContext<D>& ctx, double h) {
  if (!(h > 0)) throw std::invalid_argument("mesh size must be positive");
  const double k = ctx.wavenumber();
  const double singular = detail::static_part_cell_average<D>(h);
  cdouble previous = singular + detail::regular_part_cell_average<D>(k, h, 16);
  for (int order = 32; order <= 256; order *= 2) {
    const cdouble current = singular + detail::regular_part_cell_average<D>(k, h, order);
    if (std::abs(current - previous) <= 1e-8 * std::abs(current)) return current;
    previous = current;
  }
  throw ConvergenceError("self-term quadrature did not converge", 0, 256);
}

/// Sparse matrix of P J = k^2 J + grad div J on nodal d-vector fields
/// (unknown index = node * D + component), zero extension outside the grid.
template <int D>
Eigen::SparseMatrix<cdouble, Eigen::RowMajor> assemble_p_operator(const VolumeGrid<D>& grid, const WaveContext<D>& ctx) {
  for (int c : grid.counts()) {
    if (c < 3) throw GeometryError("finite-difference stencil needs at least 3 nodes per axis");
  }
  const double h = grid.mesh_size();
  const double k2 = ctx.wavenumber() * ctx.wavenumber();
  const double second = 1 / (h * h);
  const double cross = 1 / (4 * h * h);
  const std::size_t n = grid.size();
  std::vector<Eigen::Triplet<cdouble>> triplets;
  triplets.reserve(n * D * (3 + 4 * (D - 1)));

  using Counts = typename VolumeGrid<D>::Counts;
  auto neighbour = [&](Counts idx, int axis, int step, int axis2 = -1, int step2 = 0) -> long {
    idx[static_cast<std::size_t>(axis)] += step;
    if (axis2 >= 0) idx[static_cast<std::size_t>(axis2)] += step2;
    for (int a = 0; a < D; ++a) {
      const int v = idx[static_cast<std::size_t>(a)];
      if (v < 0 || v >= grid.counts()[static_cast<std::size_t>(a)]) return -1;
    }
    return static_cast<long>(grid.flat_index(idx));
  };

  for (std::size_t node = 0; node < n; ++node) {
    const Counts idx = grid.multi_index(node);
    for (int a = 0; a < D; ++a) {
      const auto row = static_cast<long>(node * D + static_cast<std::size_t>(a));
      triplets.emplace_back(row, row, k2 - 2 * second);
      for (int s : {-1, 1}) {
        const long nb = neighbour(idx, a, s);
        if (nb >= 0) triplets.emplace_back(row, nb * D + a, second);
      }
      for (int b = 0; b < D; ++b) {
        if (b == a) continue;
        for (int sa : {-1, 1}) {
          for (int sb : {-1, 1}) {
            const long nb = neighbour(idx, a, sa, b, sb);
            if (nb >= 0) triplets.emplace_back(row, nb * D + b, cross * sa * sb);
          }
        }
      }
    }
  }
  Eigen::SparseMatrix<cdouble, Eigen::RowMajor> p(static_cast<long>(n * D), static_cast<long>(n * D));
  p.setFromTriplets(triplets.begin(), triplets.end());
  return p;
}

enum class SolverKind { automatic, dense, gmres };

struct SolverOptions {
  SolverKind kind = SolverKind::automatic;
  double tolerance = 1e-8;
  int restart = 50;
  int max_iterations = 500;
  std::size_t dense_limit = 6000;  // automatic picks dense up to this system dimension
};

struct SolveDiagnostics {
  SolverKind used = SolverKind::dense;
  int iterations = 0;
  double relative_residual = 0;
  double seconds = 0;
};

/// Nodal solution J of the discrete current equation.
template <int D>
struct InducedCurrentField {
  VolumeGrid<D> grid;
  std::vector<CVec<D>> values;
  SolveDiagnostics diagnostics;
};

/// The assembled discrete operator A = I - diag(eta) h^D (G (x) I_D) P.
template <int D>
class ForwardSystem {
 public:
  ForwardSystem(const ContrastField<D>& contrast, const WaveContext<D>& ctx, double h)
      : ctx_(ctx), grid_(with_halo(build_grid(contrast, h))), p_(assemble_p_operator(grid_, ctx)) {
    const std::size_t n = grid_.size();
    eta_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      eta_[j] = contrast.eta(grid_.node(j));
      if (eta_[j] != 0.0) active_.push_back(j);
    }
    // G depends on |index offset| only: tabulate once for all offsets.
    kernel_.resize(n);
    kernel_[0] = diagonal_self_term(ctx, h);
    for (std::size_t off = 1; off < n; ++off) {
      const auto idx = grid_.multi_index(off);
      double r2 = 0;
      for (int v : idx) r2 += static_cast<double>(v) * v;
      kernel_[off] = green_scalar_radial(ctx, h * std::sqrt(r2));
    }
  }

  const VolumeGrid<D>& grid() const { return grid_; }
  const std::vector<cdouble>& eta_at_nodes() const { return eta_; }
  std::size_t dimension() const { return grid_.size() * D; }

  cdouble kernel(std::size_t row_node, std::size_t col_node) const {
    const auto a = grid_.multi_index(row_node);
    const auto b = grid_.multi_index(col_node);
    typename VolumeGrid<D>::Counts off{};
    for (std::size_t i = 0; i < static_cast<std::size_t>(D); ++i) off[i] = std::abs(a[i] - b[i]);
    return kernel_[grid_.flat_index(off)];
  }

  /// One extra layer of (eta = 0) cells around `grid`. The difference stencil of
  /// the jump of J at the support boundary reaches one node outside the support;
  /// without the halo that half of the discrete surface charge would be lost.
  static VolumeGrid<D> with_halo(const VolumeGrid<D>& grid) {
    typename VolumeGrid<D>::Counts counts = grid.counts();
    for (int& c : counts) c += 2;
    const Point<D> first = grid.origin() - Point<D>::Constant(grid.mesh_size());
    return VolumeGrid<D>(grid.mesh_size(), first, counts);
  }

  /// Right-hand side eta_k E^i(x_k).
  Eigen::VectorXcd rhs(const IncidentPlaneWave<D>& wave) const {
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(static_cast<long>(dimension()));
    for (std::size_t j : active_) {
      b.segment<D>(static_cast<long>(j * D)) = eta_[j] * incident_field(wave, ctx_, grid_.node(j));
    }
    return b;
  }

  /// Matrix-free A x; only rows with eta != 0 and columns with (P x) != 0 contribute.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const {
    const Eigen::VectorXcd px = p_ * x;
    std::vector<std::size_t> sources;
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      if (px.segment<D>(static_cast<long>(j * D)).squaredNorm() != 0) sources.push_back(j);
    }
    std::vector<typename VolumeGrid<D>::Counts> source_idx(sources.size());
    for (std::size_t s = 0; s < sources.size(); ++s) source_idx[s] = grid_.multi_index(sources[s]);

    Eigen::VectorXcd out = x;
    const double measure = grid_.cell_measure();
    const auto n_active = static_cast<long>(active_.size());
#pragma omp parallel for schedule(static)
    for (long t = 0; t < n_active; ++t) {
      const std::size_t row = active_[static_cast<std::size_t>(t)];
      const auto ri = grid_.multi_index(row);
      CVec<D> acc = CVec<D>::Zero();
      for (std::size_t s = 0; s < sources.size(); ++s) {
        typename VolumeGrid<D>::Counts off{};
        for (std::size_t i = 0; i < static_cast<std::size_t>(D); ++i) off[i] = std::abs(ri[i] - source_idx[s][i]);
        acc += kernel_[grid_.flat_index(off)] * px.segment<D>(static_cast<long>(sources[s] * D));
      }
      out.segment<D>(static_cast<long>(row * D)) -= eta_[row] * measure * acc;
    }
    return out;
  }

  /// Dense A. Rows of nodes with eta = 0 are identity rows.
  Eigen::MatrixXcd assemble_dense() const {
    const auto dim = static_cast<long>(dimension());
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(dim, dim);
    const double measure = grid_.cell_measure();
    const std::size_t n = grid_.size();
    const auto n_active = static_cast<long>(active_.size());
#pragma omp parallel for schedule(static)
    for (long t = 0; t < n_active; ++t) {
      const std::size_t row = active_[static_cast<std::size_t>(t)];
      const cdouble scale = -eta_[row] * measure;
      for (std::size_t col = 0; col < n; ++col) {
        const cdouble g = scale * kernel(row, col);
        for (int c = 0; c < D; ++c) {
          const auto prow = static_cast<long>(col * D + static_cast<std::size_t>(c));
          for (typename decltype(p_)::InnerIterator it(p_, prow); it; ++it) {
            a(static_cast<long>(row * D) + c, it.col()) += g * it.value();
          }
        }
      }
    }
    return a;
  }

  /// Nodes with eta != 0, in grid order.
  const std::vector<std::size_t>& active_nodes() const { return active_; }

  /// A restricted to the unknowns of active nodes. Inactive rows of A are identity
  /// rows with zero right-hand side, so those unknowns vanish and drop out exactly.
  Eigen::MatrixXcd assemble_active() const {
    std::vector<long> position(grid_.size(), -1);
    for (std::size_t a = 0; a < active_.size(); ++a) position[active_[a]] = static_cast<long>(a);
    const auto dim = static_cast<long>(active_.size() * D);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(dim, dim);
    const double measure = grid_.cell_measure();
    const std::size_t n = grid_.size();
    const auto n_active = static_cast<long>(active_.size());
#pragma omp parallel for schedule(static)
    for (long t = 0; t < n_active; ++t) {
      const std::size_t row = active_[static_cast<std::size_t>(t)];
      const cdouble scale = -eta_[row] * measure;
      for (std::size_t col = 0; col < n; ++col) {
        const cdouble g = scale * kernel(row, col);
        for (int c = 0; c < D; ++c) {
          const auto prow = static_cast<long>(col * D + static_cast<std::size_t>(c));
          for (typename decltype(p_)::InnerIterator it(p_, prow); it; ++it) {
            const long target = position[static_cast<std::size_t>(it.col()) / D];
            if (target < 0) continue;
            a(t * D + c, target * D + it.col() % D) += g * it.value();
          }
        }
      }
    }
    return a;
  }

 private:
  WaveContext<D> ctx_;
  VolumeGrid<D> grid_;
  Eigen::SparseMatrix<cdouble, Eigen::RowMajor> p_;
  std::vector<cdouble> eta_;
  std::vector<std::size_t> active_;
  std::vector<cdouble> kernel_;
};

namespace detail {

template <int D>
InducedCurrentField<D> scatter_current(const ForwardSystem<D>& system, const Eigen::VectorXcd& x, bool reduced,
                                       const SolveDiagnostics& diag) {
  const auto& eta = system.eta_at_nodes();
  InducedCurrentField<D> field{system.grid(), std::vector<CVec<D>>(system.grid().size(), CVec<D>::Zero()), diag};
  if (reduced) {
    const auto& active = system.active_nodes();
    for (std::size_t a = 0; a < active.size(); ++a) field.values[active[a]] = x.segment<D>(static_cast<long>(a * D));
  } else {
    for (std::size_t j = 0; j < eta.size(); ++j) {
      if (eta[j] != 0.0) field.values[j] = x.segment<D>(static_cast<long>(j * D));
    }
  }
  return field;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

/// Solves for the currents excited by each wave. The dense path factors the
/// active block once and reuses it for every right-hand side. J is reported as
/// exactly 0 at nodes outside the support.
template <int D>
std::vector<InducedCurrentField<D>> solve_currents(const ForwardSystem<D>& system,
                                                   const std::vector<IncidentPlaneWave<D>>& waves,
                                                   const SolverOptions& options = {}) {
  SolverKind used = options.kind;
  if (used == SolverKind::automatic) used = system.dimension() <= options.dense_limit ? SolverKind::dense : SolverKind::gmres;
  std::vector<InducedCurrentField<D>> out;

  if (system.active_nodes().empty()) {
    SolveDiagnostics diag;
    diag.used = used;
    for (std::size_t w = 0; w < waves.size(); ++w) {
      out.push_back({system.grid(), std::vector<CVec<D>>(system.grid().size(), CVec<D>::Zero()), diag});
    }
    return out;
  }

  if (used == SolverKind::dense) {
    auto start = std::chrono::steady_clock::now();
    const Eigen::MatrixXcd a = system.assemble_active();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) throw SingularSystemError("forward system is singular or ill-conditioned", rcond);
    const auto& active = system.active_nodes();
    for (const auto& wave : waves) {
      const Eigen::VectorXcd full = system.rhs(wave);
      Eigen::VectorXcd b(static_cast<long>(active.size() * D));
      for (std::size_t i = 0; i < active.size(); ++i) {
        b.segment<D>(static_cast<long>(i * D)) = full.segment<D>(static_cast<long>(active[i] * D));
      }
      const Eigen::VectorXcd x = lu.solve(b);
      SolveDiagnostics diag;
      diag.used = used;
      const double bnorm = b.norm();
      diag.relative_residual = bnorm > 0 ? (a * x - b).norm() / bnorm : 0;
      if (diag.relative_residual > 1e-8) {
        throw SingularSystemError("dense solve residual too large: " + std::to_string(diag.relative_residual), rcond);
      }
      diag.seconds = detail::seconds_since(start);
      out.push_back(detail::scatter_current(system, x, true, diag));
      start = std::chrono::steady_clock::now();
    }
    return out;
  }

  GmresOptions g;
  g.tolerance = options.tolerance;
  g.restart = options.restart;
  g.max_iterations = options.max_iterations;
  for (const auto& wave : waves) {
    const auto start = std::chrono::steady_clock::now();
    const GmresResult res = gmres([&](const Eigen::VectorXcd& v) { return system.apply(v); }, system.rhs(wave), g);
    SolveDiagnostics diag;
    diag.used = used;
    diag.iterations = res.iterations;
    diag.relative_residual = res.relative_residual;
    diag.seconds = detail::seconds_since(start);
    out.push_back(detail::scatter_current(system, res.x, false, diag));
  }
  return out;
}

template <int D>
InducedCurrentField<D> solve_current(const ForwardSystem<D>& system, const IncidentPlaneWave<D>& wave,
                                     const SolverOptions& options = {}) {
  return std::move(solve_currents(system, std::vector<IncidentPlaneWave<D>>{wave}, options).front());
}

template <int D>
InducedCurrentField<D> solve_current(const ContrastField<D>& contrast, const IncidentPlaneWave<D>& wave,
                                     const WaveContext<D>& ctx, double h, const SolverOptions& options = {}) {
  return solve_current(ForwardSystem<D>(contrast, ctx, h), wave, options);
}

}  // namespace emdsm
