#include <gtest/gtest.h>

#include <boost/math/special_functions/hankel.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "emdsm/errors.hpp"
#include "emdsm/forward.hpp"
#include "emdsm/gmres.hpp"
#include "emdsm/measurement.hpp"
#include "emdsm/quadrature.hpp"

using namespace emdsm;

namespace {

constexpr double kPi = std::numbers::pi;
const double kS = std::sqrt(0.5);

ContrastField<2> single_square(cdouble eta = 1.0) { return ContrastField<2>({Shape<2>::square({-0.25, 0}, 0.3, eta)}); }

IncidentPlaneWave<2> wave1() { return IncidentPlaneWave<2>({kS, kS}, {kS, -kS}); }
IncidentPlaneWave<2> wave2() { return IncidentPlaneWave<2>({-kS, kS}, {kS, kS}); }

// Cell average of G over (-a, a)^2 in polar coordinates about the centre. The
// radial integral is closed form, \int_0^R r H_0(kr) dr = (kR H_1(kR) + 2i/pi) / k^2,
// and each edge of the square contributes \int (a / R^2) I(R) dv along that edge.
cdouble self_term_polar_2d(double k, double h) {
  const double a = h / 2;
  auto radial = [&](double r) {
    const cdouble h1 = boost::math::cyl_hankel_1(1, k * r);
    return 0.25 * cdouble(0, 1) * (k * r * h1 + cdouble(0, 2 / kPi)) / (k * k);
  };
  const GaussRule rule = gauss_legendre(64);
  cdouble sum = 0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double v = a * rule.nodes[i];
    const double r2 = a * a + v * v;
    sum += a * rule.weights[i] * (a / r2) * radial(std::sqrt(r2));
  }
  return 4.0 * sum / (h * h);
}

// Same in 3D: each face contributes \iint (a / R^3) F(R) du dv with
// F(R) = \int_0^R r^2 G(r) dr = (e^{ikR}(R/(ik) + 1/k^2) - 1/k^2) / (4 pi).
cdouble self_term_polar_3d(double k, double h) {
  const double a = h / 2;
  const cdouble i(0, 1);
  auto radial = [&](double r) { return (std::exp(i * k * r) * (r / (i * k) + 1 / (k * k)) - 1 / (k * k)) / (4 * kPi); };
  const GaussRule rule = gauss_legendre(48);
  cdouble sum = 0;
  for (std::size_t p = 0; p < rule.nodes.size(); ++p) {
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double u = a * rule.nodes[p];
      const double v = a * rule.nodes[q];
      const double r = std::sqrt(a * a + u * u + v * v);
      sum += a * a * rule.weights[p] * rule.weights[q] * (a / (r * r * r)) * radial(r);
    }
  }
  return 6.0 * sum / (h * h * h);
}

double relative_difference(const InducedCurrentField<2>& a, const InducedCurrentField<2>& b) {
  double num = 0;
  double den = 0;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    num += (a.values[j] - b.values[j]).squaredNorm();
    den += a.values[j].squaredNorm();
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(Quadrature, GaussLegendreIntegratesPolynomialsExactly) {
  const GaussRule rule = gauss_legendre(8);
  for (int p = 0; p < 16; ++p) {
    double sum = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * std::pow(rule.nodes[i], p);
    const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
    EXPECT_NEAR(sum, exact, 1e-14) << "p=" << p;
  }
}

TEST(BuildGrid, SingleSquareSixBySix) {
  const auto grid = build_grid(single_square(), 0.05);
  EXPECT_EQ(grid.counts()[0], 6);
  EXPECT_EQ(grid.counts()[1], 6);
  EXPECT_EQ(grid.size(), 36u);
  EXPECT_NEAR(grid.node(0)[0], -0.375, 1e-12);
  EXPECT_NEAR(grid.node(0)[1], -0.125, 1e-12);
}

TEST(BuildGrid, RingTwelveByTwelve) {
  const ContrastField<2> ring({Shape<2>::ring({0, 0}, 0.6, 0.4, 1.0)});
  const auto grid = build_grid(ring, 0.05);
  EXPECT_EQ(grid.counts()[0], 12);
  EXPECT_EQ(grid.counts()[1], 12);
  const Box<2> box = grid.box();
  EXPECT_TRUE(box.contains(*ring.bounding_box()));
}

TEST(BuildGrid, Errors) {
  EXPECT_THROW(build_grid(ContrastField<2>(), 0.05), GeometryError);
  EXPECT_THROW(build_grid(single_square(), 0.5), GeometryError);
  EXPECT_THROW(build_grid(single_square(), 0.0), std::invalid_argument);
}

TEST(BuildGrid, CoversSupportForAwkwardSizes) {
  const ContrastField<2> field({Shape<2>::square({0.1, -0.3}, 0.17, 1.0), Shape<2>::square({0.5, 0.2}, 0.11, 1.0)});
  for (double h : {0.013, 0.02, 0.031}) {
    const auto grid = build_grid(field, h);
    const Box<2> support = *field.bounding_box();
    for (int a = 0; a < 2; ++a) {
      EXPECT_LE(grid.box().lo[a], support.lo[a] + 1e-12);
      EXPECT_GE(grid.box().hi[a], support.hi[a] - 1e-12);
      EXPECT_LT(grid.box().extent()[a], support.extent()[a] + h + 1e-12);
    }
  }
}

TEST(SelfTerm, MatchesPolarOracle2D) {
  const WaveContext<2> ctx(1.0);
  for (double h : {0.02, 0.05, 0.1}) {
    const cdouble expected = self_term_polar_2d(ctx.wavenumber(), h);
    EXPECT_LE(std::abs(diagonal_self_term(ctx, h) - expected), 1e-7 * std::abs(expected)) << "h=" << h;
  }
}

TEST(SelfTerm, MatchesPolarOracle3D) {
  const WaveContext<3> ctx(1.0);
  for (double h : {0.02, 0.04, 0.1}) {
    const cdouble expected = self_term_polar_3d(ctx.wavenumber(), h);
    EXPECT_LE(std::abs(diagonal_self_term(ctx, h) - expected), 1e-7 * std::abs(expected)) << "h=" << h;
  }
}

TEST(SelfTerm, SmallCellLimits2D) {
  const WaveContext<2> ctx(1.0);
  EXPECT_NEAR(diagonal_self_term(ctx, 1e-6).imag(), 0.25, 1e-9);
  const double g1 = diagonal_self_term(ctx, 1e-3).real();
  const double g2 = diagonal_self_term(ctx, 1e-6).real();
  // -(1/2pi) log h dominates: three decades add log(1000) / (2 pi)
  EXPECT_NEAR(g2 - g1, std::log(1000.0) / (2 * kPi), 1e-3);
}

TEST(POperator, ConstantFieldGivesKSquared) {
  const WaveContext<2> ctx(1.0);
  const VolumeGrid<2> grid(0.05, Point<2>(0, 0), {8, 7});
  const auto p = assemble_p_operator(grid, ctx);
  Eigen::VectorXcd j(static_cast<long>(grid.size() * 2));
  for (std::size_t n = 0; n < grid.size(); ++n) j.segment<2>(static_cast<long>(2 * n)) = CVec<2>(cdouble(1, 2), cdouble(-3, 0.5));
  const Eigen::VectorXcd pj = p * j;
  const double k2 = ctx.wavenumber() * ctx.wavenumber();
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const auto idx = grid.multi_index(n);
    if (idx[0] < 2 || idx[1] < 2 || idx[0] > 5 || idx[1] > 4) continue;
    EXPECT_LT((pj.segment<2>(static_cast<long>(2 * n)) - k2 * j.segment<2>(static_cast<long>(2 * n))).norm(), 1e-9);
  }
}

// A longitudinal wave d exp(ik d.x) has grad div = -k^2, so P annihilates it.
TEST(POperator, LongitudinalWaveAnnihilatedToSecondOrder) {
  const WaveContext<2> ctx(1.0);
  const Vec<2> d(kS, kS);
  std::vector<double> errors;
  for (double h : {0.02, 0.01, 0.005}) {
    const int n = static_cast<int>(std::lround(0.4 / h));
    const VolumeGrid<2> grid(h, Point<2>(0, 0), {n, n});
    const auto p = assemble_p_operator(grid, ctx);
    Eigen::VectorXcd j(static_cast<long>(grid.size() * 2));
    for (std::size_t m = 0; m < grid.size(); ++m) j.segment<2>(static_cast<long>(2 * m)) = d.cast<cdouble>() * std::exp(cdouble(0, ctx.wavenumber() * d.dot(grid.node(m))));
    const Eigen::VectorXcd pj = p * j;
    double worst = 0;
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const auto idx = grid.multi_index(m);
      if (idx[0] < 1 || idx[1] < 1 || idx[0] > n - 2 || idx[1] > n - 2) continue;
      worst = std::max(worst, pj.segment<2>(static_cast<long>(2 * m)).norm());
    }
    errors.push_back(worst);
  }
  EXPECT_NEAR(std::log2(errors[0] / errors[1]), 2.0, 0.1);
  EXPECT_NEAR(std::log2(errors[1] / errors[2]), 2.0, 0.1);
  const double k = ctx.wavenumber();
  EXPECT_LT(errors[0], 0.02 * 0.02 * std::pow(k, 4));
}

TEST(POperator, CrossComponentOfLinearProfileVanishes) {
  const WaveContext<2> ctx(1.0);
  const VolumeGrid<2> grid(0.1, Point<2>(0, 0), {6, 6});
  const auto p = assemble_p_operator(grid, ctx);
  Eigen::VectorXcd j = Eigen::VectorXcd::Zero(static_cast<long>(grid.size() * 2));
  for (std::size_t m = 0; m < grid.size(); ++m) j[static_cast<long>(2 * m)] = 3.0 * grid.node(m)[0] + 1.0;
  const Eigen::VectorXcd pj = p * j;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    const auto idx = grid.multi_index(m);
    if (idx[0] < 1 || idx[1] < 1 || idx[0] > 4 || idx[1] > 4) continue;
    EXPECT_LT(std::abs(pj[static_cast<long>(2 * m + 1)]), 1e-10);
  }
}

TEST(POperator, NeedsThreeNodesPerAxis) {
  const WaveContext<2> ctx(1.0);
  EXPECT_THROW(assemble_p_operator(VolumeGrid<2>(0.1, Point<2>(0, 0), {2, 5}), ctx), GeometryError);
}

TEST(ForwardSystem, HaloAddsOneCellPerSide) {
  const auto grid = build_grid(single_square(), 0.05);
  const auto halo = ForwardSystem<2>::with_halo(grid);
  EXPECT_EQ(halo.counts()[0], 8);
  EXPECT_EQ(halo.counts()[1], 8);
  EXPECT_NEAR(halo.node(0)[0], grid.node(0)[0] - 0.05, 1e-15);
}

TEST(ForwardSystem, ZeroContrastIsIdentity) {
  const WaveContext<2> ctx(1.0);
  const ForwardSystem<2> system(single_square(0.0), ctx, 0.05);
  const Eigen::MatrixXcd a = system.assemble_dense();
  EXPECT_EQ((a - Eigen::MatrixXcd::Identity(a.rows(), a.cols())).norm(), 0.0);
  const auto j = solve_current(system, wave1());
  for (const auto& v : j.values) EXPECT_EQ(v.norm(), 0.0);
}

TEST(ForwardSystem, MatrixFreeApplyMatchesDense) {
  const WaveContext<2> ctx(1.0);
  const ContrastField<2> ring({Shape<2>::ring({0, 0}, 0.6, 0.4, cdouble(1.0, 0.3))});
  const ForwardSystem<2> system(ring, ctx, 0.05);
  const Eigen::MatrixXcd a = system.assemble_dense();
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  Eigen::VectorXcd x(static_cast<long>(system.dimension()));
  for (long i = 0; i < x.size(); ++i) x[i] = cdouble(n(rng), n(rng));
  EXPECT_LT((a * x - system.apply(x)).norm(), 1e-12 * (a * x).norm());
}

TEST(ForwardSystem, KernelIsTranslationInvariant) {
  const WaveContext<2> ctx(1.0);
  const ForwardSystem<2> system(single_square(), ctx, 0.05);
  const auto& grid = system.grid();
  for (std::size_t r = 0; r < grid.size(); r += 7) {
    for (std::size_t c = 0; c < grid.size(); c += 5) {
      if (r == c) {
        EXPECT_EQ(system.kernel(r, c), diagonal_self_term(ctx, 0.05));
      } else {
        EXPECT_NEAR(std::abs(system.kernel(r, c) - green_scalar(ctx, grid.node(r), grid.node(c))), 0.0, 1e-13);
      }
    }
  }
}

TEST(SolveCurrent, ActiveBlockReductionMatchesFullSystem) {
  const WaveContext<2> ctx(1.0);
  const ForwardSystem<2> system(single_square(), ctx, 0.05);
  const Eigen::MatrixXcd a = system.assemble_dense();
  const Eigen::VectorXcd x = a.partialPivLu().solve(system.rhs(wave2()));
  SolverOptions dense;
  dense.kind = SolverKind::dense;
  const auto j = solve_current(system, wave2(), dense);
  for (std::size_t n = 0; n < j.values.size(); ++n) {
    EXPECT_LT((j.values[n] - x.segment<2>(static_cast<long>(2 * n))).norm(), 1e-12);
  }
}

TEST(SolveCurrent, BornRegime) {
  const WaveContext<2> ctx(1.0);
  const auto contrast = single_square(1e-3);
  const auto wave = wave1();
  const auto j = solve_current(contrast, wave, ctx, 0.02);
  double dev = 0;
  double scale = 0;
  for (std::size_t n = 0; n < j.values.size(); ++n) {
    const cdouble eta = contrast.eta(j.grid.node(n));
    if (eta == 0.0) continue;
    const CVec<2> born = eta * incident_field(wave, ctx, j.grid.node(n));
    dev = std::max(dev, (j.values[n] - born).norm());
    scale = std::max(scale, born.norm());
  }
  EXPECT_LE(dev / scale, 5e-3);
}

TEST(SolveCurrent, DenseAgreesWithGmres) {
  const WaveContext<2> ctx(1.0);
  const ForwardSystem<2> system(single_square(), ctx, 0.03);
  SolverOptions dense;
  dense.kind = SolverKind::dense;
  SolverOptions iterative;
  iterative.kind = SolverKind::gmres;
  iterative.tolerance = 1e-10;
  const auto a = solve_current(system, wave1(), dense);
  const auto b = solve_current(system, wave1(), iterative);
  EXPECT_EQ(a.diagnostics.used, SolverKind::dense);
  EXPECT_EQ(b.diagnostics.used, SolverKind::gmres);
  EXPECT_GT(b.diagnostics.iterations, 0);
  EXPECT_LE(relative_difference(a, b), 1e-8);
}

TEST(SolveCurrent, AutomaticChoiceFollowsDimension) {
  const WaveContext<2> ctx(1.0);
  const ForwardSystem<2> system(single_square(), ctx, 0.03);
  SolverOptions opt;
  EXPECT_EQ(solve_current(system, wave1(), opt).diagnostics.used, SolverKind::dense);
  opt.dense_limit = 10;
  EXPECT_EQ(solve_current(system, wave1(), opt).diagnostics.used, SolverKind::gmres);
}

TEST(SolveCurrent, GmresNonConvergenceReportsResidual) {
  const WaveContext<2> ctx(1.0);
  const ForwardSystem<2> system(single_square(), ctx, 0.03);
  SolverOptions opt;
  opt.kind = SolverKind::gmres;
  opt.tolerance = 1e-15;
  opt.max_iterations = 2;
  try {
    solve_current(system, wave1(), opt);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual, 1e-15);
    EXPECT_EQ(e.iterations, 2);
  }
}

TEST(SolveCurrent, MultipleWavesShareFactorization) {
  const WaveContext<2> ctx(1.0);
  const ForwardSystem<2> system(single_square(), ctx, 0.03);
  const auto both = solve_currents(system, std::vector<IncidentPlaneWave<2>>{wave1(), wave2()});
  ASSERT_EQ(both.size(), 2u);
  EXPECT_EQ(relative_difference(both[1], solve_current(system, wave2())), 0.0);
}

TEST(SolveCurrentProperty, SolverIndependenceOnPresets) {
  const WaveContext<2> ctx(1.0);
  const std::vector<ContrastField<2>> fields{
      ContrastField<2>({Shape<2>::square({-0.45, -0.35}, 0.3, 1.0), Shape<2>::square({0.05, 0.15}, 0.3, 1.0)}),
      ContrastField<2>({Shape<2>::square({-0.625, -0.625}, 0.15, 1.0), Shape<2>::square({-0.425, -0.425}, 0.15, 1.0),
                        Shape<2>::square({-0.525, 0.125}, 0.15, 1.0)}),
      ContrastField<2>({Shape<2>::ring({0, 0}, 0.6, 0.4, 1.0)})};
  SolverOptions dense;
  dense.kind = SolverKind::dense;
  SolverOptions iterative;
  iterative.kind = SolverKind::gmres;
  iterative.tolerance = 1e-10;
  for (const auto& field : fields) {
    const ForwardSystem<2> system(field, ctx, 0.02);
    ASSERT_LE(system.dimension(), 4000u);
    EXPECT_LE(relative_difference(solve_current(system, wave2(), dense), solve_current(system, wave2(), iterative)), 1e-8);
  }
}

TEST(SolveCurrentProperty, BornDeviationIsLinearInEta) {
  const WaveContext<2> ctx(1.0);
  const auto wave = wave1();
  std::vector<double> devs;
  for (double eta : {1e-4, 1e-3, 1e-2}) {
    const auto contrast = single_square(eta);
    const auto j = solve_current(contrast, wave, ctx, 0.02);
    double dev = 0;
    double scale = 0;
    for (std::size_t n = 0; n < j.values.size(); ++n) {
      if (contrast.eta(j.grid.node(n)) == 0.0) continue;
      const CVec<2> born = eta * incident_field(wave, ctx, j.grid.node(n));
      dev = std::max(dev, (j.values[n] - born).norm());
      scale = std::max(scale, born.norm());
    }
    devs.push_back(dev / scale);
  }
  EXPECT_NEAR(std::log10(devs[1] / devs[0]), 1.0, 0.2);
  EXPECT_NEAR(std::log10(devs[2] / devs[1]), 1.0, 0.2);
}

TEST(SolveCurrentProperty, ZeroOutsideSupport) {
  const WaveContext<2> ctx(1.0);
  const ContrastField<2> ring({Shape<2>::ring({0, 0}, 0.6, 0.4, 1.0)});
  for (SolverKind kind : {SolverKind::dense, SolverKind::gmres}) {
    SolverOptions opt;
    opt.kind = kind;
    const auto j = solve_current(ring, wave1(), ctx, 0.05, opt);
    std::size_t nonzero = 0;
    for (std::size_t n = 0; n < j.values.size(); ++n) {
      if (ring.eta(j.grid.node(n)) == 0.0) {
        EXPECT_EQ(j.values[n].norm(), 0.0);
      } else {
        nonzero += j.values[n].norm() > 0;
      }
    }
    EXPECT_GT(nonzero, 0u);
  }
}

TEST(SolveCurrentProperty, ScatteredFieldConvergesUnderRefinement) {
  const WaveContext<2> ctx(1.0);
  const auto surface = circle_surface(5.0, 8);
  std::vector<CVec<2>> fields;
  for (double h : {0.05, 0.025, 0.0125}) {
    const auto j = solve_current(single_square(), wave1(), ctx, h);
    fields.push_back(synthesize_scattered_field(j, surface, ctx).values[1]);
  }
  const double d1 = (fields[0] - fields[1]).norm();
  const double d2 = (fields[1] - fields[2]).norm();
  EXPECT_LT(d2, d1);
  EXPECT_LT(d2, 0.01 * fields[2].norm());
}

TEST(Gmres, SolvesSmallDenseSystem) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n;
  const long size = 40;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(size, size) * 4.0;
  for (long i = 0; i < size; ++i) {
    for (long j = 0; j < size; ++j) a(i, j) += cdouble(n(rng), n(rng)) * 0.1;
  }
  Eigen::VectorXcd b(size);
  for (long i = 0; i < size; ++i) b[i] = cdouble(n(rng), n(rng));
  GmresOptions opt;
  opt.restart = 7;
  opt.tolerance = 1e-12;
  const auto res = gmres([&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(a * v); }, b, opt);
  EXPECT_LE((a * res.x - b).norm(), 1e-11 * b.norm());
  EXPECT_LE(res.relative_residual, 1e-12);
  EXPECT_EQ(gmres([&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(a * v); }, Eigen::VectorXcd::Zero(size), opt).x.norm(), 0.0);
}
