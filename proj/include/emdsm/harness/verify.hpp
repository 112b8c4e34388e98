// Numerical identity checks behind `emdsm verify <kind>`.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "emdsm/dsm.hpp"
#include "emdsm/em_core.hpp"
#include "emdsm/forward.hpp"
#include "emdsm/harness/experiment.hpp"
#include "emdsm/harness/presets.hpp"

namespace emdsm::harness {

struct VerifyReport {
  std::string kind;
  bool pass = false;
  json measured;
  double seconds = 0;
};

inline const std::vector<std::string>& verify_kinds() {
  static const std::vector<std::string> kinds{"trace", "lemma", "xpq", "born", "solver_cross", "figs"};
  return kinds;
}

namespace detail {

template <int D>
double max_trace_deviation(int pairs, std::uint64_t seed) {
  const WaveContext<D> ctx(1.0);
  const double k = ctx.wavenumber();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  double worst = 0;
  for (int n = 0; n < pairs;) {
    Point<D> x;
    Point<D> y;
    for (int a = 0; a < D; ++a) {
      x[a] = coord(rng);
      y[a] = coord(rng);
    }
    if ((x - y).norm() < 1e-3) continue;
    const cdouble g = green_scalar(ctx, x, y);
    const cdouble tr = green_tensor(ctx, x, y).trace();
    worst = std::max(worst, std::abs(tr - double(D - 1) * k * k * g) / std::abs(k * k * g));
    ++n;
  }
  return worst;
}

inline ExperimentConfig born_config(double eta, double h) {
  ExperimentConfig cfg = preset("example1");
  cfg.shapes[0].eta = eta;
  cfg.forward.h = h;
  return cfg;
}

/// max |J - eta E^i| / max |eta E^i| over the support for the first incident of `cfg`.
inline double born_deviation(const ExperimentConfig& cfg) {
  const WaveContext<2> ctx(cfg.wavelength);
  const auto contrast = make_contrast<2>(cfg.shapes);
  const auto wave = make_incident<2>(cfg.incidents[0]);
  const auto current = solve_current(contrast, wave, ctx, cfg.forward.h, cfg.forward.solver);
  double num = 0;
  double den = 0;
  for (std::size_t j = 0; j < current.values.size(); ++j) {
    const Point<2> x = current.grid.node(j);
    const cdouble eta = contrast.eta(x);
    if (eta == 0.0) continue;
    const CVec<2> born = eta * incident_field(wave, ctx, x);
    num = std::max(num, (current.values[j] - born).norm());
    den = std::max(den, born.norm());
  }
  return num / den;
}

}  // namespace detail

/// Trace identity tr Phi = (d - 1) k^2 G on 500 random pairs per dimension.
inline VerifyReport verify_trace() {
  VerifyReport r{"trace", false, json::object(), 0};
  const double d2 = detail::max_trace_deviation<2>(500, 11);
  const double d3 = detail::max_trace_deviation<3>(500, 13);
  r.measured = {{"max_rel_dev_2d", d2}, {"max_rel_dev_3d", d3}, {"threshold", 1e-11}};
  r.pass = d2 <= 1e-11 && d3 <= 1e-11;
  return r;
}

/// Surface identity for two point sources on circles of 128, 256 and 512 points.
inline VerifyReport verify_lemma() {
  VerifyReport r{"lemma", false, json::object(), 0};
  const WaveContext<2> ctx(1.0);
  const Point<2> x_p(-0.25, 0.0);
  const Point<2> x_q(0.4, 0.1);
  const double s = std::sqrt(2.0) / 2;
  const Vec<2> p(s, -s);
  const Vec<2> q(s, s);
  std::vector<double> errs;
  json rows = json::array();
  for (int count : {128, 256, 512}) {
    const auto check = verify_boundary_lemma(ctx, circle_surface(5.0, count), x_p, x_q, p, q);
    errs.push_back(check.rel_err);
    rows.push_back({{"points", count},
                    {"lhs", {check.lhs.real(), check.lhs.imag()}},
                    {"rhs", {check.rhs.real(), check.rhs.imag()}},
                    {"rel_err", check.rel_err}});
  }
  const bool decreasing = errs[1] < errs[0] && errs[2] < errs[1];
  r.measured = {{"rows", rows}, {"strictly_decreasing", decreasing}, {"threshold_512", 1e-3}};
  r.pass = errs[2] <= 1e-3 && decreasing;
  return r;
}

/// Correlation approximation over radii 5, 10, 20, 40 for distinct and coincident points.
inline VerifyReport verify_xpq() {
  VerifyReport r{"xpq", false, json::object(), 0};
  const WaveContext<2> ctx(1.0);
  const std::vector<double> radii{5, 10, 20, 40};
  const double s = std::sqrt(2.0) / 2;
  const Vec<2> p(s, -s);
  const Vec<2> q(s, s);
  const Point<2> x_p(-0.25, 0.0);
  const Point<2> x_q(0.4, 0.1);
  auto table = [](const std::vector<CorrelationRow>& rows, bool& decreasing) {
    json out = json::array();
    decreasing = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.push_back({{"radius", rows[i].radius}, {"err", rows[i].err}});
      if (i > 0 && !(rows[i].err < rows[i - 1].err)) decreasing = false;
    }
    return out;
  };
  bool dec_distinct = false;
  bool dec_coincident = false;
  const auto distinct = verify_correlation_approx(ctx, radii, x_p, x_q, p, q);
  const auto coincident = verify_correlation_approx(ctx, radii, x_p, x_p, p, p);
  r.measured = {{"distinct", table(distinct, dec_distinct)},
                {"coincident", table(coincident, dec_coincident)},
                {"coincident_err_R5", coincident[0].err},
                {"threshold_R5", 0.15}};
  r.pass = dec_distinct && dec_coincident && coincident[0].err <= 0.15;
  return r;
}

/// Observed order of max |J - eta E^i| / max |eta E^i| in eta on the single-square geometry.
inline VerifyReport verify_born() {
  VerifyReport r{"born", false, json::object(), 0};
  const std::vector<double> etas{1e-4, 1e-3, 1e-2};
  std::vector<double> devs;
  for (double eta : etas) devs.push_back(detail::born_deviation(detail::born_config(eta, 0.02)));
  std::vector<double> orders;
  for (std::size_t i = 1; i < etas.size(); ++i) {
    orders.push_back(std::log(devs[i] / devs[i - 1]) / std::log(etas[i] / etas[i - 1]));
  }
  r.pass = true;
  for (double o : orders) r.pass = r.pass && std::abs(o - 1) <= 0.2;
  r.measured = {{"eta", etas}, {"deviation", devs}, {"observed_order", orders}, {"tolerance", 0.2}};
  return r;
}

/// Dense LU against GMRES(1e-10) on the single-square geometry with h = 0.03.
inline VerifyReport verify_solver_cross() {
  VerifyReport r{"solver_cross", false, json::object(), 0};
  const ExperimentConfig cfg = detail::born_config(1.0, 0.03);
  const WaveContext<2> ctx(cfg.wavelength);
  const ForwardSystem<2> system(make_contrast<2>(cfg.shapes), ctx, cfg.forward.h);
  const auto wave = make_incident<2>(cfg.incidents[0]);
  SolverOptions dense;
  dense.kind = SolverKind::dense;
  SolverOptions iterative;
  iterative.kind = SolverKind::gmres;
  iterative.tolerance = 1e-10;
  const auto a = solve_current(system, wave, dense);
  const auto b = solve_current(system, wave, iterative);
  double num = 0;
  double den = 0;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    num += (a.values[j] - b.values[j]).squaredNorm();
    den += a.values[j].squaredNorm();
  }
  const double rel = std::sqrt(num / den);
  r.measured = {{"unknowns", system.dimension()},
                {"gmres_iterations", b.diagnostics.iterations},
                {"relative_difference", rel},
                {"threshold", 1e-8}};
  r.pass = rel <= 1e-8;
  return r;
}

/// Off-peak ratios of the point diagnostics: the diagonal sum and the polarization
/// sum must beat every individual map.
inline VerifyReport verify_figs(double spacing = 0.02) {
  VerifyReport r{"figs", false, json::object(), 0};
  json ratios = json::object();
  auto run = [&](const std::string& name) {
    ExperimentConfig cfg = preset(name);
    cfg.sampling.spacing = spacing;
    const auto result = run_experiment(cfg);
    for (const auto& s : result.report.indices) ratios[s.label] = *s.off_peak_ratio;
  };
  run("fig1");
  run("fig2");
  const double diag = ratios["diagonal_sum"];
  const double psum = ratios["polarization_sum"];
  const bool fig1 = diag < ratios["phi11"].get<double>() && diag < ratios["phi22"].get<double>() &&
                    diag < ratios["phi12"].get<double>();
  const bool fig2 = psum < ratios["polarization_1"].get<double>() && psum < ratios["polarization_2"].get<double>();
  r.measured = {{"off_peak_ratio", ratios}, {"spacing", spacing}, {"diagonal_sum_smallest", fig1}, {"polarization_sum_smallest", fig2}};
  r.pass = fig1 && fig2;
  return r;
}

/// Dispatches on kind; throws ConfigError("verify") for unknown kinds.
inline VerifyReport verify(const std::string& kind) {
  const auto start = std::chrono::steady_clock::now();
  VerifyReport r;
  if (kind == "trace") {
    r = verify_trace();
  } else if (kind == "lemma") {
    r = verify_lemma();
  } else if (kind == "xpq") {
    r = verify_xpq();
  } else if (kind == "born") {
    r = verify_born();
  } else if (kind == "solver_cross") {
    r = verify_solver_cross();
  } else if (kind == "figs") {
    r = verify_figs();
  } else {
    throw ConfigError("verify", "unknown kind '" + kind + "'");
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline json to_json(const VerifyReport& r) {
  return {{"kind", r.kind}, {"pass", r.pass}, {"measured", r.measured}, {"seconds", r.seconds}};
}

}  // namespace emdsm::harness
