// Named experiment presets reproducing the published examples and diagnostics.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "emdsm/harness/config.hpp"

namespace emdsm::harness {

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"example1", "example2a", "example2b", "example3",
                                              "example4", "example3d", "fig1",      "fig2"};
  return names;
}

namespace detail {

inline ExperimentConfig planar_base(std::string name) {
  const double s = std::sqrt(2.0) / 2;
  ExperimentConfig cfg;
  cfg.name = std::move(name);
  cfg.dimension = 2;
  cfg.wavelength = 1.0;
  cfg.incidents = {{{s, s}, {s, -s}}, {{-s, s}, {s, s}}};
  cfg.surface = {SurfaceKind::circle, 5.0, 30};
  cfg.forward.h = default_forward_h(2);
  cfg.sampling = {{-2.0, -2.0}, {2.0, 2.0}, 0.01};
  return cfg;
}

inline ShapeSpec square(double cx, double cy, double side) {
  ShapeSpec s;
  s.kind = ShapeKind::axis_square;
  s.center = {cx, cy};
  s.side = side;
  s.eta = 1.0;
  return s;
}

}  // namespace detail

/// Throws ConfigError("preset") for unknown names.
inline ExperimentConfig preset(const std::string& name) {
  using detail::square;
  if (name == "example1") {
    auto cfg = detail::planar_base(name);
    cfg.shapes = {square(-0.25, 0.0, 0.3)};
    return cfg;
  }
  if (name == "example2a") {
    auto cfg = detail::planar_base(name);
    cfg.shapes = {square(-0.8, -0.7, 0.2), square(0.3, 0.8, 0.2)};
    return cfg;
  }
  if (name == "example2b") {
    auto cfg = detail::planar_base(name);
    cfg.shapes = {square(-0.45, -0.35, 0.3), square(0.05, 0.15, 0.3)};
    return cfg;
  }
  if (name == "example3") {
    auto cfg = detail::planar_base(name);
    cfg.shapes = {square(-5.0 / 8, -5.0 / 8, 0.15), square(-17.0 / 40, -17.0 / 40, 0.15), square(-21.0 / 40, 1.0 / 8, 0.15)};
    return cfg;
  }
  if (name == "example4") {
    auto cfg = detail::planar_base(name);
    ShapeSpec ring;
    ring.kind = ShapeKind::square_ring;
    ring.center = {0.0, 0.0};
    ring.side = 0.6;
    ring.inner_side = 0.4;
    ring.eta = 1.0;
    cfg.shapes = {ring};
    return cfg;
  }
  if (name == "example3d") {
    const double a = 1 / std::sqrt(3.0);
    const double b = 1 / std::sqrt(6.0);
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.dimension = 3;
    cfg.wavelength = 1.0;
    cfg.incidents = {{{a, a, a}, {b, -2 * b, b}}, {{a, a, a}, {b, b, -2 * b}}};
    for (double cx : {0.4, -0.4}) {
      ShapeSpec cube;
      cube.kind = ShapeKind::axis_cube;
      cube.center = {cx, 0.3, 0.3};
      cube.side = 0.2;
      cube.eta = 1.0;
      cfg.shapes.push_back(cube);
    }
    cfg.surface = {SurfaceKind::cube_faces, 10.0, 10};
    cfg.forward.h = default_forward_h(3);
    cfg.sampling = {{-2.0, -2.0, -2.0}, {2.0, 2.0, 2.0}, default_sampling_spacing(3)};
    return cfg;
  }
  if (name == "fig1" || name == "fig2") {
    auto cfg = detail::planar_base(name);
    cfg.diagnostic = DiagnosticSpec{name, {-0.25, 0.0}};
    return cfg;
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

}  // namespace emdsm::harness
