// Experiment configuration: JSON schema, defaults and validation.
//
// {
//   "name": "example1",
//   "dimension": 2,                      // 2 or 3
//   "wavelength": 1.0,
//   "incidents": [{"direction": [..], "polarization": [..]}, ...],
//   "shapes": [{"kind": "axis_square" | "square_ring" | "axis_cube",
//               "center": [..], "side": 0.3, "inner_side": 0.4,   // inner_side: rings only
//               "eta": 1.0 | [re, im]}],
//   "surface": {"kind": "circle", "radius": 5, "count": 30}
//            | {"kind": "cube_faces", "edge": 10, "per_face": 10},
//   "forward": {"h": 0.02, "solver": "auto" | "dense" | "gmres",
//               "tolerance": 1e-8, "restart": 50, "max_iterations": 500},   // optional
//   "sampling": {"lo": [..], "hi": [..], "spacing": 0.01},                   // optional
//   "noise": {"epsilon": 0.2, "seed": 1},                                    // optional
//   "output": {"directory": "out", "formats": ["csv", "pgm", "json"]},       // optional
//   "diagnostic": {"kind": "fig1" | "fig2", "point": [..]}                   // optional
// }
#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emdsm/em_core.hpp"
#include "emdsm/errors.hpp"
#include "emdsm/forward.hpp"
#include "emdsm/measurement.hpp"

namespace emdsm::harness {

using json = nlohmann::json;

struct IncidentSpec {
  std::vector<double> direction;
  std::vector<double> polarization;
};

struct ShapeSpec {
  ShapeKind kind = ShapeKind::axis_square;
  std::vector<double> center;
  double side = 0;
  double inner_side = 0;
  cdouble eta = 1.0;
};

struct SurfaceSpec {
  SurfaceKind kind = SurfaceKind::circle;
  double size = 0;
  int count = 0;
};

struct ForwardSpec {
  double h = 0;
  SolverOptions solver;
};

struct SamplingSpec {
  std::vector<double> lo;
  std::vector<double> hi;
  double spacing = 0;
};

struct NoiseSpec {
  double epsilon = 0;
  std::uint64_t seed = 0;
};

struct OutputSpec {
  std::string directory;
  bool csv = true;
  bool pgm = true;
  bool json = true;
};

struct DiagnosticSpec {
  std::string kind;  // fig1 or fig2
  std::vector<double> point;
};

struct ExperimentConfig {
  std::string name = "experiment";
  int dimension = 2;
  double wavelength = 1.0;
  std::vector<IncidentSpec> incidents;
  std::vector<ShapeSpec> shapes;
  SurfaceSpec surface;
  ForwardSpec forward;
  SamplingSpec sampling;
  NoiseSpec noise;
  OutputSpec output;
  std::optional<DiagnosticSpec> diagnostic;
};

inline double default_forward_h(int dimension) { return dimension == 2 ? 0.02 : 0.04; }
inline double default_sampling_spacing(int dimension) { return dimension == 2 ? 0.01 : 0.05; }

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.count(key)) throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
  }
}

inline const json& require(const json& obj, const std::string& where, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(where.empty() ? key : where + "." + key, "missing required key");
  return obj.at(key);
}

inline double number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

inline int integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<int>();
}

inline std::vector<double> vector_of(const json& v, const std::string& key, int dimension) {
  if (!v.is_array() || static_cast<int>(v.size()) != dimension) {
    throw ConfigError(key, "expected an array of " + std::to_string(dimension) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

inline cdouble complex_of(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError(key, "expected a number or [re, im]");
}

template <int D>
Vec<D> to_vec(const std::vector<double>& v) {
  Vec<D> out;
  for (int i = 0; i < D; ++i) out[i] = v[static_cast<std::size_t>(i)];
  return out;
}

inline std::string solver_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::dense:
      return "dense";
    case SolverKind::gmres:
      return "gmres";
    case SolverKind::automatic:
      break;
  }
  return "auto";
}

}  // namespace detail

template <int D>
IncidentPlaneWave<D> make_incident(const IncidentSpec& spec) {
  return IncidentPlaneWave<D>(detail::to_vec<D>(spec.direction), detail::to_vec<D>(spec.polarization));
}

template <int D>
ContrastField<D> make_contrast(const std::vector<ShapeSpec>& specs) {
  std::vector<Shape<D>> shapes;
  for (const auto& s : specs) shapes.emplace_back(s.kind, detail::to_vec<D>(s.center), s.side, s.inner_side, s.eta);
  return ContrastField<D>(std::move(shapes));
}

template <int D>
MeasurementSurface<D> make_surface(const SurfaceSpec& spec) {
  if constexpr (D == 2) {
    return circle_surface(spec.size, spec.count);
  } else {
    return cube_surface(spec.size, spec.count);
  }
}

template <int D>
Box<D> sampling_box(const SamplingSpec& spec) {
  return {detail::to_vec<D>(spec.lo), detail::to_vec<D>(spec.hi)};
}

namespace detail {

template <int D>
void validate_geometry(const ExperimentConfig& cfg) {
  for (std::size_t l = 0; l < cfg.incidents.size(); ++l) {
    try {
      (void)make_incident<D>(cfg.incidents[l]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("incidents[" + std::to_string(l) + "]", e.what());
    }
  }
  for (std::size_t s = 0; s < cfg.shapes.size(); ++s) {
    try {
      (void)make_contrast<D>({cfg.shapes[s]});
    } catch (const std::invalid_argument& e) {
      throw ConfigError("shapes[" + std::to_string(s) + "]", e.what());
    }
  }
  MeasurementSurface<D> surface;
  try {
    surface = make_surface<D>(cfg.surface);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("surface", e.what());
  }
  const Box<D> box = sampling_box<D>(cfg.sampling);
  if (!((box.hi.array() >= box.lo.array()).all())) throw ConfigError("sampling", "hi must not be below lo");
  if (!surface.encloses(box)) throw ConfigError("sampling", "sampling box must lie inside the measurement surface");
  if (cfg.diagnostic && !surface.encloses(to_vec<D>(cfg.diagnostic->point))) {
    throw ConfigError("diagnostic.point", "point must lie inside the measurement surface");
  }
  if (!cfg.diagnostic && !cfg.shapes.empty()) {
    const auto support = make_contrast<D>(cfg.shapes).bounding_box();
    for (const auto& x : surface.points) {
      if (support->contains(x)) throw ConfigError("surface", "measurement points intersect the scatterers");
    }
  }
}

}  // namespace detail

/// Checks invariants that cut across keys; throws ConfigError.
inline void validate(const ExperimentConfig& cfg) {
  if (cfg.dimension != 2 && cfg.dimension != 3) throw ConfigError("dimension", "must be 2 or 3");
  if (!(cfg.wavelength > 0)) throw ConfigError("wavelength", "must be positive");
  if (!cfg.diagnostic) {
    if (cfg.incidents.empty()) throw ConfigError("incidents", "at least one incident field is required");
    if (cfg.shapes.empty()) throw ConfigError("shapes", "at least one shape is required");
  }
  if (!(cfg.forward.h > 0)) throw ConfigError("forward.h", "must be positive");
  if (!(cfg.forward.solver.tolerance > 0)) throw ConfigError("forward.tolerance", "must be positive");
  if (!(cfg.sampling.spacing > 0)) throw ConfigError("sampling.spacing", "must be positive");
  if (!(cfg.noise.epsilon >= 0)) throw ConfigError("noise.epsilon", "must be nonnegative");
  if (cfg.surface.kind == SurfaceKind::circle && cfg.dimension != 2) throw ConfigError("surface.kind", "circle requires dimension 2");
  if (cfg.surface.kind == SurfaceKind::cube_faces && cfg.dimension != 3) {
    throw ConfigError("surface.kind", "cube_faces requires dimension 3");
  }
  if (cfg.diagnostic && cfg.diagnostic->kind != "fig1" && cfg.diagnostic->kind != "fig2") {
    throw ConfigError("diagnostic.kind", "must be fig1 or fig2");
  }
  if (cfg.diagnostic && cfg.dimension != 2) throw ConfigError("diagnostic", "diagnostics are two-dimensional");
  if (cfg.diagnostic && cfg.diagnostic->kind == "fig2" && cfg.incidents.empty()) {
    throw ConfigError("incidents", "fig2 needs the incident polarizations");
  }
  if (cfg.dimension == 2) {
    detail::validate_geometry<2>(cfg);
  } else {
    detail::validate_geometry<3>(cfg);
  }
}

/// Parses and validates a configuration, applying defaults for optional blocks.
inline ExperimentConfig config_from_json(const json& j) {
  using detail::integer;
  using detail::number;
  using detail::require;
  using detail::vector_of;
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  detail::reject_unknown_keys(j, "",
                              {"name", "dimension", "wavelength", "incidents", "shapes", "surface", "forward", "sampling",
                               "noise", "output", "diagnostic"});
  ExperimentConfig cfg;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ConfigError("name", "expected a string");
    cfg.name = j["name"].get<std::string>();
  }
  cfg.dimension = integer(require(j, "", "dimension"), "dimension");
  if (cfg.dimension != 2 && cfg.dimension != 3) throw ConfigError("dimension", "must be 2 or 3");
  const int d = cfg.dimension;
  if (j.contains("wavelength")) cfg.wavelength = number(j["wavelength"], "wavelength");

  if (j.contains("incidents")) {
    const json& inc = j["incidents"];
    if (!inc.is_array()) throw ConfigError("incidents", "expected an array");
    for (std::size_t l = 0; l < inc.size(); ++l) {
      const std::string where = "incidents[" + std::to_string(l) + "]";
      detail::reject_unknown_keys(inc[l], where, {"direction", "polarization"});
      cfg.incidents.push_back({vector_of(require(inc[l], where, "direction"), where + ".direction", d),
                               vector_of(require(inc[l], where, "polarization"), where + ".polarization", d)});
    }
  }

  if (j.contains("shapes")) {
    const json& shapes = j["shapes"];
    if (!shapes.is_array()) throw ConfigError("shapes", "expected an array");
    for (std::size_t s = 0; s < shapes.size(); ++s) {
      const std::string where = "shapes[" + std::to_string(s) + "]";
      detail::reject_unknown_keys(shapes[s], where, {"kind", "center", "side", "inner_side", "eta"});
      ShapeSpec spec;
      const json& kind = require(shapes[s], where, "kind");
      const std::string k = kind.is_string() ? kind.get<std::string>() : "";
      if (k == "axis_square") {
        spec.kind = ShapeKind::axis_square;
      } else if (k == "square_ring") {
        spec.kind = ShapeKind::square_ring;
      } else if (k == "axis_cube") {
        spec.kind = ShapeKind::axis_cube;
      } else {
        throw ConfigError(where + ".kind", "expected axis_square, square_ring or axis_cube");
      }
      spec.center = vector_of(require(shapes[s], where, "center"), where + ".center", d);
      spec.side = number(require(shapes[s], where, "side"), where + ".side");
      if (shapes[s].contains("inner_side")) spec.inner_side = number(shapes[s]["inner_side"], where + ".inner_side");
      if (shapes[s].contains("eta")) spec.eta = detail::complex_of(shapes[s]["eta"], where + ".eta");
      cfg.shapes.push_back(spec);
    }
  }

  const json& surface = require(j, "", "surface");
  const json& skind = require(surface, "surface", "kind");
  if (skind == "circle") {
    detail::reject_unknown_keys(surface, "surface", {"kind", "radius", "count"});
    cfg.surface = {SurfaceKind::circle, number(require(surface, "surface", "radius"), "surface.radius"),
                   integer(require(surface, "surface", "count"), "surface.count")};
  } else if (skind == "cube_faces") {
    detail::reject_unknown_keys(surface, "surface", {"kind", "edge", "per_face"});
    cfg.surface = {SurfaceKind::cube_faces, number(require(surface, "surface", "edge"), "surface.edge"),
                   integer(require(surface, "surface", "per_face"), "surface.per_face")};
  } else {
    throw ConfigError("surface.kind", "expected circle or cube_faces");
  }

  cfg.forward.h = default_forward_h(d);
  if (j.contains("forward")) {
    const json& f = j["forward"];
    detail::reject_unknown_keys(f, "forward", {"h", "solver", "tolerance", "restart", "max_iterations"});
    if (f.contains("h")) cfg.forward.h = number(f["h"], "forward.h");
    if (f.contains("solver")) {
      const std::string s = f["solver"].is_string() ? f["solver"].get<std::string>() : "";
      if (s == "auto") {
        cfg.forward.solver.kind = SolverKind::automatic;
      } else if (s == "dense") {
        cfg.forward.solver.kind = SolverKind::dense;
      } else if (s == "gmres") {
        cfg.forward.solver.kind = SolverKind::gmres;
      } else {
        throw ConfigError("forward.solver", "expected auto, dense or gmres");
      }
    }
    if (f.contains("tolerance")) cfg.forward.solver.tolerance = number(f["tolerance"], "forward.tolerance");
    if (f.contains("restart")) cfg.forward.solver.restart = integer(f["restart"], "forward.restart");
    if (f.contains("max_iterations")) cfg.forward.solver.max_iterations = integer(f["max_iterations"], "forward.max_iterations");
  }

  cfg.sampling = {std::vector<double>(static_cast<std::size_t>(d), -2.0), std::vector<double>(static_cast<std::size_t>(d), 2.0),
                  default_sampling_spacing(d)};
  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    detail::reject_unknown_keys(s, "sampling", {"lo", "hi", "spacing"});
    if (s.contains("lo")) cfg.sampling.lo = vector_of(s["lo"], "sampling.lo", d);
    if (s.contains("hi")) cfg.sampling.hi = vector_of(s["hi"], "sampling.hi", d);
    if (s.contains("spacing")) cfg.sampling.spacing = number(s["spacing"], "sampling.spacing");
  }

  if (j.contains("noise")) {
    const json& n = j["noise"];
    detail::reject_unknown_keys(n, "noise", {"epsilon", "seed"});
    if (n.contains("epsilon")) cfg.noise.epsilon = number(n["epsilon"], "noise.epsilon");
    if (n.contains("seed")) {
      if (!n["seed"].is_number_unsigned() && !(n["seed"].is_number_integer() && n["seed"].get<long long>() >= 0)) {
        throw ConfigError("noise.seed", "expected a nonnegative integer");
      }
      cfg.noise.seed = n["seed"].get<std::uint64_t>();
    }
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    detail::reject_unknown_keys(o, "output", {"directory", "formats"});
    if (o.contains("directory")) {
      if (!o["directory"].is_string()) throw ConfigError("output.directory", "expected a string");
      cfg.output.directory = o["directory"].get<std::string>();
    }
    if (o.contains("formats")) {
      if (!o["formats"].is_array()) throw ConfigError("output.formats", "expected an array");
      cfg.output.csv = cfg.output.pgm = cfg.output.json = false;
      for (const auto& f : o["formats"]) {
        const std::string name = f.is_string() ? f.get<std::string>() : "";
        if (name == "csv") {
          cfg.output.csv = true;
        } else if (name == "pgm") {
          cfg.output.pgm = true;
        } else if (name == "json") {
          cfg.output.json = true;
        } else {
          throw ConfigError("output.formats", "expected csv, pgm or json");
        }
      }
    }
  }

  if (j.contains("diagnostic")) {
    const json& dg = j["diagnostic"];
    detail::reject_unknown_keys(dg, "diagnostic", {"kind", "point"});
    const json& kind = require(dg, "diagnostic", "kind");
    if (!kind.is_string()) throw ConfigError("diagnostic.kind", "expected a string");
    cfg.diagnostic = DiagnosticSpec{kind.get<std::string>(), vector_of(require(dg, "diagnostic", "point"), "diagnostic.point", d)};
  }

  validate(cfg);
  return cfg;
}

inline json to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["dimension"] = cfg.dimension;
  j["wavelength"] = cfg.wavelength;
  j["incidents"] = json::array();
  for (const auto& inc : cfg.incidents) j["incidents"].push_back({{"direction", inc.direction}, {"polarization", inc.polarization}});
  j["shapes"] = json::array();
  for (const auto& s : cfg.shapes) {
    json shape{{"kind", to_string(s.kind)}, {"center", s.center}, {"side", s.side}};
    if (s.kind == ShapeKind::square_ring) shape["inner_side"] = s.inner_side;
    shape["eta"] = s.eta.imag() == 0 ? json(s.eta.real()) : json::array({s.eta.real(), s.eta.imag()});
    j["shapes"].push_back(shape);
  }
  if (cfg.surface.kind == SurfaceKind::circle) {
    j["surface"] = {{"kind", "circle"}, {"radius", cfg.surface.size}, {"count", cfg.surface.count}};
  } else {
    j["surface"] = {{"kind", "cube_faces"}, {"edge", cfg.surface.size}, {"per_face", cfg.surface.count}};
  }
  j["forward"] = {{"h", cfg.forward.h},
                  {"solver", detail::solver_name(cfg.forward.solver.kind)},
                  {"tolerance", cfg.forward.solver.tolerance},
                  {"restart", cfg.forward.solver.restart},
                  {"max_iterations", cfg.forward.solver.max_iterations}};
  j["sampling"] = {{"lo", cfg.sampling.lo}, {"hi", cfg.sampling.hi}, {"spacing", cfg.sampling.spacing}};
  j["noise"] = {{"epsilon", cfg.noise.epsilon}, {"seed", cfg.noise.seed}};
  json formats = json::array();
  if (cfg.output.csv) formats.push_back("csv");
  if (cfg.output.pgm) formats.push_back("pgm");
  if (cfg.output.json) formats.push_back("json");
  j["output"] = {{"directory", cfg.output.directory}, {"formats", formats}};
  if (cfg.diagnostic) j["diagnostic"] = {{"kind", cfg.diagnostic->kind}, {"point", cfg.diagnostic->point}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("<file>", "cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace emdsm::harness
