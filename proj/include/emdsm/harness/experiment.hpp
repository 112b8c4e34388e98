// End-to-end runs: forward solves, data synthesis, noise, index sweeps, export.
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "emdsm/dsm.hpp"
#include "emdsm/forward.hpp"
#include "emdsm/harness/config.hpp"
#include "emdsm/measurement.hpp"
#include "emdsm/parallel.hpp"

namespace emdsm::harness {

/// An error raised inside one pipeline stage; `stage` is forward, synthesis, noise, sweep or export.
struct StageError : std::runtime_error {
  StageError(std::string stage_name, const std::string& what)
      : std::runtime_error(stage_name + " stage: " + what), stage(std::move(stage_name)) {}
  std::string stage;
};

struct ReportedMaximum {
  std::vector<double> location;
  double value = 0;  // relative to the map's global maximum
};

struct IndexSummary {
  std::string label;
  std::vector<double> argmax;
  double max_value = 0;  // raw, before normalization
  std::vector<ReportedMaximum> maxima;
  std::optional<double> off_peak_ratio;  // diagnostics only
};

struct ForwardSummary {
  std::size_t unknowns = 0;
  std::string solver;
  int iterations = 0;
  double relative_residual = 0;
  double seconds = 0;
};

struct StageTiming {
  std::string stage;
  double seconds = 0;
};

struct LocalizationReport {
  ExperimentConfig config;
  std::vector<ForwardSummary> forward;
  std::vector<IndexSummary> indices;
  std::vector<StageTiming> timings;
  int threads = 1;

  const IndexSummary& index(const std::string& label) const {
    for (const auto& s : indices) {
      if (s.label == label) return s;
    }
    throw std::out_of_range("no index labelled " + label);
  }
};

/// Maps produced by a run, normalized to peak 1; kept for callers that inspect them.
using IndexMaps = std::variant<std::vector<IndexGrid<2>>, std::vector<IndexGrid<3>>>;

struct ExperimentResult {
  LocalizationReport report;
  IndexMaps maps;
};

inline constexpr double kMaximaFloor = 0.5;

inline json to_json(const LocalizationReport& r) {
  json j;
  j["config"] = to_json(r.config);
  j["threads"] = r.threads;
  j["forward"] = json::array();
  for (const auto& f : r.forward) {
    j["forward"].push_back({{"unknowns", f.unknowns},
                            {"solver", f.solver},
                            {"iterations", f.iterations},
                            {"relative_residual", f.relative_residual},
                            {"seconds", f.seconds}});
  }
  j["indices"] = json::array();
  for (const auto& s : r.indices) {
    json e{{"label", s.label}, {"argmax", s.argmax}, {"max_value", s.max_value}, {"local_maxima", json::array()}};
    for (const auto& m : s.maxima) e["local_maxima"].push_back({{"location", m.location}, {"value", m.value}});
    if (s.off_peak_ratio) e["off_peak_ratio"] = *s.off_peak_ratio;
    j["indices"].push_back(e);
  }
  j["timings"] = json::object();
  for (const auto& t : r.timings) j["timings"][t.stage] = t.seconds;
  return j;
}

namespace detail {

template <int D>
std::vector<double> to_std(const Point<D>& x) {
  return std::vector<double>(x.data(), x.data() + D);
}

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <class F>
  auto run(const std::string& stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
      sink_.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    };
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record();
      } else {
        auto out = body();
        record();
        return out;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

 private:
  std::vector<StageTiming>& sink_;
};

template <int D>
IndexSummary summarize(const IndexGrid<D>& normalized, double raw_max) {
  IndexSummary s;
  s.label = normalized.label;
  s.argmax = to_std<D>(normalized.argmax());
  s.max_value = raw_max;
  for (const auto& m : find_local_maxima(normalized, kMaximaFloor)) {
    s.maxima.push_back({to_std<D>(normalized.grid.point(m.index)), m.value});
  }
  return s;
}

template <int D>
void export_maps(const OutputSpec& out, const std::vector<IndexGrid<D>>& maps) {
  for (const auto& map : maps) {
    const std::filesystem::path base = std::filesystem::path(out.directory) / map.label;
    if (out.csv) write_index_csv(base.string() + ".csv", map);
    if (out.pgm) write_index_pgm(base.string() + ".pgm", map);
  }
}

inline void write_report(const OutputSpec& out, const LocalizationReport& report) {
  if (!out.json) return;
  const auto path = std::filesystem::path(out.directory) / "report.json";
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << to_json(report).dump(2) << '\n';
}

template <int D>
ExperimentResult run_scattering(const ExperimentConfig& cfg) {
  LocalizationReport report;
  report.config = cfg;
  report.threads = configure_threads_from_env();
  StageClock clock(report.timings);
  const WaveContext<D> ctx(cfg.wavelength);
  const auto surface = make_surface<D>(cfg.surface);
  const bool write = !cfg.output.directory.empty();
  if (write) std::filesystem::create_directories(cfg.output.directory);

  std::vector<InducedCurrentField<D>> currents = clock.run("forward", [&] {
    const ForwardSystem<D> system(make_contrast<D>(cfg.shapes), ctx, cfg.forward.h);
    std::vector<IncidentPlaneWave<D>> waves;
    for (const auto& inc : cfg.incidents) waves.push_back(make_incident<D>(inc));
    auto out = solve_currents(system, waves, cfg.forward.solver);
    for (const auto& j : out) {
      const auto& dg = j.diagnostics;
      report.forward.push_back({system.dimension(), dg.used == SolverKind::dense ? "dense" : "gmres", dg.iterations,
                                dg.relative_residual, dg.seconds});
    }
    return out;
  });

  std::vector<FieldSamples<D>> exact = clock.run("synthesis", [&] {
    std::vector<FieldSamples<D>> out;
    for (const auto& j : currents) out.push_back(synthesize_scattered_field(j, surface, ctx));
    return out;
  });

  // Dataset l is perturbed with seed + l so the polarizations see independent noise.
  std::vector<PolarizedData<D>> datasets = clock.run("noise", [&] {
    std::vector<PolarizedData<D>> out;
    for (std::size_t l = 0; l < exact.size(); ++l) {
      out.push_back({add_noise(exact[l], cfg.noise.epsilon, cfg.noise.seed + l), make_incident<D>(cfg.incidents[l]).polarization()});
    }
    return out;
  });

  const SamplingGrid<D> grid(sampling_box<D>(cfg.sampling), cfg.sampling.spacing);
  std::vector<IndexGrid<D>> maps = clock.run("sweep", [&] { return compute_index_grids(ctx, datasets, grid); });
  for (auto& map : maps) {
    const double raw = map.max_value();
    map = map.normalized();
    report.indices.push_back(summarize(map, raw));
  }

  if (write) {
    clock.run("export", [&] {
      for (std::size_t l = 0; l < datasets.size(); ++l) {
        if (cfg.output.csv) {
          write_samples_csv((std::filesystem::path(cfg.output.directory) / ("samples_" + std::to_string(l + 1) + ".csv")).string(),
                            datasets[l].samples);
        }
      }
      export_maps(cfg.output, maps);
    });
    write_report(cfg.output, report);
  }
  return {std::move(report), std::move(maps)};
}

/// fig1: the component maps |<Phi_ij(., x_p), Phi_ij(., x_q)>| and their diagonal sum.
/// fig2: the polarization maps for p_1, p_2 and their sum.
inline ExperimentResult run_diagnostic(const ExperimentConfig& cfg) {
  LocalizationReport report;
  report.config = cfg;
  report.threads = configure_threads_from_env();
  StageClock clock(report.timings);
  const WaveContext<2> ctx(cfg.wavelength);
  const auto surface = make_surface<2>(cfg.surface);
  const Point<2> x_q = to_vec<2>(cfg.diagnostic->point);
  const SamplingGrid<2> grid(sampling_box<2>(cfg.sampling), cfg.sampling.spacing);

  std::vector<std::pair<CrossSelector<2>, std::string>> selectors;
  if (cfg.diagnostic->kind == "fig1") {
    selectors = {{CrossSelector<2>::component(0, 0), "phi11"},
                 {CrossSelector<2>::component(1, 1), "phi22"},
                 {CrossSelector<2>::component(0, 1), "phi12"},
                 {CrossSelector<2>::diagonal_sum(), "diagonal_sum"}};
  } else {
    std::vector<Vec<2>> qs;
    for (const auto& inc : cfg.incidents) qs.push_back(to_vec<2>(inc.polarization));
    for (std::size_t l = 0; l < qs.size(); ++l) {
      selectors.push_back({CrossSelector<2>::polarization(qs[l]), "polarization_" + std::to_string(l + 1)});
    }
    selectors.push_back({CrossSelector<2>::polarization_sum(qs), "polarization_sum"});
  }

  std::vector<IndexGrid<2>> maps = clock.run("sweep", [&] {
    std::vector<IndexGrid<2>> out;
    for (const auto& [selector, label] : selectors) out.push_back(cross_product_map(ctx, surface, x_q, grid, selector, label));
    return out;
  });
  for (const auto& map : maps) {
    IndexSummary s = summarize(map, 1.0);
    s.off_peak_ratio = off_peak_ratio(map, x_q, cfg.wavelength / 2);
    report.indices.push_back(std::move(s));
  }
  if (!cfg.output.directory.empty()) {
    std::filesystem::create_directories(cfg.output.directory);
    clock.run("export", [&] { export_maps(cfg.output, maps); });
    write_report(cfg.output, report);
  }
  return {std::move(report), std::move(maps)};
}

}  // namespace detail

/// Runs the configured experiment. Files are written only when output.directory is set.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.diagnostic) return detail::run_diagnostic(cfg);
  if (cfg.dimension == 2) return detail::run_scattering<2>(cfg);
  return detail::run_scattering<3>(cfg);
}

}  // namespace emdsm::harness
