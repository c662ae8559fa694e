#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "kdeflow/common.hpp"
#include "kdeflow/domain.hpp"
#include "kdeflow/harness/config.hpp"
#include "kdeflow/harness/output.hpp"
#include "kdeflow/kde.hpp"
#include "kdeflow/scheme.hpp"

namespace kdeflow::harness {

struct ExperimentResult {
  Trajectory trajectory;
  SnapshotSet snapshots;
  json summary;
  fs::path out_dir;
};

inline json schedule_report_json(const ScheduleReport& r) {
  json j{{"ladder", r.ladder}, {"pass", r.pass}, {"conditions", json::array()}};
  for (const auto& c : r.conditions) {
    json vals = json::array();
    for (double v : c.values) vals.push_back(std::isfinite(v) ? json(v) : json(fmt(v)));
    j["conditions"].push_back(json{{"name", c.name}, {"values", vals}, {"decreasing", c.decreasing}});
  }
  return j;
}

inline std::string record_json_line(const StepRecord& r, double tau) {
  json j{{"m", r.m},
         {"time", static_cast<double>(r.m) * tau},
         {"energy_before", r.energy_before},
         {"energy_after", r.energy_after},
         {"psi_before", r.psi_before},
         {"psi_after", r.psi_after},
         {"displacement_p", r.displacement_p},
         {"gamma", r.gamma},
         {"moves_evaluated", r.moves_evaluated},
         {"moves_accepted", r.moves_accepted},
         {"rounds", r.rounds},
         {"improved", r.improved}};
  return j.dump();
}

namespace detail {

inline ParticleConfiguration initial_configuration(const RunConfig& cfg, const CoveringGrid* grid) {
  ParticleConfiguration y = sample_initial(cfg.initial->density, cfg.n, cfg.seed);
  if (grid) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const Point g = project_to_grid(y.point(i), *grid);
      y.set(i, g);
    }
  }
  if (!y.inside(cfg.domain)) throw RuntimeFailure("initial configuration has particles outside the domain");
  return y;
}

}  // namespace detail

/// sample_initial -> run_scheme, persisting:
///   resolved_config.json, trajectory.jsonl, diagnostics.csv, timing.csv,
///   snapshots/{particles,density}_<step>.csv, summary.json.
/// Everything except timing.csv is a deterministic function of the config.
/// On failure a FAILED file with the message is left next to partial output.
inline ExperimentResult run_experiment(const RunConfig& cfg) {
  if (!cfg.initial) throw ConfigError("config: missing required key 'initial'");
  ExperimentResult res;
  res.out_dir = cfg.output_dir;
  const fs::path out = cfg.output_dir;
  const fs::path snaps = out / "snapshots";
  fs::create_directories(snaps);
  fs::remove(out / "FAILED");
  for (const auto& e : fs::directory_iterator(snaps)) fs::remove(e.path());

  try {
    write_text(out / "resolved_config.json", resolved_json(cfg).dump(2) + "\n");
    const SchemeParams params = cfg.scheme_params();
    params.validate(cfg.kernel);
    const double h = cfg.h;
    const double export_pitch = cfg.export_pitch_fraction * h;

    std::optional<CoveringGrid> grid;
    if (cfg.optimizer.mode == OptimizerMode::GridCoordinateDescent) grid = build_grid(cfg.domain, *cfg.omega);
    const ParticleConfiguration y0 = detail::initial_configuration(cfg, grid ? &*grid : nullptr);

    std::ofstream traj(out / "trajectory.jsonl", std::ios::binary | std::ios::trunc);
    std::ofstream diag(out / "diagnostics.csv", std::ios::binary | std::ios::trunc);
    std::ofstream timing(out / "timing.csv", std::ios::binary | std::ios::trunc);
    if (!traj || !diag || !timing) throw RuntimeFailure("cannot open output files in '" + out.string() + "'");
    diag << kDiagnosticsHeader << '\n';
    timing << "step,wall_seconds\n";

    SnapshotSet& set = res.snapshots;
    set.dim = cfg.domain.dim();
    set.time_offset = cfg.initial->time_offset;
    double max_mass_error = 0.0;
    auto snapshot = [&](std::size_t step, const ParticleConfiguration& y) {
      Snapshot s = export_snapshot(step, static_cast<double>(step) * cfg.tau, y, h, cfg.kernel, cfg.domain, export_pitch);
      max_mass_error = std::max(max_mass_error, std::abs(s.mass() - 1.0));
      write_snapshot(snaps, s);
      set.frames.push_back(std::move(s));
    };

    const double e0 = total_energy(y0, h, cfg.kernel, cfg.energy);
    DiagnosticRow row0;
    row0.energy = e0;
    row0.psi = e0;
    row0.second_moment = mixture_second_moment(y0, h, cfg.kernel);
    diag << diagnostics_line(row0) << '\n';
    set.diagnostics.push_back(row0);
    snapshot(0, y0);

    const std::size_t stride = cfg.stride();
    const auto clock_start = std::chrono::steady_clock::now();
    double cumulative_gamma = 0.0;
    std::size_t last_snapshot = 0;
    auto on_step = [&](const StepRecord& r) {
      cumulative_gamma += r.gamma;
      traj << record_json_line(r, cfg.tau) << '\n';
      DiagnosticRow row;
      row.step = r.m;
      row.time = static_cast<double>(r.m) * cfg.tau;
      row.energy = r.energy_after;
      row.psi = r.psi_after;
      row.displacement_p = r.displacement_p;
      row.gamma = r.gamma;
      row.cumulative_gamma = cumulative_gamma;
      row.second_moment = mixture_second_moment(r.y_after, h, cfg.kernel);
      row.rounds = r.rounds;
      diag << diagnostics_line(row) << '\n';
      set.diagnostics.push_back(row);
      timing << r.m << ',' << std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count() << '\n';
      if (r.m % stride == 0) {
        snapshot(r.m, r.y_after);
        last_snapshot = r.m;
      }
    };

    res.trajectory = run_scheme(params, cfg.energy, cfg.kernel, y0, cfg.horizon, grid ? &*grid : nullptr, on_step);
    const Trajectory& tr = res.trajectory;
    const std::size_t last = tr.steps.empty() ? 0 : tr.steps.back().m;
    if (last != last_snapshot && last > 0) snapshot(last, tr.final_state());

    // Summary.
    json energies = json::array();
    energies.push_back(e0);
    double total_displacement = 0.0;
    bool chain_ok = true, budget_ok = true;
    double prev = e0, gamma_sum = 0.0;
    for (const auto& r : tr.steps) {
      energies.push_back(r.energy_after);
      total_displacement += std::pow(r.displacement_p, 1.0 / cfg.energy.p);
      gamma_sum += r.gamma;
      if (!(r.energy_after <= prev + r.gamma)) chain_ok = false;
      if (!(r.energy_after <= e0 + gamma_sum)) budget_ok = false;
      prev = r.energy_after;
    }
    json summary;
    summary["final_energy"] = tr.steps.empty() ? e0 : tr.steps.back().energy_after;
    summary["initial_energy"] = e0;
    summary["energies"] = energies;
    summary["total_displacement"] = total_displacement;
    summary["steps"] = tr.steps.size();
    summary["steps_requested"] = cfg.steps();
    summary["termination"] = tr.terminated_at ? "fixed_point" : "horizon";
    summary["terminated_at"] = tr.terminated_at ? json(*tr.terminated_at) : json(nullptr);
    summary["total_rounds"] = tr.total_rounds();
    summary["cumulative_gamma"] = gamma_sum;
    summary["energy_step_inequality"] = chain_ok;
    summary["energy_within_budget"] = budget_ok;
    summary["max_mass_error"] = max_mass_error;
    summary["snapshots"] = set.frames.size();
    summary["time_offset"] = set.time_offset;
    summary["warnings"] = cfg.warnings;
    if (cfg.schedule_check) {
      summary["schedule_check"] = schedule_report_json(check_schedule([&](double t) { return schedule_values(cfg, t); },
                                                                      cfg.energy.law, cfg.kernel, cfg.energy.p, cfg.ladder));
    } else {
      summary["schedule_check"] = nullptr;
    }
    traj.close();
    diag.close();
    timing.close();
    write_text(out / "summary.json", summary.dump(2) + "\n");
    res.summary = std::move(summary);
    return res;
  } catch (const std::exception& e) {
    std::ofstream failed(out / "FAILED", std::ios::binary | std::ios::trunc);
    failed << e.what() << '\n';
    throw;
  }
}

}  // namespace kdeflow::harness
