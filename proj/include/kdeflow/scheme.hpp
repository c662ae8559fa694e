#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kdeflow/common.hpp"
#include "kdeflow/domain.hpp"
#include "kdeflow/energy.hpp"
#include "kdeflow/kde.hpp"
#include "kdeflow/kernel.hpp"

namespace kdeflow {

/// Per-step error budget gamma_tau^(m).
///
/// Power: c * tau^e for every step (uniform budget, o(tau) when e > 1).
/// Explicit: values[m - 1], the last value repeating after the list ends.
class GammaSchedule {
 public:
  static GammaSchedule power(double exponent = 1.5, double coefficient = 1.0) {
    if (!(coefficient > 0.0)) throw ConfigError("gamma schedule: coefficient must be > 0");
    GammaSchedule g;
    g.exponent_ = exponent;
    g.coefficient_ = coefficient;
    return g;
  }
  static GammaSchedule explicit_values(std::vector<double> values) {
    if (values.empty()) throw ConfigError("gamma schedule: explicit list is empty");
    for (double v : values) {
      if (!(v > 0.0)) throw ConfigError("gamma schedule: every gamma must be > 0");
    }
    GammaSchedule g;
    g.values_ = std::move(values);
    return g;
  }

  bool is_explicit() const { return !values_.empty(); }
  double exponent() const { return exponent_; }
  double coefficient() const { return coefficient_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double tau, std::size_t m) const {
    if (values_.empty()) return coefficient_ * std::pow(tau, exponent_);
    return values_[std::min(m, values_.size()) - 1];
  }

  /// Cumulative budget over steps 1..steps.
  double cumulative(double tau, std::size_t steps) const {
    double s = 0.0;
    for (std::size_t m = 1; m <= steps; ++m) s += (*this)(tau, m);
    return s;
  }

 private:
  GammaSchedule() = default;
  double exponent_ = 1.5;
  double coefficient_ = 1.0;
  std::vector<double> values_;
};

enum class OptimizerMode { GridCoordinateDescent, PatternSearch };

inline OptimizerMode optimizer_mode_from_name(const std::string& s) {
  if (s == "grid_coordinate_descent") return OptimizerMode::GridCoordinateDescent;
  if (s == "pattern_search") return OptimizerMode::PatternSearch;
  throw ConfigError("unknown optimizer mode '" + s + "'");
}

inline std::string optimizer_mode_name(OptimizerMode m) {
  return m == OptimizerMode::GridCoordinateDescent ? "grid_coordinate_descent" : "pattern_search";
}

struct OptimizerSpec {
  OptimizerMode mode = OptimizerMode::PatternSearch;
  /// A move is accepted only if it lowers the objective by more than theta.
  double theta = 1e-12;
  std::size_t max_rounds = 1000;
  /// Smallest pattern-search radius; defaults to the grid spacing.
  std::optional<double> r_min;
  /// Cap on accepted moves of one particle within one round (pattern search).
  std::size_t max_moves_per_particle = 256;
};

/// Bounded-solution variant: candidates whose mixture sup-norm exceeds
/// M_{tau,m} = (M + M_bar)/2 + m * epsilon are rejected.
struct DensityCap {
  double M;
  double M_bar;
  double epsilon;

  double bound(std::size_t m) const { return 0.5 * (M + M_bar) + static_cast<double>(m) * epsilon; }
};

struct SchemeParams {
  double tau = 0.05;
  std::size_t n = 64;
  double h = 0.1;
  double p = 2.0;
  GammaSchedule gamma = GammaSchedule::power();
  std::optional<double> grid_omega;
  std::optional<DensityCap> density_cap;
  OptimizerSpec optimizer{};
  /// Skip the omega <= factor * h^{d+1} resolution requirement (toy runs).
  bool allow_coarse_grid = false;
  double grid_resolution_factor = 0.05;

  void validate(const Kernel& kernel) const {
    if (!(tau > 0.0)) throw ConfigError("scheme: tau must be > 0");
    if (!(h > 0.0)) throw ConfigError("scheme: h must be > 0");
    if (n < 1) throw ConfigError("scheme: n must be >= 1");
    if (!(p > 1.0)) throw ConfigError("scheme: p must be > 1");
    if (!(optimizer.theta >= 0.0)) throw ConfigError("scheme: theta must be >= 0");
    if (grid_omega && !(*grid_omega > 0.0)) throw ConfigError("scheme: grid omega must be > 0");
    if (optimizer.mode == OptimizerMode::GridCoordinateDescent) {
      if (!grid_omega) throw ConfigError("scheme: grid mode requires a grid spacing omega");
      if (!kernel.is_lipschitz()) throw ConfigError("scheme: grid mode requires a Lipschitz kernel");
      const double limit = grid_resolution_factor * std::pow(h, kernel.dim() + 1);
      if (!allow_coarse_grid && *grid_omega > limit) {
        std::ostringstream os;
        os << "scheme: grid spacing " << *grid_omega << " exceeds " << grid_resolution_factor << " * h^(d+1) = " << limit;
        throw ConfigError(os.str());
      }
    }
    if (density_cap) {
      if (!(density_cap->M > 0.0) || !(density_cap->M_bar > density_cap->M) || !(density_cap->epsilon >= 0.0)) {
        throw ConfigError("scheme: density cap needs 0 < M < M_bar and epsilon >= 0");
      }
    }
  }
};

/// Mean of |y_i - z_i|^p.
inline double mean_displacement_p(const ParticleConfiguration& y, const ParticleConfiguration& z, double p) {
  if (y.size() != z.size() || y.dim() != z.dim()) throw ConfigError("configuration size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::pow(distance(y.point(i), z.point(i)), p);
  return s / static_cast<double>(y.size());
}

/// Psi(tau, Y, Z) = phi_n(mixture of Z) + (1/(p tau^{p-1})) (1/n) sum |z_i - y_i|^p.
inline double psi(double tau, const ParticleConfiguration& y, const ParticleConfiguration& z, const EnergySpec& spec,
                  const Kernel& kernel, double h, double p) {
  const double disp = mean_displacement_p(y, z, p);
  const double energy = total_energy(z, h, kernel, spec);
  return energy + disp / (p * std::pow(tau, p - 1.0));
}

/// Lattice kernel sums of the current configuration with O(window) updates
/// for single-particle moves. Used by the step optimizer.
class MixtureField {
 public:
  MixtureField(ParticleConfiguration config, double h, const Kernel& kernel, const EnergySpec& spec)
      : config_(std::move(config)),
        h_(h),
        kernel_(kernel),
        spec_(spec),
        lattice_(spec.domain, h, spec.quadrature.resolve(h)),
        inv_n_(1.0 / static_cast<double>(config_.size())),
        mark_(lattice_.size(), 0),
        scratch_(lattice_.size(), 0.0) {
    if (spec_.mode == EnergyMode::Exact && !spec_.potential.is_zero()) {
      node_potential_.resize(lattice_.size());
      Point x(static_cast<std::size_t>(lattice_.dim()));
      for (std::size_t j = 0; j < lattice_.size(); ++j) {
        lattice_.node(j, x);
        node_potential_[j] = spec_.potential(x);
      }
    }
    refresh();
  }

  const ParticleConfiguration& config() const { return config_; }
  const QuadratureLattice& lattice() const { return lattice_; }

  /// Recomputes the lattice sums from scratch.
  void refresh() { sums_ = rasterize(config_, h_, kernel_, lattice_); }

  double sup_density() const {
    double s = 0.0;
    for (double v : sums_) s = std::max(s, v);
    return s * inv_n_;
  }

  /// Change of phi_n when particle i moves to z; +infinity if z leaves the
  /// domain. When cap > 0, also +infinity if the new sup-norm exceeds cap.
  double delta(std::size_t i, ConstPoint z, double cap = 0.0) {
    if (!spec_.domain.contains(z)) return kInfinity;
    if (spec_.mode == EnergyMode::Exact && !spec_.interaction.is_none()) return delta_by_recompute(i, z, cap);

    const ConstPoint y = config_.point(i);
    touched_.clear();
    lattice_.for_each_in_ball(y, h_, [&](std::size_t j, double r) {
      touch(j);
      scratch_[j] -= kernel_.eval_scaled_radius(h_, r);
    });
    lattice_.for_each_in_ball(z, h_, [&](std::size_t j, double r) {
      touch(j);
      scratch_[j] += kernel_.eval_scaled_radius(h_, r);
    });

    double d_internal = 0.0, d_potential = 0.0, sup_touched = 0.0;
    for (std::size_t j : touched_) {
      const double before = sums_[j] * inv_n_;
      const double after = (sums_[j] + scratch_[j]) * inv_n_;
      d_internal += spec_.law(after) - spec_.law(before);
      if (!node_potential_.empty()) d_potential += node_potential_[j] * (after - before);
      sup_touched = std::max(sup_touched, after);
    }
    for (std::size_t j : touched_) {
      scratch_[j] = 0.0;
      mark_[j] = 0;
    }

    if (cap > 0.0) {
      double sup = sup_touched;
      if (sup <= cap) {
        for (std::size_t j = 0; j < sums_.size(); ++j) {
          if (!touched(j)) sup = std::max(sup, sums_[j] * inv_n_);
        }
      }
      if (sup > cap) return kInfinity;
    }

    double d = d_internal * lattice_.cell_volume();
    if (spec_.mode == EnergyMode::Exact) {
      d += d_potential * lattice_.cell_volume();
    } else if (!spec_.potential.is_zero()) {
      d += (spec_.potential(z) - spec_.potential(y)) * inv_n_;
    }
    if (!spec_.interaction.is_none()) {
      const int dim = config_.dim();
      Point a(static_cast<std::size_t>(dim)), b(static_cast<std::size_t>(dim));
      double s = 0.0;
      for (std::size_t j = 0; j < config_.size(); ++j) {
        if (j == i) continue;
        for (int k = 0; k < dim; ++k) {
          a[k] = z[k] - config_.point(j)[k];
          b[k] = y[k] - config_.point(j)[k];
        }
        s += spec_.interaction(a) - spec_.interaction(b);
      }
      d += s * inv_n_ * inv_n_;
    }
    return d;
  }

  void apply(std::size_t i, ConstPoint z) {
    const Point y(config_.point(i).begin(), config_.point(i).end());
    lattice_.for_each_in_ball(y, h_, [&](std::size_t j, double r) { sums_[j] -= kernel_.eval_scaled_radius(h_, r); });
    lattice_.for_each_in_ball(z, h_, [&](std::size_t j, double r) { sums_[j] += kernel_.eval_scaled_radius(h_, r); });
    config_.set(i, z);
  }

 private:
  void touch(std::size_t j) {
    if (!mark_[j]) {
      mark_[j] = 1;
      touched_.push_back(j);
    }
  }
  bool touched(std::size_t j) const { return mark_[j] != 0; }

  double delta_by_recompute(std::size_t i, ConstPoint z, double cap) {
    ParticleConfiguration moved = config_;
    moved.set(i, z);
    if (cap > 0.0) {
      const auto sums = rasterize(moved, h_, kernel_, lattice_);
      const double sup = *std::max_element(sums.begin(), sums.end()) * inv_n_;
      if (sup > cap) return kInfinity;
    }
    return total_energy(moved, h_, kernel_, spec_) - total_energy(config_, h_, kernel_, spec_);
  }

  ParticleConfiguration config_;
  double h_;
  const Kernel& kernel_;
  const EnergySpec& spec_;
  QuadratureLattice lattice_;
  double inv_n_;
  std::vector<double> sums_;
  std::vector<double> node_potential_;
  std::vector<char> mark_;
  std::vector<double> scratch_;
  std::vector<std::size_t> touched_;
};

struct StepRecord {
  std::size_t m = 0;
  ParticleConfiguration y_before;
  ParticleConfiguration y_after;
  double psi_before = 0.0;
  double psi_after = 0.0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  /// Mean |y_after - y_before|^p.
  double displacement_p = 0.0;
  double gamma = 0.0;
  std::size_t moves_evaluated = 0;
  std::size_t moves_accepted = 0;
  std::size_t rounds = 0;
  bool improved = false;
};

struct StepResult {
  ParticleConfiguration next;
  StepRecord record;
};

namespace detail {

// Processing order of particles: lexicographic in the step's starting
// positions, ties by index. Makes the step covariant under relabeling.
inline std::vector<std::size_t> sweep_order(const ParticleConfiguration& y) {
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto pa = y.point(a), pb = y.point(b);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  });
  return order;
}

}  // namespace detail

/// One relaxed minimizing-movement step from y_prev (step index m >= 1).
///
/// Grid mode sweeps particles round-robin and moves each to the best grid
/// point of the covering grid when that lowers Psi by more than theta.
/// Pattern search tries +-r along each axis, halving r on failure from h
/// down to r_min. Both start from Z = y_prev and only accept descent, so
/// psi_after <= psi_before; the final value is re-evaluated from scratch
/// and the step falls back to y_prev if rounding ever broke that order.
inline StepResult relaxed_step(const ParticleConfiguration& y_prev, std::size_t m, const SchemeParams& params,
                               const EnergySpec& spec, const Kernel& kernel, const CoveringGrid* grid = nullptr) {
  const double tau = params.tau, h = params.h, p = params.p;
  const double energy_before = total_energy(y_prev, h, kernel, spec);
  if (is_infinite(energy_before)) throw RuntimeFailure("invalid step origin: starting configuration has infinite energy");
  if (params.optimizer.mode == OptimizerMode::GridCoordinateDescent && (grid == nullptr || grid->empty())) {
    throw ConfigError("relaxed_step: grid mode requires a covering grid");
  }

  const double weight = 1.0 / (p * std::pow(tau, p - 1.0));
  const double inv_n = 1.0 / static_cast<double>(y_prev.size());
  const double cap = params.density_cap ? params.density_cap->bound(m) : 0.0;
  const int d = y_prev.dim();

  MixtureField field(y_prev, h, kernel, spec);
  std::vector<double> disp(y_prev.size(), 0.0);  // |z_i - y_i|^p per particle
  const auto order = detail::sweep_order(y_prev);

  StepRecord rec;
  rec.m = m;
  rec.gamma = params.gamma(tau, m);

  auto move_gain = [&](std::size_t i, ConstPoint z) {
    const double de = field.delta(i, z, cap);
    if (is_infinite(de)) return kInfinity;
    const double nd = std::pow(distance(z, y_prev.point(i)), p);
    return de + weight * inv_n * (nd - disp[i]);
  };
  auto accept = [&](std::size_t i, ConstPoint z) {
    field.apply(i, z);
    disp[i] = std::pow(distance(z, y_prev.point(i)), p);
    ++rec.moves_accepted;
  };

  const double r_min = params.optimizer.r_min ? *params.optimizer.r_min
                                              : (params.grid_omega ? *params.grid_omega : h / 64.0);
  Point cand(static_cast<std::size_t>(d)), best_z(static_cast<std::size_t>(d));

  for (std::size_t round = 0; round < params.optimizer.max_rounds; ++round) {
    ++rec.rounds;
    // Drop accumulated rounding from incremental updates.
    field.refresh();
    bool moved = false;
    for (std::size_t i : order) {
      if (params.optimizer.mode == OptimizerMode::GridCoordinateDescent) {
        double best = kInfinity;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < grid->size(); ++j) {
          const double g = move_gain(i, grid->point(j));
          ++rec.moves_evaluated;
          if (g < best) {
            best = g;
            best_j = j;
          }
        }
        if (best < -params.optimizer.theta) {
          accept(i, grid->point(best_j));
          moved = true;
        }
      } else {
        double r = h;
        std::size_t moves = 0;
        while (r >= r_min && moves < params.optimizer.max_moves_per_particle) {
          double best = kInfinity;
          for (int k = 0; k < d; ++k) {
            for (double sign : {-1.0, 1.0}) {
              const auto cur = field.config().point(i);
              std::copy(cur.begin(), cur.end(), cand.begin());
              cand[k] += sign * r;
              const double g = move_gain(i, cand);
              ++rec.moves_evaluated;
              if (g < best) {
                best = g;
                best_z = cand;
              }
            }
          }
          if (best < -params.optimizer.theta) {
            accept(i, best_z);
            moved = true;
            ++moves;
          } else {
            r *= 0.5;
          }
        }
      }
    }
    if (!moved) break;
  }

  ParticleConfiguration next = field.config();
  rec.energy_before = energy_before;
  rec.psi_before = energy_before;
  rec.energy_after = total_energy(next, h, kernel, spec);
  rec.displacement_p = mean_displacement_p(y_prev, next, p);
  rec.psi_after = rec.energy_after + weight * rec.displacement_p;
  if (!(rec.psi_after <= rec.psi_before)) {
    next = y_prev;
    rec.energy_after = energy_before;
    rec.displacement_p = 0.0;
    rec.psi_after = energy_before;
  }
  rec.improved = !(next == y_prev);
  rec.y_before = y_prev;
  rec.y_after = next;
  return {std::move(next), std::move(rec)};
}

struct Trajectory {
  SchemeParams params;
  ParticleConfiguration initial;
  std::vector<StepRecord> steps;
  /// Step index at which grid mode reached a fixed point.
  std::optional<std::size_t> terminated_at;

  const ParticleConfiguration& final_state() const { return steps.empty() ? initial : steps.back().y_after; }

  /// State at time t under piecewise-constant interpolation: Y^m on ((m-1) tau, m tau].
  const ParticleConfiguration& at_time(double t) const {
    if (t <= 0.0 || steps.empty()) return initial;
    const auto m = static_cast<std::size_t>(std::ceil(t / params.tau - 1e-12));
    if (m == 0) return initial;
    return steps[std::min(m, steps.size()) - 1].y_after;
  }

  std::size_t total_rounds() const {
    std::size_t s = 0;
    for (const auto& r : steps) s += r.rounds;
    return s;
  }
};

/// Checks the record invariants: no worsening of Psi and
/// energy_after <= energy_before + gamma.
inline void check_step_invariants(const StepRecord& rec) {
  if (!(rec.psi_after <= rec.psi_before) || !(rec.energy_after <= rec.energy_before + rec.gamma)) {
    std::ostringstream os;
    os << "internal consistency failure at step " << rec.m << ": psi " << rec.psi_before << " -> " << rec.psi_after
       << ", energy " << rec.energy_before << " -> " << rec.energy_after;
    throw RuntimeFailure(os.str());
  }
}

using StepCallback = std::function<void(const StepRecord&)>;

/// Runs ceil(T / tau) steps from y0 (none for T = 0), stopping early in grid mode once a
/// step leaves the configuration unchanged (later steps would repeat it).
inline Trajectory run_scheme(const SchemeParams& params, const EnergySpec& spec, const Kernel& kernel,
                             const ParticleConfiguration& y0, double horizon, const CoveringGrid* grid = nullptr,
                             const StepCallback& on_step = {}) {
  params.validate(kernel);
  if (!(horizon >= 0.0)) throw ConfigError("run_scheme: horizon must be >= 0");
  if (y0.size() != params.n) throw ConfigError("run_scheme: initial configuration size differs from n");
  Trajectory traj;
  traj.params = params;
  traj.initial = y0;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / params.tau - 1e-12));
  ParticleConfiguration y = y0;
  for (std::size_t m = 1; m <= steps; ++m) {
    auto result = relaxed_step(y, m, params, spec, kernel, grid);
    check_step_invariants(result.record);
    const bool fixed = !result.record.improved;
    y = std::move(result.next);
    if (on_step) on_step(result.record);
    traj.steps.push_back(std::move(result.record));
    if (fixed && params.optimizer.mode == OptimizerMode::GridCoordinateDescent && !params.density_cap) {
      traj.terminated_at = m;
      break;
    }
  }
  return traj;
}

/// Parameters attached to one time step size.
struct ScheduleValues {
  double tau;
  double n;  // may exceed any integer type; only used in formulas
  double h;
  double omega;
  GammaSchedule gamma;
};

/// Theorem-grade schedule: n = ceil(tau^{-kappa}) with kappa = 8dp + 2,
/// h = n^{-1/(8d)}, omega = 0.05 h^{d+1}, gamma = tau^{3/2}.
inline ScheduleValues default_schedule(double tau, int d, double p) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("default_schedule: tau must lie in (0, 1)");
  const double kappa = 8.0 * d * p + 2.0;
  const double n = std::ceil(std::pow(tau, -kappa));
  const double h = std::pow(n, -1.0 / (8.0 * d));
  return {tau, n, h, 0.05 * std::pow(h, d + 1), GammaSchedule::power(1.5)};
}

struct ConditionReport {
  std::string name;
  std::vector<double> values;
  bool decreasing = false;
};

struct ScheduleReport {
  std::vector<double> ladder;
  std::vector<ConditionReport> conditions;
  bool pass = false;

  const ConditionReport& condition(const std::string& name) const {
    for (const auto& c : conditions) {
      if (c.name == name) return c;
    }
    throw ConfigError("schedule report has no condition '" + name + "'");
  }
};

/// Optional bounded-solution variant for the checker: M_bar replaces
/// ||K||_inf / h^d and n h^d replaces n h^{2d}.
struct CapCheck {
  double M_bar;
};

/// Evaluates the parameter conditions along a decreasing ladder of tau:
///   h / tau^p,
///   log(1/h) / (tau^6 n h^{2d}),
///   (1/tau) f_M(sqrt(log(1/h) / (n h^{2d}))) with M = ||K||_inf / h^d,
/// and the cumulative error budget over ceil(1/tau) steps. Each must
/// strictly decrease along the ladder.
inline ScheduleReport check_schedule(const std::function<ScheduleValues(double)>& schedule,
                                     const InternalEnergyLaw& law, const Kernel& kernel, double p,
                                     const std::vector<double>& ladder, std::optional<CapCheck> cap = {}) {
  if (ladder.size() < 4) throw ConfigError("check_schedule: ladder needs at least 4 values");
  for (std::size_t i = 1; i < ladder.size(); ++i) {
    if (!(ladder[i] < ladder[i - 1])) throw ConfigError("check_schedule: ladder must be strictly decreasing");
  }
  const int d = kernel.dim();
  ScheduleReport rep;
  rep.ladder = ladder;
  ConditionReport c1{"bandwidth_vs_tau", {}, false};
  ConditionReport c2{cap ? "sample_size_bounded" : "sample_size", {}, false};
  ConditionReport c3{cap ? "modulus_bounded" : "modulus", {}, false};
  ConditionReport c4{"error_budget", {}, false};
  for (double tau : ladder) {
    const ScheduleValues s = schedule(tau);
    const double hd = std::pow(s.h, d);
    const double spread = cap ? s.n * hd : s.n * hd * hd;
    const double log_h = std::log(1.0 / s.h);
    c1.values.push_back(s.h / std::pow(tau, p));
    c2.values.push_back(log_h / (std::pow(tau, 6.0) * spread));
    const double M = cap ? cap->M_bar : kernel.sup_norm() / hd;
    c3.values.push_back(modulus(law, M, std::sqrt(log_h / spread)) / tau);
    c4.values.push_back(s.gamma.cumulative(tau, static_cast<std::size_t>(std::ceil(1.0 / tau - 1e-12))));
  }
  rep.pass = true;
  for (auto* c : {&c1, &c2, &c3, &c4}) {
    c->decreasing = true;
    for (std::size_t i = 1; i < c->values.size(); ++i) {
      if (!(c->values[i] < c->values[i - 1])) c->decreasing = false;
    }
    rep.pass = rep.pass && c->decreasing;
    rep.conditions.push_back(std::move(*c));
  }
  return rep;
}

}  // namespace kdeflow
