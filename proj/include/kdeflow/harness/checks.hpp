#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kdeflow/common.hpp"
#include "kdeflow/domain.hpp"
#include "kdeflow/energy.hpp"
#include "kdeflow/kde.hpp"
#include "kdeflow/kernel.hpp"
#include "kdeflow/oracle.hpp"
#include "kdeflow/scheme.hpp"
#include "kdeflow/transport.hpp"

// Property and oracle checks shared by the CLI verbs and the acceptance suite.
namespace kdeflow::harness {

namespace detail {

inline ParticleConfiguration uniform_cloud(std::size_t n, int d, Rng& rng) {
  std::vector<double> c(n * static_cast<std::size_t>(d));
  for (double& v : c) v = rng.uniform();
  return ParticleConfiguration(d, std::move(c));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Coupling bound: W_p(mixture Y, mixture Z) <= d_p(Y, Z).

struct BoundCase {
  std::uint64_t seed = 0;
  int dim = 1;
  double estimate = 0.0;
  double spread = 0.0;
  double particle_distance = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct BoundCheckOptions {
  std::size_t n = 32;
  double h = 0.1;
  std::size_t samples = 128;
  double p = 2.0;
  std::uint64_t seed = 2024;
};

/// One random pair: even seeds draw Z independently, odd seeds jitter Y.
inline BoundCase bound_case(std::uint64_t seed, int dim, const BoundCheckOptions& opt) {
  Rng rng(Rng::derive(opt.seed, seed * 16 + static_cast<std::uint64_t>(dim)));
  const ParticleConfiguration y = detail::uniform_cloud(opt.n, dim, rng);
  ParticleConfiguration z = detail::uniform_cloud(opt.n, dim, rng);
  if (seed % 2 == 1) {
    std::vector<double> c;
    for (std::size_t i = 0; i < y.size(); ++i) {
      for (int k = 0; k < dim; ++k) c.push_back(std::clamp(y.point(i)[k] + rng.uniform(-0.1, 0.1), 0.0, 1.0));
    }
    z = ParticleConfiguration(dim, std::move(c));
  }
  const Kernel kernel = Kernel::epanechnikov(dim);
  const KdeMeasure a(y, opt.h, kernel), b(z, opt.h, kernel);
  const MixtureEstimate est = mixture_wasserstein_estimate(a, b, opt.samples, Rng::derive(opt.seed, 1000 + seed), opt.p);
  BoundCase c;
  c.seed = seed;
  c.dim = dim;
  c.estimate = est.mean;
  c.spread = est.spread();
  c.particle_distance = particle_distance_p(y, z, opt.p);
  c.bound = c.particle_distance + 2.0 * opt.h + c.spread;
  c.pass = c.estimate <= c.bound;
  return c;
}

inline std::vector<BoundCase> run_bound_check(std::size_t pairs, int dim, const BoundCheckOptions& opt = {}) {
  std::vector<BoundCase> out;
  for (std::size_t s = 0; s < pairs; ++s) out.push_back(bound_case(s, dim, opt));
  return out;
}

// ---------------------------------------------------------------------------
// Step oracle: relaxed_step against exhaustive enumeration on toy grids.

struct OracleCase {
  std::size_t index = 0;
  std::size_t n = 1;
  std::size_t grid_size = 0;
  std::string law;
  double relaxed_psi = 0.0;
  double oracle_psi = 0.0;
  double gamma = 0.0;
  std::size_t evaluated = 0;
  bool pass = false;
};

struct OracleOptions {
  double tau = 0.1;
  double h = 0.3;
  std::uint64_t seed = 7;
};

/// Spacing on [0, 1] that yields a covering grid with `points` nodes.
inline double omega_for_grid_size(std::size_t points) {
  switch (points) {
    case 3: return 0.6;
    case 5: return 0.3;
    case 7: return 0.18;
    case 9: return 0.13;
    case 15: return 0.075;
    default: break;
  }
  // ceil-free inverse of cells = floor(1 / omega) + 1 nodes = cells + 1.
  return 1.0 / (static_cast<double>(points) - 1.5);
}

inline OracleCase oracle_case(std::size_t index, std::size_t n, std::size_t grid_points, const InternalEnergyLaw& law,
                              const OracleOptions& opt) {
  const Domain dom = Domain::box({{0.0, 1.0}});
  const CoveringGrid grid = build_grid(dom, omega_for_grid_size(grid_points));
  if (grid.size() != grid_points) throw RuntimeFailure("oracle: covering grid has unexpected size");
  const Kernel kernel = Kernel::epanechnikov(1);
  EnergySpec spec;
  spec.domain = dom;
  spec.law = law;

  Rng rng(Rng::derive(opt.seed, index));
  std::vector<double> c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(grid.point(rng.below(grid.size()))[0]);
  const ParticleConfiguration y(1, std::move(c));

  SchemeParams params;
  params.tau = opt.tau;
  params.n = n;
  params.h = opt.h;
  params.grid_omega = grid.spacing();
  params.allow_coarse_grid = true;
  params.optimizer.mode = OptimizerMode::GridCoordinateDescent;
  params.validate(kernel);

  const StepResult step = relaxed_step(y, 1, params, spec, kernel, &grid);
  const OracleResult truth = oracle_exhaustive_step(opt.tau, y, grid, spec, kernel, opt.h, params.p);
  OracleCase out;
  out.index = index;
  out.n = n;
  out.grid_size = grid.size();
  out.law = law.name();
  out.relaxed_psi = step.record.psi_after;
  out.oracle_psi = truth.psi;
  out.gamma = params.gamma(opt.tau, 1);
  out.evaluated = truth.evaluated;
  out.pass = out.relaxed_psi <= out.oracle_psi + out.gamma;
  return out;
}

/// Toy instances cycling n in {1,2,3}, laws {entropy, m=2}, grids {5,7,9}.
inline std::vector<OracleCase> run_oracle_suite(std::size_t count, const OracleOptions& opt = {}) {
  static const std::size_t sizes[] = {5, 7, 9};
  std::vector<OracleCase> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = 1 + i % 3;
    const InternalEnergyLaw law = (i % 2 == 0) ? InternalEnergyLaw::entropy() : InternalEnergyLaw::power(2.0);
    out.push_back(oracle_case(i, n, sizes[(i / 6) % 3], law, opt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid-mode finite termination.

struct TerminationCase {
  std::uint64_t seed = 0;
  bool terminated = false;
  std::size_t rounds = 0;
  std::size_t steps = 0;
  std::size_t round_limit = 0;
  bool step_inequality = true;
  bool pass = false;
};

inline TerminationCase termination_case(std::uint64_t seed, std::size_t n = 4, std::size_t grid_points = 15) {
  const Domain dom = Domain::box({{0.0, 1.0}});
  const CoveringGrid grid = build_grid(dom, omega_for_grid_size(grid_points));
  const Kernel kernel = Kernel::epanechnikov(1);
  EnergySpec spec;
  spec.domain = dom;
  SchemeParams params;
  params.tau = 0.05;
  params.n = n;
  params.h = 0.2;
  params.grid_omega = grid.spacing();
  params.allow_coarse_grid = true;
  params.optimizer.mode = OptimizerMode::GridCoordinateDescent;

  Rng rng(Rng::derive(seed, 77));
  std::vector<double> c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(grid.point(rng.below(grid.size()))[0]);
  const ParticleConfiguration y0(1, std::move(c));

  TerminationCase out;
  out.seed = seed;
  out.round_limit = 10 * grid.size() * n;
  const Trajectory tr = run_scheme(params, spec, kernel, y0, static_cast<double>(out.round_limit) * params.tau, &grid);
  out.terminated = tr.terminated_at.has_value();
  out.rounds = tr.total_rounds();
  out.steps = tr.steps.size();
  for (const auto& r : tr.steps) {
    if (!(r.energy_after <= r.energy_before + r.gamma)) out.step_inequality = false;
  }
  out.pass = out.terminated && out.rounds <= out.round_limit;
  return out;
}

// ---------------------------------------------------------------------------
// Particle-sum simplification of the potential and interaction terms.

struct ParticleSumCase {
  std::string term;
  int dim = 1;
  double exact = 0.0;
  double particle_sum = 0.0;
  double bound = 0.0;
  bool pass = false;
};

inline constexpr double kParticleSumQuadratureTolerance = 1e-6;

inline ParticleSumCase particle_sum_case(bool interaction, int dim, std::uint64_t seed, std::size_t n = 32, double h = 0.1) {
  Box bounds(static_cast<std::size_t>(dim), {0.0, 1.0});
  EnergySpec spec;
  spec.domain = Domain::box(bounds);
  spec.law = InternalEnergyLaw::entropy();
  spec.potential = Potential::zero(dim);
  if (interaction) {
    spec.interaction = Interaction::quadratic(0.5);
  } else {
    spec.potential = Potential::quadratic(2.0, Point(static_cast<std::size_t>(dim), 0.3));
  }
  const Kernel kernel = Kernel::epanechnikov(dim);
  Rng rng(Rng::derive(seed, interaction ? 2 : 1));
  const ParticleConfiguration y = detail::uniform_cloud(n, dim, rng);
  const KdeMeasure mu(y, h, kernel);
  const auto bounds_pair = particle_sum_bounds(spec, kernel, h);
  ParticleSumCase c;
  c.term = interaction ? "W" : "V";
  c.dim = dim;
  if (interaction) {
    c.exact = interaction_energy(mu, spec.interaction, EnergyMode::Exact, spec.domain, spec.quadrature);
    c.particle_sum = interaction_energy(mu, spec.interaction, EnergyMode::ParticleSum, spec.domain, spec.quadrature);
    c.bound = bounds_pair.interaction;
  } else {
    c.exact = potential_energy(mu, spec.potential, EnergyMode::Exact, spec.domain, spec.quadrature);
    c.particle_sum = potential_energy(mu, spec.potential, EnergyMode::ParticleSum, spec.domain, spec.quadrature);
    c.bound = bounds_pair.potential;
  }
  c.pass = std::abs(c.exact - c.particle_sum) <= c.bound + kParticleSumQuadratureTolerance;
  return c;
}

// ---------------------------------------------------------------------------
// KDE sup-norm error against the smoothed truth, versus the rate function.

struct RateRow {
  double n = 0.0;
  double h = 0.0;
  double rate = 0.0;
  /// Per seed sup-norm errors on the evaluation lattice.
  std::vector<double> errors;
};

struct RateOptions {
  std::vector<double> sizes{1e3, 1e4, 1e5};
  std::size_t seeds = 10;
  std::size_t lattice_points = 401;
  double sigma = 0.25;
  std::uint64_t seed = 11;
};

inline std::vector<RateRow> run_rate_study(const RateOptions& opt = {}) {
  const Domain dom = Domain::box({{-1.0, 1.0}});
  const InitialDensity rho = InitialDensity::trunc_gauss(dom, {0.0}, opt.sigma);
  const Kernel kernel = Kernel::epanechnikov(1);
  std::vector<RateRow> rows;
  for (double n : opt.sizes) {
    RateRow row;
    row.n = n;
    row.h = default_bandwidth(n, 1);
    row.rate = kde_rate(n, row.h, default_failure_probability(n), 1);
    std::vector<double> xs, truth;
    for (std::size_t j = 0; j < opt.lattice_points; ++j) {
      const double x = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(opt.lattice_points - 1);
      xs.push_back(x);
      truth.push_back(smoothed_truth(kernel, row.h, rho, std::span<const double>(&x, 1)));
    }
    for (std::size_t s = 0; s < opt.seeds; ++s) {
      const ParticleConfiguration y = sample_initial(rho, static_cast<std::size_t>(n), Rng::derive(opt.seed, s));
      const KdeMeasure mu(y, row.h, kernel);
      double err = 0.0;
      for (std::size_t j = 0; j < xs.size(); ++j) {
        err = std::max(err, std::abs(mu.density(std::span<const double>(&xs[j], 1)) - truth[j]));
      }
      row.errors.push_back(err);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Schedules used by the checker.

/// n(tau) = ceil(1/tau) with the default bandwidth map; the sample size
/// grows too slowly for the concentration condition.
inline ScheduleValues adversarial_schedule(double tau, int d) {
  const double n = std::ceil(1.0 / tau - 1e-12);
  const double h = default_bandwidth(n, d);
  return {tau, n, h, 0.05 * std::pow(h, d + 1), GammaSchedule::power(1.5)};
}

}  // namespace kdeflow::harness
