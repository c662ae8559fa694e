#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "kdeflow/common.hpp"
#include "kdeflow/domain.hpp"
#include "kdeflow/energy.hpp"
#include "kdeflow/kde.hpp"
#include "kdeflow/oracle.hpp"
#include "kdeflow/scheme.hpp"

namespace kdeflow {

/// ((1/n) sum_i |y_i - z_i|^p)^{1/p}.
inline double particle_distance_p(const ParticleConfiguration& y, const ParticleConfiguration& z, double p) {
  return std::pow(mean_displacement_p(y, z, p), 1.0 / p);
}

/// Finitely supported probability measure. Duplicate points are allowed.
class DiscreteMeasure {
 public:
  DiscreteMeasure(int dim, std::vector<double> coords, std::vector<double> weights)
      : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
    if (coords_.size() != weights_.size() * static_cast<std::size_t>(dim)) {
      throw ConfigError("discrete measure: point and weight counts differ");
    }
    double s = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw ConfigError("discrete measure: weights must be nonnegative");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-12) throw ConfigError("discrete measure: weights must sum to 1");
  }

  /// Uniform weights 1/n on the points of a configuration.
  static DiscreteMeasure empirical(const ParticleConfiguration& config) {
    const std::size_t n = config.size();
    return DiscreteMeasure(config.dim(), config.coords(), std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  ConstPoint point(std::size_t i) const {
    return ConstPoint(coords_).subspan(i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_));
  }
  double weight(std::size_t i) const { return weights_[i]; }

  bool uniform() const {
    const double w = 1.0 / static_cast<double>(size());
    return std::all_of(weights_.begin(), weights_.end(), [&](double v) { return std::abs(v - w) <= 1e-15; });
  }

 private:
  int dim_;
  std::vector<double> coords_;
  std::vector<double> weights_;
};

/// Minimum-cost perfect matching on a dense square cost matrix
/// (Hungarian method with potentials, O(n^3)). Returns row -> column.
inline std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n, double* total = nullptr) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  if (total != nullptr) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i * n + row_to_col[i]];
    *total = s;
  }
  return row_to_col;
}

/// Minimum-cost transport plan between supplies a and demands b on a dense
/// cost matrix, by successive shortest augmenting paths with potentials.
/// Returns the optimal cost.
inline double solve_transport(const std::vector<double>& cost, const std::vector<double>& a,
                              const std::vector<double>& b) {
  const std::size_t ns = a.size(), nt = b.size();
  constexpr double eps = 1e-15;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> supply(a), demand(b);
  std::vector<double> flow(ns * nt, 0.0);
  std::vector<double> pot_s(ns, 0.0), pot_t(nt, 0.0);
  std::vector<double> dist_s(ns), dist_t(nt);
  std::vector<char> done_s(ns), done_t(nt);
  std::vector<std::int64_t> pred_t(nt), pred_s(ns);  // pred_t: source index; pred_s: sink index or -1

  auto remaining = [&] {
    double s = 0.0;
    for (double v : supply) s += v;
    return s;
  };

  std::size_t guard = 0;
  while (remaining() > eps && ++guard < 64 * (ns + nt) * (ns + nt)) {
    // Dense Dijkstra over reduced costs from every source with supply.
    std::fill(dist_s.begin(), dist_s.end(), inf);
    std::fill(dist_t.begin(), dist_t.end(), inf);
    std::fill(done_s.begin(), done_s.end(), 0);
    std::fill(done_t.begin(), done_t.end(), 0);
    for (std::size_t i = 0; i < ns; ++i) {
      if (supply[i] > eps) {
        dist_s[i] = 0.0;
        pred_s[i] = -1;
      }
    }
    std::int64_t target = -1;
    while (true) {
      // Pick the closest unsettled node (sources first on ties).
      double best = inf;
      std::int64_t pick = -1;
      bool pick_source = true;
      for (std::size_t i = 0; i < ns; ++i) {
        if (!done_s[i] && dist_s[i] < best) {
          best = dist_s[i];
          pick = static_cast<std::int64_t>(i);
          pick_source = true;
        }
      }
      for (std::size_t j = 0; j < nt; ++j) {
        if (!done_t[j] && dist_t[j] < best) {
          best = dist_t[j];
          pick = static_cast<std::int64_t>(j);
          pick_source = false;
        }
      }
      if (pick < 0) break;
      if (pick_source) {
        const auto i = static_cast<std::size_t>(pick);
        done_s[i] = 1;
        for (std::size_t j = 0; j < nt; ++j) {
          if (done_t[j]) continue;
          const double rc = std::max(0.0, cost[i * nt + j] + pot_s[i] - pot_t[j]);
          if (dist_s[i] + rc < dist_t[j]) {
            dist_t[j] = dist_s[i] + rc;
            pred_t[j] = static_cast<std::int64_t>(i);
          }
        }
      } else {
        const auto j = static_cast<std::size_t>(pick);
        done_t[j] = 1;
        if (demand[j] > eps) {
          target = static_cast<std::int64_t>(j);
          break;
        }
        for (std::size_t i = 0; i < ns; ++i) {
          if (done_s[i] || flow[i * nt + j] <= eps) continue;
          const double rc = std::max(0.0, -cost[i * nt + j] + pot_t[j] - pot_s[i]);
          if (dist_t[j] + rc < dist_s[i]) {
            dist_s[i] = dist_t[j] + rc;
            pred_s[i] = static_cast<std::int64_t>(j);
          }
        }
      }
    }
    if (target < 0) throw RuntimeFailure("transport solver: no augmenting path (unbalanced masses)");
    const double reach = dist_t[static_cast<std::size_t>(target)];
    for (std::size_t i = 0; i < ns; ++i) pot_s[i] += done_s[i] ? dist_s[i] - reach : 0.0;
    for (std::size_t j = 0; j < nt; ++j) pot_t[j] += done_t[j] ? dist_t[j] - reach : 0.0;

    // Bottleneck along the path: sink demand, reverse flows, source supply.
    double amount = demand[static_cast<std::size_t>(target)];
    std::size_t j = static_cast<std::size_t>(target);
    std::size_t i = static_cast<std::size_t>(pred_t[j]);
    while (true) {
      if (pred_s[i] < 0) {
        amount = std::min(amount, supply[i]);
        break;
      }
      const auto jj = static_cast<std::size_t>(pred_s[i]);
      amount = std::min(amount, flow[i * nt + jj]);
      i = static_cast<std::size_t>(pred_t[jj]);
    }
    j = static_cast<std::size_t>(target);
    i = static_cast<std::size_t>(pred_t[j]);
    demand[j] -= amount;
    flow[i * nt + j] += amount;
    while (pred_s[i] >= 0) {
      const auto jj = static_cast<std::size_t>(pred_s[i]);
      flow[i * nt + jj] -= amount;
      i = static_cast<std::size_t>(pred_t[jj]);
      flow[i * nt + jj] += amount;
    }
    supply[i] -= amount;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < flow.size(); ++k) total += flow[k] * cost[k];
  return total;
}

inline constexpr std::size_t kExactTransportLimit = 512;

/// Exact W_p between discrete measures (validation scale only).
inline double wasserstein_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  if (mu.size() > kExactTransportLimit || nu.size() > kExactTransportLimit) {
    throw ConfigError("exact OT restricted to validation scale (at most 512 points per measure)");
  }
  if (mu.dim() != nu.dim()) throw ConfigError("wasserstein_exact: dimension mismatch");
  const std::size_t ns = mu.size(), nt = nu.size();
  std::vector<double> cost(ns * nt);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) cost[i * nt + j] = std::pow(distance(mu.point(i), nu.point(j)), p);
  }
  double total = 0.0;
  if (ns == nt && mu.uniform() && nu.uniform()) {
    solve_assignment(cost, ns, &total);
    total /= static_cast<double>(ns);
  } else {
    std::vector<double> a(ns), b(nt);
    for (std::size_t i = 0; i < ns; ++i) a[i] = mu.weight(i);
    for (std::size_t j = 0; j < nt; ++j) b[j] = nu.weight(j);
    total = solve_transport(cost, a, b);
  }
  return std::pow(std::max(total, 0.0), 1.0 / p);
}

struct MixtureEstimate {
  std::vector<double> values;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  /// max - min over the repetitions.
  double spread() const { return max - min; }
};

/// Monte-Carlo W_p between two mixtures: m draws from each (particle index
/// uniform, then a kernel offset), exact W_p between the two clouds, over 8
/// repetitions. Both clouds use the same random numbers, so identical
/// mixtures give 0 and a rigid translation gives exactly its length.
inline MixtureEstimate mixture_wasserstein_estimate(const KdeMeasure& a, const KdeMeasure& b, std::size_t m,
                                                    std::uint64_t seed, double p = 2.0, std::size_t repetitions = 8) {
  if (m < 1 || m > kExactTransportLimit) throw ConfigError("mixture estimate: need 1 <= m <= 512 samples");
  if (a.dim() != b.dim()) throw ConfigError("mixture estimate: dimension mismatch");
  const int d = a.dim();
  const bool shared_kernel = a.kernel().family() == b.kernel().family() && a.kernel().family() != Kernel::Family::Custom;
  MixtureEstimate est;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    Rng rng(Rng::derive(seed, rep));
    std::vector<double> ca, cb;
    ca.reserve(m * static_cast<std::size_t>(d));
    cb.reserve(m * static_cast<std::size_t>(d));
    for (std::size_t s = 0; s < m; ++s) {
      const double u = rng.uniform();
      const auto ia = std::min(static_cast<std::size_t>(u * static_cast<double>(a.config().size())), a.config().size() - 1);
      const auto ib = std::min(static_cast<std::size_t>(u * static_cast<double>(b.config().size())), b.config().size() - 1);
      const Point xa = sample_kernel(a.kernel(), rng);
      const Point xb = shared_kernel ? xa : sample_kernel(b.kernel(), rng);
      for (int k = 0; k < d; ++k) {
        ca.push_back(a.config().point(ia)[k] + a.bandwidth() * xa[k]);
        cb.push_back(b.config().point(ib)[k] + b.bandwidth() * xb[k]);
      }
    }
    const std::vector<double> w(m, 1.0 / static_cast<double>(m));
    est.values.push_back(wasserstein_exact(DiscreteMeasure(d, std::move(ca), w), DiscreteMeasure(d, std::move(cb), w), p));
  }
  est.min = *std::min_element(est.values.begin(), est.values.end());
  est.max = *std::max_element(est.values.begin(), est.values.end());
  double s = 0.0;
  for (double v : est.values) s += v;
  est.mean = s / static_cast<double>(est.values.size());
  return est;
}

struct YosidaGap {
  double gap = 0.0;
  double yosida_value = 0.0;
  double energy = 0.0;
  /// False when the minimum came from the step optimizer; the gap is then
  /// only a lower bound.
  bool exhaustive = true;
  std::string label() const { return exhaustive ? "exact-on-grid" : "upper-bound-of-Yosida => lower-bound-of-gap"; }
};

/// (phi_n(Y) - min_Z [phi_n(Z) + (1/(p tau^{p-1})) d_p(Y, Z)^p]) / tau with Z over
/// candidate_grid^n plus Z = Y.
inline YosidaGap moreau_yosida_gap(double tau, const ParticleConfiguration& y, const SchemeParams& params,
                                   const EnergySpec& spec, const Kernel& kernel, const CoveringGrid& candidate_grid) {
  YosidaGap out;
  out.energy = total_energy(y, params.h, kernel, spec);
  double best = out.energy;
  if (candidate_count(candidate_grid.size(), y.size(), kOracleBudget) <= kOracleBudget) {
    const auto res = oracle_exhaustive_step(tau, y, candidate_grid, spec, kernel, params.h, params.p);
    best = std::min(best, res.psi);
  } else {
    out.exhaustive = false;
    SchemeParams local = params;
    local.tau = tau;
    local.optimizer.mode = OptimizerMode::GridCoordinateDescent;
    local.grid_omega = candidate_grid.spacing();
    local.allow_coarse_grid = true;
    const auto step = relaxed_step(y, 1, local, spec, kernel, &candidate_grid);
    best = std::min(best, step.record.psi_after);
  }
  out.yosida_value = best;
  out.gap = std::max(0.0, (out.energy - best) / tau);
  return out;
}

}  // namespace kdeflow
