#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "kdeflow/common.hpp"
#include "kdeflow/domain.hpp"
#include "kdeflow/energy.hpp"
#include "kdeflow/kde.hpp"
#include "kdeflow/scheme.hpp"

namespace kdeflow {

inline constexpr std::size_t kOracleBudget = 1000000;

struct OracleResult {
  ParticleConfiguration argmin;
  double psi = kInfinity;
  std::size_t evaluated = 0;
};

/// Number of candidate configurations |grid|^n, saturating at budget + 1.
inline std::size_t candidate_count(std::size_t grid_size, std::size_t n, std::size_t budget) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (total > (budget + 1) / std::max<std::size_t>(grid_size, 1)) return budget + 1;
    total *= grid_size;
  }
  return total;
}

/// Ground truth for one step at toy scale: the minimum of Psi(tau, y, Z)
/// over every Z in grid^n. Candidates are visited in lexicographic order of
/// grid indices (last particle fastest); the first minimum wins ties. When
/// cap > 0, candidates whose lattice sup-norm exceeds it are skipped.
inline OracleResult oracle_exhaustive_step(double tau, const ParticleConfiguration& y, const CoveringGrid& grid,
                                           const EnergySpec& spec, const Kernel& kernel, double h, double p,
                                           double cap = 0.0, std::size_t budget = kOracleBudget) {
  const std::size_t n = y.size();
  const std::size_t count = candidate_count(grid.size(), n, budget);
  if (count > budget) {
    std::ostringstream os;
    os << "oracle budget exceeded: |grid|^n > " << budget;
    throw ConfigError(os.str());
  }
  const int d = y.dim();
  const double weight = 1.0 / (p * std::pow(tau, p - 1.0));
  std::optional<QuadratureLattice> lattice;
  if (cap > 0.0) lattice.emplace(spec.domain, h, spec.quadrature.resolve(h));

  OracleResult best;
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> coords(n * static_cast<std::size_t>(d));
  while (true) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = grid.point(idx[i]);
      std::copy(g.begin(), g.end(), coords.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    ParticleConfiguration z(d, coords);
    ++best.evaluated;
    bool admissible = true;
    if (lattice) {
      const auto sums = rasterize(z, h, kernel, *lattice);
      admissible = *std::max_element(sums.begin(), sums.end()) / static_cast<double>(n) <= cap;
    }
    if (admissible) {
      const double value = total_energy(z, h, kernel, spec) + weight * mean_displacement_p(y, z, p);
      if (value < best.psi) {
        best.psi = value;
        best.argmin = std::move(z);
      }
    }
    std::size_t k = n;
    while (k > 0 && ++idx[k - 1] == grid.size()) {
      idx[k - 1] = 0;
      --k;
    }
    if (k == 0) break;
  }
  return best;
}

}  // namespace kdeflow
