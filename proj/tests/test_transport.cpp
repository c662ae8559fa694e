#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "kdeflow/harness/checks.hpp"
#include "kdeflow/transport.hpp"

using namespace kdeflow;

namespace {

ParticleConfiguration cloud(std::size_t n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> c(n * static_cast<std::size_t>(d));
  for (double& v : c) v = rng.uniform();
  return ParticleConfiguration(d, std::move(c));
}

DiscreteMeasure weighted(const std::vector<double>& pts, const std::vector<double>& w) { return DiscreteMeasure(1, pts, w); }

// W_1 on the line as the integral of |F - G|.
double w1_cdf(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  std::vector<std::pair<double, double>> ev;
  for (std::size_t i = 0; i < a.size(); ++i) ev.emplace_back(a.point(i)[0], a.weight(i));
  for (std::size_t j = 0; j < b.size(); ++j) ev.emplace_back(b.point(j)[0], -b.weight(j));
  std::sort(ev.begin(), ev.end());
  double diff = 0.0, total = 0.0;
  for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
    diff += ev[k].second;
    total += std::abs(diff) * (ev[k + 1].first - ev[k].first);
  }
  return total;
}

}  // namespace

TEST(ParticleDistance, Basics) {
  const ParticleConfiguration y(1, {0.0, 1.0});
  EXPECT_EQ(particle_distance_p(y, y, 2.0), 0.0);
  const ParticleConfiguration z(1, {3.0, 5.0});
  EXPECT_NEAR(particle_distance_p(y, z, 2.0), std::sqrt(25.0 / 2.0), 1e-15);
  EXPECT_THROW(particle_distance_p(y, ParticleConfiguration(1, {0.0}), 2.0), ConfigError);
}

TEST(ParticleDistance, TriangleInequality) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto a = cloud(10, 2, 3 * s), b = cloud(10, 2, 3 * s + 1), c = cloud(10, 2, 3 * s + 2);
    for (double p : {1.5, 2.0, 3.0}) {
      EXPECT_LE(particle_distance_p(a, c, p), particle_distance_p(a, b, p) + particle_distance_p(b, c, p) + 1e-12);
    }
  }
}

TEST(DiscreteMeasure, Validation) {
  EXPECT_THROW(weighted({0.0, 1.0}, {0.5, 0.6}), ConfigError);
  EXPECT_THROW(weighted({0.0, 1.0}, {1.5, -0.5}), ConfigError);
  EXPECT_THROW(weighted({0.0, 1.0}, {1.0}), ConfigError);
  EXPECT_TRUE(DiscreteMeasure::empirical(cloud(4, 1, 1)).uniform());
}

TEST(WassersteinExact, IdenticalMeasures) {
  const auto mu = DiscreteMeasure::empirical(cloud(20, 2, 5));
  EXPECT_NEAR(wasserstein_exact(mu, mu, 2.0), 0.0, 1e-12);
}

TEST(WassersteinExact, TwoDiracs) {
  const DiscreteMeasure a(2, {0.0, 0.0}, {1.0}), b(2, {3.0, 4.0}, {1.0});
  EXPECT_NEAR(wasserstein_exact(a, b, 2.0), 5.0, 1e-12);
  EXPECT_NEAR(wasserstein_exact(a, b, 3.0), 5.0, 1e-12);
}

TEST(WassersteinExact, OneDimensionalSortedCoupling) {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = t == 0 ? 3 : 3 + rng.below(30);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    for (auto& v : y) v = rng.uniform(-0.5, 2.0);
    const auto mu = DiscreteMeasure::empirical(ParticleConfiguration(1, x));
    const auto nu = DiscreteMeasure::empirical(ParticleConfiguration(1, y));
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    for (double p : {1.0, 2.0, 3.0}) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::pow(std::abs(x[i] - y[i]), p);
      EXPECT_NEAR(wasserstein_exact(mu, nu, p), std::pow(s / n, 1.0 / p), 1e-9);
    }
  }
}

TEST(WassersteinExact, GeneralWeightsMatchCdfFormula) {
  Rng rng(8);
  for (int t = 0; t < 40; ++t) {
    const std::size_t na = 1 + rng.below(12), nb = 1 + rng.below(12);
    std::vector<double> pa(na), pb(nb), wa(na), wb(nb);
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < na; ++i) {
      pa[i] = rng.uniform(0.0, 3.0);
      wa[i] = rng.uniform(0.1, 1.0);
      sa += wa[i];
    }
    for (std::size_t j = 0; j < nb; ++j) {
      pb[j] = rng.uniform(-1.0, 2.0);
      wb[j] = rng.uniform(0.1, 1.0);
      sb += wb[j];
    }
    for (auto& w : wa) w /= sa;
    for (auto& w : wb) w /= sb;
    // Renormalize once more so the sums hit 1 to rounding.
    wa.back() = 1.0 - std::accumulate(wa.begin(), wa.end() - 1, 0.0);
    wb.back() = 1.0 - std::accumulate(wb.begin(), wb.end() - 1, 0.0);
    const auto a = weighted(pa, wa), b = weighted(pb, wb);
    EXPECT_NEAR(wasserstein_exact(a, b, 1.0), w1_cdf(a, b), 1e-9);
  }
}

TEST(WassersteinExact, MetricProperties) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto a = DiscreteMeasure::empirical(cloud(12, 2, 10 * s));
    const auto b = DiscreteMeasure::empirical(cloud(12, 2, 10 * s + 1));
    const auto c = DiscreteMeasure::empirical(cloud(12, 2, 10 * s + 2));
    const double ab = wasserstein_exact(a, b, 2.0), ba = wasserstein_exact(b, a, 2.0);
    EXPECT_NEAR(ab, ba, 1e-9);
    EXPECT_LE(wasserstein_exact(a, c, 2.0), ab + wasserstein_exact(b, c, 2.0) + 1e-9);
  }
}

TEST(WassersteinExact, BoundedByParticleDistance) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto y = cloud(15, 2, 7 * s), z = cloud(15, 2, 7 * s + 1);
    EXPECT_LE(wasserstein_exact(DiscreteMeasure::empirical(y), DiscreteMeasure::empirical(z), 2.0),
              particle_distance_p(y, z, 2.0) + 1e-12);
  }
}

TEST(WassersteinExact, SizeGate) {
  const auto big = DiscreteMeasure::empirical(cloud(kExactTransportLimit + 1, 1, 1));
  try {
    wasserstein_exact(big, big, 2.0);
    FAIL() << "expected the validation-scale gate";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("exact OT restricted to validation scale"), std::string::npos);
  }
}

TEST(MixtureEstimate, IdenticalMixturesGiveZero) {
  const KdeMeasure a(cloud(20, 1, 4), 0.1, Kernel::epanechnikov(1));
  const MixtureEstimate e = mixture_wasserstein_estimate(a, a, 64, 9);
  EXPECT_EQ(e.values.size(), 8u);
  for (double v : e.values) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(MixtureEstimate, TranslationGivesShiftLength) {
  const ParticleConfiguration y = cloud(20, 2, 4);
  std::vector<double> c(y.coords());
  for (std::size_t i = 0; i < c.size(); i += 2) {
    c[i] += 0.3;
    c[i + 1] -= 0.4;
  }
  const KdeMeasure a(y, 0.1, Kernel::epanechnikov(2)), b(ParticleConfiguration(2, c), 0.1, Kernel::epanechnikov(2));
  const MixtureEstimate e = mixture_wasserstein_estimate(a, b, 64, 10);
  for (double v : e.values) EXPECT_NEAR(v, 0.5, 1e-9);
}

TEST(MixtureEstimate, SampleGate) {
  const KdeMeasure a(cloud(5, 1, 4), 0.1, Kernel::epanechnikov(1));
  EXPECT_THROW(mixture_wasserstein_estimate(a, a, 513, 1), ConfigError);
}

TEST(CouplingBound, HoldsOnRandomPairs) {
  harness::BoundCheckOptions opt;
  opt.samples = 64;
  for (int d : {1, 2}) {
    for (const auto& c : harness::run_bound_check(10, d, opt)) {
      EXPECT_TRUE(c.pass) << "seed " << c.seed << " d=" << d << " estimate " << c.estimate << " bound " << c.bound;
    }
  }
}

namespace {

struct GapFixture {
  CoveringGrid grid = build_grid(Domain::box({{0.0, 1.0}}), 0.18);
  EnergySpec spec;
  Kernel kernel = Kernel::epanechnikov(1);
  SchemeParams params;
  GapFixture() {
    spec.domain = Domain::box({{0.0, 1.0}});
    params.h = 0.3;
    params.n = 2;
  }
};

}  // namespace

TEST(YosidaGap, NonNegative) {
  GapFixture f;
  const ParticleConfiguration y(1, {0.1, 0.9});
  const YosidaGap g = moreau_yosida_gap(0.1, y, f.params, f.spec, f.kernel, f.grid);
  EXPECT_GE(g.gap, 0.0);
  EXPECT_TRUE(g.exhaustive);
  EXPECT_LE(g.yosida_value, g.energy);
}

TEST(YosidaGap, MonotoneInTau) {
  GapFixture f;
  f.spec.potential = Potential::quadratic(3.0, {0.2});
  const ParticleConfiguration y(1, {0.6, 0.85});
  for (double tau : {0.01, 0.05, 0.1}) {
    const double g1 = moreau_yosida_gap(tau, y, f.params, f.spec, f.kernel, f.grid).gap;
    const double g2 = moreau_yosida_gap(2 * tau, y, f.params, f.spec, f.kernel, f.grid).gap;
    EXPECT_GE(g2 * 2 * tau, g1 * tau - 1e-12);
  }
}

TEST(YosidaGap, NearUniformFixedPointIsSmall) {
  GapFixture f;
  f.params.n = 3;
  // Three particles spread over [0, 1] sit close to the discrete entropy minimizer.
  ParticleConfiguration y(1, {f.grid.point(1)[0], f.grid.point(3)[0], f.grid.point(5)[0]});
  // Walk to the grid fixed point first.
  SchemeParams p = f.params;
  p.tau = 0.05;
  p.grid_omega = f.grid.spacing();
  p.allow_coarse_grid = true;
  p.optimizer.mode = OptimizerMode::GridCoordinateDescent;
  const Trajectory tr = run_scheme(p, f.spec, f.kernel, y, 10.0, &f.grid);
  y = tr.final_state();
  const YosidaGap g = moreau_yosida_gap(0.05, y, f.params, f.spec, f.kernel, f.grid);
  EXPECT_GE(g.gap, 0.0);
  EXPECT_LT(g.gap, 1e-2);
}

TEST(YosidaGap, FallsBackToOptimizerOnLargeGrids) {
  GapFixture f;
  f.params.n = 4;
  const CoveringGrid fine = build_grid(Domain::box({{0.0, 1.0}}), 0.02);
  ASSERT_GT(candidate_count(fine.size(), 4, kOracleBudget), kOracleBudget);
  const ParticleConfiguration y(1, {0.1, 0.2, 0.3, 0.4});
  const YosidaGap g = moreau_yosida_gap(0.05, y, f.params, f.spec, f.kernel, fine);
  EXPECT_FALSE(g.exhaustive);
  EXPECT_GE(g.gap, 0.0);
  EXPECT_EQ(g.label(), "upper-bound-of-Yosida => lower-bound-of-gap");
}
