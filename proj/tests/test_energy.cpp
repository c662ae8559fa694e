#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kdeflow/energy.hpp"

using namespace kdeflow;

namespace {

ParticleConfiguration cloud(std::size_t n, int d, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> c(n * static_cast<std::size_t>(d));
  for (double& v : c) v = rng.uniform(lo, hi);
  return ParticleConfiguration(d, std::move(c));
}

EnergySpec spec_on(const Domain& dom, InternalEnergyLaw law = InternalEnergyLaw::entropy()) {
  EnergySpec s;
  s.domain = dom;
  s.law = law;
  s.potential = Potential::zero(dom.dim());
  return s;
}

// Single fused pass over the quadrature lattice: F(u) + V u per node, then
// the interaction double sum over the same nodes.
double fused_energy(const ParticleConfiguration& y, double h, const Kernel& k, const EnergySpec& spec) {
  const QuadratureLattice lat(spec.domain, h, spec.quadrature.resolve(h));
  const std::size_t n = y.size();
  std::vector<double> u(lat.size());
  std::vector<Point> nodes(lat.size());
  double total = 0.0;
  for (std::size_t j = 0; j < lat.size(); ++j) {
    nodes[j] = lat.node(j);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Point diff(nodes[j]);
      for (int a = 0; a < y.dim(); ++a) diff[a] -= y.point(i)[a];
      s += k.eval_scaled(h, diff);
    }
    u[j] = s / static_cast<double>(n);
    total += (spec.law(u[j]) + spec.potential(nodes[j]) * u[j]) * lat.cell_volume();
  }
  if (!spec.interaction.is_none()) {
    double w = 0.0;
    for (std::size_t a = 0; a < lat.size(); ++a) {
      for (std::size_t b = 0; b < lat.size(); ++b) {
        Point z(nodes[a]);
        for (int c = 0; c < y.dim(); ++c) z[c] -= nodes[b][c];
        w += spec.interaction(z) * u[a] * u[b];
      }
    }
    total += 0.5 * w * lat.cell_volume() * lat.cell_volume();
  }
  return total;
}

}  // namespace

TEST(InternalEnergyLaw, Values) {
  const auto e = InternalEnergyLaw::entropy();
  EXPECT_EQ(e(0.0), 0.0);
  EXPECT_DOUBLE_EQ(e(std::exp(1.0)), std::exp(1.0));
  const auto p = InternalEnergyLaw::power(2.0);
  EXPECT_DOUBLE_EQ(p(3.0), 9.0);
  EXPECT_THROW(InternalEnergyLaw::power(1.0), ConfigError);
  EXPECT_THROW(InternalEnergyLaw::power(-2.0), ConfigError);
}

TEST(InternalEnergyLaw, Superlinearity) {
  for (const auto& law : {InternalEnergyLaw::entropy(), InternalEnergyLaw::power(2.0), InternalEnergyLaw::power(1.3)}) {
    EXPECT_TRUE(law.superlinear());
    EXPECT_LT(law(1e2) / 1e2, law(1e4) / 1e4);
    EXPECT_LT(law(1e4) / 1e4, law(1e6) / 1e6);
  }
  EXPECT_FALSE(InternalEnergyLaw::power(0.5).superlinear());
}

TEST(InternalEnergyLaw, DoublingCondition) {
  Rng rng(8);
  for (const auto& law : {InternalEnergyLaw::entropy(), InternalEnergyLaw::power(2.0), InternalEnergyLaw::power(3.5)}) {
    const double C = law.doubling_constant();
    for (int t = 0; t < 5000; ++t) {
      const double r = std::exp(rng.uniform(-10.0, 8.0)), s = std::exp(rng.uniform(-10.0, 8.0));
      EXPECT_LE(law(r + s), C * (1.0 + law(r) + law(s)) * (1.0 + 1e-12)) << law.name() << " r=" << r << " s=" << s;
    }
  }
}

TEST(InternalEnergyLaw, IncrementIsAccurate) {
  const auto e = InternalEnergyLaw::entropy();
  const auto p = InternalEnergyLaw::power(2.0);
  EXPECT_NEAR(e.increment(2.0, 0.5), e(2.5) - e(2.0), 1e-14);
  EXPECT_NEAR(p.increment(2.0, 0.5), p(2.5) - p(2.0), 1e-14);
  EXPECT_NEAR(e.increment(1.0, 1e-12), 1e-12, 1e-20);
}

TEST(Pressure, ClosedForms) {
  EXPECT_DOUBLE_EQ(pressure(InternalEnergyLaw::entropy(), 1.0), 1.0);
  EXPECT_DOUBLE_EQ(pressure(InternalEnergyLaw::power(2.0), 3.0), 9.0);
  EXPECT_EQ(pressure(InternalEnergyLaw::entropy(), 0.0), 0.0);
  EXPECT_EQ(pressure(InternalEnergyLaw::power(3.0), 0.0), 0.0);
}

TEST(Pressure, MatchesDerivativeDefinition) {
  for (const auto& law : {InternalEnergyLaw::entropy(), InternalEnergyLaw::power(1.5), InternalEnergyLaw::power(0.6)}) {
    for (double s : {0.1, 0.7, 2.0, 11.0}) {
      // Central difference for F'.
      const double eps = 1e-6 * s;
      const double fp = (law(s + eps) - law(s - eps)) / (2 * eps);
      EXPECT_NEAR(pressure(law, s), s * fp - law(s), 1e-6 * std::max(1.0, std::abs(pressure(law, s))));
    }
  }
}

TEST(Potential, Evaluation) {
  EXPECT_DOUBLE_EQ(Potential::quadratic(2.0, {1.0})(Point{3.0}), 4.0);
  EXPECT_DOUBLE_EQ(Potential::double_well(1.0, 1.0, {0.0})(Point{1.0}), 0.0);
  EXPECT_DOUBLE_EQ(Potential::double_well(1.0, 1.0, {0.0})(Point{0.0}), 1.0);
  EXPECT_DOUBLE_EQ(Potential::constant(2.5, 2)(Point{0.3, 9.0}), 2.5);
  EXPECT_DOUBLE_EQ(Potential::linear({1.0, -2.0})(Point{3.0, 1.0}), 1.0);
}

TEST(Potential, LipschitzBoundHoldsOnBox) {
  const Box box{{-1.0, 2.0}, {0.0, 1.0}};
  Rng rng(12);
  for (const auto& v : {Potential::quadratic(3.0, {0.5, 0.5}), Potential::double_well(0.7, 0.4, {0.0, 0.2}),
                        Potential::linear({2.0, -1.0}), Potential::constant(4.0, 2)}) {
    const double L = v.lipschitz(box);
    for (int t = 0; t < 2000; ++t) {
      const Point x{rng.uniform(-1.0, 2.0), rng.uniform(0.0, 1.0)};
      const Point y{rng.uniform(-1.0, 2.0), rng.uniform(0.0, 1.0)};
      EXPECT_LE(std::abs(v(x) - v(y)), L * distance(x, y) * (1 + 1e-12) + 1e-14);
    }
  }
}

TEST(Interaction, EvenAndLipschitz) {
  const Interaction w = Interaction::quadratic(0.8);
  const Box box{{0.0, 1.0}, {0.0, 2.0}};
  const double L = w.lipschitz(box);
  Rng rng(4);
  for (int t = 0; t < 2000; ++t) {
    const Point z{rng.uniform(-1.0, 1.0), rng.uniform(-2.0, 2.0)};
    const Point mz{-z[0], -z[1]};
    EXPECT_EQ(w(z), w(mz));
    const Point z2{rng.uniform(-1.0, 1.0), rng.uniform(-2.0, 2.0)};
    EXPECT_LE(std::abs(w(z) - w(z2)), L * distance(z, z2) * (1 + 1e-12));
  }
  EXPECT_THROW(Interaction::quadratic(-1.0), ConfigError);
}

TEST(Quadrature, PitchInvariant) {
  QuadratureSpec q;
  EXPECT_DOUBLE_EQ(q.resolve(0.4), 0.05);
  q.pitch = 0.2;
  EXPECT_THROW(q.resolve(0.4), ConfigError);
  q.pitch = 0.1;
  EXPECT_DOUBLE_EQ(q.resolve(0.4), 0.1);
}

TEST(Quadrature, LatticeCoversExtendedBox) {
  const QuadratureLattice lat(Domain::box({{0.0, 1.0}, {0.0, 2.0}}), 0.1, 0.025);
  EXPECT_DOUBLE_EQ(lat.box()[0].first, -0.1);
  EXPECT_DOUBLE_EQ(lat.box()[1].second, 2.1);
  EXPECT_EQ(lat.size(), 48u * 88u);
  EXPECT_NEAR(lat.cell_volume(), 0.025 * 0.025, 1e-15);
  EXPECT_NEAR(lat.node(0)[0], -0.0875, 1e-15);
}

TEST(InternalEnergy, NearlyUniformMixtureHasEntropyNearZero) {
  const std::size_t n = 1000;
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  const Domain dom = Domain::box({{0.0, 1.0}});
  const KdeMeasure mu(ParticleConfiguration(1, c), 0.02, Kernel::epanechnikov(1));
  const double e = internal_energy(mu, InternalEnergyLaw::entropy(), dom, QuadratureSpec{});
  EXPECT_LT(std::abs(e), 0.02);
}

TEST(InternalEnergy, SingleTriangularParticleSquared) {
  const Domain dom = Domain::box({{-1.0, 1.0}});
  const KdeMeasure mu(ParticleConfiguration(1, {0.0}), 1.0, Kernel::triangular(1));
  QuadratureSpec q;
  q.pitch_fraction = 1.0 / 64.0;
  EXPECT_NEAR(internal_energy(mu, InternalEnergyLaw::power(2.0), dom, q), 2.0 / 3.0, 1e-4);
}

TEST(InternalEnergy, OutsideDomainIsInfinite) {
  const Domain dom = Domain::box({{0.0, 1.0}});
  const KdeMeasure mu(ParticleConfiguration(1, {0.5, 1.2}), 0.1, Kernel::epanechnikov(1));
  EXPECT_TRUE(is_infinite(internal_energy(mu, InternalEnergyLaw::entropy(), dom, QuadratureSpec{})));
}

TEST(InternalEnergy, MidpointConvergence) {
  const Domain dom = Domain::box({{0.0, 1.0}});
  const KdeMeasure mu(cloud(12, 1, 0.2, 0.8, 5), 0.2, Kernel::epanechnikov(1));
  const auto law = InternalEnergyLaw::power(2.0);
  std::vector<double> values;
  for (double frac : {1.0 / 4, 1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    QuadratureSpec q;
    q.pitch_fraction = frac;
    values.push_back(internal_energy(mu, law, dom, q));
  }
  for (std::size_t k = 2; k < values.size(); ++k) {
    EXPECT_LT(std::abs(values[k] - values[k - 1]), 4.0 * std::abs(values[k - 1] - values[k - 2]));
  }
  EXPECT_LT(std::abs(values[3] - values[2]), std::abs(values[1] - values[0]));
}

TEST(PotentialEnergy, ConstantPotential) {
  const Domain dom = Domain::box({{0.0, 1.0}});
  const KdeMeasure mu(cloud(10, 1, 0.0, 1.0, 2), 0.1, Kernel::epanechnikov(1));
  const Potential v = Potential::constant(1.75, 1);
  EXPECT_DOUBLE_EQ(potential_energy(mu, v, EnergyMode::ParticleSum, dom, QuadratureSpec{}), 1.75);
  QuadratureSpec fine;
  fine.pitch_fraction = 1.0 / 64.0;
  EXPECT_NEAR(potential_energy(mu, v, EnergyMode::Exact, dom, fine), 1.75, 1e-4);
}

TEST(PotentialEnergy, LinearPotentialSymmetricKernel) {
  const Domain dom = Domain::box({{0.0, 1.0}});
  const KdeMeasure mu(ParticleConfiguration(1, {0.5}), 0.1, Kernel::triangular(1));
  const Potential v = Potential::linear({1.0});
  EXPECT_DOUBLE_EQ(potential_energy(mu, v, EnergyMode::ParticleSum, dom, QuadratureSpec{}), 0.5);
  EXPECT_NEAR(potential_energy(mu, v, EnergyMode::Exact, dom, QuadratureSpec{}), 0.5, 1e-12);
}

TEST(PotentialEnergy, ParticleSumWithinBound) {
  for (int d : {1, 2}) {
    EnergySpec spec = spec_on(Domain::box(Box(static_cast<std::size_t>(d), {0.0, 1.0})));
    spec.potential = Potential::double_well(1.5, 0.3, Point(static_cast<std::size_t>(d), 0.5));
    const Kernel k = Kernel::triangular(d);
    const double h = 0.1;
    const auto bound = particle_sum_bounds(spec, k, h).potential;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const KdeMeasure mu(cloud(16, d, 0.0, 1.0, 100 + s), h, k);
      const double ex = potential_energy(mu, spec.potential, EnergyMode::Exact, spec.domain, spec.quadrature);
      const double ps = potential_energy(mu, spec.potential, EnergyMode::ParticleSum, spec.domain, spec.quadrature);
      EXPECT_LE(std::abs(ex - ps), bound + 1e-6);
    }
  }
}

TEST(InteractionEnergy, NoneIsZero) {
  const Domain dom = Domain::box({{0.0, 1.0}});
  const KdeMeasure mu(cloud(5, 1, 0.0, 1.0, 1), 0.1, Kernel::epanechnikov(1));
  EXPECT_EQ(interaction_energy(mu, Interaction::none(), EnergyMode::ParticleSum, dom, QuadratureSpec{}), 0.0);
  EXPECT_EQ(interaction_energy(mu, Interaction::none(), EnergyMode::Exact, dom, QuadratureSpec{}), 0.0);
}

TEST(InteractionEnergy, TwoParticlePairSum) {
  const Domain dom = Domain::box({{0.0, 1.0}});
  const KdeMeasure mu(ParticleConfiguration(1, {0.0, 1.0}), 0.1, Kernel::epanechnikov(1));
  EXPECT_DOUBLE_EQ(interaction_energy(mu, Interaction::quadratic(1.0), EnergyMode::ParticleSum, dom, QuadratureSpec{}),
                   0.25);
}

TEST(InteractionEnergy, ParticleSumWithinBound) {
  EnergySpec spec = spec_on(Domain::box({{0.0, 1.0}}));
  spec.interaction = Interaction::quadratic(0.7);
  const Kernel k = Kernel::epanechnikov(1);
  const double h = 0.1;
  const double bound = particle_sum_bounds(spec, k, h).interaction;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const KdeMeasure mu(cloud(8, 1, 0.0, 1.0, 500 + s), h, k);
    const double ex = interaction_energy(mu, spec.interaction, EnergyMode::Exact, spec.domain, spec.quadrature);
    const double ps = interaction_energy(mu, spec.interaction, EnergyMode::ParticleSum, spec.domain, spec.quadrature);
    EXPECT_LE(std::abs(ex - ps), bound + 1e-6);
  }
}

TEST(InteractionEnergy, ExactModeIsGated) {
  const Domain dom = Domain::box({{0.0, 1.0}, {0.0, 1.0}});
  const KdeMeasure mu(cloud(5, 2, 0.0, 1.0, 1), 0.05, Kernel::epanechnikov(2));
  try {
    interaction_energy(mu, Interaction::quadratic(1.0), EnergyMode::Exact, dom, QuadratureSpec{});
    FAIL() << "expected a size gate";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("interaction quadrature too large"), std::string::npos);
  }
}

TEST(TotalEnergy, ReducesToInternalWithoutPotentials) {
  const EnergySpec spec = spec_on(Domain::box({{0.0, 1.0}}));
  const ParticleConfiguration y = cloud(30, 1, 0.0, 1.0, 3);
  const Kernel k = Kernel::epanechnikov(1);
  const KdeMeasure mu(y, 0.1, k);
  EXPECT_EQ(total_energy(y, 0.1, k, spec), internal_energy(mu, spec.law, spec.domain, spec.quadrature));
  EXPECT_TRUE(std::isfinite(total_energy(y, 0.1, k, spec)));
}

TEST(TotalEnergy, InfiniteExactlyWhenOutside) {
  const EnergySpec spec = spec_on(Domain::ball({0.0, 0.0}, 1.0));
  const Kernel k = Kernel::epanechnikov(2);
  EXPECT_TRUE(std::isfinite(total_energy(ParticleConfiguration(2, {0.0, 0.0, 0.6, 0.8}), 0.2, k, spec)));
  EXPECT_TRUE(is_infinite(total_energy(ParticleConfiguration(2, {0.0, 0.0, 0.6, 0.81}), 0.2, k, spec)));
}

TEST(TotalEnergy, MatchesFusedLoop) {
  for (int d : {1, 2}) {
    EnergySpec spec = spec_on(Domain::box(Box(static_cast<std::size_t>(d), {0.0, 1.0})), InternalEnergyLaw::power(2.0));
    spec.potential = Potential::quadratic(1.3, Point(static_cast<std::size_t>(d), 0.4));
    if (d == 1) spec.interaction = Interaction::quadratic(0.5);
    spec.mode = EnergyMode::Exact;
    const Kernel k = Kernel::triangular(d);
    const double h = d == 1 ? 0.1 : 0.25;
    const ParticleConfiguration y = cloud(9, d, 0.0, 1.0, 40 + d);
    const double ref = fused_energy(y, h, k, spec);
    EXPECT_NEAR(total_energy(y, h, k, spec), ref, 1e-10 * std::max(1.0, std::abs(ref))) << "d=" << d;
  }
}

TEST(TotalEnergy, TranslationInvariance) {
  const EnergySpec spec = spec_on(Domain::box({{0.0, 2.0}}));
  const Kernel k = Kernel::epanechnikov(1);
  const double h = 0.1;
  const double pitch = QuadratureLattice(spec.domain, h, spec.quadrature.resolve(h)).pitch(0);
  const ParticleConfiguration y = cloud(20, 1, 0.5, 1.0, 6);
  std::vector<double> shifted(y.coords());
  for (double& v : shifted) v += 24.0 * pitch;
  EXPECT_NEAR(total_energy(y, h, k, spec), total_energy(ParticleConfiguration(1, shifted), h, k, spec), 1e-10);
}

TEST(TotalEnergy, FastDiffusionIsEvaluated) {
  const EnergySpec spec = spec_on(Domain::box({{0.0, 1.0}}), InternalEnergyLaw::power(0.5));
  EXPECT_TRUE(std::isfinite(total_energy(cloud(10, 1, 0.0, 1.0, 2), 0.1, Kernel::epanechnikov(1), spec)));
}

TEST(Modulus, LipschitzLawBound) {
  const auto law = InternalEnergyLaw::power(2.0);
  EXPECT_LE(modulus(law, 1.0, 0.1), 0.2 * (1.0 + 1e-9));
  EXPECT_GT(modulus(law, 1.0, 0.1), 0.0);
}

TEST(Modulus, MonotoneConcaveAndBounded) {
  for (const auto& law : {InternalEnergyLaw::entropy(), InternalEnergyLaw::power(2.0), InternalEnergyLaw::power(3.0)}) {
    const double M = 5.0;
    double fmax = -1e300, fmin = 1e300;
    for (int j = 0; j <= 2000; ++j) {
      const double s = M * j / 2000.0;
      fmax = std::max(fmax, law(s));
      fmin = std::min(fmin, law(s));
    }
    std::vector<double> rs, fs;
    for (int j = -30; j <= 8; ++j) {
      rs.push_back(std::pow(2.0, 0.5 * j));
      fs.push_back(modulus(law, M, rs.back()));
    }
    for (std::size_t i = 1; i < rs.size(); ++i) {
      EXPECT_LE(fs[i - 1], fs[i] * (1 + 1e-12)) << law.name();
      EXPECT_LE(fs[i], 2.0 * fmax - 2.0 * fmin + 1e-12);
    }
    // Concavity: chords through the origin have nonincreasing slope.
    for (std::size_t i = 1; i < rs.size(); ++i) EXPECT_LE(fs[i] / rs[i], fs[i - 1] / rs[i - 1] * (1 + 1e-9));
  }
  EXPECT_THROW(modulus(InternalEnergyLaw::entropy(), 0.0, 1.0), ConfigError);
}

TEST(Modulus, DominatesContinuityModulus) {
  const auto law = InternalEnergyLaw::entropy();
  for (double r : {1e-8, 1e-4, 0.01, 0.5, 2.0}) EXPECT_GE(modulus(law, 3.0, r), continuity_modulus(law, 3.0, r) * (1 - 1e-4));
}
