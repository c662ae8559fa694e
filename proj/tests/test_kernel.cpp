#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kdeflow/kernel.hpp"

using namespace kdeflow;

namespace {

std::vector<Kernel> all_kernels(int d) { return {Kernel::box(d), Kernel::triangular(d), Kernel::epanechnikov(d)}; }

double integrate_scaled(const Kernel& k, double h, double p = 0.0) {
  const int d = k.dim();
  if (d == 1) {
    auto f = [&](double x) { return std::pow(std::abs(x), p) * k.eval_scaled(h, std::span<const double>(&x, 1)); };
    return quad::piecewise_simpson(f, {-h, 0.0, h}, 1e-12);
  }
  return quad::gauss_box([&](ConstPoint x) { return std::pow(norm(x), p) * k.eval_scaled(h, x); },
                         std::vector<double>(d, -h), std::vector<double>(d, h), 80);
}

}  // namespace

TEST(Kernel, BoxPeakAtHalfBandwidth) {
  const Kernel k = Kernel::box(1);
  EXPECT_DOUBLE_EQ(k.eval_scaled(0.5, Point{0.0}), 1.0);
}

TEST(Kernel, TriangularPeak) {
  EXPECT_DOUBLE_EQ(Kernel::triangular(1).eval_scaled(1.0, Point{0.0}), 1.0);
}

TEST(Kernel, VanishesOutsideSupport) {
  for (int d : {1, 2, 3}) {
    for (const auto& k : all_kernels(d)) {
      const double h = 0.3;
      Point x(static_cast<std::size_t>(d), 0.0);
      x[0] = 2.0 * h;
      EXPECT_EQ(k.eval_scaled(h, x), 0.0) << k.name() << " d=" << d;
      x[0] = 1.0001 * h;
      EXPECT_EQ(k.eval_scaled(h, x), 0.0);
    }
  }
}

TEST(Kernel, SecondMomentsInOneDimension) {
  EXPECT_NEAR(Kernel::box(1).moment(2.0), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(Kernel::triangular(1).moment(2.0), 1.0 / 6.0, 1e-14);
  const Kernel e = Kernel::epanechnikov(1);
  EXPECT_NEAR(e.quadrature_moment(2.0), 0.2, 1e-6 * 0.2);
  EXPECT_NEAR(e.moment(2.0), 0.2, 1e-14);
}

TEST(Kernel, ClosedFormMomentsMatchQuadrature) {
  for (int d : {1, 2, 3}) {
    for (const auto& k : all_kernels(d)) {
      for (double p : {1.5, 2.0, 3.0}) {
        const double m = k.moment(p);
        EXPECT_NEAR(k.quadrature_moment(p), m, 1e-6 * m) << k.name() << " d=" << d << " p=" << p;
        EXPECT_LE(m, 1.0);
      }
    }
  }
}

TEST(Kernel, MomentRequiresExponentAboveOne) {
  EXPECT_THROW(Kernel::triangular(1).moment(1.0), ConfigError);
}

TEST(Kernel, UnitMassAtEveryBandwidth) {
  for (int d : {1, 2}) {
    for (const auto& k : all_kernels(d)) {
      for (double h : {0.05, 0.3, 1.0, 2.5}) {
        EXPECT_NEAR(integrate_scaled(k, h), 1.0, d == 1 ? 1e-6 : 2e-4) << k.name() << " d=" << d << " h=" << h;
      }
    }
  }
}

TEST(Kernel, ScalingLaw) {
  Rng rng(3);
  for (int d : {1, 2}) {
    for (const auto& k : all_kernels(d)) {
      for (int t = 0; t < 200; ++t) {
        const double h = rng.uniform(0.01, 2.0);
        Point x(static_cast<std::size_t>(d)), xs(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
          x[j] = rng.uniform(-1.2 * h, 1.2 * h);
          xs[j] = x[j] / h;
        }
        const double lhs = k.eval_scaled(h, x) * std::pow(h, d);
        EXPECT_NEAR(lhs, k.eval(xs), 1e-12 * std::max(1.0, k.eval(xs)));
      }
    }
  }
}

TEST(Kernel, ScaledMomentIsHToThePTimesMoment) {
  for (const auto& k : all_kernels(1)) {
    for (double h : {0.1, 0.5}) {
      const double p = 2.0;
      EXPECT_NEAR(integrate_scaled(k, h, p), std::pow(h, p) * k.moment(p), 1e-8) << k.name();
    }
  }
}

TEST(Kernel, LipschitzBoundOnRandomPairs) {
  Rng rng(17);
  for (int d : {1, 2}) {
    for (const auto& k : {Kernel::triangular(d), Kernel::epanechnikov(d)}) {
      ASSERT_TRUE(k.is_lipschitz());
      const double L = k.lipschitz_constant();
      for (int t = 0; t < 2000; ++t) {
        Point x(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
          x[j] = rng.uniform(-1.3, 1.3);
          y[j] = rng.uniform(-1.3, 1.3);
        }
        EXPECT_LE(std::abs(k.eval(x) - k.eval(y)), L * distance(x, y) + 1e-12);
      }
    }
  }
}

TEST(Kernel, BoxIsNotLipschitz) {
  EXPECT_FALSE(Kernel::box(1).is_lipschitz());
  EXPECT_TRUE(std::isinf(Kernel::box(2).lipschitz_constant()));
}

TEST(Kernel, SupNormIsPeak) {
  for (int d : {1, 2}) {
    for (const auto& k : all_kernels(d)) {
      EXPECT_DOUBLE_EQ(k.sup_norm(), k.eval(Point(static_cast<std::size_t>(d), 0.0)));
    }
  }
}

TEST(Kernel, FromName) {
  EXPECT_EQ(Kernel::from_name("epanechnikov", 2).family(), Kernel::Family::Epanechnikov);
  EXPECT_EQ(Kernel::from_name("box", 1).name(), "box");
  EXPECT_THROW(Kernel::from_name("gaussian", 1), ConfigError);
}

TEST(Kernel, CustomKernelsMustIntegrateToOne) {
  // Biweight (15/16)(1 - r^2)^2 on [-1, 1].
  auto biweight = [](double r) { return r > 1.0 ? 0.0 : 15.0 / 16.0 * (1 - r * r) * (1 - r * r); };
  const Kernel k = Kernel::custom("biweight", 1, biweight, 15.0 / 16.0 * 16.0 / (3.0 * std::sqrt(3.0)), 15.0 / 16.0);
  EXPECT_NEAR(k.moment(2.0), 1.0 / 7.0, 1e-6);
  EXPECT_THROW(Kernel::custom("bad", 1, [](double r) { return r > 1.0 ? 0.0 : 1.0; }, 0.0, 1.0), ConfigError);
}
