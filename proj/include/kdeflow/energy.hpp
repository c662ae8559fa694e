#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kdeflow/common.hpp"
#include "kdeflow/domain.hpp"
#include "kdeflow/kde.hpp"
#include "kdeflow/kernel.hpp"

namespace kdeflow {

/// Internal energy density F: entropy s log s, or the power law
/// s^m / (m - 1) (porous medium for m > 1, fast diffusion for 0 < m < 1).
class InternalEnergyLaw {
 public:
  enum class Family { Entropy, Power };

  static InternalEnergyLaw entropy() { return InternalEnergyLaw(Family::Entropy, 1.0); }
  static InternalEnergyLaw power(double m) {
    if (!(m > 0.0) || m == 1.0) throw ConfigError("power law: m must be > 0 and != 1");
    return InternalEnergyLaw(Family::Power, m);
  }

  Family family() const { return family_; }
  double m() const { return m_; }
  std::string name() const {
    if (family_ == Family::Entropy) return "entropy";
    std::ostringstream os;
    os << "power(m=" << m_ << ")";
    return os.str();
  }
  /// Fast diffusion is evaluated but has no superlinear growth.
  bool superlinear() const { return family_ == Family::Entropy || m_ > 1.0; }

  double operator()(double s) const {
    if (s <= 0.0) return 0.0;
    if (family_ == Family::Entropy) return s * std::log(s);
    return std::pow(s, m_) / (m_ - 1.0);
  }

  double derivative(double s) const {
    if (family_ == Family::Entropy) return std::log(s) + 1.0;
    return m_ / (m_ - 1.0) * std::pow(s, m_ - 1.0);
  }

  double second_derivative(double s) const {
    if (family_ == Family::Entropy) return 1.0 / s;
    return m_ * std::pow(s, m_ - 2.0);
  }

  /// F(s + r) - F(s) without cancellation for r << s.
  double increment(double s, double r) const {
    if (s <= 0.0) return (*this)(r);
    if (family_ == Family::Entropy) return r * std::log(s + r) + s * std::log1p(r / s);
    return std::pow(s, m_) * std::expm1(m_ * std::log1p(r / s)) / (m_ - 1.0);
  }

  /// Constant of the doubling condition F(r+s) <= C (1 + F(r) + F(s)).
  double doubling_constant() const {
    if (family_ == Family::Entropy) return 2.0;
    return std::pow(2.0, m_ - 1.0);
  }

 private:
  InternalEnergyLaw(Family family, double m) : family_(family), m_(m) { validate(); }

  void validate() const {
    if ((*this)(0.0) != 0.0) throw ConfigError("internal energy: F(0) must be 0");
    // Strict convexity on a log-spaced grid.
    for (int j = -12; j <= 12; ++j) {
      const double s = std::pow(10.0, 0.5 * j);
      if (!(second_derivative(s) > 0.0)) throw ConfigError("internal energy: F'' must be positive");
    }
    if (superlinear()) {
      const double a = (*this)(1e2) / 1e2, b = (*this)(1e4) / 1e4, c = (*this)(1e6) / 1e6;
      if (!(a < b && b < c)) throw ConfigError("internal energy: F(s)/s is not increasing");
    }
  }

  Family family_;
  double m_;
};

/// Pressure L_F(s) = s F'(s) - F(s), zero at s = 0.
inline double pressure(const InternalEnergyLaw& law, double s) {
  if (s <= 0.0) return 0.0;
  if (law.family() == InternalEnergyLaw::Family::Entropy) return s;
  return std::pow(s, law.m());
}

using Box = std::vector<std::pair<double, double>>;

namespace detail {

inline double max_corner_distance(const Box& box, ConstPoint c) {
  double s = 0.0;
  for (std::size_t k = 0; k < box.size(); ++k) {
    const double t = std::max(std::abs(box[k].first - c[k]), std::abs(box[k].second - c[k]));
    s += t * t;
  }
  return std::sqrt(s);
}

inline double box_diameter(const Box& box) {
  double s = 0.0;
  for (const auto& [lo, hi] : box) s += (hi - lo) * (hi - lo);
  return std::sqrt(s);
}

}  // namespace detail

/// External potential V: zero, constant a, linear g.x, quadratic
/// (a/2)|x - c|^2, or double well a (|x - c|^2 - b^2)^2.
class Potential {
 public:
  enum class Type { Zero, Constant, Linear, Quadratic, DoubleWell };

  static Potential zero(int dim) { return Potential(Type::Zero, dim, 0.0, 0.0, Point(dim, 0.0)); }
  static Potential constant(double a, int dim) { return Potential(Type::Constant, dim, a, 0.0, Point(dim, 0.0)); }
  // The slope vector lives in center_.
  static Potential linear(Point slope) {
    const int d = static_cast<int>(slope.size());
    return Potential(Type::Linear, d, 1.0, 0.0, std::move(slope));
  }
  static Potential quadratic(double a, Point center) {
    const int d = static_cast<int>(center.size());
    return Potential(Type::Quadratic, d, a, 0.0, std::move(center));
  }
  static Potential double_well(double a, double b, Point center) {
    const int d = static_cast<int>(center.size());
    return Potential(Type::DoubleWell, d, a, b, std::move(center));
  }

  Type type() const { return type_; }
  bool is_zero() const { return type_ == Type::Zero; }
  const Point& center() const { return center_; }
  double strength() const { return a_; }
  double well_radius() const { return b_; }

  double operator()(ConstPoint x) const {
    switch (type_) {
      case Type::Zero:
        return 0.0;
      case Type::Constant:
        return a_;
      case Type::Linear: {
        double v = 0.0;
        for (std::size_t k = 0; k < center_.size(); ++k) v += center_[k] * x[k];
        return v;
      }
      case Type::Quadratic:
        return 0.5 * a_ * squared_distance(x, center_);
      case Type::DoubleWell: {
        const double t = squared_distance(x, center_) - b_ * b_;
        return a_ * t * t;
      }
    }
    return 0.0;
  }

  /// Upper bound of |grad V| on a box.
  double lipschitz(const Box& box) const {
    if (type_ == Type::Linear) return distance(center_, Point(center_.size(), 0.0));
    const double r = detail::max_corner_distance(box, center_);
    switch (type_) {
      case Type::Zero:
      case Type::Constant:
      case Type::Linear:
        return 0.0;
      case Type::Quadratic:
        return std::abs(a_) * r;
      case Type::DoubleWell:
        return 4.0 * std::abs(a_) * std::max(r * r, b_ * b_) * r;
    }
    return 0.0;
  }

 private:
  Potential(Type type, int dim, double a, double b, Point center)
      : type_(type), dim_(dim), a_(a), b_(b), center_(std::move(center)) {}

  Type type_;
  int dim_;
  double a_, b_;
  Point center_;
};

/// Even, convex interaction kernel W: none or c |z|^2.
class Interaction {
 public:
  enum class Type { None, Quadratic };

  static Interaction none() { return Interaction(Type::None, 0.0); }
  static Interaction quadratic(double c) {
    if (c < 0.0) throw ConfigError("interaction: quadratic coefficient must be >= 0 for convexity");
    return Interaction(Type::Quadratic, c);
  }

  Type type() const { return type_; }
  bool is_none() const { return type_ == Type::None; }
  double coefficient() const { return c_; }

  double operator()(ConstPoint z) const {
    if (type_ == Type::None) return 0.0;
    double s = 0.0;
    for (double v : z) s += v * v;
    return c_ * s;
  }

  /// Upper bound of |grad W| over differences of points in a box.
  double lipschitz(const Box& box) const {
    if (type_ == Type::None) return 0.0;
    return 2.0 * c_ * detail::box_diameter(box);
  }

 private:
  Interaction(Type type, double c) : type_(type), c_(c) {}
  Type type_;
  double c_;
};

/// Midpoint-rule resolution. The pitch is either absolute or a fraction of
/// the active bandwidth; it must not exceed h / 4.
struct QuadratureSpec {
  double pitch_fraction = 0.125;
  std::optional<double> pitch;

  double resolve(double h) const {
    const double p = pitch ? *pitch : pitch_fraction * h;
    if (!(p > 0.0) || p > 0.25 * h * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "quadrature pitch " << p << " violates 0 < pitch <= h/4 for h = " << h;
      throw ConfigError(os.str());
    }
    return p;
  }
};

enum class EnergyMode { Exact, ParticleSum };

inline EnergyMode energy_mode_from_name(const std::string& s) {
  if (s == "exact") return EnergyMode::Exact;
  if (s == "particle_sum") return EnergyMode::ParticleSum;
  throw ConfigError("unknown energy mode '" + s + "'");
}

/// Driving energy phi = int F(u) + int V u + 1/2 int int W(x - y) u(x) u(y).
struct EnergySpec {
  InternalEnergyLaw law = InternalEnergyLaw::entropy();
  Potential potential = Potential::zero(1);
  Interaction interaction = Interaction::none();
  Domain domain = Domain::box({{0.0, 1.0}});
  double p = 2.0;
  QuadratureSpec quadrature{};
  EnergyMode mode = EnergyMode::ParticleSum;
};

/// Midpoint lattice on the bounding box of the domain extended by h.
class QuadratureLattice {
 public:
  QuadratureLattice(const Domain& domain, double h, double pitch) : dim_(domain.dim()) {
    std::size_t total = 1;
    for (const auto& [lo, hi] : domain.bounding_box()) {
      const double a = lo - h, b = hi + h;
      const auto cells = static_cast<std::size_t>(std::ceil((b - a) / pitch - 1e-9));
      lo_.push_back(a);
      pitch_.push_back((b - a) / static_cast<double>(cells));
      counts_.push_back(cells);
      box_.emplace_back(a, b);
      total *= cells;
    }
    size_ = total;
    cell_volume_ = 1.0;
    for (double p : pitch_) cell_volume_ *= p;
    strides_.assign(static_cast<std::size_t>(dim_), 1);
    for (int k = dim_ - 2; k >= 0; --k) strides_[k] = strides_[k + 1] * counts_[k + 1];
  }

  int dim() const { return dim_; }
  std::size_t size() const { return size_; }
  double cell_volume() const { return cell_volume_; }
  const Box& box() const { return box_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  double pitch(int k) const { return pitch_[k]; }

  double coordinate(int k, std::size_t j) const { return lo_[k] + (static_cast<double>(j) + 0.5) * pitch_[k]; }

  void node(std::size_t flat, std::span<double> out) const {
    for (int k = 0; k < dim_; ++k) {
      out[k] = coordinate(k, (flat / strides_[k]) % counts_[k]);
    }
  }

  Point node(std::size_t flat) const {
    Point x(static_cast<std::size_t>(dim_));
    node(flat, x);
    return x;
  }

  /// Inclusive index range per axis of nodes within distance r of c
  /// along that axis. Empty when hi < lo.
  void window(ConstPoint c, double r, std::vector<std::int64_t>& lo, std::vector<std::int64_t>& hi) const {
    lo.resize(static_cast<std::size_t>(dim_));
    hi.resize(static_cast<std::size_t>(dim_));
    for (int k = 0; k < dim_; ++k) {
      const double a = (c[k] - r - lo_[k]) / pitch_[k] - 0.5;
      const double b = (c[k] + r - lo_[k]) / pitch_[k] - 0.5;
      lo[k] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(a)));
      hi[k] = std::min<std::int64_t>(static_cast<std::int64_t>(counts_[k]) - 1, static_cast<std::int64_t>(std::floor(b)));
    }
  }

  /// Calls f(flat_index, node_point) for every node within distance r of c.
  template <class F>
  void for_each_in_ball(ConstPoint c, double r, F&& f) const {
    std::vector<std::int64_t> lo, hi;
    window(c, r, lo, hi);
    for (int k = 0; k < dim_; ++k) {
      if (hi[k] < lo[k]) return;
    }
    std::vector<std::int64_t> idx(lo);
    Point x(static_cast<std::size_t>(dim_));
    while (true) {
      std::size_t flat = 0;
      for (int k = 0; k < dim_; ++k) {
        x[k] = coordinate(k, static_cast<std::size_t>(idx[k]));
        flat += static_cast<std::size_t>(idx[k]) * strides_[k];
      }
      const double dist = distance(x, c);
      if (dist <= r) f(flat, dist);
      int k = dim_ - 1;
      while (k >= 0 && ++idx[k] > hi[k]) {
        idx[k] = lo[k];
        --k;
      }
      if (k < 0) break;
    }
  }

 private:
  int dim_;
  std::vector<double> lo_;
  std::vector<double> pitch_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> strides_;
  Box box_;
  std::size_t size_ = 0;
  double cell_volume_ = 1.0;
};

/// Sums in fixed blocks and then across blocks: the result does not depend
/// on how the blocks are distributed over workers.
template <class F>
double blocked_sum(std::size_t n, F&& term) {
  constexpr std::size_t kBlock = 1024;
  double total = 0.0;
  for (std::size_t b = 0; b < n; b += kBlock) {
    double part = 0.0;
    const std::size_t e = std::min(n, b + kBlock);
    for (std::size_t i = b; i < e; ++i) part += term(i);
    total += part;
  }
  return total;
}

/// Kernel sums s(x) = sum_i K_h(x - y_i) on the lattice nodes, so that
/// u = s / n. Particles are added in index order.
inline std::vector<double> rasterize(const ParticleConfiguration& config, double h, const Kernel& kernel,
                                     const QuadratureLattice& lattice) {
  std::vector<double> sums(lattice.size(), 0.0);
  for (std::size_t i = 0; i < config.size(); ++i) {
    lattice.for_each_in_ball(config.point(i), h, [&](std::size_t flat, double r) {
      sums[flat] += kernel.eval_scaled_radius(h, r);
    });
  }
  return sums;
}

/// int F(u) by the midpoint rule; +infinity if a particle leaves the domain.
inline double internal_energy(const KdeMeasure& measure, const InternalEnergyLaw& law, const Domain& domain,
                              const QuadratureSpec& quad) {
  const double h = measure.bandwidth();
  const QuadratureLattice lattice(domain, h, quad.resolve(h));
  if (!measure.config().inside(domain)) return kInfinity;
  const auto sums = rasterize(measure.config(), h, measure.kernel(), lattice);
  const double inv_n = 1.0 / static_cast<double>(measure.config().size());
  return lattice.cell_volume() * blocked_sum(sums.size(), [&](std::size_t j) { return law(sums[j] * inv_n); });
}

/// int V u (exact, by quadrature) or (1/n) sum_i V(y_i) (particle sum).
inline double potential_energy(const KdeMeasure& measure, const Potential& potential, EnergyMode mode,
                               const Domain& domain, const QuadratureSpec& quad) {
  const auto& config = measure.config();
  const double inv_n = 1.0 / static_cast<double>(config.size());
  if (potential.is_zero()) return 0.0;
  if (mode == EnergyMode::ParticleSum) {
    double s = 0.0;
    for (std::size_t i = 0; i < config.size(); ++i) s += potential(config.point(i));
    return s * inv_n;
  }
  const double h = measure.bandwidth();
  const QuadratureLattice lattice(domain, h, quad.resolve(h));
  const auto sums = rasterize(config, h, measure.kernel(), lattice);
  Point x(static_cast<std::size_t>(lattice.dim()));
  return lattice.cell_volume() * blocked_sum(sums.size(), [&](std::size_t j) {
           if (sums[j] == 0.0) return 0.0;
           lattice.node(j, x);
           return potential(x) * sums[j] * inv_n;
         });
}

inline constexpr std::size_t kMaxInteractionNodes = 10000;

/// 1/2 int int W(x - y) u(x) u(y) (exact) or (1/2n^2) sum_ij W(y_i - y_j).
inline double interaction_energy(const KdeMeasure& measure, const Interaction& interaction, EnergyMode mode,
                                 const Domain& domain, const QuadratureSpec& quad) {
  const auto& config = measure.config();
  const std::size_t n = config.size();
  if (interaction.is_none()) return 0.0;
  const int d = config.dim();
  Point z(static_cast<std::size_t>(d));
  if (mode == EnergyMode::ParticleSum) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (int k = 0; k < d; ++k) z[k] = config.point(i)[k] - config.point(j)[k];
        s += interaction(z);
      }
    }
    return 0.5 * s / (static_cast<double>(n) * static_cast<double>(n));
  }
  const double h = measure.bandwidth();
  const QuadratureLattice lattice(domain, h, quad.resolve(h));
  if (lattice.size() > kMaxInteractionNodes) {
    std::ostringstream os;
    os << "interaction quadrature too large (" << lattice.size() << " nodes > " << kMaxInteractionNodes
       << "); use particle_sum mode";
    throw ConfigError(os.str());
  }
  const auto sums = rasterize(config, h, measure.kernel(), lattice);
  std::vector<std::size_t> support;
  std::vector<Point> nodes;
  for (std::size_t j = 0; j < sums.size(); ++j) {
    if (sums[j] != 0.0) {
      support.push_back(j);
      nodes.push_back(lattice.node(j));
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t a = 0; a < support.size(); ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < support.size(); ++b) {
      for (int k = 0; k < d; ++k) z[k] = nodes[a][k] - nodes[b][k];
      row += interaction(z) * sums[support[b]];
    }
    s += row * sums[support[a]];
  }
  const double vol = lattice.cell_volume();
  return 0.5 * s * inv_n * inv_n * vol * vol;
}

/// phi_n of the mixture with centers `config`: +infinity outside the domain.
inline double total_energy(const ParticleConfiguration& config, double h, const Kernel& kernel,
                           const EnergySpec& spec, EnergyMode mode) {
  if (!config.inside(spec.domain)) return kInfinity;
  const KdeMeasure measure(config, h, kernel);
  return internal_energy(measure, spec.law, spec.domain, spec.quadrature) +
         potential_energy(measure, spec.potential, mode, spec.domain, spec.quadrature) +
         interaction_energy(measure, spec.interaction, mode, spec.domain, spec.quadrature);
}

inline double total_energy(const ParticleConfiguration& config, double h, const Kernel& kernel,
                           const EnergySpec& spec) {
  return total_energy(config, h, kernel, spec, spec.mode);
}

/// Bounds on |exact - particle_sum| for the potential and interaction terms:
/// L h M_{K,p}^{1/p} with L evaluated on the quadrature box.
struct ParticleSumBounds {
  double potential;
  double interaction;
};

inline ParticleSumBounds particle_sum_bounds(const EnergySpec& spec, const Kernel& kernel, double h) {
  const QuadratureLattice lattice(spec.domain, h, spec.quadrature.resolve(h));
  const double slack = h * std::pow(kernel.moment(spec.p), 1.0 / spec.p);
  return {spec.potential.lipschitz(lattice.box()) * slack, spec.interaction.lipschitz(lattice.box()) * slack};
}

/// Modulus of continuity of F on [0, M]: sup |F(s1) - F(s2)| over |s1 - s2| <= r.
/// For convex F the increments are monotone, so the sup sits at an end of [0, M].
inline double continuity_modulus(const InternalEnergyLaw& law, double M, double r) {
  r = std::min(r, M);
  if (r <= 0.0) return 0.0;
  return std::max(std::abs(law.increment(M - r, r)), std::abs(law.increment(0.0, r)));
}

/// Concave modulus f_M(r) = inf{a + b r : a, b >= 0, |F(s1)-F(s2)| <= a + b|s1-s2| on [0, M]}.
///
/// The constraint set is sampled on 2048 log-spaced offsets in (0, M]; the
/// infimum over admissible (a, b) is the least concave majorant of the
/// sampled modulus, evaluated through its upper hull.
inline double modulus(const InternalEnergyLaw& law, double M, double r) {
  if (!(M > 0.0) || !(r > 0.0)) throw ConfigError("modulus: M and r must be > 0");
  constexpr int kPoints = 2048;
  const double lo = M * 1e-16;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(kPoints + 2);
  pts.emplace_back(0.0, 0.0);
  if (r < lo) pts.emplace_back(r, continuity_modulus(law, M, r));
  for (int j = 0; j < kPoints; ++j) {
    const double t = lo * std::pow(M / lo, static_cast<double>(j) / (kPoints - 1));
    pts.emplace_back(t, continuity_modulus(law, M, t));
  }
  // Upper concave hull (monotone chain on x-sorted points).
  std::vector<std::pair<double, double>> hull;
  for (const auto& p : pts) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull[hull.size() - 1];
      // Remove b when it lies on or below the chord from a to p.
      if ((b.second - a.second) * (p.first - a.first) <= (p.second - a.second) * (b.first - a.first)) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  if (r >= hull.back().first) return hull.back().second;
  const auto it = std::upper_bound(hull.begin(), hull.end(), r,
                                   [](double v, const std::pair<double, double>& q) { return v < q.first; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  return a.second + (b.second - a.second) * (r - a.first) / (b.first - a.first);
}

}  // namespace kdeflow
