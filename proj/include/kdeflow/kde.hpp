#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "kdeflow/common.hpp"
#include "kdeflow/domain.hpp"
#include "kdeflow/kernel.hpp"
#include "kdeflow/quadrature.hpp"

namespace kdeflow {

/// Ordered list of n particle positions in R^d, stored flat.
class ParticleConfiguration {
 public:
  ParticleConfiguration() = default;
  ParticleConfiguration(int dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim < 1) throw ConfigError("particle configuration: dimension must be >= 1");
    if (coords_.size() % static_cast<std::size_t>(dim) != 0) {
      throw ConfigError("particle configuration: coordinate count is not a multiple of the dimension");
    }
  }

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / static_cast<std::size_t>(dim_); }
  bool empty() const { return coords_.empty(); }

  ConstPoint point(std::size_t i) const {
    return ConstPoint(coords_).subspan(i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_));
  }
  std::span<double> point(std::size_t i) {
    return std::span<double>(coords_).subspan(i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_));
  }
  void set(std::size_t i, ConstPoint x) { std::copy(x.begin(), x.end(), point(i).begin()); }

  const std::vector<double>& coords() const { return coords_; }

  bool inside(const Domain& domain) const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (!domain.contains(point(i))) return false;
    }
    return true;
  }

  Point mean() const {
    Point m(static_cast<std::size_t>(dim_), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      for (int k = 0; k < dim_; ++k) m[k] += point(i)[k];
    }
    for (double& v : m) v /= static_cast<double>(size());
    return m;
  }

  /// Mean of |y_i - c|^2.
  double second_moment(ConstPoint c) const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += squared_distance(point(i), c);
    return s / static_cast<double>(size());
  }

  /// Reorders particles: result[i] = this[perm[i]].
  ParticleConfiguration permuted(const std::vector<std::size_t>& perm) const {
    std::vector<double> out;
    out.reserve(coords_.size());
    for (std::size_t j : perm) {
      const auto p = point(j);
      out.insert(out.end(), p.begin(), p.end());
    }
    return ParticleConfiguration(dim_, std::move(out));
  }

  friend bool operator==(const ParticleConfiguration&, const ParticleConfiguration&) = default;

 private:
  int dim_ = 0;
  std::vector<double> coords_;
};

/// Mixture density u(x) = (1/n) sum_i K_h(x - y_i).
///
/// A cell list of pitch h restricts each evaluation to particles whose
/// kernel support reaches x. Contributions are summed in particle order, so
/// the accelerated value is bit-identical to the plain sum.
class KdeMeasure {
 public:
  KdeMeasure(ParticleConfiguration config, double h, Kernel kernel)
      : config_(std::move(config)), h_(h), kernel_(std::move(kernel)) {
    if (!(h_ > 0.0)) throw ConfigError("kde: bandwidth must be > 0");
    if (config_.empty()) throw ConfigError("kde: configuration must hold at least one particle");
    if (config_.dim() != kernel_.dim()) throw ConfigError("kde: kernel and configuration dimensions differ");
    build_cells();
  }

  const ParticleConfiguration& config() const { return config_; }
  double bandwidth() const { return h_; }
  const Kernel& kernel() const { return kernel_; }
  int dim() const { return config_.dim(); }

  /// Upper bound on the density, ||K||_inf / h^d.
  double sup_bound() const { return kernel_.sup_norm() / std::pow(h_, dim()); }

  double density(ConstPoint x) const {
    const int d = dim();
    std::vector<std::int64_t> base(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
      base[k] = static_cast<std::int64_t>(std::floor((x[k] - origin_[k]) / h_));
    }
    std::vector<std::size_t> hits;
    std::vector<std::int64_t> off(static_cast<std::size_t>(d), -1);
    while (true) {
      bool valid = true;
      std::size_t flat = 0;
      for (int k = 0; k < d; ++k) {
        const std::int64_t c = base[k] + off[k];
        if (c < 0 || c >= static_cast<std::int64_t>(counts_[k])) {
          valid = false;
          break;
        }
        flat = flat * counts_[k] + static_cast<std::size_t>(c);
      }
      if (valid) {
        for (std::size_t j = cell_start_[flat]; j < cell_start_[flat + 1]; ++j) hits.push_back(cell_items_[j]);
      }
      int k = d - 1;
      while (k >= 0 && ++off[k] > 1) {
        off[k] = -1;
        --k;
      }
      if (k < 0) break;
    }
    std::sort(hits.begin(), hits.end());
    double s = 0.0;
    for (std::size_t i : hits) {
      const double r = distance(config_.point(i), x);
      if (r <= h_) s += kernel_.eval_scaled_radius(h_, r);
    }
    return s / static_cast<double>(config_.size());
  }

  /// Plain O(n) sum, kept as the reference for the cell list.
  double density_bruteforce(ConstPoint x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < config_.size(); ++i) {
      const double r = distance(config_.point(i), x);
      if (r <= h_) s += kernel_.eval_scaled_radius(h_, r);
    }
    return s / static_cast<double>(config_.size());
  }

 private:
  void build_cells() {
    const int d = dim();
    origin_.assign(static_cast<std::size_t>(d), kInfinity);
    std::vector<double> top(static_cast<std::size_t>(d), -kInfinity);
    for (std::size_t i = 0; i < config_.size(); ++i) {
      for (int k = 0; k < d; ++k) {
        origin_[k] = std::min(origin_[k], config_.point(i)[k]);
        top[k] = std::max(top[k], config_.point(i)[k]);
      }
    }
    counts_.resize(static_cast<std::size_t>(d));
    std::size_t total = 1;
    for (int k = 0; k < d; ++k) {
      counts_[k] = static_cast<std::size_t>(std::floor((top[k] - origin_[k]) / h_)) + 1;
      total *= counts_[k];
    }
    std::vector<std::size_t> cell_of(config_.size());
    cell_start_.assign(total + 1, 0);
    for (std::size_t i = 0; i < config_.size(); ++i) {
      std::size_t flat = 0;
      for (int k = 0; k < d; ++k) {
        auto c = static_cast<std::size_t>(std::floor((config_.point(i)[k] - origin_[k]) / h_));
        c = std::min(c, counts_[k] - 1);
        flat = flat * counts_[k] + c;
      }
      cell_of[i] = flat;
      ++cell_start_[flat + 1];
    }
    std::partial_sum(cell_start_.begin(), cell_start_.end(), cell_start_.begin());
    cell_items_.resize(config_.size());
    std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < config_.size(); ++i) cell_items_[fill[cell_of[i]]++] = i;
  }

  ParticleConfiguration config_;
  double h_;
  Kernel kernel_;
  std::vector<double> origin_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> cell_items_;
};

/// Self-similar Barenblatt solution of u_t = Laplace(u^m), unit mass,
/// u(t, x) = t^{-a} (C - k |x - c|^2 t^{-2a/d})_+^{1/(m-1)}.
class Barenblatt {
 public:
  Barenblatt(double m, int dim, Point center) : m_(m), dim_(dim), center_(std::move(center)) {
    if (!(m > 1.0)) throw ConfigError("barenblatt: m must be > 1");
    if (static_cast<int>(center_.size()) != dim) throw ConfigError("barenblatt: center dimension mismatch");
    const double d = dim;
    q_ = 1.0 / (m - 1.0);
    alpha_ = d / (d * (m - 1.0) + 2.0);
    beta_ = alpha_ / d;
    k_ = alpha_ * (m - 1.0) / (2.0 * m * d);
    // Mass of (C - k|xi|^2)_+^q is C^{q + d/2} * mass_unit.
    const double mass_unit = 0.5 * unit_sphere_area(dim) * std::pow(k_, -0.5 * d) * beta_fn(0.5 * d, q_ + 1.0);
    c_ = std::pow(mass_unit, -1.0 / (q_ + 0.5 * d));
  }

  double m() const { return m_; }
  double constant() const { return c_; }
  double alpha() const { return alpha_; }
  /// Growth exponent of the second moment, 2a/d = 2/(d(m-1)+2).
  double moment_exponent() const { return 2.0 * beta_; }

  double density(ConstPoint x, double t) const {
    const double s = c_ - k_ * squared_distance(x, center_) * std::pow(t, -2.0 * beta_);
    return s > 0.0 ? std::pow(t, -alpha_) * std::pow(s, q_) : 0.0;
  }

  /// Radius of the support at time t.
  double support_radius(double t) const { return std::sqrt(c_ / k_) * std::pow(t, beta_); }

  /// Integral of |x - c|^2 u(t, x) dx.
  double second_moment(double t) const {
    const double d = dim_;
    return std::pow(t, 2.0 * beta_) * 0.5 * unit_sphere_area(dim_) * std::pow(c_, q_ + 0.5 * d + 1.0) *
           std::pow(k_, -0.5 * (d + 2.0)) * beta_fn(0.5 * (d + 2.0), q_ + 1.0);
  }

 private:
  static double beta_fn(double a, double b) { return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)); }

  double m_;
  int dim_;
  Point center_;
  double q_ = 0, alpha_ = 0, beta_ = 0, k_ = 0, c_ = 0;
};

/// Built-in initial densities, restricted to the domain and renormalized.
class InitialDensity {
 public:
  enum class Type { Uniform, TruncGauss, Barenblatt };

  /// Uniform on the intersection of `bounds` with the domain.
  static InitialDensity uniform(const Domain& domain, std::vector<std::pair<double, double>> bounds) {
    InitialDensity r(Type::Uniform, domain);
    if (bounds.empty()) bounds = domain.bounding_box();
    if (static_cast<int>(bounds.size()) != domain.dim()) throw ConfigError("uniform density: bounds dimension mismatch");
    for (const auto& [lo, hi] : bounds) {
      if (!(lo < hi)) throw ConfigError("uniform density: bounds must satisfy lo < hi");
    }
    r.bounds_ = std::move(bounds);
    r.finish();
    return r;
  }

  /// Isotropic Gaussian N(mean, sigma^2 I) truncated to the domain.
  static InitialDensity trunc_gauss(const Domain& domain, Point mean, double sigma) {
    InitialDensity r(Type::TruncGauss, domain);
    if (!(sigma > 0.0)) throw ConfigError("trunc_gauss: sigma must be > 0");
    if (static_cast<int>(mean.size()) != domain.dim()) throw ConfigError("trunc_gauss: mean dimension mismatch");
    r.center_ = std::move(mean);
    r.sigma_ = sigma;
    r.finish();
    return r;
  }

  /// Barenblatt profile at time t0 clipped to the domain.
  static InitialDensity barenblatt(const Domain& domain, double m, double t0, Point center) {
    InitialDensity r(Type::Barenblatt, domain);
    if (!(t0 > 0.0)) throw ConfigError("barenblatt density: t0 must be > 0");
    if (static_cast<int>(center.size()) != domain.dim()) throw ConfigError("barenblatt density: center dimension mismatch");
    r.center_ = center;
    r.t0_ = t0;
    r.barenblatt_.emplace_back(m, domain.dim(), std::move(center));
    r.finish();
    return r;
  }

  Type type() const { return type_; }
  const Domain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  double t0() const { return t0_; }
  const Point& center() const { return center_; }
  double sigma() const { return sigma_; }
  const Barenblatt& barenblatt_profile() const { return barenblatt_.at(0); }

  /// Normalized density value (zero outside the domain).
  double operator()(ConstPoint x) const {
    if (!domain_.contains(x)) return 0.0;
    return unnormalized(x) / mass_;
  }

  /// Box containing the support: the domain box intersected with the
  /// density's own support box.
  std::vector<std::pair<double, double>> support_box() const {
    auto box = domain_.bounding_box();
    if (type_ == Type::Uniform) {
      for (std::size_t k = 0; k < box.size(); ++k) {
        box[k].first = std::max(box[k].first, bounds_[k].first);
        box[k].second = std::min(box[k].second, bounds_[k].second);
      }
    } else if (type_ == Type::Barenblatt) {
      const double rad = barenblatt_[0].support_radius(t0_);
      for (std::size_t k = 0; k < box.size(); ++k) {
        box[k].first = std::max(box[k].first, center_[k] - rad);
        box[k].second = std::min(box[k].second, center_[k] + rad);
      }
    }
    return box;
  }

  /// Profile without normalization, bounded by 1 on its support.
  double unnormalized(ConstPoint x) const {
    switch (type_) {
      case Type::Uniform:
        for (std::size_t k = 0; k < bounds_.size(); ++k) {
          if (x[k] < bounds_[k].first || x[k] > bounds_[k].second) return 0.0;
        }
        return 1.0;
      case Type::TruncGauss:
        return std::exp(-0.5 * squared_distance(x, center_) / (sigma_ * sigma_));
      case Type::Barenblatt: {
        const auto& b = barenblatt_[0];
        return b.density(x, t0_) / (std::pow(t0_, -b.alpha()) * std::pow(b.constant(), 1.0 / (b.m() - 1.0)));
      }
    }
    return 0.0;
  }

  /// 1-D cumulative distribution of the normalized density.
  double cdf(double x) const {
    const auto box = support_box();
    const double lo = box[0].first, hi = box[0].second;
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    switch (type_) {
      case Type::Uniform:
        return (x - lo) / (hi - lo);
      case Type::TruncGauss: {
        const double s = sigma_ * std::sqrt(2.0);
        const double a = std::erf((lo - center_[0]) / s);
        return (std::erf((x - center_[0]) / s) - a) / (std::erf((hi - center_[0]) / s) - a);
      }
      case Type::Barenblatt: {
        // Tabulated cell integrals plus an adaptive piece inside the cell.
        const double width = (hi - lo) / static_cast<double>(cdf_table_.size() - 1);
        const auto cell = std::min(static_cast<std::size_t>((x - lo) / width), cdf_table_.size() - 2);
        const double a = lo + width * static_cast<double>(cell);
        return cdf_table_[cell] + integrate_1d(a, x) / mass_;
      }
    }
    return 0.0;
  }

  /// Inverse of cdf by bisection.
  double quantile(double u) const {
    const auto box = support_box();
    if (type_ == Type::Uniform) return box[0].first + u * (box[0].second - box[0].first);
    double lo = box[0].first, hi = box[0].second;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (cdf(mid) < u) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

 private:
  InitialDensity(Type type, Domain domain) : type_(type), domain_(std::move(domain)) {}

  double integrate_1d(double a, double b) const {
    auto f = [&](double x) { return unnormalized(std::span<const double>(&x, 1)); };
    return quad::adaptive_simpson(f, a, b, 1e-13);
  }

  void finish() {
    const auto box = support_box();
    for (const auto& [lo, hi] : box) {
      if (!(lo < hi)) throw ConfigError("initial density: support does not meet the domain");
    }
    if (dim() == 1) {
      if (type_ == Type::Barenblatt) {
        const std::size_t cells = 512;
        cdf_table_.assign(cells + 1, 0.0);
        const double width = (box[0].second - box[0].first) / static_cast<double>(cells);
        for (std::size_t c = 0; c < cells; ++c) {
          const double a = box[0].first + width * static_cast<double>(c);
          cdf_table_[c + 1] = cdf_table_[c] + integrate_1d(a, a + width);
        }
        mass_ = cdf_table_.back();
        for (double& v : cdf_table_) v /= mass_;
      } else {
        mass_ = integrate_1d(box[0].first, box[0].second);
      }
    } else {
      std::vector<double> lo, hi;
      for (const auto& [l, h] : box) {
        lo.push_back(l);
        hi.push_back(h);
      }
      mass_ = quad::gauss_box(
          [&](ConstPoint x) { return domain_.contains(x) ? unnormalized(x) : 0.0; }, lo, hi, 48);
    }
    if (!(mass_ > 0.0)) throw ConfigError("initial density: zero mass inside the domain");
  }

  Type type_;
  Domain domain_;
  std::vector<std::pair<double, double>> bounds_;
  Point center_;
  double sigma_ = 0.0;
  double t0_ = 0.0;
  std::vector<Barenblatt> barenblatt_;
  double mass_ = 1.0;
  std::vector<double> cdf_table_;
};

/// n i.i.d. draws: inverse CDF in 1-D, rejection against the support box
/// otherwise. Deterministic given the seed.
inline ParticleConfiguration sample_initial(const InitialDensity& density, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_initial: n must be >= 1");
  Rng rng(seed);
  const int d = density.dim();
  std::vector<double> coords;
  coords.reserve(n * static_cast<std::size_t>(d));
  if (d == 1) {
    for (std::size_t i = 0; i < n; ++i) coords.push_back(density.quantile(rng.uniform()));
    return ParticleConfiguration(1, std::move(coords));
  }
  const auto box = density.support_box();
  constexpr std::size_t kMaxAttempts = 1000000;
  Point x(static_cast<std::size_t>(d));
  std::size_t total_attempts = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t attempts = 0;
    while (true) {
      if (++attempts > kMaxAttempts) {
        std::ostringstream os;
        os << "sampler starvation: acceptance rate " << static_cast<double>(i) / static_cast<double>(total_attempts + attempts)
           << " after " << i << " accepted points";
        throw RuntimeFailure(os.str());
      }
      for (int k = 0; k < d; ++k) x[k] = rng.uniform(box[k].first, box[k].second);
      const double accept = rng.uniform();
      if (density.domain().contains(x) && accept < density.unnormalized(x)) break;
    }
    total_attempts += attempts;
    coords.insert(coords.end(), x.begin(), x.end());
  }
  return ParticleConfiguration(d, std::move(coords));
}

/// One draw from the kernel density K by rejection from the unit cube.
inline Point sample_kernel(const Kernel& kernel, Rng& rng) {
  const int d = kernel.dim();
  const double peak = kernel.sup_norm();
  Point x(static_cast<std::size_t>(d));
  while (true) {
    for (int k = 0; k < d; ++k) x[k] = rng.uniform(-1.0, 1.0);
    const double accept = rng.uniform();
    const double r = norm(x);
    if (r <= 1.0 && accept * peak < kernel.radial(r)) return x;
  }
}

/// Uniform convergence rate of the KDE sup-norm deviation:
/// sqrt(log(1/h)/(n h^{2d})) + sqrt(log(1/a)/(n h^{2d})) + log(1/h)/(n h^d) + log(1/a)/(n h^d).
inline double kde_rate(double n, double h, double alpha, int dim) {
  if (!(h > 0.0 && h < 0.9) || !(alpha > 0.0 && alpha < 1.0) || !(n >= 1.0)) {
    throw ConfigError("rate formula out of validity range (need 0 < h < 9/10, 0 < alpha < 1, n >= 1)");
  }
  const double hd = std::pow(h, dim);
  const double lh = std::log(1.0 / h);
  const double la = std::log(1.0 / alpha);
  return std::sqrt(lh / (n * hd * hd)) + std::sqrt(la / (n * hd * hd)) + lh / (n * hd) + la / (n * hd);
}

/// Default bandwidth map h(n) = n^{-1/(4d)}.
inline double default_bandwidth(double n, int dim) { return std::pow(n, -1.0 / (4.0 * dim)); }

/// Default failure probability a(n) = n^{-2} (summable in n).
inline double default_failure_probability(double n) { return 1.0 / (n * n); }

/// (K_h * rho)(x): the expected value of the KDE at x.
inline double smoothed_truth(const Kernel& kernel, double h, const InitialDensity& rho, ConstPoint x) {
  const int d = kernel.dim();
  const auto box = rho.support_box();
  if (d == 1) {
    const double lo = std::max(x[0] - h, box[0].first);
    const double hi = std::min(x[0] + h, box[0].second);
    if (!(lo < hi)) return 0.0;
    std::vector<double> breaks{lo, hi};
    if (x[0] > lo && x[0] < hi) breaks.push_back(x[0]);
    auto f = [&](double y) {
      const double r = std::abs(x[0] - y);
      return kernel.eval_scaled_radius(h, r) * rho(std::span<const double>(&y, 1));
    };
    return quad::piecewise_simpson(f, breaks, 1e-9);
  }
  std::vector<double> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    lo[k] = std::max(x[k] - h, box[k].first);
    hi[k] = std::min(x[k] + h, box[k].second);
    if (!(lo[k] < hi[k])) return 0.0;
  }
  return quad::gauss_box(
      [&](ConstPoint y) { return kernel.eval_scaled_radius(h, distance(x, y)) * rho(y); }, lo, hi, 24);
}

}  // namespace kdeflow
