#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <utility>

#include "kdeflow/common.hpp"
#include "kdeflow/quadrature.hpp"

namespace kdeflow {

/// Radially symmetric probability density supported in the closed unit ball,
/// K(x) = c * g(|x|), together with the constants the error bounds need.
///
/// The scaled family is K_h(x) = h^{-d} K(x / h).
class Kernel {
 public:
  enum class Family { Box, Triangular, Epanechnikov, Custom };

  static Kernel box(int dim) { return Kernel(Family::Box, dim); }
  static Kernel triangular(int dim) { return Kernel(Family::Triangular, dim); }
  static Kernel epanechnikov(int dim) { return Kernel(Family::Epanechnikov, dim); }

  static Kernel from_name(const std::string& name, int dim) {
    if (name == "box") return box(dim);
    if (name == "triangular") return triangular(dim);
    if (name == "epanechnikov") return epanechnikov(dim);
    throw ConfigError("kernel: unknown family '" + name + "'");
  }

  /// User kernel K(x) = profile(|x|); profile must vanish for r > 1 and
  /// already be normalized. Rejected unless its integral is 1 to 1e-8.
  static Kernel custom(std::string name, int dim, std::function<double(double)> profile, double lipschitz,
                       double sup_norm) {
    Kernel k(Family::Custom, dim);
    k.name_ = std::move(name);
    k.profile_ = std::move(profile);
    k.scale_ = 1.0;
    k.lipschitz_ = lipschitz;
    k.sup_ = sup_norm;
    k.validate();
    return k;
  }

  Family family() const { return family_; }
  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  double support_radius() const { return 1.0; }
  /// +infinity for the box kernel.
  double lipschitz_constant() const { return lipschitz_; }
  bool is_lipschitz() const { return std::isfinite(lipschitz_); }
  double sup_norm() const { return sup_; }

  /// K as a function of r = |x|.
  double radial(double r) const {
    if (r > 1.0) return 0.0;
    switch (family_) {
      case Family::Box:
        return scale_;
      case Family::Triangular:
        return scale_ * (1.0 - r);
      case Family::Epanechnikov:
        return scale_ * (1.0 - r * r);
      case Family::Custom:
        return profile_(r);
    }
    return 0.0;
  }

  double eval(ConstPoint x) const { return radial(norm(x)); }

  /// h^{-d} K(x / h).
  double eval_scaled(double h, ConstPoint x) const { return radial(norm(x) / h) / std::pow(h, dim_); }

  /// Same as eval_scaled with |x| already known.
  double eval_scaled_radius(double h, double r) const { return radial(r / h) / std::pow(h, dim_); }

  /// Moment integral of |x|^p K(x) dx.
  double moment(double p) const {
    if (!(p > 1.0)) throw ConfigError("kernel moment: p must be > 1");
    const double area = unit_sphere_area(dim_);
    const double a = p + dim_;
    switch (family_) {
      case Family::Box:
        return area * scale_ / a;
      case Family::Triangular:
        return area * scale_ * (1.0 / a - 1.0 / (a + 1.0));
      case Family::Epanechnikov:
        return area * scale_ * (1.0 / a - 1.0 / (a + 2.0));
      case Family::Custom:
        break;
    }
    return quadrature_moment(p);
  }

  /// Moment by radial adaptive quadrature, independent of the closed forms.
  double quadrature_moment(double p) const {
    const double area = unit_sphere_area(dim_);
    const double rel_tol = 1e-6;
    auto f = [&](double r) { return std::pow(r, p + dim_ - 1) * radial(r); };
    // Scale the absolute tolerance by a coarse estimate of the integral.
    const double coarse = quad::adaptive_simpson(f, 0.0, 1.0, 1e-4);
    return area * quad::adaptive_simpson(f, 0.0, 1.0, rel_tol * 1e-3 * std::max(coarse, 1e-12));
  }

  /// Integral of K over R^d by radial quadrature.
  double mass() const {
    const double area = unit_sphere_area(dim_);
    return area * quad::adaptive_simpson([&](double r) { return std::pow(r, dim_ - 1) * radial(r); }, 0.0, 1.0,
                                         1e-12);
  }

 private:
  Kernel(Family family, int dim) : family_(family), dim_(dim) {
    if (dim < 1) throw ConfigError("kernel: dimension must be >= 1");
    const double area = unit_sphere_area(dim);
    const double d = dim;
    switch (family) {
      case Family::Box:
        name_ = "box";
        scale_ = 1.0 / (area / d);
        lipschitz_ = kInfinity;
        break;
      case Family::Triangular:
        name_ = "triangular";
        scale_ = 1.0 / (area / (d * (d + 1.0)));
        lipschitz_ = scale_;
        break;
      case Family::Epanechnikov:
        name_ = "epanechnikov";
        scale_ = 1.0 / (area * 2.0 / (d * (d + 2.0)));
        lipschitz_ = 2.0 * scale_;
        break;
      case Family::Custom:
        return;
    }
    sup_ = scale_;
    validate();
  }

  void validate() const {
    const double m = mass();
    if (std::abs(m - 1.0) > 1e-8) {
      std::ostringstream os;
      os << "kernel '" << name_ << "' does not integrate to 1 (got " << m << ")";
      throw ConfigError(os.str());
    }
    if (radial(0.0) < 0.0) throw ConfigError("kernel '" + name_ + "' takes negative values");
  }

  Family family_;
  int dim_;
  std::string name_;
  double scale_ = 1.0;
  double lipschitz_ = 0.0;
  double sup_ = 0.0;
  std::function<double(double)> profile_;
};

}  // namespace kdeflow
