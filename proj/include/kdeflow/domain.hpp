#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "kdeflow/common.hpp"

namespace kdeflow {

/// Axis-aligned box or Euclidean ball in R^d.
///
/// Membership is tested against the closure of the set, so particles that
/// land exactly on the boundary still count as admissible.
class Domain {
 public:
  enum class Shape { Box, Ball };

  static Domain box(std::vector<std::pair<double, double>> bounds) {
    if (bounds.empty()) throw ConfigError("domain: box needs at least one axis");
    for (std::size_t k = 0; k < bounds.size(); ++k) {
      if (!(bounds[k].first < bounds[k].second)) {
        std::ostringstream os;
        os << "domain: box bounds must satisfy lo < hi on axis " << k;
        throw ConfigError(os.str());
      }
    }
    Domain d;
    d.shape_ = Shape::Box;
    d.dim_ = static_cast<int>(bounds.size());
    d.bounds_ = std::move(bounds);
    return d;
  }

  static Domain ball(Point center, double radius) {
    if (center.empty()) throw ConfigError("domain: ball center must be non-empty");
    if (!(radius > 0.0)) throw ConfigError("domain: ball radius must be > 0");
    Domain d;
    d.shape_ = Shape::Ball;
    d.dim_ = static_cast<int>(center.size());
    for (double c : center) d.bounds_.emplace_back(c - radius, c + radius);
    d.center_ = std::move(center);
    d.radius_ = radius;
    return d;
  }

  Shape shape() const { return shape_; }
  int dim() const { return dim_; }
  const Point& center() const { return center_; }
  double radius() const { return radius_; }

  /// Per-axis bounding box (exact for boxes).
  const std::vector<std::pair<double, double>>& bounding_box() const { return bounds_; }

  bool contains(ConstPoint x) const {
    if (shape_ == Shape::Box) {
      for (int k = 0; k < dim_; ++k) {
        if (x[k] < bounds_[k].first || x[k] > bounds_[k].second) return false;
      }
      return true;
    }
    return squared_distance(x, center_) <= radius_ * radius_;
  }

  double volume() const {
    if (shape_ == Shape::Box) {
      double v = 1.0;
      for (const auto& [lo, hi] : bounds_) v *= hi - lo;
      return v;
    }
    return unit_ball_volume(dim_) * std::pow(radius_, dim_);
  }

  /// Largest extent of the bounding box.
  double diameter() const {
    double s = 0.0;
    for (const auto& [lo, hi] : bounds_) s += (hi - lo) * (hi - lo);
    return std::sqrt(s);
  }

 private:
  Domain() = default;

  Shape shape_ = Shape::Box;
  int dim_ = 0;
  std::vector<std::pair<double, double>> bounds_;
  Point center_;
  double radius_ = 0.0;
};

/// Finite omega-net of a domain: every point of the closure lies within
/// distance < omega of some grid point, and every grid point lies in the
/// domain. Points are stored flat, dimension-major per point.
class CoveringGrid {
 public:
  CoveringGrid(int dim, std::vector<double> coords, double omega)
      : dim_(dim), coords_(std::move(coords)), omega_(omega) {}

  int dim() const { return dim_; }
  std::size_t size() const { return coords_.size() / static_cast<std::size_t>(dim_); }
  bool empty() const { return coords_.empty(); }
  double spacing() const { return omega_; }

  ConstPoint point(std::size_t i) const {
    return ConstPoint(coords_).subspan(i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_));
  }
  const std::vector<double>& coords() const { return coords_; }

  /// Index of the nearest grid point; ties go to the lowest index.
  std::size_t nearest_index(ConstPoint x) const {
    if (empty()) throw ConfigError("covering grid is empty");
    std::size_t best = 0;
    double best_d = kInfinity;
    for (std::size_t i = 0; i < size(); ++i) {
      const double d2 = squared_distance(point(i), x);
      if (d2 < best_d) {
        best_d = d2;
        best = i;
      }
    }
    return best;
  }

 private:
  int dim_;
  std::vector<double> coords_;
  double omega_;
};

namespace detail {

// Lattice nodes j*pitch on [lo, hi], j = 0..cells, with pitch < max_pitch.
inline std::vector<double> axis_nodes(double lo, double hi, double max_pitch) {
  const double len = hi - lo;
  const auto cells = static_cast<std::size_t>(std::floor(len / max_pitch)) + 1;
  std::vector<double> nodes(cells + 1);
  for (std::size_t j = 0; j <= cells; ++j) nodes[j] = lo + len * static_cast<double>(j) / static_cast<double>(cells);
  return nodes;
}

}  // namespace detail

/// Builds a covering grid from a regular lattice of pitch < omega / sqrt(d).
///
/// Lattice nodes on or outside the boundary are replaced by a nearby point
/// strictly inside the domain, which keeps the covering property. Point order
/// is lexicographic in the lattice index (last axis fastest).
inline CoveringGrid build_grid(const Domain& domain, double omega) {
  if (!(omega > 0.0)) throw ConfigError("build_grid: omega must be > 0");
  const int d = domain.dim();
  const double max_pitch = omega / std::sqrt(static_cast<double>(d));

  std::vector<std::vector<double>> axes;
  for (const auto& [lo, hi] : domain.bounding_box()) axes.push_back(detail::axis_nodes(lo, hi, max_pitch));

  // Inward nudge for boundary nodes, tiny relative to the lattice pitch.
  const double nudge = 1e-9 * std::min(max_pitch, domain.diameter());

  std::vector<double> coords;
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  Point x(static_cast<std::size_t>(d));
  while (true) {
    for (int k = 0; k < d; ++k) x[k] = axes[k][idx[k]];

    bool keep = true;
    if (domain.shape() == Domain::Shape::Box) {
      for (int k = 0; k < d; ++k) {
        const auto [lo, hi] = domain.bounding_box()[k];
        x[k] = std::clamp(x[k], lo + nudge, hi - nudge);
      }
    } else {
      const double r = distance(x, domain.center());
      const double inner = domain.radius() - nudge;
      if (r > inner) {
        // Only lattice nodes near the sphere are needed for covering.
        if (r - domain.radius() > max_pitch * std::sqrt(static_cast<double>(d))) {
          keep = false;
        } else {
          for (int k = 0; k < d; ++k) x[k] = domain.center()[k] + (x[k] - domain.center()[k]) * inner / r;
        }
      }
    }

    if (keep) {
      // Nudged boundary nodes can coincide with an earlier point.
      bool duplicate = false;
      const std::size_t count = coords.size() / static_cast<std::size_t>(d);
      if (domain.shape() == Domain::Shape::Ball) {
        for (std::size_t i = 0; i < count && !duplicate; ++i) {
          duplicate = squared_distance(ConstPoint(coords).subspan(i * d, d), x) < nudge * nudge;
        }
      }
      if (!duplicate) coords.insert(coords.end(), x.begin(), x.end());
    }

    int k = d - 1;
    while (k >= 0 && ++idx[k] == axes[k].size()) {
      idx[k] = 0;
      --k;
    }
    if (k < 0) break;
  }

  if (coords.empty()) {
    std::ostringstream os;
    os << "grid underflow: no lattice point inside the domain for omega = " << omega;
    throw ConfigError(os.str());
  }
  return CoveringGrid(d, std::move(coords), omega);
}

/// Nearest grid point, ties broken by grid order.
inline Point project_to_grid(ConstPoint x, const CoveringGrid& grid) {
  const auto p = grid.point(grid.nearest_index(x));
  return Point(p.begin(), p.end());
}

}  // namespace kdeflow
