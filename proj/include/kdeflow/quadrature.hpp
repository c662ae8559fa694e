#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "kdeflow/common.hpp"

namespace kdeflow::quad {

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double fa, double b, double fb, double m, double fm, double whole,
                    double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson on [a, b] to absolute tolerance tol.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-10, int max_depth = 40) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

/// Adaptive Simpson over consecutive break points; use break points where
/// the integrand has kinks or jumps.
template <class F>
double piecewise_simpson(const F& f, std::vector<double> breaks, double tol = 1e-10) {
  std::sort(breaks.begin(), breaks.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    s += adaptive_simpson(f, breaks[i], breaks[i + 1], tol / static_cast<double>(breaks.size()));
  }
  return s;
}

/// Composite Gauss-Legendre (5 points) on a tensor grid of `cells` cells per
/// axis over a box. Used where adaptive nesting in d >= 2 would be too slow.
inline double gauss_box(const std::function<double(ConstPoint)>& f, const std::vector<double>& lo,
                        const std::vector<double>& hi, int cells) {
  static constexpr double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                      0.9061798459386640};
  static constexpr double weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                        0.4786286704993665, 0.2369268850561891};
  const std::size_t d = lo.size();
  const std::size_t per_axis = static_cast<std::size_t>(cells) * 5;
  std::vector<std::size_t> idx(d, 0);
  Point x(d);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t cell = idx[k] / 5, q = idx[k] % 5;
      const double h = (hi[k] - lo[k]) / cells;
      const double c = lo[k] + (static_cast<double>(cell) + 0.5) * h;
      x[k] = c + 0.5 * h * nodes[q];
      w *= 0.5 * h * weights[q];
    }
    total += w * f(x);
    std::size_t k = d;
    while (k > 0) {
      --k;
      if (++idx[k] < per_axis) break;
      idx[k] = 0;
      if (k == 0) return total;
    }
    if (d == 0) return total;
  }
}

}  // namespace kdeflow::quad
