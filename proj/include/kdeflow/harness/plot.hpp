#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "kdeflow/common.hpp"
#include "kdeflow/harness/output.hpp"

namespace kdeflow::harness {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Least-squares slope of log(value) against log(time) over the last
/// `fraction` of the samples with positive time and value.
inline SlopeFit fit_loglog_slope(const std::vector<double>& times, const std::vector<double>& values, double fraction = 0.5) {
  if (times.size() != values.size()) throw ConfigError("slope fit: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] > 0.0 && values[i] > 0.0) {
      lx.push_back(std::log(times[i]));
      ly.push_back(std::log(values[i]));
    }
  }
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(lx.size())));
  if (keep < 2) throw RuntimeFailure("slope fit: fewer than two usable points");
  const std::size_t start = lx.size() - keep;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = start; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(keep);
  my /= static_cast<double>(keep);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = start; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw RuntimeFailure("slope fit: degenerate time range");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.points = keep;
  return f;
}

/// Second-moment slope of a snapshot set over the last half of the run.
inline SlopeFit moment_slope(const SnapshotSet& set) {
  std::vector<double> t, m;
  for (const auto& r : set.diagnostics) {
    if (r.step == 0) continue;
    t.push_back(r.time + set.time_offset);
    m.push_back(r.second_moment);
  }
  return fit_loglog_slope(t, m, 0.5);
}

enum class PlotKind { EnergyCurve, DensityFrames, MomentCurve };

inline PlotKind plot_kind_from_name(const std::string& s) {
  if (s == "energy_curve") return PlotKind::EnergyCurve;
  if (s == "density_frames") return PlotKind::DensityFrames;
  if (s == "moment_curve") return PlotKind::MomentCurve;
  throw ConfigError("unknown plot kind '" + s + "' (energy_curve, density_frames, moment_curve)");
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

// Plot frame: 640x400 canvas, data mapped into the inner rectangle.
class Canvas {
 public:
  static constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;

  Canvas(std::string title, double x0, double x1, double y0, double y1, std::string xlab, std::string ylab)
      : x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
    if (!(x1_ > x0_)) {
      x0_ -= 0.5;
      x1_ += 0.5;
    }
    if (!(y1_ > y0_)) {
      const double pad = std::max(std::abs(y0_) * 0.05, 0.5);
      y0_ -= pad;
      y1_ += pad;
    }
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\">\n";
    os_ << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os_ << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
        << escape(title) << "</text>\n";
    axes(xlab, ylab);
  }

  double sx(double x) const { return L + (x - x0_) / (x1_ - x0_) * (W - L - R); }
  double sy(double y) const { return H - B - (y - y0_) / (y1_ - y0_) * (H - T - B); }

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& color) {
    os_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) os_ << (i ? " " : "") << num(sx(xs[i])) << ',' << num(sy(ys[i]));
    os_ << "\"/>\n";
  }

  void dots(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& color) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      os_ << "<circle cx=\"" << num(sx(xs[i])) << "\" cy=\"" << num(sy(ys[i])) << "\" r=\"2\" fill=\"" << color << "\"/>\n";
    }
  }

  void rect(double x, double y, double w, double h, const std::string& fill) {
    const double px = sx(x), py = sy(y + h);
    os_ << "<rect x=\"" << num(px) << "\" y=\"" << num(py) << "\" width=\"" << num(sx(x + w) - px) << "\" height=\""
        << num(sy(y) - py) << "\" fill=\"" << fill << "\"/>\n";
  }

  void text(double px, double py, const std::string& s, const char* anchor = "start") {
    os_ << "<text x=\"" << num(px) << "\" y=\"" << num(py) << "\" text-anchor=\"" << anchor
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s) << "</text>\n";
  }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  void axes(const std::string& xlab, const std::string& ylab) {
    const double left = L, right = W - R, top = T, bottom = H - B;
    os_ << "<g stroke=\"black\" stroke-width=\"1\">\n";
    os_ << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\"" << bottom << "\"/>\n";
    os_ << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom << "\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double fx = x0_ + (x1_ - x0_) * i / 4.0, fy = y0_ + (y1_ - y0_) * i / 4.0;
      os_ << "<line x1=\"" << num(sx(fx)) << "\" y1=\"" << bottom << "\" x2=\"" << num(sx(fx)) << "\" y2=\"" << bottom + 4
          << "\"/>\n";
      os_ << "<line x1=\"" << left - 4 << "\" y1=\"" << num(sy(fy)) << "\" x2=\"" << left << "\" y2=\"" << num(sy(fy))
          << "\"/>\n";
    }
    os_ << "</g>\n";
    for (int i = 0; i <= 4; ++i) {
      const double fx = x0_ + (x1_ - x0_) * i / 4.0, fy = y0_ + (y1_ - y0_) * i / 4.0;
      text(sx(fx), bottom + 18, label(fx), "middle");
      text(left - 8, sy(fy) + 4, label(fy), "end");
    }
    text((left + right) / 2, H - 10, xlab, "middle");
    os_ << "<text x=\"16\" y=\"" << num((top + bottom) / 2) << "\" transform=\"rotate(-90 16 " << num((top + bottom) / 2)
        << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(ylab) << "</text>\n";
  }

  double x0_, x1_, y0_, y1_;
  std::ostringstream os_;
};

inline std::pair<double, double> range(const std::vector<double>& v) {
  double lo = kInfinity, hi = -kInfinity;
  for (double x : v) {
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (lo > hi) return {0.0, 1.0};
  return {lo, hi};
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
  return colors[i % 7];
}

inline std::string energy_curve(const SnapshotSet& set) {
  std::vector<double> t, e;
  for (const auto& r : set.diagnostics) {
    t.push_back(r.time);
    e.push_back(r.energy);
  }
  const auto [t0, t1] = range(t);
  const auto [e0, e1] = range(e);
  Canvas c("energy", t0, t1, e0, e1, "time", "phi_n");
  c.polyline(t, e, palette(0));
  return c.finish();
}

// Up to six frames evenly spread over the run, always including the last.
inline std::vector<std::size_t> pick_frames(std::size_t count) {
  std::vector<std::size_t> idx;
  const std::size_t want = std::min<std::size_t>(count, 6);
  for (std::size_t k = 0; k < want; ++k) {
    idx.push_back(want == 1 ? count - 1 : k * (count - 1) / (want - 1));
  }
  return idx;
}

inline std::string density_frames(const SnapshotSet& set) {
  if (set.dim == 1) {
    const auto [x0, x1] = range(set.frames.front().nodes);
    double umax = 0.0;
    for (const auto& f : set.frames) umax = std::max(umax, range(f.density).second);
    Canvas c("density", x0, x1, 0.0, umax, "x", "u");
    std::size_t k = 0;
    for (std::size_t i : pick_frames(set.frames.size())) {
      const auto& f = set.frames[i];
      c.polyline(f.nodes, f.density, palette(k));
      c.text(Canvas::W - Canvas::R - 4, Canvas::T + 14 + 14 * static_cast<double>(k), "t = " + label(f.time), "end");
      ++k;
    }
    return c.finish();
  }
  // Higher dimensions: heat map of the final frame over the first two axes.
  const auto& f = set.frames.back();
  const auto d = static_cast<std::size_t>(set.dim);
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < f.density.size(); ++j) {
    xs.push_back(f.nodes[j * d]);
    ys.push_back(f.nodes[j * d + 1]);
  }
  const auto [x0, x1] = range(xs);
  const auto [y0, y1] = range(ys);
  const double umax = std::max(range(f.density).second, 1e-300);
  double dx = x1 - x0, dy = y1 - y0;
  for (std::size_t j = 1; j < xs.size(); ++j) {
    if (xs[j] > xs[0]) dx = std::min(dx, xs[j] - xs[0]);
    if (ys[j] > ys[0]) dy = std::min(dy, ys[j] - ys[0]);
  }
  Canvas c("density at t = " + label(f.time), x0 - dx / 2, x1 + dx / 2, y0 - dy / 2, y1 + dy / 2, "x0", "x1");
  for (std::size_t j = 0; j < f.density.size(); ++j) {
    const int shade = 255 - static_cast<int>(std::lround(255.0 * std::clamp(f.density[j] / umax, 0.0, 1.0)));
    char fill[16];
    std::snprintf(fill, sizeof fill, "rgb(%d,%d,255)", shade, shade);
    c.rect(xs[j] - dx / 2, ys[j] - dy / 2, dx, dy, fill);
  }
  return c.finish();
}

inline std::string moment_curve(const SnapshotSet& set) {
  std::vector<double> lt, lm;
  for (const auto& r : set.diagnostics) {
    const double t = r.time + set.time_offset;
    if (t > 0.0 && r.second_moment > 0.0) {
      lt.push_back(std::log(t));
      lm.push_back(std::log(r.second_moment));
    }
  }
  const auto [a0, a1] = range(lt);
  const auto [b0, b1] = range(lm);
  Canvas c("second moment (log-log)", a0, a1, b0, b1, "log(t + t0)", "log M2");
  c.dots(lt, lm, palette(0));
  if (lt.size() >= 4) {
    const SlopeFit fit = moment_slope(set);
    const double xa = lt[lt.size() - fit.points], xb = lt.back();
    c.polyline({xa, xb}, {fit.intercept + fit.slope * xa, fit.intercept + fit.slope * xb}, palette(3));
    char buf[96];
    std::snprintf(buf, sizeof buf, "fitted slope = %.4f (last %zu points)", fit.slope, fit.points);
    c.text(Canvas::L + 10, Canvas::T + 16, buf);
  }
  return c.finish();
}

}  // namespace detail

/// Standalone SVG for one plot kind; identical input gives identical bytes.
inline std::string emit_plot(const SnapshotSet& set, PlotKind kind) {
  switch (kind) {
    case PlotKind::EnergyCurve:
      if (set.diagnostics.empty()) throw ConfigError("plot: no diagnostics rows");
      return detail::energy_curve(set);
    case PlotKind::DensityFrames:
      if (set.frames.empty()) throw ConfigError("plot: no snapshots");
      return detail::density_frames(set);
    case PlotKind::MomentCurve:
      if (set.diagnostics.empty()) throw ConfigError("plot: no diagnostics rows");
      return detail::moment_curve(set);
  }
  return {};
}

}  // namespace kdeflow::harness
