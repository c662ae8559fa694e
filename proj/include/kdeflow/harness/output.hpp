#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdeflow/common.hpp"
#include "kdeflow/energy.hpp"
#include "kdeflow/kde.hpp"
#include "kdeflow/scheme.hpp"

namespace kdeflow::harness {

namespace fs = std::filesystem;

/// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string fmt(double v) {
  if (is_infinite(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "inf") return kInfinity;
  if (s == "-inf") return -kInfinity;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) throw RuntimeFailure("cannot parse number '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

/// Scalar diagnostics of one recorded state (step 0 is the initial state).
struct DiagnosticRow {
  std::size_t step = 0;
  double time = 0.0;
  double energy = 0.0;
  double psi = 0.0;
  double displacement_p = 0.0;
  double gamma = 0.0;
  double cumulative_gamma = 0.0;
  /// Second moment of the mixture about its mean.
  double second_moment = 0.0;
  std::size_t rounds = 0;
};

inline const char* kDiagnosticsHeader = "step,time,energy,psi,displacement_p,gamma,cumulative_gamma,second_moment,rounds";

inline std::string diagnostics_line(const DiagnosticRow& r) {
  std::ostringstream os;
  os << r.step << ',' << fmt(r.time) << ',' << fmt(r.energy) << ',' << fmt(r.psi) << ',' << fmt(r.displacement_p) << ','
     << fmt(r.gamma) << ',' << fmt(r.cumulative_gamma) << ',' << fmt(r.second_moment) << ',' << r.rounds;
  return os.str();
}

/// Density on the export lattice plus the particles of one recorded step.
struct Snapshot {
  std::size_t step = 0;
  double time = 0.0;
  ParticleConfiguration particles;
  /// Export-lattice node coordinates, row-major, dim per node.
  std::vector<double> nodes;
  std::vector<double> density;
  double cell_volume = 0.0;
  /// Midpoint-rule integral of the density over the export lattice.
  double mass() const {
    double s = 0.0;
    for (double u : density) s += u;
    return s * cell_volume;
  }
};

struct SnapshotSet {
  int dim = 1;
  /// Time origin for log-log plots (Barenblatt start time, else 0).
  double time_offset = 0.0;
  std::vector<Snapshot> frames;
  std::vector<DiagnosticRow> diagnostics;
};

/// Mixture second moment about its mean: particle part plus h^2 M_{K,2}.
inline double mixture_second_moment(const ParticleConfiguration& y, double h, const Kernel& kernel) {
  return y.second_moment(y.mean()) + h * h * kernel.moment(2.0);
}

/// Mixture density on the midpoint export lattice over the h-extended
/// bounding box of the domain.
inline Snapshot export_snapshot(std::size_t step, double time, const ParticleConfiguration& y, double h,
                                const Kernel& kernel, const Domain& domain, double pitch) {
  const QuadratureLattice lattice(domain, h, pitch);
  Snapshot s;
  s.step = step;
  s.time = time;
  s.particles = y;
  s.cell_volume = lattice.cell_volume();
  const auto sums = rasterize(y, h, kernel, lattice);
  const double inv_n = 1.0 / static_cast<double>(y.size());
  s.density.reserve(sums.size());
  for (double v : sums) s.density.push_back(v * inv_n);
  s.nodes.reserve(lattice.size() * static_cast<std::size_t>(lattice.dim()));
  Point x(static_cast<std::size_t>(lattice.dim()));
  for (std::size_t j = 0; j < lattice.size(); ++j) {
    lattice.node(j, x);
    s.nodes.insert(s.nodes.end(), x.begin(), x.end());
  }
  return s;
}

inline std::string snapshot_name(const char* kind, std::size_t step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06zu.csv", kind, step);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string coordinate_header(int d) {
  std::string h;
  for (int k = 0; k < d; ++k) h += (k ? ",x" : "x") + std::to_string(k);
  return h;
}

inline void write_snapshot(const fs::path& dir, const Snapshot& s) {
  const int d = s.particles.dim();
  std::ostringstream p;
  p << "# step=" << s.step << " time=" << fmt(s.time) << '\n' << coordinate_header(d) << '\n';
  for (std::size_t i = 0; i < s.particles.size(); ++i) {
    const auto y = s.particles.point(i);
    for (int k = 0; k < d; ++k) p << (k ? "," : "") << fmt(y[k]);
    p << '\n';
  }
  write_text(dir / snapshot_name("particles", s.step), p.str());

  std::ostringstream u;
  u << "# step=" << s.step << " time=" << fmt(s.time) << " cell_volume=" << fmt(s.cell_volume) << '\n'
    << coordinate_header(d) << ",u\n";
  for (std::size_t j = 0; j < s.density.size(); ++j) {
    for (int k = 0; k < d; ++k) u << fmt(s.nodes[j * static_cast<std::size_t>(d) + k]) << ',';
    u << fmt(s.density[j]) << '\n';
  }
  write_text(dir / snapshot_name("density", s.step), u.str());
}

namespace detail {

// "# key=value key=value" comment line.
inline double header_value(const std::string& line, const std::string& key) {
  const auto pos = line.find(key + "=");
  if (pos == std::string::npos) throw RuntimeFailure("snapshot header lacks '" + key + "'");
  const auto start = pos + key.size() + 1;
  const auto end = line.find(' ', start);
  return parse_double(line.substr(start, end == std::string::npos ? std::string::npos : end - start));
}

}  // namespace detail

/// Reads a run directory back into memory (for plotting).
inline SnapshotSet load_snapshots(const fs::path& run_dir) {
  SnapshotSet set;
  {
    std::istringstream in(read_text(run_dir / "diagnostics.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split(line);
      if (f.size() != 9) throw RuntimeFailure("diagnostics.csv: malformed row");
      DiagnosticRow r;
      r.step = std::stoul(f[0]);
      r.time = parse_double(f[1]);
      r.energy = parse_double(f[2]);
      r.psi = parse_double(f[3]);
      r.displacement_p = parse_double(f[4]);
      r.gamma = parse_double(f[5]);
      r.cumulative_gamma = parse_double(f[6]);
      r.second_moment = parse_double(f[7]);
      r.rounds = std::stoul(f[8]);
      set.diagnostics.push_back(r);
    }
  }
  if (fs::exists(run_dir / "summary.json")) {
    const auto j = nlohmann::json::parse(read_text(run_dir / "summary.json"));
    set.time_offset = j.value("time_offset", 0.0);
  }
  std::vector<fs::path> files;
  const fs::path snaps = run_dir / "snapshots";
  if (fs::exists(snaps)) {
    for (const auto& e : fs::directory_iterator(snaps)) {
      if (e.path().filename().string().rfind("density_", 0) == 0) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::istringstream in(read_text(path));
    std::string header, columns, line;
    std::getline(in, header);
    std::getline(in, columns);
    const int d = static_cast<int>(split(columns).size()) - 1;
    Snapshot s;
    s.step = static_cast<std::size_t>(detail::header_value(header, "step"));
    s.time = detail::header_value(header, "time");
    s.cell_volume = detail::header_value(header, "cell_volume");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split(line);
      if (static_cast<int>(f.size()) != d + 1) throw RuntimeFailure(path.string() + ": malformed row");
      for (int k = 0; k < d; ++k) s.nodes.push_back(parse_double(f[k]));
      s.density.push_back(parse_double(f[d]));
    }
    set.dim = d;
    const fs::path ppath = snaps / snapshot_name("particles", s.step);
    if (fs::exists(ppath)) {
      std::istringstream pin(read_text(ppath));
      std::getline(pin, line);
      std::getline(pin, line);
      std::vector<double> c;
      while (std::getline(pin, line)) {
        if (line.empty()) continue;
        for (const auto& v : split(line)) c.push_back(parse_double(v));
      }
      s.particles = ParticleConfiguration(d, std::move(c));
    }
    set.frames.push_back(std::move(s));
  }
  return set;
}

}  // namespace kdeflow::harness
