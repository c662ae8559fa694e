#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdeflow/common.hpp"
#include "kdeflow/domain.hpp"
#include "kdeflow/energy.hpp"
#include "kdeflow/kde.hpp"
#include "kdeflow/kernel.hpp"
#include "kdeflow/scheme.hpp"

namespace kdeflow::harness {

using json = nlohmann::json;

enum class ScheduleMode { Default, Explicit };

/// Largest sample size a run will accept from the theorem schedule.
inline constexpr double kMaxRunSampleSize = 1e6;

/// Initial density and the json that produced it.
struct InitialSpec {
  InitialDensity density;
  json source;
  /// Barenblatt start time; 0 for other profiles. Used as time origin in plots.
  double time_offset = 0.0;
};

struct RunConfig {
  Domain domain = Domain::box({{0.0, 1.0}});
  Kernel kernel = Kernel::epanechnikov(1);
  EnergySpec energy;
  std::optional<InitialSpec> initial;
  std::uint64_t seed = 1;
  double tau = 0.05;
  double horizon = 1.0;

  ScheduleMode schedule_mode = ScheduleMode::Explicit;
  std::size_t n = 256;
  double h = 0.05;
  std::optional<double> omega;
  GammaSchedule gamma = GammaSchedule::power(1.5, 1.0);

  OptimizerSpec optimizer;
  std::optional<DensityCap> density_cap;
  bool allow_coarse_grid = false;

  std::string output_dir = "out";
  std::optional<std::size_t> snapshot_stride;
  double export_pitch_fraction = 0.0625;

  bool schedule_check = false;
  std::vector<double> ladder{0.2, 0.1, 0.05, 0.025};

  /// Flags that overrode config values, in application order.
  json overrides = json::object();
  std::vector<std::string> warnings;

  std::size_t steps() const { return static_cast<std::size_t>(std::ceil(horizon / tau - 1e-12)); }
  std::size_t stride() const {
    if (snapshot_stride) return *snapshot_stride;
    return std::max<std::size_t>(1, (steps() + 99) / 100);
  }

  SchemeParams scheme_params() const {
    SchemeParams s;
    s.tau = tau;
    s.n = n;
    s.h = h;
    s.p = energy.p;
    s.gamma = gamma;
    s.grid_omega = omega;
    s.density_cap = density_cap;
    s.optimizer = optimizer;
    s.allow_coarse_grid = allow_coarse_grid;
    return s;
  }
};

namespace detail {

inline std::string where(const std::string& ctx, const std::string& key) { return ctx.empty() ? key : ctx + "." + key; }

inline void only_keys(const json& j, const std::string& ctx, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + (ctx.empty() ? std::string("<root>") : ctx) + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("config: unknown key '" + where(ctx, k) + "'");
  }
}

inline const json& need(const json& j, const std::string& ctx, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config: missing required key '" + where(ctx, key) + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& name) {
  if (!j.is_number()) throw ConfigError("config: '" + name + "' must be a number");
  return j.get<double>();
}

inline double positive(const json& j, const std::string& name) {
  const double v = number(j, name);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("config: '" + name + "' must be a finite number > 0");
  return v;
}

inline std::size_t count(const json& j, const std::string& name) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError("config: '" + name + "' must be an integer");
  const auto v = j.get<long long>();
  if (v < 1) throw ConfigError("config: '" + name + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

inline Point point(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw ConfigError("config: '" + name + "' must be a non-empty array of numbers");
  Point p;
  for (const auto& v : j) p.push_back(number(v, name));
  return p;
}

inline std::string text(const json& j, const std::string& name) {
  if (!j.is_string()) throw ConfigError("config: '" + name + "' must be a string");
  return j.get<std::string>();
}

inline Box bounds(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw ConfigError("config: '" + name + "' must be a list of [lo, hi] pairs");
  Box b;
  for (const auto& ax : j) {
    if (!ax.is_array() || ax.size() != 2) throw ConfigError("config: '" + name + "' entries must be [lo, hi] pairs");
    b.emplace_back(number(ax[0], name), number(ax[1], name));
  }
  return b;
}

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline Domain parse_domain(const json& j) {
  only_keys(j, "domain", {"shape", "bounds", "center", "radius"});
  const std::string type = j.contains("shape") ? text(j.at("shape"), "domain.shape") : "box";
  if (type == "box") return Domain::box(bounds(need(j, "domain", "bounds"), "domain.bounds"));
  if (type == "ball") {
    return Domain::ball(point(need(j, "domain", "center"), "domain.center"),
                        positive(need(j, "domain", "radius"), "domain.radius"));
  }
  throw ConfigError("config: domain.shape must be 'box' or 'ball', got '" + type + "'");
}

inline Kernel parse_kernel(const json& j, int dim) {
  if (j.is_string()) return Kernel::from_name(j.get<std::string>(), dim);
  only_keys(j, "kernel", {"family"});
  return Kernel::from_name(text(need(j, "kernel", "family"), "kernel.family"), dim);
}

inline InternalEnergyLaw parse_law(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "entropy") return InternalEnergyLaw::entropy();
    throw ConfigError("config: F must be 'entropy' or {\"family\": \"power\", \"m\": ...}");
  }
  only_keys(j, "F", {"family", "m"});
  const std::string law = text(need(j, "F", "family"), "F.family");
  if (law == "entropy") return InternalEnergyLaw::entropy();
  if (law == "power") return InternalEnergyLaw::power(positive(need(j, "F", "m"), "F.m"));
  throw ConfigError("config: F.family must be 'entropy' or 'power', got '" + law + "'");
}

inline Potential parse_potential(const json& j, int dim) {
  only_keys(j, "V", {"type", "a", "b", "center", "slope", "L_V"});
  const std::string type = text(need(j, "V", "type"), "V.type");
  auto center = [&] {
    Point c = j.contains("center") ? point(j.at("center"), "V.center") : Point(static_cast<std::size_t>(dim), 0.0);
    if (static_cast<int>(c.size()) != dim) throw ConfigError("config: V.center dimension differs from the domain");
    return c;
  };
  if (type == "zero") return Potential::zero(dim);
  if (type == "constant") return Potential::constant(number(need(j, "V", "a"), "V.a"), dim);
  if (type == "linear") {
    Point g = point(need(j, "V", "slope"), "V.slope");
    if (static_cast<int>(g.size()) != dim) throw ConfigError("config: V.slope dimension differs from the domain");
    return Potential::linear(std::move(g));
  }
  if (type == "quadratic") return Potential::quadratic(number(need(j, "V", "a"), "V.a"), center());
  if (type == "double_well") {
    return Potential::double_well(number(need(j, "V", "a"), "V.a"), number(need(j, "V", "b"), "V.b"), center());
  }
  throw ConfigError("config: V.type must be zero, constant, linear, quadratic or double_well, got '" + type + "'");
}

inline Interaction parse_interaction(const json& j) {
  only_keys(j, "W", {"type", "c", "L_W"});
  const std::string type = text(need(j, "W", "type"), "W.type");
  if (type == "none") return Interaction::none();
  if (type == "quadratic") return Interaction::quadratic(number(need(j, "W", "c"), "W.c"));
  throw ConfigError("config: W.type must be none or quadratic, got '" + type + "'");
}

inline InitialSpec parse_initial(const json& j, const Domain& domain) {
  only_keys(j, "initial", {"type", "bounds", "mean", "sigma", "m", "t0", "center"});
  const std::string type = text(need(j, "initial", "type"), "initial.type");
  const int d = domain.dim();
  auto check_dim = [&](const Point& p, const char* name) {
    if (static_cast<int>(p.size()) != d) throw ConfigError(std::string("config: ") + name + " dimension differs from the domain");
    return p;
  };
  if (type == "uniform") {
    Box b = j.contains("bounds") ? bounds(j.at("bounds"), "initial.bounds") : Box{};
    return {InitialDensity::uniform(domain, b), j, 0.0};
  }
  if (type == "trunc_gauss") {
    const Point mean = check_dim(point(need(j, "initial", "mean"), "initial.mean"), "initial.mean");
    return {InitialDensity::trunc_gauss(domain, mean, positive(need(j, "initial", "sigma"), "initial.sigma")), j, 0.0};
  }
  if (type == "barenblatt") {
    const double t0 = positive(need(j, "initial", "t0"), "initial.t0");
    const Point c = j.contains("center") ? check_dim(point(j.at("center"), "initial.center"), "initial.center")
                                         : Point(static_cast<std::size_t>(d), 0.0);
    return {InitialDensity::barenblatt(domain, positive(need(j, "initial", "m"), "initial.m"), t0, c), j, t0};
  }
  throw ConfigError("config: initial.type must be uniform, trunc_gauss or barenblatt, got '" + type + "'");
}

inline GammaSchedule parse_gamma(const json& j) {
  only_keys(j, "schedule.gamma", {"exponent", "coefficient", "values"});
  if (j.contains("values")) {
    if (!j.at("values").is_array()) throw ConfigError("config: 'schedule.gamma.values' must be an array");
    std::vector<double> v;
    for (const auto& x : j.at("values")) v.push_back(number(x, "schedule.gamma.values"));
    return GammaSchedule::explicit_values(std::move(v));
  }
  const double e = j.contains("exponent") ? number(j.at("exponent"), "schedule.gamma.exponent") : 1.5;
  const double c = j.contains("coefficient") ? number(j.at("coefficient"), "schedule.gamma.coefficient") : 1.0;
  return GammaSchedule::power(e, c);
}

inline json gamma_json(const GammaSchedule& g) {
  if (g.is_explicit()) return json{{"values", g.values()}};
  return json{{"exponent", g.exponent()}, {"coefficient", g.coefficient()}};
}

inline json domain_json(const Domain& d) {
  if (d.shape() == Domain::Shape::Ball) return json{{"shape", "ball"}, {"center", d.center()}, {"radius", d.radius()}};
  json b = json::array();
  for (const auto& [lo, hi] : d.bounding_box()) b.push_back({lo, hi});
  return json{{"shape", "box"}, {"bounds", b}};
}

inline json law_json(const InternalEnergyLaw& law) {
  if (law.family() == InternalEnergyLaw::Family::Entropy) return json{{"family", "entropy"}};
  return json{{"family", "power"}, {"m", law.m()}};
}

inline json potential_json(const Potential& v) {
  switch (v.type()) {
    case Potential::Type::Zero:
      return json{{"type", "zero"}};
    case Potential::Type::Constant:
      return json{{"type", "constant"}, {"a", v.strength()}};
    case Potential::Type::Linear:
      return json{{"type", "linear"}, {"slope", v.center()}};
    case Potential::Type::Quadratic:
      return json{{"type", "quadratic"}, {"a", v.strength()}, {"center", v.center()}};
    case Potential::Type::DoubleWell:
      return json{{"type", "double_well"}, {"a", v.strength()}, {"b", v.well_radius()}, {"center", v.center()}};
  }
  return {};
}

inline json interaction_json(const Interaction& w) {
  if (w.is_none()) return json{{"type", "none"}};
  return json{{"type", "quadratic"}, {"c", w.coefficient()}};
}

}  // namespace detail

/// Adds warnings for schedule conditions that fail along the ladder. The
/// error-budget condition gets its own wording since it is the one users
/// most often set by hand.
inline void collect_schedule_warnings(RunConfig& cfg);

/// Parameters of the run at step size tau under the configured schedule.
inline ScheduleValues schedule_values(const RunConfig& cfg, double tau) {
  if (cfg.schedule_mode == ScheduleMode::Default) {
    ScheduleValues s = default_schedule(tau, cfg.domain.dim(), cfg.energy.p);
    s.gamma = cfg.gamma;
    return s;
  }
  const double omega = cfg.omega ? *cfg.omega : 0.05 * std::pow(cfg.h, cfg.domain.dim() + 1);
  return {tau, static_cast<double>(cfg.n), cfg.h, omega, cfg.gamma};
}

namespace detail {

// Declared L_V / L_W are informational: the bounds use the analytic constants
// on the quadrature box, and a declared value below them is flagged.
inline void declared_lipschitz_warnings(const json& j, RunConfig& cfg) {
  const QuadratureLattice lattice(cfg.domain, cfg.h, cfg.energy.quadrature.resolve(cfg.h));
  auto check = [&](const char* term, const char* key, double analytic) {
    if (!j.contains(term) || !j.at(term).is_object() || !j.at(term).contains(key)) return;
    const double declared = number(j.at(term).at(key), key);
    if (declared < analytic * (1.0 - 1e-12)) {
      std::ostringstream os;
      os << "config: declared " << key << " = " << declared << " is below the analytic constant " << analytic
         << " on the quadrature box; the analytic value is used";
      cfg.warnings.push_back(os.str());
    }
  };
  check("V", "L_V", cfg.energy.potential.lipschitz(lattice.box()));
  check("W", "L_W", cfg.energy.interaction.lipschitz(lattice.box()));
}

}  // namespace detail

/// Builds a validated RunConfig from parsed json.
inline RunConfig config_from_json(const json& j) {
  using namespace detail;
  only_keys(j, "", {"domain", "kernel", "F", "V", "W", "p", "quadrature", "energy_mode", "initial", "seed", "tau",
                    "horizon", "schedule", "optimizer", "density_cap", "allow_coarse_grid", "output", "schedule_check",
                    "ladder"});
  RunConfig cfg;
  cfg.domain = parse_domain(need(j, "", "domain"));
  const int d = cfg.domain.dim();
  cfg.kernel = parse_kernel(need(j, "", "kernel"), d);

  EnergySpec& e = cfg.energy;
  e.domain = cfg.domain;
  e.law = parse_law(need(j, "", "F"));
  e.potential = j.contains("V") ? parse_potential(j.at("V"), d) : Potential::zero(d);
  e.interaction = j.contains("W") ? parse_interaction(j.at("W")) : Interaction::none();
  if (j.contains("p")) {
    e.p = number(j.at("p"), "p");
    if (!(e.p > 1.0)) throw ConfigError("config: 'p' must be > 1");
  }
  if (j.contains("quadrature")) {
    const json& q = j.at("quadrature");
    only_keys(q, "quadrature", {"pitch", "pitch_fraction"});
    if (q.contains("pitch")) e.quadrature.pitch = positive(q.at("pitch"), "quadrature.pitch");
    if (q.contains("pitch_fraction")) e.quadrature.pitch_fraction = positive(q.at("pitch_fraction"), "quadrature.pitch_fraction");
  }
  if (j.contains("energy_mode")) e.mode = energy_mode_from_name(text(j.at("energy_mode"), "energy_mode"));

  cfg.initial = parse_initial(need(j, "", "initial"), cfg.domain);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() && !j.at("seed").is_number_unsigned()) throw ConfigError("config: 'seed' must be an integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  cfg.tau = positive(need(j, "", "tau"), "tau");
  cfg.horizon = positive(need(j, "", "horizon"), "horizon");

  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    only_keys(s, "schedule", {"mode", "n", "h", "omega", "gamma"});
    const std::string mode = s.contains("mode") ? text(s.at("mode"), "schedule.mode") : "explicit";
    if (mode == "default") {
      cfg.schedule_mode = ScheduleMode::Default;
      for (const char* k : {"n", "h", "omega"}) {
        if (s.contains(k)) throw ConfigError(std::string("config: 'schedule.") + k + "' is derived in default mode; remove it or use mode 'explicit'");
      }
    } else if (mode != "explicit") {
      throw ConfigError("config: schedule.mode must be 'default' or 'explicit', got '" + mode + "'");
    }
    if (s.contains("n")) cfg.n = count(s.at("n"), "schedule.n");
    if (s.contains("h")) cfg.h = positive(s.at("h"), "schedule.h");
    if (s.contains("omega")) cfg.omega = positive(s.at("omega"), "schedule.omega");
    if (s.contains("gamma")) cfg.gamma = parse_gamma(s.at("gamma"));
  }
  if (cfg.schedule_mode == ScheduleMode::Default) {
    if (!(cfg.tau < 1.0)) throw ConfigError("config: default schedule needs tau < 1");
    const ScheduleValues v = default_schedule(cfg.tau, d, e.p);
    if (v.n > kMaxRunSampleSize) {
      std::ostringstream os;
      os << "config: default schedule asks for n = " << v.n << " particles at tau = " << cfg.tau
         << " (limit " << kMaxRunSampleSize << "); use schedule.mode 'explicit' for runs";
      throw ConfigError(os.str());
    }
    cfg.n = static_cast<std::size_t>(v.n);
    cfg.h = v.h;
    cfg.omega = v.omega;
  }

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    only_keys(o, "optimizer", {"mode", "theta", "max_rounds", "r_min", "max_moves_per_particle"});
    if (o.contains("mode")) cfg.optimizer.mode = optimizer_mode_from_name(text(o.at("mode"), "optimizer.mode"));
    if (o.contains("theta")) {
      cfg.optimizer.theta = number(o.at("theta"), "optimizer.theta");
      if (!(cfg.optimizer.theta >= 0.0)) throw ConfigError("config: 'optimizer.theta' must be >= 0");
    }
    if (o.contains("max_rounds")) cfg.optimizer.max_rounds = count(o.at("max_rounds"), "optimizer.max_rounds");
    if (o.contains("r_min")) cfg.optimizer.r_min = positive(o.at("r_min"), "optimizer.r_min");
    if (o.contains("max_moves_per_particle")) {
      cfg.optimizer.max_moves_per_particle = count(o.at("max_moves_per_particle"), "optimizer.max_moves_per_particle");
    }
  }
  if (cfg.optimizer.mode == OptimizerMode::GridCoordinateDescent && !cfg.omega) {
    cfg.omega = 0.05 * std::pow(cfg.h, d + 1);
  }
  if (j.contains("density_cap")) {
    const json& c = j.at("density_cap");
    only_keys(c, "density_cap", {"M", "M_bar", "epsilon"});
    cfg.density_cap = DensityCap{positive(need(c, "density_cap", "M"), "density_cap.M"),
                                 positive(need(c, "density_cap", "M_bar"), "density_cap.M_bar"),
                                 c.contains("epsilon") ? number(c.at("epsilon"), "density_cap.epsilon") : 0.0};
  }
  if (j.contains("allow_coarse_grid")) {
    if (!j.at("allow_coarse_grid").is_boolean()) throw ConfigError("config: 'allow_coarse_grid' must be a boolean");
    cfg.allow_coarse_grid = j.at("allow_coarse_grid").get<bool>();
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    only_keys(o, "output", {"dir", "snapshot_stride", "export_pitch_fraction"});
    if (o.contains("dir")) cfg.output_dir = text(o.at("dir"), "output.dir");
    if (o.contains("snapshot_stride")) cfg.snapshot_stride = count(o.at("snapshot_stride"), "output.snapshot_stride");
    if (o.contains("export_pitch_fraction")) {
      cfg.export_pitch_fraction = positive(o.at("export_pitch_fraction"), "output.export_pitch_fraction");
    }
  }
  if (j.contains("schedule_check")) {
    if (!j.at("schedule_check").is_boolean()) throw ConfigError("config: 'schedule_check' must be a boolean");
    cfg.schedule_check = j.at("schedule_check").get<bool>();
  }
  if (j.contains("ladder")) {
    cfg.ladder.clear();
    if (!j.at("ladder").is_array()) throw ConfigError("config: 'ladder' must be an array");
    for (const auto& v : j.at("ladder")) cfg.ladder.push_back(positive(v, "ladder"));
  }

  // Cross-module checks before anything runs.
  (void)e.quadrature.resolve(cfg.h);
  declared_lipschitz_warnings(j, cfg);
  cfg.scheme_params().validate(cfg.kernel);
  if (cfg.schedule_check) collect_schedule_warnings(cfg);
  return cfg;
}

inline void collect_schedule_warnings(RunConfig& cfg) {
  const auto report = check_schedule([&](double t) { return schedule_values(cfg, t); }, cfg.energy.law, cfg.kernel,
                                     cfg.energy.p, cfg.ladder);
  for (const auto& c : report.conditions) {
    if (c.decreasing) continue;
    if (c.name == "error_budget") {
      cfg.warnings.push_back("schedule: gamma_tau is not o(tau) along the ladder; the cumulative error budget does not vanish");
    } else {
      cfg.warnings.push_back("schedule: condition '" + c.name + "' does not decrease along the ladder");
    }
  }
}

/// Reads and validates a config file. Parse errors carry line and column.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::ostringstream os;
    os << "config: parse error in '" << path << "' at line " << line << ", column " << col << ": " << e.what();
    throw ConfigError(os.str());
  }
  return config_from_json(j);
}

/// Every field after defaulting; written next to run outputs.
inline json resolved_json(const RunConfig& cfg) {
  using namespace detail;
  json j;
  j["domain"] = domain_json(cfg.domain);
  j["kernel"] = json{{"family", cfg.kernel.name()}};
  j["F"] = law_json(cfg.energy.law);
  j["V"] = potential_json(cfg.energy.potential);
  j["W"] = interaction_json(cfg.energy.interaction);
  j["p"] = cfg.energy.p;
  j["quadrature"] = json{{"pitch", cfg.energy.quadrature.resolve(cfg.h)}};
  j["energy_mode"] = cfg.energy.mode == EnergyMode::Exact ? "exact" : "particle_sum";
  j["initial"] = cfg.initial ? cfg.initial->source : json();
  j["seed"] = cfg.seed;
  j["tau"] = cfg.tau;
  j["horizon"] = cfg.horizon;
  json s{{"mode", cfg.schedule_mode == ScheduleMode::Default ? "default" : "explicit"},
         {"n", cfg.n},
         {"h", cfg.h},
         {"gamma", gamma_json(cfg.gamma)}};
  s["omega"] = cfg.omega ? json(*cfg.omega) : json(nullptr);
  j["schedule"] = s;
  json o{{"mode", optimizer_mode_name(cfg.optimizer.mode)},
         {"theta", cfg.optimizer.theta},
         {"max_rounds", cfg.optimizer.max_rounds},
         {"max_moves_per_particle", cfg.optimizer.max_moves_per_particle}};
  const double r_min = cfg.optimizer.r_min ? *cfg.optimizer.r_min : (cfg.omega ? *cfg.omega : cfg.h / 64.0);
  o["r_min"] = r_min;
  j["optimizer"] = o;
  j["density_cap"] = cfg.density_cap ? json{{"M", cfg.density_cap->M}, {"M_bar", cfg.density_cap->M_bar}, {"epsilon", cfg.density_cap->epsilon}}
                                     : json(nullptr);
  j["allow_coarse_grid"] = cfg.allow_coarse_grid;
  j["output"] = json{{"dir", cfg.output_dir}, {"snapshot_stride", cfg.stride()}, {"export_pitch_fraction", cfg.export_pitch_fraction}};
  j["schedule_check"] = cfg.schedule_check;
  j["ladder"] = cfg.ladder;
  j["overrides"] = cfg.overrides;
  j["warnings"] = cfg.warnings;
  return j;
}

}  // namespace kdeflow::harness
