#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kdeflow/harness/checks.hpp"
#include "kdeflow/harness/config.hpp"
#include "kdeflow/harness/experiment.hpp"
#include "kdeflow/harness/plot.hpp"

namespace {

using namespace kdeflow;
using namespace kdeflow::harness;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitCheck = 4;

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("KDEFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("KDEFLOW_THREADS must be a positive integer");
    n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
  }
  return n;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    // Re-run through the file loader for a positioned message.
    (void)load_config(path);
    throw;
  }
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tau, horizon, h;
  std::optional<std::size_t> n;
};

// Flags win over the config file; every applied flag is recorded.
RunConfig config_with_overrides(const std::string& path, const Overrides& o) {
  json j = read_json_file(path);
  json applied = json::object();
  if (o.seed) applied["seed"] = j["seed"] = *o.seed;
  if (o.tau) applied["tau"] = j["tau"] = *o.tau;
  if (o.horizon) applied["horizon"] = j["horizon"] = *o.horizon;
  if (o.n) applied["schedule.n"] = j["schedule"]["n"] = *o.n;
  if (o.h) applied["schedule.h"] = j["schedule"]["h"] = *o.h;
  if (o.out) applied["output.dir"] = j["output"]["dir"] = *o.out;
  RunConfig cfg = config_from_json(j);
  cfg.overrides = applied;
  return cfg;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--tau", o.tau, "time step");
  cmd->add_option("--horizon", o.horizon, "final time T");
  cmd->add_option("--n", o.n, "number of particles (explicit schedule)");
  cmd->add_option("--h", o.h, "bandwidth (explicit schedule)");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  for (const auto& part : split(s)) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse list entry '" + part + "'");
    }
  }
  return v;
}

InternalEnergyLaw parse_law_flag(const std::string& s) {
  if (s == "entropy") return InternalEnergyLaw::entropy();
  if (s.rfind("power:", 0) == 0) return InternalEnergyLaw::power(std::stod(s.substr(6)));
  throw ConfigError("law must be 'entropy' or 'power:<m>'");
}

int cmd_run(const std::string& path, const Overrides& o) {
  const RunConfig cfg = config_with_overrides(path, o);
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
  const ExperimentResult res = run_experiment(cfg);
  const json& s = res.summary;
  std::cout << "run complete: " << s["steps"] << " steps (" << s["termination"].get<std::string>() << "), final energy "
            << fmt(s["final_energy"].get<double>()) << ", output in " << res.out_dir.string() << '\n';
  if (!s["energy_step_inequality"].get<bool>()) {
    std::cerr << "energy step inequality violated\n";
    return kExitCheck;
  }
  return kExitOk;
}

void print_report(const ScheduleReport& r) {
  std::printf("%-22s", "tau");
  for (double t : r.ladder) std::printf(" %12.4g", t);
  std::printf("  decreasing\n");
  for (const auto& c : r.conditions) {
    std::printf("%-22s", c.name.c_str());
    for (double v : c.values) std::printf(" %12.4e", v);
    std::printf("  %s\n", c.decreasing ? "yes" : "NO");
  }
  std::printf("schedule check: %s\n", r.pass ? "PASS" : "FAIL");
}

int cmd_check_schedule(const std::optional<std::string>& path, const std::string& ladder_s, std::string which,
                       const std::string& law_s, int dim, double p, std::optional<double> m_bar) {
  const std::vector<double> ladder = parse_list(ladder_s);
  std::optional<CapCheck> cap;
  if (m_bar) cap = CapCheck{*m_bar};
  if (path) {
    RunConfig cfg = load_config(*path);
    if (which.empty()) which = "config";
    if (which == "config") {
      if (!m_bar && cfg.density_cap) cap = CapCheck{cfg.density_cap->M_bar};
      const auto r = check_schedule([&](double t) { return schedule_values(cfg, t); }, cfg.energy.law, cfg.kernel,
                                    cfg.energy.p, ladder, cap);
      print_report(r);
      return r.pass ? kExitOk : kExitCheck;
    }
    dim = cfg.domain.dim();
    p = cfg.energy.p;
  }
  if (which.empty()) which = "default";
  const InternalEnergyLaw law = parse_law_flag(law_s);
  const Kernel kernel = Kernel::epanechnikov(dim);
  std::function<ScheduleValues(double)> fn;
  if (which == "default") {
    fn = [&](double t) { return default_schedule(t, dim, p); };
  } else if (which == "adversarial") {
    fn = [&](double t) { return adversarial_schedule(t, dim); };
  } else {
    throw ConfigError("--schedule must be default, adversarial or config");
  }
  const auto r = check_schedule(fn, law, kernel, p, ladder, cap);
  print_report(r);
  return r.pass ? kExitOk : kExitCheck;
}

int cmd_bound_check(std::size_t pairs, const std::string& dims, const BoundCheckOptions& opt,
                    const std::optional<std::string>& csv) {
  std::vector<int> ds;
  for (double d : parse_list(dims)) ds.push_back(static_cast<int>(d));
  std::ostringstream rows;
  rows << "seed,dim,estimate,spread,particle_distance,bound,pass\n";
  std::size_t passed = 0, total = 0;
  for (int d : ds) {
    for (const auto& c : run_bound_check(pairs, d, opt)) {
      rows << c.seed << ',' << c.dim << ',' << fmt(c.estimate) << ',' << fmt(c.spread) << ',' << fmt(c.particle_distance)
           << ',' << fmt(c.bound) << ',' << (c.pass ? 1 : 0) << '\n';
      passed += c.pass;
      ++total;
    }
  }
  if (csv) write_text(*csv, rows.str());
  std::printf("coupling bound: %zu/%zu pairs within particle distance + 2h + spread\n", passed, total);
  return passed == total ? kExitOk : kExitCheck;
}

int cmd_oracle_step(std::size_t count, std::optional<std::size_t> n, std::optional<std::size_t> grid_points,
                    const std::string& law_s, const OracleOptions& opt) {
  std::vector<OracleCase> cases;
  if (n || grid_points) {
    cases.push_back(oracle_case(0, n.value_or(2), grid_points.value_or(7), parse_law_flag(law_s), opt));
  } else {
    cases = run_oracle_suite(count, opt);
  }
  std::size_t passed = 0;
  std::printf("%5s %3s %5s %-14s %16s %16s %10s %s\n", "case", "n", "grid", "law", "relaxed_psi", "oracle_psi", "gamma", "ok");
  for (const auto& c : cases) {
    std::printf("%5zu %3zu %5zu %-14s %16.10f %16.10f %10.3e %s\n", c.index, c.n, c.grid_size, c.law.c_str(), c.relaxed_psi,
                c.oracle_psi, c.gamma, c.pass ? "yes" : "NO");
    passed += c.pass;
  }
  std::printf("step oracle: %zu/%zu within gamma\n", passed, cases.size());
  return passed == cases.size() ? kExitOk : kExitCheck;
}

int cmd_plot(const std::string& run_dir, const std::string& kind, const std::optional<std::string>& out) {
  const SnapshotSet set = load_snapshots(run_dir);
  const std::string svg = emit_plot(set, plot_kind_from_name(kind));
  const std::string target = out ? *out : (fs::path(run_dir) / (kind + ".svg")).string();
  write_text(target, svg);
  std::cout << "wrote " << target << '\n';
  return kExitOk;
}

int cmd_sweep(const std::string& path, const std::string& seeds_s, const std::optional<std::string>& out_root) {
  std::vector<std::uint64_t> seeds;
  for (double s : parse_list(seeds_s)) seeds.push_back(static_cast<std::uint64_t>(s));
  const RunConfig base = load_config(path);
  const std::string root = out_root ? *out_root : base.output_dir;
  std::vector<RunConfig> configs;
  for (auto s : seeds) {
    Overrides o;
    o.seed = s;
    o.out = (fs::path(root) / ("seed_" + std::to_string(s))).string();
    configs.push_back(config_with_overrides(path, o));
  }
  std::atomic<std::size_t> next{0};
  std::vector<int> codes(configs.size(), kExitOk);
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        run_experiment(configs[i]);
        std::lock_guard<std::mutex> lock(io);
        std::cout << "seed " << configs[i].seed << ": done -> " << configs[i].output_dir << '\n';
      } catch (const ConfigError& e) {
        codes[i] = kExitConfig;
        std::lock_guard<std::mutex> lock(io);
        std::cerr << "seed " << configs[i].seed << ": " << e.what() << '\n';
      } catch (const std::exception& e) {
        codes[i] = kExitRuntime;
        std::lock_guard<std::mutex> lock(io);
        std::cerr << "seed " << configs[i].seed << ": " << e.what() << '\n';
      }
    }
  };
  const std::size_t workers = std::min(worker_count(), configs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return *std::max_element(codes.begin(), codes.end());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kdeflow: KDE minimizing-movement scheme for Wasserstein gradient flows"};
  app.set_help_flag("--help", "print this help message and exit");
  app.require_subcommand(1);

  std::string config_path;
  Overrides over;
  auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
  run->add_option("--config", config_path, "config file")->required();
  add_overrides(run, over);

  std::optional<std::string> cs_config;
  std::string ladder = "0.2,0.1,0.05,0.025", which, law = "power:2";
  int dim = 1;
  double p = 2.0;
  std::optional<double> m_bar;
  auto* cs = app.add_subcommand("check-schedule", "check the parameter conditions along a tau ladder");
  cs->add_option("--config", cs_config, "config whose schedule is checked");
  cs->add_option("--ladder", ladder, "comma-separated decreasing tau values");
  cs->add_option("--schedule", which, "default | adversarial | config");
  cs->add_option("--law", law, "entropy | power:<m> (without --config)");
  cs->add_option("--dim", dim, "dimension (without --config)");
  cs->add_option("--p", p, "transport exponent (without --config)");
  cs->add_option("--m-bar", m_bar, "density cap M_bar for the bounded variant");

  std::size_t pairs = 100;
  std::string dims = "1";
  BoundCheckOptions bopt;
  std::optional<std::string> csv;
  auto* bc = app.add_subcommand("bound-check", "Monte-Carlo check of the coupling bound");
  bc->add_option("--pairs", pairs, "number of random pairs per dimension");
  bc->add_option("--dim", dims, "dimension list, e.g. 1 or 1,2");
  bc->add_option("--n", bopt.n, "particles per configuration");
  bc->add_option("--h", bopt.h, "bandwidth");
  bc->add_option("--samples", bopt.samples, "Monte-Carlo samples per mixture (<= 512)");
  bc->add_option("--seed", bopt.seed, "base seed");
  bc->add_option("--csv", csv, "write per-pair rows to this file");

  std::size_t count = 50;
  std::optional<std::size_t> on, ogrid;
  std::string olaw = "entropy";
  OracleOptions oopt;
  auto* os = app.add_subcommand("oracle-step", "compare relaxed_step with exhaustive enumeration");
  os->add_option("--count", count, "number of toy instances in the suite");
  os->add_option("--n", on, "single instance: particle count");
  os->add_option("--grid", ogrid, "single instance: grid size (3, 5, 7, 9, 15)");
  os->add_option("--law", olaw, "single instance: entropy | power:<m>");
  os->add_option("--tau", oopt.tau, "time step");
  os->add_option("--h", oopt.h, "bandwidth");
  os->add_option("--seed", oopt.seed, "base seed");

  std::string run_dir, kind = "energy_curve";
  std::optional<std::string> plot_out;
  auto* pl = app.add_subcommand("plot", "render an SVG from a run directory");
  pl->add_option("--run", run_dir, "run output directory")->required();
  pl->add_option("--kind", kind, "energy_curve | density_frames | moment_curve");
  pl->add_option("--out", plot_out, "SVG path (default <run>/<kind>.svg)");

  std::string sweep_config, seeds = "1,2,3,4";
  std::optional<std::string> sweep_out;
  auto* sw = app.add_subcommand("sweep", "run one config over several seeds in parallel");
  sw->add_option("--config", sweep_config, "config file")->required();
  sw->add_option("--seeds", seeds, "comma-separated seeds");
  sw->add_option("--out", sweep_out, "output root (one subdirectory per seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, over);
    if (*cs) return cmd_check_schedule(cs_config, ladder, which, law, dim, p, m_bar);
    if (*bc) return cmd_bound_check(pairs, dims, bopt, csv);
    if (*os) return cmd_oracle_step(count, on, ogrid, olaw, oopt);
    if (*pl) return cmd_plot(run_dir, kind, plot_out);
    if (*sw) return cmd_sweep(sweep_config, seeds, sweep_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const RuntimeFailure& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
