#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "fundamental_diagrams.hpp"
#include "kinetic.hpp"
#include "macro_solver.hpp"
#include "micro_sim.hpp"
#include "params.hpp"

namespace mpt {

struct MicroConfig {
  MicroModelKind model = MicroModelKind::gm;
  std::string closure = "none";  // none | sc | sa | atd (GM with U(rho_i, v_i))
  Topology topology = Topology::ring;
  int N = 100;
  double rho = 0.2;
  double v0 = -1;  // negative: U1(rho)
  double perturbation = 0.1;
  std::string pattern = "alternating";  // alternating | random
  double t_end = 100;
  double dt = 0;  // 0: min(T, T_del)/20 (T/20 for GM)
  double sample_every = 1.0;
  double lead_speed = -1;  // open road, negative: v0
  double field_dx = 5.0;
};

struct ScenarioConfig {
  ClosureKind model = ClosureKind::SwitchingCurve;
  ModelParams params;
  double x_min = -30, x_max = 10, dx = 0.15;
  BoundaryType boundary = BoundaryType::inflow;
  double init_rho = 0.25, init_u = -1;    // negative: U1(init_rho)
  double inflow_rho = -1, inflow_u = -1;  // negative: initial state
  BottleneckProfile bottleneck;
  double t_end = 400, lambda_cfl = 0.99, dt_max = 1.0;
  Splitting splitting = Splitting::strang;
  double record_every = 1.0;
  std::vector<double> probes = {-20, 0, 5};
  std::string output_dir = "out";
  unsigned long long seed = 0;

  int kinetic_n = 64, kinetic_table_points = 201;
  NuFamily nu;
  bool kinetic_collision_rate = false;
  bool kinetic_calibrate = true;
  std::string kinetic_table_in;

  int sweep_n_rho = 400, sweep_raster_rho = 60, sweep_raster_u = 60;
  double sweep_cut_rho = 0.4;

  MicroConfig micro;

  double initial_u() const { return init_u >= 0 ? init_u : Diagrams(params).clamp_speed(Diagrams(params).u1(init_rho)); }

  MacroConfig macro() const {
    MacroConfig m;
    m.grid = Grid1D::make(x_min, x_max, dx);
    m.boundary.type = boundary;
    m.boundary.rho_in = inflow_rho >= 0 ? inflow_rho : init_rho;
    m.boundary.u_in = inflow_u >= 0 ? inflow_u : initial_u();
    m.bottleneck = bottleneck;
    m.t_end = t_end;
    m.lambda_cfl = lambda_cfl;
    m.dt_max = dt_max;
    m.splitting = splitting;
    m.record_every = record_every;
    m.probes = probes;
    return m;
  }
};

inline std::string fmt_num(double v) {
  // shortest text that parses back to the same double
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  double x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  return x;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "' expects a boolean, got '" + v + "'");
}

inline std::string choice(const std::string& key, const std::string& v, const std::vector<std::string>& opts) {
  for (auto& o : opts)
    if (v == o) return v;
  std::string all;
  for (auto& o : opts) all += (all.empty() ? "" : "|") + o;
  throw ConfigError("key '" + key + "' expects one of " + all + ", got '" + v + "'");
}

}  // namespace detail

struct ConfigKey {
  std::string key, type, doc;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
  using namespace detail;
  using C = ScenarioConfig;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto num = [&k](std::string key, std::string doc, double C::*m) {
      k.push_back({key, "number", doc, [m, key](C& c, const std::string& v) { c.*m = parse_double(key, v); },
                   [m](const C& c) { return fmt_num(c.*m); }});
    };
    auto pnum = [&k](std::string key, std::string doc, std::function<double&(C&)> ref) {
      k.push_back({key, "number", doc, [ref, key](C& c, const std::string& v) { ref(c) = parse_double(key, v); },
                   [ref](const C& c) { return fmt_num(ref(const_cast<C&>(c))); }});
    };
    auto inum = [&k](std::string key, std::string doc, std::function<int&(C&)> ref) {
      k.push_back({key, "integer", doc, [ref, key](C& c, const std::string& v) { ref(c) = static_cast<int>(parse_int(key, v)); },
                   [ref](const C& c) { return std::to_string(ref(const_cast<C&>(c))); }});
    };
    auto str = [&k](std::string key, std::string type, std::string doc, std::function<void(C&, const std::string&)> set,
                    std::function<std::string(const C&)> get) { k.push_back({key, type, doc, set, get}); };

    str("model", "sc|sa|atd|kinetic", "closure of the macroscopic relaxation term",
        [](C& c, const std::string& v) { c.model = parse_closure_kind(choice("model", v, {"sc", "sa", "atd", "kinetic"})); },
        [](const C& c) { return std::string(to_string(c.model)); });
    pnum("params.C", "anticipation constant", [](C& c) -> double& { return c.params.C; });
    pnum("params.T", "relaxation time", [](C& c) -> double& { return c.params.T; });
    pnum("params.w", "maximal velocity", [](C& c) -> double& { return c.params.w; });
    pnum("params.rho_f", "free-flow upper density", [](C& c) -> double& { return c.params.rho_f; });
    pnum("params.rho_j", "jam lower density", [](C& c) -> double& { return c.params.rho_j; });
    pnum("params.U_sync", "SA separating speed", [](C& c) -> double& { return c.params.U_sync; });
    pnum("params.U0", "free-speed scale of U1", [](C& c) -> double& { return c.params.curve.U0; });
    pnum("params.C_U", "curve slope", [](C& c) -> double& { return c.params.curve.C_U; });
    pnum("params.U0_star", "speed scale of U2", [](C& c) -> double& { return c.params.curve.U0_star; });
    pnum("params.T0", "curve time scale", [](C& c) -> double& { return c.params.curve.T0; });
    pnum("params.offset1", "inner offset of U1", [](C& c) -> double& { return c.params.curve.offset1; });
    pnum("params.offset2", "inner offset of U2", [](C& c) -> double& { return c.params.curve.offset2; });
    pnum("params.H_A", "acceleration threshold headway", [](C& c) -> double& { return c.params.H_A; });
    pnum("params.H_B", "braking threshold headway", [](C& c) -> double& { return c.params.H_B; });
    pnum("params.T_del", "ATD acceleration delay", [](C& c) -> double& { return c.params.T_del; });
    num("grid.x_min", "left domain end", &C::x_min);
    num("grid.x_max", "right domain end", &C::x_max);
    num("grid.dx", "cell width", &C::dx);
    str("boundary", "inflow|periodic", "inflow: Dirichlet left, zero-gradient right",
        [](C& c, const std::string& v) {
          c.boundary = choice("boundary", v, {"inflow", "periodic"}) == "inflow" ? BoundaryType::inflow : BoundaryType::periodic;
        },
        [](const C& c) { return std::string(c.boundary == BoundaryType::inflow ? "inflow" : "periodic"); });
    num("init.rho", "uniform initial density", &C::init_rho);
    num("init.u", "initial speed, negative selects U1(init.rho)", &C::init_u);
    num("inflow.rho", "inflow density, negative selects init.rho", &C::inflow_rho);
    num("inflow.u", "inflow speed, negative selects the initial speed", &C::inflow_u);
    str("bottleneck.enabled", "bool", "lane reduction on/off",
        [](C& c, const std::string& v) { c.bottleneck.enabled = parse_bool("bottleneck.enabled", v); },
        [](const C& c) { return std::string(c.bottleneck.enabled ? "true" : "false"); });
    pnum("bottleneck.x0", "start of the reduced section", [](C& c) -> double& { return c.bottleneck.x0; });
    pnum("bottleneck.ramp_width", "length of the linear transition", [](C& c) -> double& { return c.bottleneck.ramp_width; });
    pnum("bottleneck.factor", "remaining lane fraction in (0,1]", [](C& c) -> double& { return c.bottleneck.factor; });
    str("bottleneck.mode", "divide|multiply", "source density rho/phi (divide) or rho*phi (multiply)",
        [](C& c, const std::string& v) {
          c.bottleneck.mode = choice("bottleneck.mode", v, {"divide", "multiply"}) == "divide" ? BottleneckMode::divide
                                                                                               : BottleneckMode::multiply;
        },
        [](const C& c) { return std::string(c.bottleneck.mode == BottleneckMode::divide ? "divide" : "multiply"); });
    num("t_end", "final time", &C::t_end);
    num("lambda_cfl", "Courant number", &C::lambda_cfl);
    num("dt_max", "time step cap", &C::dt_max);
    str("splitting", "strang|godunov", "operator splitting of transport and source",
        [](C& c, const std::string& v) {
          c.splitting = choice("splitting", v, {"strang", "godunov"}) == "strang" ? Splitting::strang : Splitting::godunov;
        },
        [](const C& c) { return std::string(c.splitting == Splitting::strang ? "strang" : "godunov"); });
    num("record_every", "snapshot interval of the space-time record, <= 0 disables", &C::record_every);
    str("probes", "list", "comma separated probe positions",
        [](C& c, const std::string& v) {
          c.probes.clear();
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) c.probes.push_back(parse_double("probes", trim(item)));
          if (c.probes.empty()) throw ConfigError("key 'probes' expects at least one position");
        },
        [](const C& c) {
          std::string s;
          for (double p : c.probes) s += (s.empty() ? "" : ",") + fmt_num(p);
          return s;
        });
    str("output_dir", "path", "directory for all outputs of a run", [](C& c, const std::string& v) { c.output_dir = v; },
        [](const C& c) { return c.output_dir; });
    str("seed", "integer", "seed for randomized initial data",
        [](C& c, const std::string& v) { c.seed = static_cast<unsigned long long>(parse_int("seed", v)); },
        [](const C& c) { return std::to_string(c.seed); });
    inum("kinetic.n", "velocity cells", [](C& c) -> int& { return c.kinetic_n; });
    inum("kinetic.table_points", "points of the u^e(k) table", [](C& c) -> int& { return c.kinetic_table_points; });
    pnum("kinetic.nu0", "nu(k) = nu0 (1-k)^q (1+a k)", [](C& c) -> double& { return c.nu.nu0; });
    pnum("kinetic.nu_q", "exponent q of nu(k)", [](C& c) -> double& { return c.nu.q; });
    pnum("kinetic.nu_a", "coefficient a of nu(k)", [](C& c) -> double& { return c.nu.a; });
    str("kinetic.relaxation", "uniform|collision", "uniform: 1/T; collision: gamma nu",
        [](C& c, const std::string& v) {
          c.kinetic_collision_rate = choice("kinetic.relaxation", v, {"uniform", "collision"}) == "collision";
        },
        [](const C& c) { return std::string(c.kinetic_collision_rate ? "collision" : "uniform"); });
    str("kinetic.calibrate", "bool", "refine the braking profile against U1, U2, S",
        [](C& c, const std::string& v) { c.kinetic_calibrate = parse_bool("kinetic.calibrate", v); },
        [](const C& c) { return std::string(c.kinetic_calibrate ? "true" : "false"); });
    str("kinetic.table_in", "path", "read u^e(k) from CSV (k,u_e) instead of solving",
        [](C& c, const std::string& v) { c.kinetic_table_in = v; }, [](const C& c) { return c.kinetic_table_in; });
    inum("sweep.n_rho", "densities of the equilibrium sweep", [](C& c) -> int& { return c.sweep_n_rho; });
    inum("sweep.raster_rho", "raster columns", [](C& c) -> int& { return c.sweep_raster_rho; });
    inum("sweep.raster_u", "raster rows", [](C& c) -> int& { return c.sweep_raster_u; });
    num("sweep.cut_rho", "density of the forcing cut", &C::sweep_cut_rho);
    str("micro.model", "gm|atd", "car-following model",
        [](C& c, const std::string& v) { c.micro.model = choice("micro.model", v, {"gm", "atd"}) == "gm" ? MicroModelKind::gm : MicroModelKind::atd; },
        [](const C& c) { return std::string(c.micro.model == MicroModelKind::gm ? "gm" : "atd"); });
    str("micro.closure", "none|sc|sa|atd", "GM target speed U(rho_i, v_i) instead of U1(rho_i)",
        [](C& c, const std::string& v) { c.micro.closure = choice("micro.closure", v, {"none", "sc", "sa", "atd"}); },
        [](const C& c) { return c.micro.closure; });
    str("micro.topology", "ring|open", "ring road or open road behind a leader",
        [](C& c, const std::string& v) { c.micro.topology = choice("micro.topology", v, {"ring", "open"}) == "ring" ? Topology::ring : Topology::open; },
        [](const C& c) { return std::string(c.micro.topology == Topology::ring ? "ring" : "open"); });
    inum("micro.N", "vehicles", [](C& c) -> int& { return c.micro.N; });
    pnum("micro.rho", "initial density (spacing 1/rho car lengths)", [](C& c) -> double& { return c.micro.rho; });
    pnum("micro.v0", "initial speed, negative selects U1(micro.rho)", [](C& c) -> double& { return c.micro.v0; });
    pnum("micro.perturbation", "relative speed perturbation", [](C& c) -> double& { return c.micro.perturbation; });
    str("micro.pattern", "alternating|random", "pattern of the speed perturbation",
        [](C& c, const std::string& v) { c.micro.pattern = choice("micro.pattern", v, {"alternating", "random"}); },
        [](const C& c) { return c.micro.pattern; });
    pnum("micro.t_end", "final time", [](C& c) -> double& { return c.micro.t_end; });
    pnum("micro.dt", "RK4 step, 0 selects the default", [](C& c) -> double& { return c.micro.dt; });
    pnum("micro.sample_every", "trajectory sampling interval", [](C& c) -> double& { return c.micro.sample_every; });
    pnum("micro.lead_speed", "open road leader speed, negative selects micro.v0", [](C& c) -> double& { return c.micro.lead_speed; });
    pnum("micro.field_dx", "cell width of extracted fields", [](C& c) -> double& { return c.micro.field_dx; });
    return k;
  }();
  return keys;
}

inline void set_key(ScenarioConfig& c, const std::string& key, const std::string& value) {
  for (auto& k : config_keys())
    if (k.key == key) {
      k.set(c, detail::trim(value));
      return;
    }
  throw ConfigError("unknown key '" + key + "'");
}

inline void apply_override(ScenarioConfig& c, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
  set_key(c, detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
}

inline void validate(const ScenarioConfig& c) {
  validate(c.params);
  Grid1D::make(c.x_min, c.x_max, c.dx);
  if (!(c.init_rho > 0 && c.init_rho < 1)) throw ConfigError("init.rho must be in (0,1)");
  if (!(c.bottleneck.factor > 0 && c.bottleneck.factor <= 1)) throw ConfigError("bottleneck.factor must be in (0,1]");
  if (!(c.bottleneck.ramp_width > 0)) throw ConfigError("bottleneck.ramp_width must be positive");
  if (!(c.lambda_cfl > 0 && c.lambda_cfl <= 1)) throw ConfigError("lambda_cfl must be in (0,1]");
  if (!(c.t_end > 0)) throw ConfigError("t_end must be positive");
  if (c.kinetic_n < 16) throw ConfigError("kinetic.n must be at least 16");
  if (c.kinetic_table_points < 2) throw ConfigError("kinetic.table_points must be at least 2");
  if (c.micro.N < 1) throw ConfigError("micro.N must be positive");
  if (!(c.micro.rho > 0 && c.micro.rho < 1)) throw ConfigError("micro.rho must be in (0,1)");
  for (double p : c.probes)
    if (p < c.x_min || p > c.x_max) throw ConfigError("probe " + fmt_num(p) + " outside the domain");
}

inline ScenarioConfig parse_config(std::istream& in) {
  ScenarioConfig c;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      apply_override(c, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(no) + ": " + e.what());
    }
  }
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(f);
}

inline std::string dump_config(const ScenarioConfig& c) {
  std::string s;
  for (auto& k : config_keys()) s += k.key + " = " + k.get(c) + "\n";
  return s;
}

inline std::string config_help() {
  ScenarioConfig d;
  std::string s = "Configuration keys (key = default  [type] description):\n";
  for (auto& k : config_keys()) s += "  " + k.key + " = " + k.get(d) + "  [" + k.type + "] " + k.doc + "\n";
  return s;
}

}  // namespace mpt
