#pragma once

#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "closure.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "kinetic.hpp"
#include "macro_solver.hpp"
#include "micro_sim.hpp"

namespace mpt {

inline constexpr const char* version = "0.1.0";

struct KineticSetup {
  std::shared_ptr<const KineticModel> model;
  std::optional<CalibrationResult> calibration;
};

inline KineticSetup build_kinetic(const ScenarioConfig& c) {
  BehaviorFunctions b;
  b.nu = c.nu;
  UeTable t = c.kinetic_table_in.empty()
                  ? UeTable::build(b.nu, VelocityGrid(c.kinetic_n, c.params.w), c.kinetic_table_points)
                  : csv::read_table(c.kinetic_table_in);
  KineticModel m(Diagrams(c.params), b, std::move(t), c.kinetic_n);
  KineticSetup s;
  if (c.kinetic_calibrate) {
    auto r = calibrate_behavior(m, CalibrationTargets::standard(m.diagrams()));
    m.set_behavior(r.behavior);
    s.calibration = r;
  }
  s.model = std::make_shared<const KineticModel>(std::move(m));
  return s;
}

inline Closure make_closure(const ScenarioConfig& c, ClosureKind kind, std::shared_ptr<const KineticModel> km = {}) {
  return Closure(kind, Diagrams(c.params), kind == ClosureKind::Kinetic ? std::move(km) : nullptr, c.kinetic_collision_rate);
}

inline std::filesystem::path prepare_dir(const ScenarioConfig& c) {
  std::filesystem::path d(c.output_dir);
  std::filesystem::create_directories(d);
  csv::open((d / "config.txt").string()) << dump_config(c);
  return d;
}

struct SweepRow {
  ClosureKind model;
  double rho;
  EquilibriumPoint point;
};

inline std::vector<double> linspace(double a, double b, int n) { return CalibrationTargets::linspace(a, b, n); }

inline std::vector<SweepRow> fd_sweep_rows(const std::vector<Closure>& closures, const std::vector<double>& rhos) {
  std::vector<SweepRow> rows;
  for (auto& cl : closures)
    for (double r : rhos)
      for (auto& p : cl.equilibria(r)) rows.push_back({cl.kind(), r, p});
  return rows;
}

inline std::vector<Closure> all_closures(const ScenarioConfig& c, std::shared_ptr<const KineticModel> km) {
  std::vector<Closure> v;
  for (auto k : {ClosureKind::SwitchingCurve, ClosureKind::SpeedAdaptation, ClosureKind::AtdReduced, ClosureKind::Kinetic})
    v.push_back(make_closure(c, k, km));
  return v;
}

// equilibria.csv, raster.csv, cut.csv
inline std::vector<SweepRow> cmd_fd_sweep(const ScenarioConfig& c) {
  validate(c);
  auto dir = prepare_dir(c);
  auto ks = build_kinetic(c);
  auto closures = all_closures(c, ks.model);
  auto rows = fd_sweep_rows(closures, linspace(0.01, 0.99, c.sweep_n_rho));
  {
    auto f = csv::open((dir / "equilibria.csv").string());
    f << "model,rho,u,stability,jump\n";
    for (auto& r : rows)
      f << to_string(r.model) << ',' << csv::num(r.rho) << ',' << csv::num(r.point.u) << ',' << to_string(r.point.stability) << ','
        << (r.point.jump ? 1 : 0) << '\n';
  }
  const double w = c.params.w;
  {
    auto f = csv::open((dir / "raster.csv").string());
    f << "model,rho,u,forcing\n";
    for (auto& cl : closures)
      for (double r : linspace(0.01, 0.99, c.sweep_raster_rho))
        for (double u : linspace(0, w, c.sweep_raster_u))
          f << to_string(cl.kind()) << ',' << csv::num(r) << ',' << csv::num(u) << ',' << csv::num(cl.U(r, u) - u) << '\n';
  }
  {
    auto f = csv::open((dir / "cut.csv").string());
    f << "model,rho,u,forcing\n";
    for (auto& cl : closures)
      for (double u : linspace(0, w, 501))
        f << to_string(cl.kind()) << ',' << csv::num(c.sweep_cut_rho) << ',' << csv::num(u) << ','
          << csv::num(cl.U(c.sweep_cut_rho, u) - u) << '\n';
  }
  return rows;
}

inline KineticSetup cmd_kinetic_table(const ScenarioConfig& c) {
  validate(c);
  auto dir = prepare_dir(c);
  auto ks = build_kinetic(c);
  const auto& m = *ks.model;
  {
    auto f = csv::open((dir / "ue_table.csv").string());
    csv::write_table(f, m.table());
  }
  {
    auto f = csv::open((dir / "nu.csv").string());
    f << "k,nu\n";
    for (double k : m.table().k) f << csv::num(k) << ',' << csv::num(m.behavior().nu(k)) << '\n';
  }
  {
    auto f = csv::open((dir / "p_b.csv").string());
    const auto& p = m.behavior().p_B;
    f << "rho_knot,lo,t,theta,log_s\n";
    for (std::size_t i = 0; i < p.knots.size(); ++i)
      f << csv::num(p.knots[i]) << ',' << csv::num(p.lo[i]) << ',' << csv::num(p.t[i]) << ',' << csv::num(p.theta[i]) << ','
        << csv::num(p.log_s[i]) << '\n';
  }
  if (ks.calibration) {
    auto f = csv::open((dir / "calibration.txt").string());
    const auto& r = *ks.calibration;
    f << "iterations = " << r.iterations << "\ncost = " << csv::num(r.cost) << "\nmax_residual = " << csv::num(r.max_residual)
      << "\nmax_deviation = " << csv::num(r.max_deviation) << "\nok = " << (r.ok ? "true" : "false") << '\n';
  }
  return ks;
}

struct ProbeSummary {
  double x;
  WaveMetrics rho, flow;
};

struct BottleneckSummary {
  RunResult run;
  std::vector<ProbeSummary> probes;
  double inflow_flow = 0;
};

// metrics of a short run are NaN instead of an error: the run itself is valid
inline WaveMetrics probe_metrics(const std::vector<double>& t, const std::vector<double>& v) {
  try {
    return wave_metrics(t, v);
  } catch (const DomainError&) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, 0};
  }
}

inline BottleneckSummary run_bottleneck(const ScenarioConfig& c, std::shared_ptr<const KineticModel> km = {}) {
  validate(c);
  if (c.model == ClosureKind::Kinetic && !km) km = build_kinetic(c).model;
  auto mc = c.macro();
  MacroSolver s(mc, make_closure(c, c.model, km));
  BottleneckSummary out;
  out.run = s.run(s.uniform(c.init_rho, c.initial_u()));
  out.inflow_flow = mc.boundary.rho_in * mc.boundary.u_in;
  for (auto& p : out.run.probes) out.probes.push_back({p.x, probe_metrics(p.t, p.rho), probe_metrics(p.t, p.flow)});
  return out;
}

inline std::string probe_name(double x) {
  std::string s = csv::num(x);
  for (auto& ch : s)
    if (ch == '-') ch = 'm';
  return "probe_" + s + ".csv";
}

// spacetime.csv (+ .meta), probe_*.csv, scatter.csv, metrics.csv
inline BottleneckSummary cmd_bottleneck(const ScenarioConfig& c) {
  validate(c);
  auto dir = prepare_dir(c);
  auto res = run_bottleneck(c);
  {
    auto f = csv::open((dir / "spacetime.csv").string());
    csv::write_record(f, res.run.record);
  }
  csv::open((dir / "spacetime.meta").string()) << "version = " << version << '\n' << dump_config(c);
  for (auto& p : res.run.probes) {
    auto f = csv::open((dir / probe_name(p.x)).string());
    csv::write_probe(f, p);
  }
  {
    auto f = csv::open((dir / "scatter.csv").string());
    f << "x,rho,flow\n";
    for (auto& p : res.run.probes)
      for (std::size_t k = 0; k < p.t.size(); ++k) f << csv::num(p.x) << ',' << csv::num(p.rho[k]) << ',' << csv::num(p.flow[k]) << '\n';
  }
  {
    auto f = csv::open((dir / "metrics.csv").string());
    f << "x,rho_amplitude,rho_period,rho_mean,flow_amplitude,flow_period,flow_mean,inflow_flow\n";
    for (auto& p : res.probes)
      f << csv::num(p.x) << ',' << csv::num(p.rho.amplitude) << ',' << csv::num(p.rho.dominant_period) << ',' << csv::num(p.rho.mean)
        << ',' << csv::num(p.flow.amplitude) << ',' << csv::num(p.flow.dominant_period) << ',' << csv::num(p.flow.mean) << ','
        << csv::num(res.inflow_flow) << '\n';
  }
  return res;
}

inline MicroModel make_micro_model(const ScenarioConfig& c) {
  MicroModel m{Diagrams(c.params), RoadConfig{}, MicroModelKind::gm, std::nullopt};
  const auto& mc = c.micro;
  m.kind = mc.model;
  if (mc.closure != "none") m.closure = parse_closure_kind(mc.closure);
  m.road.topology = mc.topology;
  m.road.N = mc.N;
  m.road.H = 1.0;
  m.road.L = mc.N / mc.rho;
  return m;
}

inline std::vector<VehicleState> micro_initial(const ScenarioConfig& c, MicroModel& m) {
  const auto& mc = c.micro;
  double v0 = mc.v0 >= 0 ? mc.v0 : m.d.clamp_speed(m.d.u1(mc.rho));
  std::vector<VehicleState> s(mc.N);
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const double spacing = 1 / mc.rho;
  for (int i = 0; i < mc.N; ++i) {
    double e = mc.pattern == "alternating" ? (i % 2 ? -mc.perturbation : mc.perturbation) : mc.perturbation * uni(rng);
    s[i] = {i * spacing, v0 * (1 + e), 0};
  }
  if (mc.topology == Topology::open) {
    m.road.lead_x0 = mc.N * spacing;
    m.road.lead_speed = mc.lead_speed >= 0 ? mc.lead_speed : v0;
  }
  return s;
}

struct MicroSummary {
  Trajectory trajectory;
  double v_min = 0, v_max = 0, v_mean = 0;
};

// trajectory.csv, fields.csv
inline MicroSummary cmd_micro(const ScenarioConfig& c) {
  validate(c);
  auto dir = prepare_dir(c);
  auto m = make_micro_model(c);
  auto s0 = micro_initial(c, m);
  MicroSummary out;
  out.trajectory = integrate(m, s0, c.micro.t_end, c.micro.dt, c.micro.sample_every);
  const auto& last = out.trajectory.states.back();
  out.v_min = out.v_max = last.front().v;
  for (auto& v : last) {
    out.v_min = std::min(out.v_min, v.v);
    out.v_max = std::max(out.v_max, v.v);
    out.v_mean += v.v / static_cast<double>(last.size());
  }
  {
    auto f = csv::open((dir / "trajectory.csv").string());
    csv::write_trajectory(f, out.trajectory, m.kind == MicroModelKind::atd);
  }
  {
    bool ring = m.road.topology == Topology::ring;
    double span = ring ? m.road.L : m.road.L + c.micro.t_end * std::max(m.road.lead_speed, 0.0);
    Grid1D g = Grid1D::make(0, span, std::min(c.micro.field_dx, span));
    g.dx = span / g.n;
    auto f = csv::open((dir / "fields.csv").string());
    f << "t,x,rho,u\n";
    for (std::size_t k = 0; k < out.trajectory.t.size(); ++k) {
      auto fl = extract_fields(out.trajectory.states[k], g, m.road.H, ring);
      for (int i = 0; i < g.n; ++i)
        f << csv::num(out.trajectory.t[k]) << ',' << csv::num(g.x(i)) << ',' << csv::num(fl.cells[i].rho) << ','
          << (fl.empty[i] ? std::string("nan") : csv::num(fl.cells[i].u)) << '\n';
    }
  }
  return out;
}

}  // namespace mpt
