#pragma once

// Self-convergence studies shared by the unit tests and the acceptance binary.
#include <cmath>
#include <vector>

#include <mptraffic/macro_solver.hpp>
#include <mptraffic/micro_sim.hpp>

namespace mpt::study {

// log2 ratios of consecutive-level differences
inline std::vector<double> rates(const std::vector<double>& diffs) {
  std::vector<double> r;
  for (std::size_t i = 0; i + 1 < diffs.size(); ++i) r.push_back(std::log2(diffs[i] / diffs[i + 1]));
  return r;
}

// Periodic contact rho0(x - u t), u = 0.3, at n, 2n, 4n, 8n cells with a common
// dt; L1 differences after averaging the finer level onto the coarser.
inline std::vector<double> contact_diffs(const Diagrams& d) {
  const double L = 20, u0 = 0.3, dt = 0.025, pi = std::acos(-1.0);
  BoundaryCondition bc{BoundaryType::periodic, 0, 0};
  std::vector<std::vector<double>> sol;
  for (int n : {100, 200, 400, 800}) {
    const double dx = L / n;
    std::vector<CellState> s(n);
    for (int i = 0; i < n; ++i) s[i] = {0.3 + 0.1 * std::sin(2 * pi * (i + 0.5) * dx / L), u0, 0};
    for (int k = 0; k < 400; ++k) transport_step(d, s, dt, dx, bc);
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) r[i] = s[i].rho;
    sol.push_back(r);
  }
  std::vector<double> diffs;
  for (std::size_t l = 0; l + 1 < sol.size(); ++l) {
    const auto &c = sol[l], &f = sol[l + 1];
    double e = 0;
    for (std::size_t i = 0; i < c.size(); ++i) e += std::abs(c[i] - 0.5 * (f[2 * i] + f[2 * i + 1]));
    diffs.push_back(e * L / c.size());
  }
  return diffs;
}

// Smooth free-flow data with the SC source. Transport is sub-cycled at a
// fixed delta so only the splitting error depends on the split interval.
inline std::vector<double> splitting_diffs(const Diagrams& d, Splitting sp) {
  const double L = 20, dx = 0.1, delta = 0.05, t_end = 12.8, pi = std::acos(-1.0);
  const int n = static_cast<int>(L / dx);
  Closure cl(ClosureKind::SwitchingCurve, d);
  BoundaryCondition bc{BoundaryType::periodic, 0, 0};
  BottleneckProfile off;
  off.enabled = false;
  std::vector<double> xc(n);
  for (int i = 0; i < n; ++i) xc[i] = (i + 0.5) * dx;
  std::vector<std::vector<CellState>> sol;
  for (double dt : {1.6, 0.8, 0.4, 0.2}) {
    std::vector<CellState> s(n);
    for (int i = 0; i < n; ++i) s[i] = {0.2 + 0.05 * std::sin(2 * pi * xc[i] / L), 0.4 + 0.1 * std::cos(2 * pi * xc[i] / L), 0};
    const int sub = static_cast<int>(std::lround(dt / delta));
    auto transport = [&](std::vector<CellState>& q, double h) {
      const int m = std::max(1, static_cast<int>(std::lround(sub * h / dt)));
      for (int k = 0; k < m; ++k) transport_step(d, q, h / m, dx, bc);
    };
    auto source = [&](std::vector<CellState>& q, double h) { apply_source(q, h, cl, xc, off); };
    const int steps = static_cast<int>(std::lround(t_end / dt));
    for (int k = 0; k < steps; ++k) split_step(s, dt, sp, transport, source);
    sol.push_back(s);
  }
  std::vector<double> diffs;
  for (std::size_t l = 0; l + 1 < sol.size(); ++l) {
    double e = 0;
    for (int i = 0; i < n; ++i) e += (std::abs(sol[l][i].rho - sol[l + 1][i].rho) + std::abs(sol[l][i].u - sol[l + 1][i].u)) * dx;
    diffs.push_back(e);
  }
  return diffs;
}

// GM ring, 20 vehicles; errors at dt = 0.4, 0.2 against dt = 0.4/16
inline double micro_rk4_order(const Diagrams& d) {
  MicroModel m{d, RoadConfig{}, MicroModelKind::gm, std::nullopt};
  m.road.N = 20;
  m.road.L = 100;
  auto s0 = ring_alternating(m.road, d.u1(0.2), 0.1);
  auto run = [&](double dt) { return integrate(m, s0, 10, dt).states.back(); };
  auto ref = run(0.4 / 16), a = run(0.4), b = run(0.2);
  auto err = [&](const std::vector<VehicleState>& x) {
    double e = 0;
    for (std::size_t i = 0; i < x.size(); ++i) e = std::max({e, std::abs(x[i].x - ref[i].x), std::abs(x[i].v - ref[i].v)});
    return e;
  };
  return std::log2(err(a) / err(b));
}

}  // namespace mpt::study
