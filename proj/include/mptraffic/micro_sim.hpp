#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "fundamental_diagrams.hpp"
#include "macro_solver.hpp"

namespace mpt {

struct VehicleState {
  double x = 0, v = 0, a = 0;
};

enum class Topology { ring, open };

struct RoadConfig {
  Topology topology = Topology::ring;
  int N = 100;
  double L = 500;  // ring length
  double H = 1.0;  // car length
  // open road: leader ahead of vehicle N-1, given as a trajectory table
  // (t, x, v) with linear interpolation; default constant speed
  std::vector<double> lead_t, lead_x, lead_v;
  double lead_x0 = 0, lead_speed = 0;

  VehicleState leader(double t) const {
    if (lead_t.empty()) return {lead_x0 + lead_speed * t, lead_speed, 0};
    return {interp(lead_t, lead_x, t), interp(lead_t, lead_v, t), 0};
  }
};

enum class MicroModelKind { gm, atd };

// GM: U = U1(rho_i), or the multi-valued U(rho_i, v_i) when `closure` is set.
struct MicroModel {
  Diagrams d;
  RoadConfig road;
  MicroModelKind kind = MicroModelKind::gm;
  std::optional<ClosureKind> closure;

  double default_dt() const {
    const auto& p = d.params();
    return (kind == MicroModelKind::atd ? std::min(p.T, p.T_del) : p.T) / 20;
  }
};

struct Neighbour {
  double gap, dv;
};

inline Neighbour ahead(const std::vector<VehicleState>& s, int i, const RoadConfig& r, double t) {
  const int n = static_cast<int>(s.size());
  if (i + 1 < n) return {s[i + 1].x - s[i].x, s[i + 1].v - s[i].v};
  if (r.topology == Topology::ring) return {s[0].x + r.L - s[i].x, s[0].v - s[i].v};
  auto lead = r.leader(t);
  return {lead.x - s[i].x, lead.v - s[i].v};
}

inline std::vector<VehicleState> gm_rhs(const std::vector<VehicleState>& s, const MicroModel& m, double t = 0) {
  const auto& p = m.d.params();
  const double H = m.road.H;
  std::vector<VehicleState> out(s.size());
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    auto nb = ahead(s, i, m.road, t);
    double tau = nb.gap / H;
    if (!(tau > 1)) throw CollisionError("gm_rhs: vehicle " + std::to_string(i) + " overlaps its leader", t);
    double rho = 1 / tau;
    double U = m.closure ? m.d.closure_u(*m.closure, rho, s[i].v) : m.d.clamp_speed(m.d.u1(rho));
    out[i].x = s[i].v;
    out[i].v = p.C / H * nb.dv / (tau - 1) + (U - s[i].v) / p.T;
  }
  return out;
}

inline double atd_target(const MicroModel& m, double rho, double v, double dv) {
  const auto& p = m.d.params();
  double anticip = m.d.sound_coefficient(rho) * dv / m.road.H;
  double tau = 1 / rho, tau_jam = 1 / p.rho_j;
  if (tau < tau_jam) return -v / p.T + anticip;
  double U = m.d.clamp_speed(m.d.u1(rho));
  double G = 1 / m.d.big_k(v);
  if (tau > G) return (U - v) / p.T + anticip;
  return std::min(U - v, 0.0) / p.T + anticip;
}

inline std::vector<VehicleState> atd_rhs(const std::vector<VehicleState>& s, const MicroModel& m, double t = 0) {
  const auto& p = m.d.params();
  std::vector<VehicleState> out(s.size());
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    auto nb = ahead(s, i, m.road, t);
    double tau = nb.gap / m.road.H;
    if (!(tau > 1)) throw CollisionError("atd_rhs: vehicle " + std::to_string(i) + " overlaps its leader", t);
    out[i].x = s[i].v;
    out[i].v = s[i].a;
    out[i].a = (atd_target(m, 1 / tau, s[i].v, nb.dv) - s[i].a) / p.T_del;
  }
  return out;
}

inline std::vector<VehicleState> micro_rhs(const std::vector<VehicleState>& s, const MicroModel& m, double t) {
  return m.kind == MicroModelKind::atd ? atd_rhs(s, m, t) : gm_rhs(s, m, t);
}

struct Trajectory {
  std::vector<double> t;
  std::vector<std::vector<VehicleState>> states;
};

using MicroRhs = std::function<std::vector<VehicleState>(const std::vector<VehicleState>&, double)>;

// Classical RK4, fixed step, speeds clamped at 0 after each step.
inline Trajectory integrate(const MicroRhs& rhs, std::vector<VehicleState> s, double t_end, double dt, double sample_every = 0) {
  if (!(dt > 0)) throw DomainError("integrate: dt must be positive");
  Trajectory tr;
  const long steps = std::max(1L, std::lround(t_end / dt));
  const double h = t_end / steps;
  const long every = sample_every > 0 ? std::max(1L, std::lround(sample_every / h)) : 0;
  auto axpy = [](const std::vector<VehicleState>& a, double c, const std::vector<VehicleState>& b) {
    std::vector<VehicleState> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = {a[i].x + c * b[i].x, a[i].v + c * b[i].v, a[i].a + c * b[i].a};
    return r;
  };
  if (every) {
    tr.t.push_back(0);
    tr.states.push_back(s);
  }
  for (long k = 0; k < steps; ++k) {
    double t = k * h;
    try {
      auto k1 = rhs(s, t);
      auto k2 = rhs(axpy(s, h / 2, k1), t + h / 2);
      auto k3 = rhs(axpy(s, h / 2, k2), t + h / 2);
      auto k4 = rhs(axpy(s, h, k3), t + h);
      for (std::size_t i = 0; i < s.size(); ++i) {
        s[i].x += h / 6 * (k1[i].x + 2 * k2[i].x + 2 * k3[i].x + k4[i].x);
        s[i].v += h / 6 * (k1[i].v + 2 * k2[i].v + 2 * k3[i].v + k4[i].v);
        s[i].a += h / 6 * (k1[i].a + 2 * k2[i].a + 2 * k3[i].a + k4[i].a);
        s[i].v = std::max(s[i].v, 0.0);
      }
    } catch (const CollisionError& e) {
      throw CollisionError(e.what(), t);
    }
    if (every && (k + 1) % every == 0) {
      tr.t.push_back((k + 1) * h);
      tr.states.push_back(s);
    }
  }
  if (!every || tr.t.back() < t_end - 1e-12) {
    tr.t.push_back(t_end);
    tr.states.push_back(s);
  }
  return tr;
}

inline Trajectory integrate(const MicroModel& m, std::vector<VehicleState> s, double t_end, double dt = 0, double sample_every = 0) {
  return integrate([&m](const std::vector<VehicleState>& q, double t) { return micro_rhs(q, m, t); }, std::move(s), t_end,
                   dt > 0 ? dt : m.default_dt(), sample_every);
}

// Equidistant ring, speeds v0 (1 + eps (-1)^i).
inline std::vector<VehicleState> ring_alternating(const RoadConfig& r, double v0, double eps) {
  std::vector<VehicleState> s(r.N);
  for (int i = 0; i < r.N; ++i) s[i] = {i * r.L / r.N, v0 * (1 + (i % 2 ? -eps : eps)), 0};
  return s;
}

struct ExtractedFields {
  std::vector<CellState> cells;
  std::vector<bool> empty;
};

// Coverage of [x_i, x_i + H) per cell; ring positions wrap onto the grid span.
inline ExtractedFields extract_fields(const std::vector<VehicleState>& s, const Grid1D& g, double H, bool wrap) {
  ExtractedFields f{std::vector<CellState>(g.n), std::vector<bool>(g.n, true)};
  std::vector<double> cover(g.n, 0), mom(g.n, 0);
  const double span = g.x_max - g.x_min;
  for (const auto& v : s) {
    double a = v.x, b = v.x + H;
    if (wrap) {
      a = g.x_min + std::fmod(std::fmod(a - g.x_min, span) + span, span);
      b = a + H;
    }
    // pieces of [a,b), split at the wrap point
    std::vector<std::pair<double, double>> pieces{{a, b}};
    if (wrap && b > g.x_max) pieces = {{a, g.x_max}, {g.x_min, g.x_min + (b - g.x_max)}};
    for (auto [lo, hi] : pieces) {
      int i0 = std::max(0, static_cast<int>(std::floor((lo - g.x_min) / g.dx)));
      int i1 = std::min(g.n - 1, static_cast<int>(std::floor((hi - g.x_min) / g.dx)));
      for (int i = i0; i <= i1; ++i) {
        double cl = g.x_min + i * g.dx, cr = cl + g.dx;
        double ov = std::min(hi, cr) - std::max(lo, cl);
        if (ov <= 0) continue;
        cover[i] += ov;
        mom[i] += ov * v.v;
      }
    }
  }
  for (int i = 0; i < g.n; ++i) {
    f.cells[i].rho = cover[i] / g.dx;
    if (cover[i] > 0) {
      f.cells[i].u = mom[i] / cover[i];
      f.empty[i] = false;
    }
  }
  return f;
}

}  // namespace mpt
