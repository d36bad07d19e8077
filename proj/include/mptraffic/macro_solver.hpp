#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "closure.hpp"
#include "error.hpp"
#include "fundamental_diagrams.hpp"

namespace mpt {

struct Grid1D {
  double x_min = -30, x_max = 10, dx = 0.15;
  int n = 0;

  static Grid1D make(double x_min, double x_max, double dx) {
    if (!(dx > 0) || !(x_max > x_min)) throw DomainError("Grid1D: need dx > 0 and x_max > x_min");
    Grid1D g{x_min, x_max, dx, static_cast<int>(std::lround((x_max - x_min) / dx))};
    if (g.n < 1) throw DomainError("Grid1D: empty grid");
    return g;
  }
  double x(int i) const { return x_min + (i + 0.5) * dx; }
  int nearest(double xp) const {
    if (xp < x_min || xp > x_max) throw DomainError("probe position outside the domain");
    int i = static_cast<int>(std::floor((xp - x_min) / dx));
    return std::clamp(i, 0, n - 1);
  }
};

struct CellState {
  double rho = 0, u = 0, a = 0;
};

struct ConservedState {
  double rho = 0, y = 0;
};

inline ConservedState to_conserved(const Diagrams& d, const CellState& s) {
  if (!(s.rho > 0 && s.rho < 1)) throw StateError("to_conserved: rho outside (0,1)");
  return {s.rho, s.rho * (s.u + d.pressure(s.rho))};
}

inline CellState from_conserved(const Diagrams& d, const ConservedState& c) {
  if (!(c.rho > 0 && c.rho < 1)) throw StateError("from_conserved: rho outside (0,1)");
  return {c.rho, c.y / c.rho - d.pressure(c.rho), 0};
}

enum class BottleneckMode { divide, multiply };

// phi(x) = 1 upstream, factor from x0 on, linear over the ramp
struct BottleneckProfile {
  double x0 = 0.0, ramp_width = 3.0, factor = 2.0 / 3.0;
  BottleneckMode mode = BottleneckMode::divide;
  bool enabled = true;

  double phi(double x) const {
    if (!enabled || x <= x0 - ramp_width) return 1.0;
    if (x >= x0) return factor;
    return 1.0 + (factor - 1.0) * (x - (x0 - ramp_width)) / ramp_width;
  }
  // density the source sees: per remaining lane (divide) or literally scaled
  double effective(double rho, double x) const {
    double f = phi(x);
    return mode == BottleneckMode::divide ? rho / f : rho * f;
  }
};

enum class BoundaryType { inflow, periodic };

struct BoundaryCondition {
  BoundaryType type = BoundaryType::inflow;
  double rho_in = 0.25, u_in = 0.0;
};

struct Flux {
  double rho = 0, y = 0;
};

inline double lambda1(const Diagrams& d, double rho, double u) { return u - d.params().C / (1 - rho); }

inline double exact_flux_rho(const CellState& s) { return s.rho * s.u; }

// Interface state of the exact Riemann solution (1-wave, then 2-contact at u_R >= 0).
inline CellState riemann_state(const Diagrams& d, const CellState& L, const CellState& R, double floor = 1e-8) {
  const double C = d.params().C;
  const double wL = L.u + d.pressure(L.rho);
  double rM = std::clamp(d.pressure_inverse(wL - R.u), floor, 1 - floor);
  CellState M{rM, R.u, 0};
  if (rM >= L.rho) {
    if (rM == L.rho) return L;
    double s = (rM * M.u - L.rho * L.u) / (rM - L.rho);
    return s >= 0 ? L : M;
  }
  if (lambda1(d, L.rho, L.u) >= 0) return L;
  if (lambda1(d, M.rho, M.u) <= 0) return M;
  double lo = rM, hi = L.rho;
  for (int i = 0; i < 100 && hi - lo > 1e-15; ++i) {
    double m = 0.5 * (lo + hi);
    double val = wL - d.pressure(m) - C / (1 - m);
    (val > 0 ? lo : hi) = m;
  }
  double r = 0.5 * (lo + hi);
  return {r, wL - d.pressure(r), 0};
}

inline Flux physical_flux(const Diagrams& d, const CellState& s) {
  double q = s.rho * s.u;
  return {q, q * (s.u + d.pressure(s.rho))};
}

inline Flux riemann_flux(const Diagrams& d, const CellState& L, const CellState& R, double floor = 1e-8) {
  return physical_flux(d, riemann_state(d, L, R, floor));
}

inline double cfl_dt(const Diagrams& d, const std::vector<CellState>& s, double dx, double lambda_cfl, double dt_max = 1.0) {
  if (!(lambda_cfl > 0 && lambda_cfl <= 1)) throw DomainError("cfl_dt: lambda must be in (0,1]");
  double smax = 0;
  for (auto& c : s) smax = std::max({smax, std::abs(c.u), std::abs(c.u - c.rho * d.pressure_derivative(c.rho))});
  if (smax == 0) return dt_max;
  return std::min(dt_max, lambda_cfl * dx / smax);
}

// Fastest wave of the exact Riemann solution at one interface: 1-shock or
// rarefaction edges, and the contact at u_R. Intermediate states can be
// faster than either cell's characteristic speed.
inline double riemann_max_speed(const Diagrams& d, const CellState& L, const CellState& R, double floor = 1e-8) {
  const double wL = L.u + d.pressure(L.rho);
  const double rM = std::clamp(d.pressure_inverse(wL - R.u), floor, 1 - floor);
  double s1;
  if (rM > L.rho)
    s1 = std::abs((rM * R.u - L.rho * L.u) / (rM - L.rho));
  else
    s1 = std::max(std::abs(lambda1(d, L.rho, L.u)), std::abs(lambda1(d, rM, R.u)));
  return std::max(s1, std::abs(R.u));
}

// cfl_dt tightened by the interface wave speeds
inline double riemann_cfl_dt(const Diagrams& d, const std::vector<CellState>& s, const BoundaryCondition& bc, double dx,
                             double lambda_cfl, double dt_max = 1.0) {
  double dt = cfl_dt(d, s, dx, lambda_cfl, dt_max);
  const int n = static_cast<int>(s.size());
  double smax = 0;
  for (int i = 0; i <= n; ++i) {
    CellState L = i == 0 ? (bc.type == BoundaryType::periodic ? s[n - 1] : CellState{bc.rho_in, bc.u_in, 0}) : s[i - 1];
    CellState R = i == n ? (bc.type == BoundaryType::periodic ? s[0] : s[n - 1]) : s[i];
    smax = std::max(smax, riemann_max_speed(d, L, R));
  }
  return smax > 0 ? std::min(dt, lambda_cfl * dx / smax) : dt;
}

struct TransportStats {
  double rho_min = std::numeric_limits<double>::infinity();
  double rho_max = -std::numeric_limits<double>::infinity();
  long clipped = 0;
};

struct BoundsConfig {
  double floor = 1e-8;
  double blowup = 1e-6;  // pre-clip excursion beyond [0,1] that aborts the run
};

// One first-order Godunov step in (rho, y).
inline void transport_step(const Diagrams& d, std::vector<CellState>& s, double dt, double dx, const BoundaryCondition& bc,
                           const BoundsConfig& bounds = {}, TransportStats* stats = nullptr) {
  const int n = static_cast<int>(s.size());
  const double w = d.params().w;
  std::vector<Flux> f(n + 1);
  CellState left_ghost = bc.type == BoundaryType::periodic ? s[n - 1] : CellState{bc.rho_in, bc.u_in, 0};
  CellState right_ghost = bc.type == BoundaryType::periodic ? s[0] : s[n - 1];
  for (int i = 0; i <= n; ++i) {
    const CellState& L = i == 0 ? left_ghost : s[i - 1];
    const CellState& R = i == n ? right_ghost : s[i];
    f[i] = riemann_flux(d, L, R, bounds.floor);
  }
  if (bc.type == BoundaryType::periodic) f[n] = f[0];
  const double r = dt / dx;
  for (int i = 0; i < n; ++i) {
    double rho = s[i].rho - r * (f[i + 1].rho - f[i].rho);
    double y = s[i].rho * (s[i].u + d.pressure(s[i].rho)) - r * (f[i + 1].y - f[i].y);
    if (!std::isfinite(rho) || rho < -bounds.blowup || rho > 1 + bounds.blowup)
      throw StateError("transport_step: density blow-up at cell " + std::to_string(i) + " rho=" + std::to_string(rho));
    if (stats) {
      stats->rho_min = std::min(stats->rho_min, rho);
      stats->rho_max = std::max(stats->rho_max, rho);
    }
    double rc = std::clamp(rho, bounds.floor, 1 - bounds.floor);
    if (rc != rho && stats) ++stats->clipped;
    s[i].rho = rc;
    s[i].u = std::clamp(y / rc - d.pressure(rc), 0.0, w);
  }
}

template <class F>
double rk4(F&& f, double u, double h) {
  double k1 = f(u), k2 = f(u + 0.5 * h * k1), k3 = f(u + 0.5 * h * k2), k4 = f(u + h * k3);
  return u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

// du/dt = rate(rho_eff, u) per cell, RK4 sub-steps with h <= T/10.
inline void apply_source(std::vector<CellState>& s, double dt, const Closure& cl, const std::vector<double>& rho_scale_x,
                         const BottleneckProfile& profile) {
  if (dt <= 0) return;
  const double hmax = cl.min_relaxation_time() / 10;
  const int m = std::max(1, static_cast<int>(std::ceil(dt / hmax - 1e-12)));
  const double h = dt / m;
  const double w = cl.diagrams().params().w;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double re = profile.effective(s[i].rho, rho_scale_x[i]);
    auto f = [&](double u) { return cl.rate(re, std::clamp(u, 0.0, w)); };
    double u = s[i].u;
    for (int k = 0; k < m; ++k) u = rk4(f, u, h);
    s[i].u = std::clamp(u, 0.0, w);
  }
}

enum class Splitting { strang, godunov };

template <class State, class Transport, class Source>
void split_step(State& s, double dt, Splitting sp, Transport&& transport, Source&& source) {
  if (sp == Splitting::strang) {
    source(s, 0.5 * dt);
    transport(s, dt);
    source(s, 0.5 * dt);
  } else {
    transport(s, dt);
    source(s, dt);
  }
}

struct SpaceTimeRecord {
  std::vector<double> x, t;
  std::vector<std::vector<double>> rho, u;
};

struct ProbeSeries {
  double x = 0;
  int cell = 0;
  std::vector<double> t, rho, u, flow;
};

struct MacroConfig {
  Grid1D grid = Grid1D::make(-30, 10, 0.15);
  BoundaryCondition boundary;
  BottleneckProfile bottleneck;
  double t_end = 400;
  double lambda_cfl = 0.99;
  double dt_max = 1.0;
  Splitting splitting = Splitting::strang;
  double record_every = 1.0;  // <= 0 disables snapshots
  std::vector<double> probes = {-20, 0, 5};
  BoundsConfig bounds;
  long max_steps = 100000000;
};

struct RunResult {
  SpaceTimeRecord record;
  std::vector<ProbeSeries> probes;
  TransportStats stats;
  long steps = 0;
  std::vector<CellState> final_state;
};

class MacroSolver {
 public:
  MacroSolver(MacroConfig cfg, Closure cl) : cfg_(std::move(cfg)), cl_(std::move(cl)) {
    for (int i = 0; i < cfg_.grid.n; ++i) xc_.push_back(cfg_.grid.x(i));
  }

  const MacroConfig& config() const { return cfg_; }
  const std::vector<double>& centers() const { return xc_; }

  std::vector<CellState> uniform(double rho, double u) const { return std::vector<CellState>(cfg_.grid.n, CellState{rho, u, 0}); }

  double dt_for(const std::vector<CellState>& s) const {
    return riemann_cfl_dt(cl_.diagrams(), s, cfg_.boundary, cfg_.grid.dx, cfg_.lambda_cfl, cfg_.dt_max);
  }

  void transport(std::vector<CellState>& s, double dt, TransportStats* st = nullptr) const {
    transport_step(cl_.diagrams(), s, dt, cfg_.grid.dx, cfg_.boundary, cfg_.bounds, st);
  }

  void source(std::vector<CellState>& s, double dt) const { apply_source(s, dt, cl_, xc_, cfg_.bottleneck); }

  void step(std::vector<CellState>& s, double dt, TransportStats* st = nullptr) const {
    split_step(s, dt, cfg_.splitting, [&](auto& q, double h) { transport(q, h, st); },
               [&](auto& q, double h) { source(q, h); });
  }

  RunResult run(std::vector<CellState> s) const {
    RunResult out;
    for (double xp : cfg_.probes) {
      ProbeSeries p;
      p.x = xp;
      p.cell = cfg_.grid.nearest(xp);
      out.probes.push_back(p);
    }
    out.record.x = xc_;
    double t = 0, next_rec = 0;
    auto snap = [&] {
      out.record.t.push_back(t);
      std::vector<double> r(s.size()), u(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        r[i] = s[i].rho;
        u[i] = s[i].u;
      }
      out.record.rho.push_back(std::move(r));
      out.record.u.push_back(std::move(u));
    };
    auto sample = [&] {
      for (auto& p : out.probes) {
        const auto& c = s[p.cell];
        p.t.push_back(t);
        p.rho.push_back(c.rho);
        p.u.push_back(c.u);
        p.flow.push_back(c.rho * c.u);
      }
    };
    if (cfg_.record_every > 0) {
      snap();
      next_rec = cfg_.record_every;
    }
    sample();
    while (t < cfg_.t_end - 1e-12) {
      if (out.steps >= cfg_.max_steps) throw StateError("run: step limit reached");
      double dt = std::min(dt_for(s), cfg_.t_end - t);
      step(s, dt, &out.stats);
      t += dt;
      ++out.steps;
      sample();
      if (cfg_.record_every > 0 && t >= next_rec - 1e-9) {
        snap();
        next_rec += cfg_.record_every;
      }
    }
    out.final_state = std::move(s);
    return out;
  }

 private:
  MacroConfig cfg_;
  Closure cl_;
  std::vector<double> xc_;
};

inline double total_mass(const std::vector<CellState>& s, double dx) {
  double m = 0;
  for (auto& c : s) m += c.rho;
  return m * dx;
}

// Third-order ATD system: (rho, rho u, rho a) transported at speed u,
// momentum gains rho a, a relaxes with T_del to the branch target.
class AtdFullSolver {
 public:
  AtdFullSolver(MacroConfig cfg, Diagrams d) : cfg_(std::move(cfg)), d_(std::move(d)) {
    for (int i = 0; i < cfg_.grid.n; ++i) xc_.push_back(cfg_.grid.x(i));
  }

  double target_acceleration(double rho_eff, double rho, double u, double tau_dxu) const {
    const auto& p = d_.params();
    double anticip = d_.sound_coefficient(std::clamp(rho, 1e-12, 1 - 1e-12)) * tau_dxu;
    if (rho_eff >= p.rho_j) return -u / p.T + anticip;
    double U = rho_eff < 1 ? d_.clamp_speed(d_.u1(rho_eff)) : 0.0;
    if (rho_eff < d_.big_k(u)) return (U - u) / p.T + anticip;
    return std::min(U - u, 0.0) / p.T + anticip;
  }

  double dt_for(const std::vector<CellState>& s) const {
    double smax = 0;
    for (auto& c : s) smax = std::max(smax, std::abs(c.u));
    if (smax == 0) return cfg_.dt_max;
    return std::min(cfg_.dt_max, cfg_.lambda_cfl * cfg_.grid.dx / smax);
  }

  void transport(std::vector<CellState>& s, double dt) const {
    const int n = static_cast<int>(s.size());
    const auto& bc = cfg_.boundary;
    CellState lg = bc.type == BoundaryType::periodic ? s[n - 1] : CellState{bc.rho_in, bc.u_in, 0};
    std::vector<std::array<double, 3>> f(n + 1);
    for (int i = 0; i <= n; ++i) {
      const CellState& L = i == 0 ? lg : s[i - 1];
      double q = L.rho * L.u;  // u >= 0: the left state is upwind
      f[i] = {q, q * L.u, q * L.a};
    }
    if (bc.type == BoundaryType::periodic) f[n] = f[0];
    const double r = dt / cfg_.grid.dx;
    for (int i = 0; i < n; ++i) {
      double m0 = s[i].rho - r * (f[i + 1][0] - f[i][0]);
      double m1 = s[i].rho * s[i].u - r * (f[i + 1][1] - f[i][1]);
      double m2 = s[i].rho * s[i].a - r * (f[i + 1][2] - f[i][2]);
      if (!std::isfinite(m0) || m0 < -cfg_.bounds.blowup || m0 > 1 + cfg_.bounds.blowup)
        throw StateError("atd_full_step: density blow-up at cell " + std::to_string(i));
      double rc = std::clamp(m0, cfg_.bounds.floor, 1 - cfg_.bounds.floor);
      s[i] = {rc, std::clamp(m1 / rc, 0.0, d_.params().w), m2 / rc};
    }
  }

  void source(std::vector<CellState>& s, double dt) const {
    const int n = static_cast<int>(s.size());
    const auto& p = d_.params();
    std::vector<double> dxu(n);
    for (int i = 0; i < n; ++i) {
      int im = i - 1, ip = i + 1;
      double ul, ur;
      if (cfg_.boundary.type == BoundaryType::periodic) {
        ul = s[(im + n) % n].u;
        ur = s[ip % n].u;
      } else {
        ul = im < 0 ? cfg_.boundary.u_in : s[im].u;
        ur = ip >= n ? s[n - 1].u : s[ip].u;
      }
      dxu[i] = (ur - ul) / (2 * cfg_.grid.dx);
    }
    const double hmax = std::min(p.T, p.T_del) / 10;
    const int m = std::max(1, static_cast<int>(std::ceil(dt / hmax - 1e-12)));
    const double h = dt / m;
    for (int i = 0; i < n; ++i) {
      double rho = s[i].rho, re = cfg_.bottleneck.effective(rho, xc_[i]);
      double tau_dxu = dxu[i] / rho;
      double u = s[i].u, a = s[i].a;
      auto fa = [&](double uu, double aa) { return (target_acceleration(re, rho, std::max(uu, 0.0), tau_dxu) - aa) / p.T_del; };
      for (int k = 0; k < m; ++k) {
        double k1u = a, k1a = fa(u, a);
        double k2u = a + 0.5 * h * k1a, k2a = fa(u + 0.5 * h * k1u, a + 0.5 * h * k1a);
        double k3u = a + 0.5 * h * k2a, k3a = fa(u + 0.5 * h * k2u, a + 0.5 * h * k2a);
        double k4u = a + h * k3a, k4a = fa(u + h * k3u, a + h * k3a);
        u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
        a += h / 6 * (k1a + 2 * k2a + 2 * k3a + k4a);
        u = std::clamp(u, 0.0, p.w);
      }
      s[i].u = u;
      s[i].a = a;
    }
  }

  void step(std::vector<CellState>& s, double dt) const {
    split_step(s, dt, cfg_.splitting, [&](auto& q, double h) { transport(q, h); }, [&](auto& q, double h) { source(q, h); });
  }

  std::vector<CellState> run(std::vector<CellState> s, double t_end) const {
    double t = 0;
    while (t < t_end - 1e-12) {
      double dt = std::min(dt_for(s), t_end - t);
      step(s, dt);
      t += dt;
    }
    return s;
  }

 private:
  MacroConfig cfg_;
  Diagrams d_;
  std::vector<double> xc_;
};

// nearest-cell time series from a snapshot record
inline ProbeSeries probe(const SpaceTimeRecord& rec, const Grid1D& g, double xp) {
  ProbeSeries p;
  p.x = xp;
  p.cell = g.nearest(xp);
  for (std::size_t k = 0; k < rec.t.size(); ++k) {
    double r = rec.rho[k][p.cell], u = rec.u[k][p.cell];
    p.t.push_back(rec.t[k]);
    p.rho.push_back(r);
    p.u.push_back(u);
    p.flow.push_back(r * u);
  }
  return p;
}

struct WaveMetrics {
  double amplitude = 0;
  double dominant_period = std::numeric_limits<double>::infinity();
  double mean = 0;
  int samples = 0;
};

struct WaveOptions {
  double window = 0.25;     // trailing fraction of the run
  double resample_dt = 0.5; // uniform resampling step; <= 0 uses the raw samples
  int min_samples = 64;
};

inline WaveMetrics wave_metrics(const std::vector<double>& t, const std::vector<double>& v, const WaveOptions& o = {}) {
  if (t.size() != v.size() || t.size() < 2) throw DomainError("wave_metrics: need matching series");
  const double t0 = t.front() + (1 - o.window) * (t.back() - t.front());
  std::vector<double> y;
  double dt = o.resample_dt;
  if (dt > 0) {
    std::size_t j = 0;
    for (double s = t0; s <= t.back() + 1e-12; s += dt) {
      while (j + 1 < t.size() && t[j + 1] < s) ++j;
      if (j + 1 >= t.size()) {
        y.push_back(v.back());
        continue;
      }
      double a = (s - t[j]) / (t[j + 1] - t[j]);
      y.push_back(v[j] + std::clamp(a, 0.0, 1.0) * (v[j + 1] - v[j]));
    }
  } else {
    std::size_t first = 0;
    while (first < t.size() && t[first] < t0 - 1e-12) ++first;
    y.assign(v.begin() + static_cast<long>(first), v.end());
    dt = y.size() > 1 ? (t.back() - t[first]) / static_cast<double>(y.size() - 1) : 1.0;
  }
  const int n = static_cast<int>(y.size());
  if (n < o.min_samples) throw DomainError("wave_metrics: analysis window too short");
  WaveMetrics m;
  m.samples = n;
  m.mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double var = 0;
  for (double x : y) var += (x - m.mean) * (x - m.mean);
  m.amplitude = std::sqrt(var / n);
  if (m.amplitude == 0) return m;

  // detrend by least squares line, then pick the DFT peak
  double sx = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += i;
    sxx += double(i) * i;
    sxy += i * (y[i] - m.mean);
  }
  double slope = sxy / (sxx - sx * sx / n);
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) z[i] = y[i] - m.mean - slope * (i - sx / n);
  const double pi = std::acos(-1.0);
  double best = 0;
  int kbest = 0;
  for (int k = 1; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (int i = 0; i < n; ++i) acc += z[i] * std::polar(1.0, -2 * pi * k * i / n);
    double pw = std::norm(acc);
    if (pw > best) {
      best = pw;
      kbest = k;
    }
  }
  if (kbest > 0 && best > 1e-24 * n * n) m.dominant_period = n * dt / kbest;
  return m;
}

}  // namespace mpt
