#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "fundamental_diagrams.hpp"
#include "roots.hpp"

namespace mpt {

inline double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
  double s = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return ys[i] + s * (ys[i + 1] - ys[i]);
}

struct VelocityGrid {
  VelocityGrid(int cells, double wmax = 1.0) : n(cells), w(wmax), dv(wmax / cells) {
    if (cells < 1 || !(wmax > 0)) throw DomainError("VelocityGrid: need n >= 1 and w > 0");
  }
  double v(int j) const { return (j + 0.5) * dv; }

  int n;
  double w;
  double dv;
};

// Gain and loss pieces of the braking/acceleration kernels with
// sigma uniform between the two speeds, on the midpoint grid.
// below_j, above_j are the masses strictly below/above cell j.
struct KernelParts {
  std::vector<double> gain, loss_b, loss_a;
};

inline KernelParts kernel_parts(const std::vector<double>& F, const VelocityGrid& g) {
  const int n = g.n;
  const double dv = g.dv;
  KernelParts k{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  double tot = 0, m1tot = 0;
  for (int j = 0; j < n; ++j) {
    tot += F[j];
    m1tot += F[j] * g.v(j);
  }
  double below = 0, m1below = 0;
  for (int j = 0; j < n; ++j) {
    double vj = g.v(j);
    double above = tot - below - F[j];
    double m1above = m1tot - m1below - F[j] * vj;
    k.gain[j] = dv * dv * (above * below + 0.5 * F[j] * (below + above));
    k.loss_b[j] = dv * (vj * below - m1below);
    k.loss_a[j] = dv * (m1above - vj * above);
    below += F[j];
    m1below += F[j] * vj;
  }
  return k;
}

inline double mass(const std::vector<double>& F, const VelocityGrid& g) {
  return std::accumulate(F.begin(), F.end(), 0.0) * g.dv;
}

inline double mean_speed(const std::vector<double>& F, const VelocityGrid& g) {
  double s = 0;
  for (int j = 0; j < g.n; ++j) s += g.v(j) * F[j];
  return s * g.dv;
}

// Interaction rate without the gamma prefactor, evaluated on a normalized F.
inline std::vector<double> collision_operator(const std::vector<double>& F, double k, double nu, const VelocityGrid& g) {
  if (static_cast<int>(F.size()) != g.n) throw ContractError("collision_operator: size mismatch");
  if (std::abs(mass(F, g) - 1) > 1e-8) throw ContractError("collision_operator: F is not normalized");
  auto p = kernel_parts(F, g);
  std::vector<double> r(g.n);
  for (int j = 0; j < g.n; ++j)
    r[j] = p.gain[j] - (k * p.loss_b[j] + (1 - k) * p.loss_a[j]) * F[j] + nu * (1 / g.w - F[j]);
  return r;
}

inline double max_abs(const std::vector<double>& r) {
  double m = 0;
  for (double x : r) m = std::max(m, std::abs(x));
  return m;
}

struct StationaryOptions {
  double damping = 0.5;
  double tol = 1e-12;
  int max_iter = 200000;
  double march_tol = 1e-10;
  long march_max_iter = 5000000;
  double accept = 1e-8;
};

struct StationaryResult {
  std::vector<double> F;
  double residual = 0;
  long iterations = 0;
  bool marched = false;
};

inline void normalize(std::vector<double>& F, const VelocityGrid& g) {
  for (auto& f : F) f = std::max(f, 0.0);
  double m = mass(F, g);
  for (auto& f : F) f /= m;
}

inline StationaryResult stationary_fixed_point(double k, double nu, const VelocityGrid& g, const StationaryOptions& o = {}) {
  StationaryResult res{std::vector<double>(g.n, 1 / g.w)};
  if (k >= 1 && nu == 0) {
    // everything brakes, nothing randomizes: all mass in the lowest cell
    std::fill(res.F.begin(), res.F.end(), 0.0);
    res.F[0] = 1 / g.dv;
    res.residual = max_abs(collision_operator(res.F, k, nu, g));
    return res;
  }
  std::vector<double> next(g.n);
  auto& F = res.F;
  for (long it = 0; it < o.max_iter; ++it) {
    auto p = kernel_parts(F, g);
    for (int j = 0; j < g.n; ++j) {
      double lam = k * p.loss_b[j] + (1 - k) * p.loss_a[j] + nu;
      next[j] = (p.gain[j] + nu / g.w) / std::max(lam, 1e-300);
    }
    normalize(next, g);
    for (int j = 0; j < g.n; ++j) F[j] = (1 - o.damping) * F[j] + o.damping * next[j];
    res.iterations = it + 1;
    res.residual = max_abs(collision_operator(F, k, nu, g));
    if (res.residual < o.tol) break;
  }
  return res;
}

// Explicit pseudo-time marching dF/ds = C(F), dt = 0.1/(1+nu).
inline StationaryResult stationary_march(double k, double nu, const VelocityGrid& g, const StationaryOptions& o = {}) {
  StationaryResult res{std::vector<double>(g.n, 1 / g.w)};
  res.marched = true;
  auto& F = res.F;
  const double dt = 0.1 / (1 + nu);
  for (long it = 0; it < o.march_max_iter; ++it) {
    auto c = collision_operator(F, k, nu, g);
    for (int j = 0; j < g.n; ++j) F[j] += dt * c[j];
    normalize(F, g);
    res.iterations = it + 1;
    if (it % 50 == 0 && max_abs(c) < o.march_tol) break;
  }
  res.residual = max_abs(collision_operator(F, k, nu, g));
  return res;
}

inline StationaryResult stationary_solution(double k, double nu, const VelocityGrid& g, const StationaryOptions& o = {}) {
  if (k < 0 || k > 1 || nu < 0) throw DomainError("stationary_solution: need k in [0,1], nu >= 0");
  if (g.n < 16) throw DomainError("stationary_solution: velocity grid needs n >= 16");
  auto r = stationary_fixed_point(k, nu, g, o);
  if (r.residual >= o.accept) {
    auto m = stationary_march(k, nu, g, o);
    if (m.residual < r.residual) r = std::move(m);
  }
  if (r.residual >= o.accept)
    throw SolverError("stationary_solution: no convergence at k=" + std::to_string(k), r.residual);
  return r;
}

// nu(k) = nu0 (1-k)^q (1 + a k)
struct NuFamily {
  double nu0 = 0.02;
  double q = 0.1;
  double a = 0.0;
  double operator()(double k) const {
    if (k >= 1) return 0.0;
    return nu0 * std::pow(1 - k, q) * (1 + a * k);
  }
};

// P_B(rho,u) = lo + (hi - lo) sigma((u_c - u)/s), hi = lo + (1 - lo) t,
// u_c = theta U1 + (1 - theta) U2; lo, t, theta, log s piecewise linear in rho.
struct BrakingProfile {
  std::vector<double> knots, lo, t, theta, log_s;

  static BrakingProfile preset() {
    BrakingProfile b;
    b.knots = {0, 0.1, 0.2, 0.28, 0.3, 0.34, 0.38, 0.42, 0.46, 0.5, 0.52, 0.6, 0.7, 0.8, 0.9, 1.0};
    b.lo = {0.0206740002, 0.120880526, 0.253543427, 0.228230485, 0.213674551, 0.147423941,
            0.123538274, 0.0940339715, 0.0683814739, 0.0436659376, 0.213980431, 0.275647674,
            0.0202285154, 7.80193089e-06, 0.000260758427, 0.712159216};
    b.t = {0, 0, 0, 0, 0.176197436, 0.412054915, 0.270855808, 0.28651955,
           0.278638689, 0.115653386, 0, 0, 0, 0, 0, 0};
    b.theta = {0.0663736414, 0.252320062, 0.593422625, 0.00552650339, 0.63589987, 0.179273934,
               0.36296795, 0.196112491, 0.113239429, 0.203884856, 0.836040633, 0.146947727,
               0.416953318, 0.955636006, 0.935089527, 0.295719113};
    b.log_s = {-2.00582488, -5.0670923, -3.47333936, -7.5589126, -3.94749402, -2.88100751,
               -3.29178854, -3.30818309, -3.57910816, -5.08634069, -7.41572561, -3.48227541,
               -3.34189446, -2.59034127, -1.60943816, -1.60950018};
    return b;
  }

  double operator()(const Diagrams& d, double rho, double u) const {
    double l = interp(knots, lo, rho);
    double tt = interp(knots, t, rho);
    double th = interp(knots, theta, rho);
    double s = std::exp(interp(knots, log_s, rho));
    double hi = l + (1 - l) * tt;
    double uc = th * d.clamp_speed(d.u1(rho)) + (1 - th) * d.clamp_speed(d.u2(rho));
    double sig = 1 / (1 + std::exp(-(uc - u) / s));
    return l + (hi - l) * sig;
  }
};

struct BehaviorFunctions {
  NuFamily nu;
  BrakingProfile p_B = BrakingProfile::preset();
};

struct ThresholdQuantities {
  double rho_tilde, q_A, q_B, p_B, k, gamma, nu, T_eff;
};

inline double reduced_density(double rho, double h_b) {
  if (rho <= 0) throw DomainError("reduced_density: rho must be positive");
  if (rho * h_b >= 1) throw SingularityError("reduced_density: rho*H_B >= 1");
  return rho / (1 - rho * h_b);
}

inline ThresholdQuantities interaction_weight(double rho, double u, const BehaviorFunctions& b, const Diagrams& d) {
  const auto& p = d.params();
  ThresholdQuantities q{};
  q.rho_tilde = reduced_density(rho, p.H_B);
  q.q_B = q.rho_tilde;
  q.q_A = q.rho_tilde * std::exp(-q.rho_tilde * (p.H_A - p.H_B));
  q.p_B = b.p_B(d, rho, u);
  q.gamma = q.q_A + q.p_B * q.q_B;
  q.k = q.gamma > 0 ? q.p_B * q.q_B / q.gamma : 0.0;
  q.nu = b.nu(q.k);
  q.T_eff = q.gamma * q.nu > 0 ? 1 / (q.gamma * q.nu) : INFINITY;
  return q;
}

// u^e from a direct stationary solve; at k=1 with nu(1)=0 the continuum
// stationary state is a Dirac mass at v=0.
inline double u_e(double k, const NuFamily& nu, const VelocityGrid& g, const StationaryOptions& o = {}) {
  double n = nu(k);
  if (k >= 1 && n == 0) return 0.0;
  return mean_speed(stationary_solution(k, n, g, o).F, g);
}

struct UeTable {
  std::vector<double> k, ue;

  // Uniform knots plus a geometric refinement toward k = 1: nu(k) ~ (1-k)^q
  // gives u^e an infinite slope there, which one uniform interval cannot follow.
  static UeTable build(const NuFamily& nu, const VelocityGrid& g, int points = 201, const StationaryOptions& o = {},
                       bool refine = true) {
    if (points < 2) throw DomainError("UeTable: need at least 2 points");
    std::vector<double> ks;
    for (int i = 0; i < points; ++i) ks.push_back(static_cast<double>(i) / (points - 1));
    if (refine) {
      const double ratio = std::pow(2.0, -0.25);
      for (double a = 0.05; a > 1e-12; a *= ratio) ks.push_back(1 - a);
      std::sort(ks.begin(), ks.end());
      ks.erase(std::unique(ks.begin(), ks.end(), [](double x, double y) { return std::abs(x - y) < 1e-14; }), ks.end());
    }
    UeTable t;
    t.k = ks;
    t.ue.resize(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) t.ue[i] = u_e(ks[i], nu, g, o);
    return t;
  }

  double operator()(double kk) const { return interp(k, ue, kk); }
};

class KineticModel {
 public:
  KineticModel(Diagrams d, BehaviorFunctions b, UeTable table, int n_velocity = 64)
      : d_(std::move(d)), b_(std::move(b)), table_(std::move(table)), n_(n_velocity) {}

  static KineticModel make(const ModelParams& p, BehaviorFunctions b = {}, int n_velocity = 64) {
    auto t = UeTable::build(b.nu, VelocityGrid(n_velocity, p.w));
    return KineticModel(Diagrams(p), std::move(b), std::move(t), n_velocity);
  }

  const Diagrams& diagrams() const { return d_; }
  const BehaviorFunctions& behavior() const { return b_; }
  const UeTable& table() const { return table_; }
  int velocity_cells() const { return n_; }

  bool admissible(double rho) const { return rho > 0 && rho * d_.params().H_B < 1; }

  ThresholdQuantities thresholds(double rho, double u) const { return interaction_weight(rho, u, b_, d_); }

  // U(rho,u) = u^e(k(rho,u)); the jam limit k=1 beyond rho*H_B >= 1
  double closure_u(double rho, double u) const {
    if (!admissible(rho)) {
      if (rho <= 0) throw DomainError("kinetic closure: rho must be positive");
      return table_(1.0);
    }
    return table_(thresholds(rho, u).k);
  }

  double g(double rho, double u) const { return closure_u(rho, u) - u; }

  std::vector<EquilibriumPoint> multi_valued_equilibria(double rho, const ScanOptions& opt = {}) const {
    if (!admissible(rho)) throw SingularityError("multi_valued_equilibria: need 0 < rho*H_B < 1");
    return scan_roots([&](double u) { return g(rho, u); }, 0.0, d_.params().w, opt);
  }

  // rho gamma nu (u^e(k) - u)
  double source_closure(double rho, double u) const {
    auto q = thresholds(rho, u);
    return rho * q.gamma * q.nu * (table_(q.k) - u);
  }

  void set_behavior(BehaviorFunctions b) { b_ = std::move(b); }

 private:
  Diagrams d_;
  BehaviorFunctions b_;
  UeTable table_;
  int n_;
};

struct CalibrationTargets {
  std::function<double(double)> upper, lower, middle;
  std::vector<double> rho_band, rho_free, rho_jam;

  static std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = a + (b - a) * i / (n - 1);
    return x;
  }

  static CalibrationTargets standard(const Diagrams& d) {
    CalibrationTargets t;
    t.upper = [d](double r) { return d.clamp_speed(d.u1(r)); };
    t.lower = [d](double r) { return d.clamp_speed(d.u2(r)); };
    t.middle = [d](double r) { return d.switching_curve(r); };
    const auto& p = d.params();
    double e = 0.005;
    t.rho_band = linspace(p.rho_f + e, p.rho_j - e, 40);
    t.rho_free = linspace(0.02, p.rho_f - e, 30);
    t.rho_jam = linspace(p.rho_j + e, 0.98, 40);
    return t;
  }
};

struct CalibrationOptions {
  int max_iter = 100;
  double penalty = 0.3;    // weight on the bistable amplitude t outside the band
  double threshold = 0.05; // acceptable root deviation
  double fd_step = 1e-6;
};

struct CalibrationResult {
  BehaviorFunctions behavior;
  double max_residual = 0;   // max |g| at the targets
  double max_deviation = 0;  // max root distance to the targets on the check points
  double cost = 0;
  int iterations = 0;
  bool ok = false;
};

// Root distance to the targets at band densities (both stable roots, and
// the unstable root strictly between them) plus one free-flow density.
inline double calibration_deviation(const KineticModel& m, const CalibrationTargets& t,
                                    const std::vector<double>& band_checks = {0.32, 0.36, 0.40, 0.44, 0.48},
                                    double free_check = 0.1) {
  double dev = 0;
  for (double r : band_checks) {
    auto pts = m.multi_valued_equilibria(r);
    std::vector<double> st, un;
    for (auto& p : pts) (p.stability == Stability::stable ? st : un).push_back(p.u);
    if (st.size() != 2 || un.size() != 1) return INFINITY;
    double lo = std::min(st[0], st[1]), hi = std::max(st[0], st[1]);
    if (!(lo < un[0] && un[0] < hi)) return INFINITY;
    dev = std::max({dev, std::abs(hi - t.upper(r)), std::abs(lo - t.lower(r))});
  }
  auto pts = m.multi_valued_equilibria(free_check);
  if (pts.size() != 1) return INFINITY;
  return std::max(dev, std::abs(pts[0].u - t.upper(free_check)));
}

// Least squares fit of the braking profile: zeros of g at the target
// speeds. Box constraints via a logistic reparametrization.
inline CalibrationResult calibrate_behavior(const KineticModel& base, const CalibrationTargets& tg,
                                            const CalibrationOptions& opt = {}) {
  const Diagrams& d = base.diagrams();
  const auto& prm = d.params();
  BehaviorFunctions b = base.behavior();
  BrakingProfile& pb = b.p_B;
  const int nk = static_cast<int>(pb.knots.size());

  struct Slot {
    std::vector<double>* vec;
    int i;
    double lb, ub;
  };
  std::vector<Slot> slots;
  const double band_lo = prm.rho_f - 0.05, band_hi = prm.rho_j + 0.05;
  for (int i = 0; i < nk; ++i) slots.push_back({&pb.lo, i, 0.0, 1.0});
  for (int i = 0; i < nk; ++i) {
    double r = pb.knots[i];
    if (r >= prm.rho_f && r <= prm.rho_j) slots.push_back({&pb.t, i, 0.0, 1.0});
  }
  for (int i = 0; i < nk; ++i) {
    double r = pb.knots[i];
    if (r > band_lo && r < band_hi) {
      slots.push_back({&pb.theta, i, 0.0, 1.0});
      slots.push_back({&pb.log_s, i, std::log(5e-4), std::log(0.2)});
    }
  }
  for (int i = 0; i < nk; ++i)
    if (pb.knots[i] < prm.rho_f || pb.knots[i] > prm.rho_j) pb.t[i] = 0.0;

  const int np = static_cast<int>(slots.size());
  auto to_z = [&](const Slot& s) {
    double x = ((*s.vec)[s.i] - s.lb) / (s.ub - s.lb);
    x = std::clamp(x, 1e-9, 1 - 1e-9);
    return std::log(x / (1 - x));
  };
  auto apply = [&](const Eigen::VectorXd& z) {
    for (int j = 0; j < np; ++j) {
      auto& s = slots[j];
      (*s.vec)[s.i] = s.lb + (s.ub - s.lb) / (1 + std::exp(-z[j]));
    }
  };
  Eigen::VectorXd z(np);
  for (int j = 0; j < np; ++j) z[j] = to_z(slots[j]);

  KineticModel m = base;
  auto residuals = [&](const Eigen::VectorXd& zz) {
    apply(zz);
    m.set_behavior(b);
    std::vector<double> r;
    for (double rho : tg.rho_band) {
      r.push_back(m.g(rho, tg.upper(rho)));
      r.push_back(m.g(rho, tg.lower(rho)));
      r.push_back(m.g(rho, tg.middle(rho)));
    }
    for (double rho : tg.rho_free) r.push_back(m.g(rho, tg.upper(rho)));
    for (double rho : tg.rho_jam) r.push_back(m.g(rho, tg.lower(rho)));
    if (opt.penalty > 0) {
      for (double rho : tg.rho_free) r.push_back(opt.penalty * interp(pb.knots, pb.t, rho));
      for (double rho : tg.rho_jam) r.push_back(opt.penalty * interp(pb.knots, pb.t, rho));
    }
    return Eigen::Map<Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())).eval();
  };

  Eigen::VectorXd r = residuals(z);
  double cost = 0.5 * r.squaredNorm();
  double mu = 1e-3;
  int it = 0;
  for (; it < opt.max_iter && cost > 1e-24; ++it) {
    Eigen::MatrixXd J(r.size(), np);
    for (int j = 0; j < np; ++j) {
      Eigen::VectorXd zp = z;
      zp[j] += opt.fd_step;
      J.col(j) = (residuals(zp) - r) / opt.fd_step;
    }
    Eigen::MatrixXd A = J.transpose() * J;
    Eigen::VectorXd grad = J.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-14) break;
    bool improved = false;
    for (int tries = 0; tries < 20; ++tries) {
      Eigen::MatrixXd Ad = A;
      for (int j = 0; j < np; ++j) Ad(j, j) += mu * (A(j, j) + 1e-12);
      Eigen::VectorXd step = Ad.ldlt().solve(-grad);
      Eigen::VectorXd zn = z + step;
      Eigen::VectorXd rn = residuals(zn);
      double cn = 0.5 * rn.squaredNorm();
      if (cn < cost) {
        bool small = cost - cn < 1e-12 * cost;
        z = zn;
        r = rn;
        cost = cn;
        mu = std::max(mu / 3, 1e-12);
        improved = !small;
        break;
      }
      mu *= 4;
    }
    if (!improved) break;
  }
  apply(z);
  m.set_behavior(b);

  CalibrationResult out;
  out.behavior = b;
  out.cost = cost;
  out.iterations = it;
  std::size_t n_fit = 3 * tg.rho_band.size() + tg.rho_free.size() + tg.rho_jam.size();
  out.max_residual = r.head(static_cast<Eigen::Index>(n_fit)).lpNorm<Eigen::Infinity>();
  out.max_deviation = calibration_deviation(m, tg);
  out.ok = out.max_deviation < opt.threshold;
  return out;
}

}  // namespace mpt
