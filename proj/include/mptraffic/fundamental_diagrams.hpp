#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "params.hpp"
#include "roots.hpp"

namespace mpt {

enum class ClosureKind { SwitchingCurve, SpeedAdaptation, AtdReduced, Kinetic };

inline const char* to_string(ClosureKind k) {
  switch (k) {
    case ClosureKind::SwitchingCurve: return "sc";
    case ClosureKind::SpeedAdaptation: return "sa";
    case ClosureKind::AtdReduced: return "atd";
    default: return "kinetic";
  }
}

inline ClosureKind parse_closure_kind(const std::string& s) {
  if (s == "sc") return ClosureKind::SwitchingCurve;
  if (s == "sa") return ClosureKind::SpeedAdaptation;
  if (s == "atd") return ClosureKind::AtdReduced;
  if (s == "kinetic") return ClosureKind::Kinetic;
  throw ConfigError("unknown model '" + s + "' (expected sc|sa|atd|kinetic)");
}

// Equilibrium curves, anticipation coefficient and the three piecewise
// closures. The kinetic closure lives in kinetic.hpp.
class Diagrams {
 public:
  explicit Diagrams(ModelParams p = {}) : p_(p) {}

  const ModelParams& params() const { return p_; }

  double u1(double rho) const {
    if (rho <= 0) throw DomainError("u1: rho must be positive");
    const auto& c = p_.curve;
    return c.U0 * std::tanh(c.C_U / (c.T0 * c.U0) * (1 / rho - c.offset1));
  }

  // unclamped; negative for rho > 1/offset2
  double u2(double rho) const {
    if (rho <= 0) throw DomainError("u2: rho must be positive");
    const auto& c = p_.curve;
    return c.U0_star * std::tanh(c.C_U / (c.T0 * c.U0_star) * (1 / rho - c.offset2));
  }

  double switching_curve(double rho) const {
    if (rho < p_.rho_f || rho > p_.rho_j) throw DomainError("switching_curve: rho outside [rho_f, rho_j]");
    double a = u1(p_.rho_f), b = u2(p_.rho_j);
    return a + (b - a) * (rho - p_.rho_f) / (p_.rho_j - p_.rho_f);
  }

  double sound_coefficient(double rho) const {
    check_open(rho, "sound_coefficient");
    return p_.C * rho / (1 - rho);
  }

  // rho^2 p'(rho) = c(rho), p(1/2) = 0
  double pressure(double rho) const {
    check_open(rho, "pressure");
    return p_.C * std::log(rho / (1 - rho));
  }
  double pressure_derivative(double rho) const { return p_.C / (rho * (1 - rho)); }
  double pressure_inverse(double z) const { return 1 / (1 + std::exp(-z / p_.C)); }

  // K(u) = U2^{-1}(u) between U2(rho_j) and U2(rho_f)
  double big_k(double u) const {
    double top = u2(p_.rho_f), bottom = u2(p_.rho_j);
    if (u >= top) return p_.rho_f;
    if (u <= bottom) return p_.rho_j;
    const auto& c = p_.curve;
    double a = c.C_U / (c.T0 * c.U0_star);
    return 1 / (std::atanh(u / c.U0_star) / a + c.offset2);
  }

  double clamp_speed(double v) const { return std::clamp(v, 0.0, p_.w); }

  double closure_u(ClosureKind kind, double rho, double u) const {
    check_open(rho, "closure_u");
    const double rf = p_.rho_f, rj = p_.rho_j;
    switch (kind) {
      case ClosureKind::SwitchingCurve:
        if (rho < rf) return clamp_speed(u1(rho));
        if (rho > rj) return clamp_speed(u2(rho));
        return clamp_speed(u >= switching_curve(rho) ? u1(rho) : u2(rho));
      case ClosureKind::SpeedAdaptation:
        if (rho < rf) return clamp_speed(u1(rho));
        if (rho > rj) return clamp_speed(u2(rho));
        return clamp_speed(u >= p_.U_sync ? u1(rho) : u2(rho));
      case ClosureKind::AtdReduced: {
        if (rho > rj) return 0.0;
        double U = clamp_speed(u1(rho));
        if (rho < big_k(u)) return U;
        return u > U ? U : u;
      }
      default:
        throw DomainError("closure_u: kinetic closure needs a KineticModel");
    }
  }

  // per unit mass; the solver multiplies by rho where needed
  double relaxation_source(ClosureKind kind, double rho, double u) const {
    return (closure_u(kind, rho, u) - u) / p_.T;
  }

  std::vector<EquilibriumPoint> equilibrium_set(ClosureKind kind, double rho, const ScanOptions& opt = {}) const {
    return scan_roots([&](double u) { return closure_u(kind, rho, u) - u; }, 0.0, p_.w, opt);
  }

 private:
  static void check_open(double rho, const char* who) {
    if (rho <= 0) throw DomainError(std::string(who) + ": rho must be positive");
    if (rho >= 1) throw SingularityError(std::string(who) + ": rho must be below 1");
  }

  ModelParams p_;
};

}  // namespace mpt
