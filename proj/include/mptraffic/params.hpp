#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"

namespace mpt {

struct EquilibriumCurveParams {
  double U0 = 0.85;
  double C_U = 0.45;
  double U0_star = 0.5;
  double T0 = 2.9;
  double offset1 = 0.05;
  double offset2 = 1.1;
};

struct ModelParams {
  double C = 0.3;
  double T = 5.0;
  double w = 1.0;
  double rho_f = 0.3;
  double rho_j = 0.5;
  double U_sync = 0.28;
  EquilibriumCurveParams curve;
  double H_A = 5.0;
  double H_B = 1.0;
  double T_del = 0.5;
};

// Throws on hard invariant violations. Returns soft diagnostics
// (compatibility of U_sync with the two branches).
inline std::vector<std::string> validate(const ModelParams& p) {
  auto fail = [](const std::string& m) { throw DomainError("ModelParams: " + m); };
  const auto& c = p.curve;
  if (!(c.U0 > c.U0_star && c.U0_star > 0)) fail("need U0 > U0_star > 0");
  if (!(c.C_U > 0 && c.T0 > 0)) fail("need C_U > 0 and T0 > 0");
  if (!(0 < p.rho_f && p.rho_f < p.rho_j && p.rho_j < 1)) fail("need 0 < rho_f < rho_j < 1");
  if (!(0 < p.U_sync && p.U_sync < p.w)) fail("need 0 < U_sync < w");
  if (!(p.H_A >= p.H_B && p.H_B >= 1)) fail("need H_A >= H_B >= 1");
  if (!(p.C > 0 && p.T > 0 && p.T_del > 0 && p.w > 0)) fail("need C, T, T_del, w > 0");

  std::vector<std::string> notes;
  auto u1 = [&](double r) { return c.U0 * std::tanh(c.C_U / (c.T0 * c.U0) * (1 / r - c.offset1)); };
  auto u2 = [&](double r) { return c.U0_star * std::tanh(c.C_U / (c.T0 * c.U0_star) * (1 / r - c.offset2)); };
  double worst_lo = 0, worst_hi = 0;
  const int n = 1000;
  for (int i = 1; i < n; ++i) {
    double r = p.rho_f + (p.rho_j - p.rho_f) * i / n;
    if (u1(r) <= u2(r)) fail("U1 must exceed U2 on (rho_f, rho_j)");
    worst_lo = std::max(worst_lo, u2(r) - p.U_sync);
    worst_hi = std::max(worst_hi, p.U_sync - u1(r));
  }
  if (worst_lo > 0)
    notes.push_back("U_sync below U2 on part of (rho_f, rho_j), max gap " + std::to_string(worst_lo));
  if (worst_hi > 0)
    notes.push_back("U_sync above U1 on part of (rho_f, rho_j), max gap " + std::to_string(worst_hi));
  return notes;
}

}  // namespace mpt
