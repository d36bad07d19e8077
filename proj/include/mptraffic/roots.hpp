#pragma once

#include <cmath>
#include <vector>

namespace mpt {

enum class Stability { stable, unstable, continuum };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    default: return "continuum";
  }
}

struct EquilibriumPoint {
  double u = 0;
  Stability stability = Stability::stable;
  bool jump = false;  // root sits on a discontinuity of the closure, not a zero of it
};

struct ScanOptions {
  int grid = 2000;
  double tol = 1e-10;
  double zero = 1e-12;  // |g| at or below this is treated as an exact zero
  double jump = 1e-8;
};

template <class F>
double bisect(F&& g, double a, double b, double tol) {
  double ga = g(a);
  while (b - a > tol) {
    double m = 0.5 * (a + b);
    double gm = g(m);
    if (gm == 0) return m;
    if ((gm > 0) == (ga > 0)) {
      a = m;
      ga = gm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

// All zeros of g on [lo, hi] by sign scan + bisection. Runs of exact zeros
// are reported as a continuum endpoint pair.
template <class F>
std::vector<EquilibriumPoint> scan_roots(F&& g, double lo, double hi, const ScanOptions& opt = {}) {
  const int m = opt.grid;
  std::vector<double> x(m), y(m);
  for (int i = 0; i < m; ++i) {
    x[i] = lo + (hi - lo) * i / (m - 1);
    y[i] = g(x[i]);
  }
  auto is_zero = [&](double v) { return std::abs(v) <= opt.zero; };
  auto sgn = [](double v) { return v > 0 ? 1 : -1; };

  std::vector<EquilibriumPoint> out;
  int i = 0;
  while (i < m) {
    if (is_zero(y[i])) {
      int j = i;
      while (j + 1 < m && is_zero(y[j + 1])) ++j;
      int before = i > 0 ? sgn(y[i - 1]) : 0;
      int after = j + 1 < m ? sgn(y[j + 1]) : 0;
      if (j > i) {
        auto edge = [&](double a, double b, bool zero_at_b) {
          while (b - a > opt.tol) {
            double c = 0.5 * (a + b);
            if (is_zero(g(c)) == zero_at_b) b = c; else a = c;
          }
          return 0.5 * (a + b);
        };
        double ua = i > 0 ? edge(x[i - 1], x[i], true) : x[i];
        double ub = j + 1 < m ? edge(x[j], x[j + 1], false) : x[j];
        out.push_back({ua, Stability::continuum, false});
        out.push_back({ub, Stability::continuum, false});
      } else {
        // isolated exact zero on a grid node; boundary nodes only see one side
        bool stable = (before > 0 || i == 0) && (after < 0 || j == m - 1) && !(i == 0 && j == m - 1);
        out.push_back({x[i], stable ? Stability::stable : Stability::unstable, false});
      }
      i = j + 1;
      continue;
    }
    if (i + 1 < m && !is_zero(y[i + 1]) && sgn(y[i]) != sgn(y[i + 1])) {
      double r = bisect(g, x[i], x[i + 1], opt.tol);
      bool jump = std::abs(g(r)) > opt.jump;
      out.push_back({r, y[i] > 0 ? Stability::stable : Stability::unstable, jump});
    }
    ++i;
  }
  return out;
}

inline int count_stable(const std::vector<EquilibriumPoint>& pts) {
  int n = 0;
  for (auto& p : pts) n += p.stability == Stability::stable;
  return n;
}

inline bool has_continuum(const std::vector<EquilibriumPoint>& pts) {
  for (auto& p : pts)
    if (p.stability == Stability::continuum) return true;
  return false;
}

}  // namespace mpt
