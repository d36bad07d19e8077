#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <mptraffic/fundamental_diagrams.hpp>

using namespace mpt;

namespace {

long double u1_ref(long double r) { return 0.85L * std::tanh(0.45L / (2.9L * 0.85L) * (1 / r - 0.05L)); }
long double u2_ref(long double r) { return 0.5L * std::tanh(0.45L / (2.9L * 0.5L) * (1 / r - 1.1L)); }

}  // namespace

TEST(Curves, MatchExtendedPrecision) {
  Diagrams d;
  for (double r = 0.01; r < 1; r += 0.01) {
    EXPECT_NEAR(d.u1(r), static_cast<double>(u1_ref(r)), 1e-14) << r;
    EXPECT_NEAR(d.u2(r), static_cast<double>(u2_ref(r)), 1e-14) << r;
  }
}

TEST(Curves, ReferenceValues) {
  Diagrams d;
  // hand evaluated: 0.85 tanh(0.45/2.465 * 4.95), 0.5 tanh(0.45/1.45 * (2.5 - 1.1))
  EXPECT_NEAR(d.u1(0.2), 0.85 * std::tanh(0.45 / 2.465 * 4.95), 1e-15);
  EXPECT_NEAR(d.u2(0.4), 0.5 * std::tanh(0.45 / 1.45 * 1.4), 1e-15);
  EXPECT_NEAR(d.u1(0.2), 0.6103604, 1e-7);
  EXPECT_NEAR(d.u2(0.4), 0.2045304, 1e-7);
}

TEST(Curves, UpperAboveLowerInBand) {
  Diagrams d;
  for (double r = 0.3; r <= 0.5; r += 0.001) EXPECT_GT(d.u1(r), d.u2(r));
}

TEST(Curves, LowerBranchNegativeBeyondOffsetIsClamped) {
  Diagrams d;
  EXPECT_LT(d.u2(0.95), 0.0);
  EXPECT_EQ(d.clamp_speed(d.u2(0.95)), 0.0);
  EXPECT_EQ(d.clamp_speed(1.5), 1.0);
}

TEST(Curves, DomainErrors) {
  Diagrams d;
  EXPECT_THROW(d.u1(0), DomainError);
  EXPECT_THROW(d.u2(-0.1), DomainError);
  EXPECT_THROW(d.sound_coefficient(1.0), SingularityError);
  EXPECT_THROW(d.pressure(0.0), DomainError);
  EXPECT_THROW(d.closure_u(ClosureKind::SwitchingCurve, 1.0, 0.2), SingularityError);
  EXPECT_THROW(d.closure_u(ClosureKind::Kinetic, 0.3, 0.2), DomainError);
}

TEST(SwitchingCurve, LinearBetweenEndpoints) {
  Diagrams d;
  EXPECT_NEAR(d.switching_curve(0.3), d.u1(0.3), 1e-15);
  EXPECT_NEAR(d.switching_curve(0.5), d.u2(0.5), 1e-15);
  EXPECT_NEAR(d.switching_curve(0.4), 0.5 * (d.u1(0.3) + d.u2(0.5)), 1e-15);
  EXPECT_THROW(d.switching_curve(0.29), DomainError);
  EXPECT_THROW(d.switching_curve(0.51), DomainError);
}

TEST(SwitchingCurve, LiesBetweenBranches) {
  Diagrams d;
  for (double r = 0.301; r < 0.5; r += 0.001) {
    EXPECT_LT(d.switching_curve(r), d.u1(r));
    EXPECT_GT(d.switching_curve(r), d.u2(r));
  }
}

TEST(BigK, RoundTrip) {
  Diagrams d;
  for (double r = 0.3; r <= 0.5; r += 0.005) EXPECT_NEAR(d.big_k(d.u2(r)), r, 1e-12) << r;
}

TEST(BigK, SaturatesOutsideRange) {
  Diagrams d;
  EXPECT_EQ(d.big_k(0.9), 0.3);
  EXPECT_EQ(d.big_k(d.u2(0.3) + 1e-9), 0.3);
  EXPECT_EQ(d.big_k(0.0), 0.5);
  EXPECT_EQ(d.big_k(d.u2(0.5) - 1e-9), 0.5);
}

TEST(BigK, DenseTabulationOracle) {
  Diagrams d;
  const int n = 100000;
  std::vector<double> rs(n), us(n);
  for (int i = 0; i < n; ++i) {
    rs[i] = 0.3 + 0.2 * i / (n - 1);
    us[i] = d.u2(rs[i]);
  }
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(d.u2(0.5), d.u2(0.3));
  for (int t = 0; t < 200; ++t) {
    double u = uni(rng);
    // us is decreasing: first index with us <= u
    int lo = 0, hi = n - 1;
    while (hi - lo > 1) {
      int m = (lo + hi) / 2;
      (us[m] > u ? lo : hi) = m;
    }
    double s = (u - us[lo]) / (us[hi] - us[lo]);
    double ref = rs[lo] + s * (rs[hi] - rs[lo]);
    EXPECT_NEAR(d.big_k(u), ref, 1e-9);
  }
}

TEST(Pressure, DerivativeMatchesSoundCoefficient) {
  Diagrams d;
  for (double r = 0.05; r <= 0.95; r += 0.01) {
    double h = 1e-6 * r;
    double fd = (d.pressure(r + h) - d.pressure(r - h)) / (2 * h);
    double want = d.sound_coefficient(r) / (r * r);
    EXPECT_LT(std::abs(fd - want) / want, 1e-6) << r;
    EXPECT_NEAR(d.pressure_derivative(r), want, 1e-12 * want);
  }
}

TEST(Pressure, ZeroAtHalfAndInverse) {
  Diagrams d;
  EXPECT_NEAR(d.pressure(0.5), 0.0, 1e-16);
  for (double r = 0.01; r < 1; r += 0.01) EXPECT_NEAR(d.pressure_inverse(d.pressure(r)), r, 1e-13);
}

TEST(SoundCoefficient, Examples) {
  Diagrams d;
  EXPECT_NEAR(d.sound_coefficient(0.5), 0.3, 1e-15);
  EXPECT_NEAR(d.sound_coefficient(0.25), 0.1, 1e-15);
}

TEST(Closure, SwitchingCurveBranches) {
  Diagrams d;
  const double S = d.switching_curve(0.4);
  EXPECT_EQ(d.closure_u(ClosureKind::SwitchingCurve, 0.4, S + 1e-6), d.u1(0.4));
  EXPECT_EQ(d.closure_u(ClosureKind::SwitchingCurve, 0.4, S), d.u1(0.4));
  EXPECT_EQ(d.closure_u(ClosureKind::SwitchingCurve, 0.4, S - 1e-6), d.u2(0.4));
  EXPECT_EQ(d.closure_u(ClosureKind::SwitchingCurve, 0.2, 0.0), d.u1(0.2));
  EXPECT_EQ(d.closure_u(ClosureKind::SwitchingCurve, 0.6, 1.0), d.u2(0.6));
  EXPECT_EQ(d.closure_u(ClosureKind::SwitchingCurve, 0.95, 0.5), 0.0);
}

TEST(Closure, SpeedAdaptationBranches) {
  Diagrams d;
  EXPECT_EQ(d.closure_u(ClosureKind::SpeedAdaptation, 0.4, 0.29), d.u1(0.4));
  EXPECT_EQ(d.closure_u(ClosureKind::SpeedAdaptation, 0.4, 0.27), d.u2(0.4));
  EXPECT_EQ(d.closure_u(ClosureKind::SpeedAdaptation, 0.2, 0.0), d.u1(0.2));
  EXPECT_EQ(d.closure_u(ClosureKind::SpeedAdaptation, 0.6, 1.0), d.u2(0.6));
}

TEST(Closure, AtdReducedBranches) {
  Diagrams d;
  EXPECT_EQ(d.closure_u(ClosureKind::AtdReduced, 0.6, 0.3), 0.0);
  EXPECT_EQ(d.closure_u(ClosureKind::AtdReduced, 0.2, 0.1), d.u1(0.2));
  // K(0.25) < 0.4, so the continuum branch min(U1, u) applies
  EXPECT_LT(d.big_k(0.25), 0.4);
  EXPECT_EQ(d.closure_u(ClosureKind::AtdReduced, 0.4, 0.25), 0.25);
  EXPECT_EQ(d.closure_u(ClosureKind::AtdReduced, 0.4, 0.9), d.u1(0.4));
  // below U2(0.4): K(u) > 0.4, free branch
  EXPECT_EQ(d.closure_u(ClosureKind::AtdReduced, 0.4, 0.1), d.u1(0.4));
}

TEST(Closure, SourceSign) {
  Diagrams d;
  for (auto k : {ClosureKind::SwitchingCurve, ClosureKind::SpeedAdaptation, ClosureKind::AtdReduced}) {
    EXPECT_LT(d.relaxation_source(k, 0.2, 0.9), 0.0);
    EXPECT_GT(d.relaxation_source(k, 0.2, 0.1), 0.0);
    EXPECT_NEAR(d.relaxation_source(k, 0.2, d.u1(0.2)), 0.0, 1e-15);
  }
}

TEST(Equilibria, SwitchingCurveAtPointFour) {
  Diagrams d;
  auto pts = d.equilibrium_set(ClosureKind::SwitchingCurve, 0.4);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_NEAR(pts[0].u, d.u2(0.4), 1e-9);
  EXPECT_EQ(pts[0].stability, Stability::stable);
  EXPECT_NEAR(pts[1].u, d.switching_curve(0.4), 1e-9);
  EXPECT_EQ(pts[1].stability, Stability::unstable);
  EXPECT_TRUE(pts[1].jump);
  EXPECT_NEAR(pts[2].u, d.u1(0.4), 1e-9);
  EXPECT_EQ(pts[2].stability, Stability::stable);
}

TEST(Equilibria, SingleRootOutsideBand) {
  Diagrams d;
  for (auto k : {ClosureKind::SwitchingCurve, ClosureKind::SpeedAdaptation, ClosureKind::AtdReduced}) {
    auto lo = d.equilibrium_set(k, 0.1);
    ASSERT_EQ(lo.size(), 1u);
    EXPECT_NEAR(lo[0].u, d.u1(0.1), 1e-9);
  }
  for (auto k : {ClosureKind::SwitchingCurve, ClosureKind::SpeedAdaptation}) {
    auto hi = d.equilibrium_set(k, 0.7);
    ASSERT_EQ(hi.size(), 1u);
    EXPECT_NEAR(hi[0].u, d.u2(0.7), 1e-9);
  }
  auto jam = d.equilibrium_set(ClosureKind::AtdReduced, 0.7);
  ASSERT_EQ(count_stable(jam), 1);
  EXPECT_NEAR(jam[0].u, 0.0, 1e-12);
}

TEST(Equilibria, AtdContinuumEndpoints) {
  Diagrams d;
  auto pts = d.equilibrium_set(ClosureKind::AtdReduced, 0.4);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0].stability, Stability::continuum);
  EXPECT_NEAR(pts[0].u, d.u2(0.4), 1e-8);
  EXPECT_NEAR(pts[1].u, d.u1(0.4), 1e-8);
}

TEST(Equilibria, ResidualInvariantOffJumps) {
  Diagrams d;
  for (auto k : {ClosureKind::SwitchingCurve, ClosureKind::SpeedAdaptation, ClosureKind::AtdReduced})
    for (double r = 0.01; r < 0.99; r += 0.0137)
      for (auto& p : d.equilibrium_set(k, r))
        if (!p.jump && p.stability != Stability::continuum) {
          EXPECT_LT(std::abs(d.closure_u(k, r, p.u) - p.u), 1e-8) << r;
        }
}

TEST(Equilibria, ScAndSaAgreeOutsideBand) {
  Diagrams d;
  for (double r : {0.05, 0.15, 0.25, 0.55, 0.75, 0.95})
    for (double u = 0; u <= 1; u += 0.05)
      EXPECT_EQ(d.closure_u(ClosureKind::SwitchingCurve, r, u), d.closure_u(ClosureKind::SpeedAdaptation, r, u));
}

TEST(ClosureKindNames, RoundTrip) {
  for (auto k : {ClosureKind::SwitchingCurve, ClosureKind::SpeedAdaptation, ClosureKind::AtdReduced, ClosureKind::Kinetic})
    EXPECT_EQ(parse_closure_kind(to_string(k)), k);
  EXPECT_THROW(parse_closure_kind("lwr"), ConfigError);
}

TEST(Params, Validation) {
  ModelParams p;
  auto notes = validate(p);
  ASSERT_EQ(notes.size(), 1u);  // U2(rho_f) exceeds U_sync = 0.28
  p.rho_f = 0.6;
  EXPECT_THROW(validate(p), DomainError);
  p = {};
  p.H_A = 0.5;
  EXPECT_THROW(validate(p), DomainError);
  p = {};
  p.U_sync = 0.293;
  EXPECT_EQ(validate(p).size(), 2u);
}

TEST(ScanRoots, CubicStability) {
  auto g = [](double u) { return -(u - 0.2) * (u - 0.5) * (u - 0.8); };
  auto pts = scan_roots(g, 0, 1);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_NEAR(pts[0].u, 0.2, 1e-9);
  EXPECT_NEAR(pts[1].u, 0.5, 1e-9);
  EXPECT_NEAR(pts[2].u, 0.8, 1e-9);
  EXPECT_EQ(pts[0].stability, Stability::stable);
  EXPECT_EQ(pts[1].stability, Stability::unstable);
  EXPECT_EQ(pts[2].stability, Stability::stable);
}

TEST(ScanRoots, JumpAndBoundaryZero) {
  auto step = [](double u) { return u < 0.3 ? 0.5 - u : 0.1 - u; };  // jump from 0.2 to -0.2 at 0.3
  auto pts = scan_roots(step, 0, 1);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_TRUE(pts[0].jump);
  EXPECT_NEAR(pts[0].u, 0.3, 1e-9);
  auto edge = [](double u) { return -u; };
  auto z = scan_roots(edge, 0, 1);
  ASSERT_EQ(z.size(), 1u);
  EXPECT_EQ(z[0].u, 0.0);
  EXPECT_EQ(z[0].stability, Stability::stable);
}
