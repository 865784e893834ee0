#include "pbv/experiments.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pbv;

namespace {

const Potentials unit = Potentials::standard(1, 1);

MArgs args(double tau, double du, double dz, double eta, double zeta) {
  MArgs a;
  a.q = State::scalar(0.0, 0.0);
  a.tau = tau;
  a.dq = State::scalar(du, dz);
  a.xi = State::scalar(eta, zeta);
  return a;
}

// min over a log grid in tau, refined around the best point.
double inf_tau_by_grid(const MArgs& a, double eps, double alpha) {
  double lo = -120, hi = 10, best = 0;
  for (int level = 0; level < 6; ++level) {
    double fb = 1e300;
    for (int i = 0; i <= 400; ++i) {
      MArgs b = a;
      const double lt = lo + (hi - lo) * i / 400;
      b.tau = std::exp(lt);
      const double v = eval_Meps(unit, b, eps, alpha);
      if (v < fb) fb = v, best = lt;
    }
    const double w = (hi - lo) / 100;
    lo = best - w;
    hi = best + w;
  }
  MArgs b = a;
  b.tau = std::exp(best);
  return eval_Meps(unit, b, eps, alpha);
}

}  // namespace

TEST(Meps, TermByTermValues) {
  for (double tau : {0.1, 1.0, 7.0})
    for (double alpha : {0.5, 1.0, 2.0}) EXPECT_EQ(eval_Meps(unit, args(tau, 0, 0, 0, 0.4), 0.01, alpha), 0.0);
  EXPECT_DOUBLE_EQ(eval_Meps(unit, args(1, 1, 0, 1, 0), 1.0, 1.0), 1.0);
  EXPECT_NEAR(eval_Meps(unit, args(1, 1, 0, 1, 0), 0.1, 1.0), 0.05 + 5.0, 1e-12);
  // R0 + (eps/tau) z'^2/2 + (tau/eps) (|zeta|-1)^2/2 at eps = 0.2, tau = 0.5.
  EXPECT_NEAR(eval_Meps(unit, args(0.5, 0, 2, 0, 3), 0.2, 3.0), 2.0 + 0.4 * 2.0 + 2.5 * 2.0, 1e-12);
  EXPECT_THROW(eval_Meps(unit, args(0, 1, 0, 1, 0), 0.1, 1.0), ConfigError);
}

TEST(M0, CaseValues) {
  auto ri = eval_M0_detailed(unit, args(1, 3, 0.7, 0, 0.5), 2.0);
  EXPECT_FALSE(ri.value.infinite);
  EXPECT_DOUBLE_EQ(ri.value.value, 0.7);
  EXPECT_EQ(ri.branch, M0Branch::RateIndependent);
  EXPECT_TRUE(eval_M0(unit, args(1, 0, 0.7, 0.2, 0.5), 2.0).infinite);
  EXPECT_TRUE(eval_M0(unit, args(1, 0, 0.7, 0, 1.5), 0.5).infinite);
  const auto inf = eval_M0(unit, args(0, 1, 1, 1, 0), 2.0);
  EXPECT_TRUE(inf.infinite);
  EXPECT_FALSE(inf.reason.empty());
  EXPECT_NEAR(eval_M0(unit, args(0, 1, 0, 1, 0), 1.0).value, 2 * std::sqrt(0.5) * std::sqrt(0.5), 1e-15);
}

TEST(M0, MatchesInfOverTauOfMepsForSmallEps) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> U(-2, 2);
  int finite = 0;
  for (double alpha : {0.5, 1.0, 2.0})
    for (int s = 0; s < 60; ++s) {
      // Mix of generic points and points on each zero-set.
      const int kind = s % 4;
      double du = U(rng), dz = U(rng), eta = U(rng), zeta = U(rng);
      if (kind == 1) dz = 0, zeta = std::clamp(zeta, -1.0, 1.0);
      if (kind == 2) eta = 0;
      if (kind == 3) du = 0, zeta = std::clamp(zeta, -1.0, 1.0);
      const MArgs a = args(0, du, dz, eta, zeta);
      const auto m0 = eval_M0(unit, a, alpha);
      const double e = alpha < 1 ? 1e-20 : 1e-10;  // alpha = 1/2 converges like eps^(1/4)
      const double grid = inf_tau_by_grid(a, e, alpha);
      if (m0.infinite) {
        EXPECT_GT(grid, 1e2) << alpha << " kind " << kind;
      } else {
        ++finite;
        EXPECT_NEAR(grid, m0.value, 1e-3 * (1 + m0.value)) << alpha << " kind " << kind;
      }
    }
  EXPECT_GT(finite, 60);
}

TEST(M0, FixedTauLimitOfMeps) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    const MArgs a = args(0.8, 1.3, -0.6, 0.0, -0.2);
    EXPECT_NEAR(eval_Meps(unit, a, 1e-12, alpha), eval_M0(unit, a, alpha).value, 1e-5);
  }
}

TEST(M0, BalancedFormulasAgreeOnOverlap) {
  // z' = 0 and zeta in K: V_z = W_z^* = 0, every alpha gives 2 sqrt(V_u V_u^*).
  const MArgs a = args(0, 1.2, 0, -0.7, 0.3);
  const double expect = 2 * std::sqrt(0.5 * 1.44) * std::sqrt(0.5 * 0.49);
  for (double alpha : {0.5, 1.0, 2.0}) EXPECT_NEAR(eval_M0(unit, a, alpha).value, expect, 1e-14) << alpha;
}

TEST(M0, SpecularUnderSwapOfRoles) {
  // Reduced parts with (V_u, V_u^*, V_z, W_z^*) = (a, b, c, d) at alpha = 2
  // equal those with (c, d, a, b) at alpha = 1/2.
  auto point = [](double a, double b, double c, double d) {
    return args(0, std::sqrt(2 * a), std::sqrt(2 * c), std::sqrt(2 * b), 1 + std::sqrt(2 * d));
  };
  auto reduced = [](const MArgs& p, double alpha) {
    const auto v = eval_M0(unit, p, alpha);
    return v.infinite ? std::numeric_limits<double>::infinity() : v.value - std::abs(p.dq.z[0]);
  };
  const double vals[][4] = {{0.3, 0.7, 0, 0.2}, {0.3, 0, 0.5, 0.9}, {0.4, 0.6, 0.1, 0.8}, {0, 0.3, 0.2, 0.4}};
  for (const auto& v : vals) {
    const double a = reduced(point(v[0], v[1], v[2], v[3]), 2.0);
    const double b = reduced(point(v[2], v[3], v[0], v[1]), 0.5);
    if (std::isinf(a)) EXPECT_TRUE(std::isinf(b));
    else EXPECT_NEAR(a, b, 1e-14);
  }
}

TEST(M0, FenchelBoundAndHomogeneityOnRandomSamples) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> U(-2, 2), P(0.01, 3);
  std::bernoulli_distribution coin(0.5);
  for (int s = 0; s < 10000; ++s) {
    const double alpha = s % 3 == 0 ? 0.5 : s % 3 == 1 ? 1.0 : 2.0;
    MArgs a = args(coin(rng) ? 0.0 : P(rng), U(rng), U(rng), U(rng), U(rng));
    if (s % 5 == 0) a.xi.z[0] = std::clamp(a.xi.z[0], -1.0, 1.0), a.xi.u[0] = 0;
    if (s % 7 == 0) a.dq.z[0] = 0;
    const auto gap = duality_gap(unit, a, alpha);
    if (!gap.infinite) { EXPECT_GE(gap.value, -1e-10); }
    if (a.tau > 0) { EXPECT_GE(eval_Meps(unit, a, P(rng), alpha), dot(a.dq, a.xi) - 1e-10); }
    const double lam = P(rng);
    MArgs b = a;
    b.tau *= lam;
    b.dq = lam * a.dq;
    const auto m = eval_M0(unit, a, alpha), ml = eval_M0(unit, b, alpha);
    ASSERT_EQ(m.infinite, ml.infinite);
    if (!m.infinite) { EXPECT_NEAR(ml.value, lam * m.value, 1e-12 * (1 + ml.value)); }
  }
}

TEST(DualityGap, ContactAndStrictInequality) {
  const auto g0 = duality_gap(unit, args(0, 0, 0, 0, 0), 2.0);
  EXPECT_EQ(g0.value, 0.0);
  EXPECT_NEAR(duality_gap(unit, args(0, 1, 0, 1, 0), 1.0).value, 0.0, 1e-15);
  EXPECT_NEAR(duality_gap(unit, args(1, 0, 1, 0, 0.5), 2.0).value, 0.5, 1e-15);
  EXPECT_TRUE(duality_gap(unit, args(0, 1, 1, 1, 0), 2.0).infinite);
}

TEST(RecoveryTau, FormulaAndMinimality) {
  const MArgs a = args(0, 1 / std::sqrt(2.0), 0, std::sqrt(2.0), 0);
  EXPECT_NEAR(recovery_tau(unit, a, 0.01, 1.0), 0.005, 1e-15);
  for (double alpha : {0.5, 1.0, 2.0})
    for (const MArgs& b : {a, args(0, 0.4, 1.1, 0.3, 1.7), args(0, 0.9, 0, -1.1, 0.2)}) {
      const double e = 1e-3;
      MArgs r = b;
      r.tau = recovery_tau(unit, b, e, alpha);
      EXPECT_NEAR(eval_Meps(unit, r, e, alpha), inf_tau_by_grid(b, e, alpha), 1e-9 * (1 + eval_Meps(unit, r, e, alpha)));
      EXPECT_NEAR(eval_Meps(unit, r, e, alpha), eval_Meps_inf(unit, b, e, alpha), 1e-9 * (1 + eval_Meps(unit, r, e, alpha)));
    }
  EXPECT_THROW(recovery_tau(unit, args(0, 1, 1, 0, 0.5), 0.01, 2.0), NumericalError);
}

TEST(Gamma, FixedTauConvergesAtRateMinOneAlpha) {
  const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
  for (double alpha : {0.5, 1.0, 2.0}) {
    const auto rep = gamma_pointwise_check(unit, args(1, 0.8, 0.6, 0, 0.3), alpha, eps);
    EXPECT_TRUE(rep.passed);
    EXPECT_TRUE(rep.monotone);
    EXPECT_NEAR(rep.rate, std::min(1.0, alpha), 0.05) << alpha;
  }
}

TEST(Gamma, BatteryPassesAndDivergenceExponent) {
  GammaConfig g;
  const auto r = run_gamma_battery(unit, g);
  EXPECT_EQ(r.results.size(), 12u);
  EXPECT_TRUE(r.all_passed);
  for (const auto& [p, rep] : r.results) {
    EXPECT_TRUE(rep.passed) << p.name;
    if (p.name == "a2_infinite") { EXPECT_NEAR(rep.divergence_exponent, 0.5, 0.1); }
    if (p.name == "a1_balanced") { EXPECT_LT(rep.error.back(), 1e-6); }
  }
  EXPECT_THROW(gamma_pointwise_check(unit, args(1, 0, 0, 0, 0), 1.0, {1e-3, 1e-2}), ConfigError);
}

TEST(Gamma, DivergenceExponentAlphaHalfAsymptotic) {
  // inf_tau M_eps ~ eps^(-(1-alpha)/2) once eps^(1/2) terms are negligible.
  const auto rep = gamma_pointwise_check(unit, args(0, 0.7, 0.4, 0.9, 1.3), 0.5, {1e-6, 1e-8, 1e-10, 1e-12});
  EXPECT_TRUE(rep.passed);
  EXPECT_NEAR(rep.divergence_exponent, 0.25, 0.02);
}

TEST(ParamResidual, ConstantCurveIsZero) {
  const QuadraticExample m;
  ParameterizedCurve c;
  for (int j = 0; j <= 50; ++j) {
    c.s.push_back(j / 50.0);
    c.t.push_back(0.0);
    c.q.push_back(State::scalar(-1.0, -1.0));  // equilibrium, zeta = 1 on the boundary of K
  }
  fill_derivatives(c);
  ParamResidualOptions o;
  o.tol_t = 1e-12;
  const auto r = parameterized_energy_residual(c, m, unit, 2.0, o);
  EXPECT_EQ(r.residual, 0.0);
  EXPECT_TRUE(r.violations.empty());
}

TEST(ParamResidual, UnstableSlideIsFlagged) {
  // t advances while zeta = u - 2z = 3 lies outside K.
  const QuadraticExample m;
  ParameterizedCurve c;
  for (int j = 0; j <= 20; ++j) {
    c.s.push_back(j / 20.0);
    c.t.push_back(j / 20.0);
    c.q.push_back(State::scalar(3.0 + j / 20.0, 0.0));
  }
  fill_derivatives(c);
  const auto r = parameterized_energy_residual(c, m, unit, 2.0);
  EXPECT_EQ(r.violations.size(), c.size());
  ParamResidualOptions o;
  o.relax_eps = 1e-2;
  EXPECT_EQ(parameterized_energy_residual(c, m, unit, 2.0, o).relaxed, c.size());
}

TEST(ParamResidual, DecreasesAlongEpsSequence) {
  const auto model = std::make_shared<QuadraticExample>();
  std::vector<double> res;
  for (double eps : {1e-2, 3e-3, 1e-3}) {
    SolverConfig c;
    c.t_end = 1.0;
    const auto tr = integrate(*model, unit, RateParams(eps, 2.0), c, 0.0, State::scalar(2.0, -1.5));
    const auto curve = arclength_reparam(tr);
    // Finite-eps curves sit O(eps) off the contact set; zero tests scale with eps.
    ParamResidualOptions o;
    o.relax_eps = eps;
    o.m0.tol0 = eps;
    res.push_back(parameterized_energy_residual(curve, *model, unit, 2.0, o).relative);
  }
  EXPECT_LT(res[1], res[0]);
  EXPECT_LT(res[2], res[1]);
  EXPECT_LT(res[2], 1e-2);
}
