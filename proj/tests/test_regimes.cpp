#include "pbv/experiments.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pbv;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

const Potentials unit = Potentials::standard(1, 1);
const State q0 = State::scalar(0, 0);

PointClass classify(double alpha, double tp, double du, double dz, double eta, double zeta) {
  ClassifyOptions o;
  return classify_point(unit, q0, tp, State::scalar(du, dz), State::scalar(eta, zeta), alpha, o);
}

struct PresetRun {
  RunConfig cfg;
  ParameterizedCurve curve;
  ClassificationResult cls;
};

PresetRun run_preset(const std::string& name) {
  PresetRun r;
  r.cfg = load_config(std::string(PBV_PRESET_DIR) + "/" + name + ".json");
  r.curve = build_curve(r.cfg.reparam, simulate(r.cfg).traj);
  r.cls = classify(r.cfg, r.curve);
  return r;
}

std::vector<std::string> labels(const ClassificationResult& c) {
  std::vector<std::string> out;
  for (auto l : label_sequence(c.cc.segments)) out.push_back(to_string(l));
  return out;
}

}  // namespace

TEST(ThetaU, ClosedFormCases) {
  const auto pot2 = Potentials::standard(2, 1);
  const State q(Vec::Zero(2), Vec::Zero(1));
  auto e = recover_theta_u(pot2, q, v2(1, 0), v2(0, 0));
  EXPECT_EQ(e.theta, 0.0);
  EXPECT_EQ(e.residual, 0.0);
  e = recover_theta_u(pot2, q, v2(1, 0), v2(2, 0));
  EXPECT_NEAR(e.theta, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(e.residual, 0.0, 1e-15);
  e = recover_theta_u(pot2, q, v2(1, 0), v2(0, 1));
  EXPECT_GT(e.residual, 0.2);
  e = recover_theta_u(pot2, q, v2(0, 0), v2(0, 0));
  EXPECT_EQ(e.theta, 0.0);
  EXPECT_TRUE(e.free);
}

TEST(ThetaU, SyntheticRecoveryAndGridOracle) {
  std::mt19937 rng(31);
  std::normal_distribution<double> N(0, 1);
  std::uniform_real_distribution<double> U(0.02, 0.98);
  for (int s = 0; s < 200; ++s) {
    Mat B(2, 2);
    B << N(rng), N(rng), N(rng), N(rng);
    const Mat V = B * B.transpose() + 0.5 * Mat::Identity(2, 2);
    Potentials pot = Potentials::standard(2, 1);
    pot.vu = QuadraticForm::constant(V);
    const State q(Vec::Zero(2), Vec::Zero(1));
    const Vec du = v2(N(rng), N(rng));
    const double th = U(rng);
    const Vec eta = th / (1 - th) * V * du;
    EXPECT_NEAR(recover_theta_u(pot, q, du, eta).theta, th, 1e-8);
    // Perturbed force: compare with the least-squares minimum over a grid.
    const Vec eta2 = eta + 0.3 * v2(N(rng), N(rng));
    const auto est = recover_theta_u(pot, q, du, eta2);
    double best = 1e300, arg = 0;
    for (int i = 0; i <= 20000; ++i) {
      const double t = i / 20000.0;
      const double r = (t * V * du - (1 - t) * eta2).norm();
      if (r < best) best = r, arg = t;
    }
    EXPECT_NEAR(est.theta, arg, 1e-4);
  }
}

TEST(ThetaZ, CasesAndBisectionOracle) {
  EXPECT_EQ(recover_theta_z(unit, q0, v1(0.7), v1(1.0)).theta, 0.0);
  EXPECT_EQ(recover_theta_z(unit, q0, v1(-0.7), v1(-1.0)).residual, 0.0);
  EXPECT_NEAR(recover_theta_z(unit, q0, v1(2), v1(2)).theta, 1.0 / 3.0, 1e-5);
  EXPECT_EQ(recover_theta_z(unit, q0, v1(0), v1(0)).theta, 0.0);
  EXPECT_EQ(recover_theta_z(unit, q0, v1(0), v1(0.4)).theta, 0.0);
  // Smallest theta with (1-theta) zeta - theta z' in (1-theta) Sign(z'), by scan.
  for (double dz : {0.5, 1.5, -2.0})
    for (double zeta : {1.5, 3.0, -2.5, -4.0}) {
      const auto est = recover_theta_z(unit, q0, v1(dz), v1(zeta));
      double first = -1;
      for (int i = 0; i <= 100000 && first < 0; ++i) {
        const double t = i / 100000.0;
        const double target = (1 - t) * zeta - t * dz;
        const double sgn = dz > 0 ? 1.0 : -1.0;
        if (std::abs(target - (1 - t) * sgn) <= 1e-4) first = t;
      }
      if (first < 0) {
        EXPECT_GT(est.residual, 0.0) << dz << ' ' << zeta;
      } else {
        EXPECT_NEAR(est.theta, first, 1e-3) << dz << ' ' << zeta;
      }
    }
}

TEST(AlphaConstraints, Examples) {
  for (double alpha : {0.5, 1.0, 2.0}) EXPECT_TRUE(check_alpha_constraints({0, 0, 0, 0}, 1.0, alpha, 1e-9));
  EXPECT_FALSE(check_alpha_constraints({0.5, 0.5, 0, 0}, 0.0, 2.0, 1e-9));
  EXPECT_TRUE(check_alpha_constraints({0.5, 0.5, 0, 0}, 0.0, 1.0, 1e-9));
  EXPECT_TRUE(check_alpha_constraints({0.5, 1.0, 0, 0}, 0.0, 2.0, 1e-9));
  EXPECT_FALSE(check_alpha_constraints({0.0, 0.5, 0, 0}, 0.0, 0.5, 1e-9));
  EXPECT_FALSE(check_alpha_constraints({0.3, 0, 0, 0}, 1.0, 2.0, 1e-9));
}

TEST(ClassifyPoint, Examples) {
  auto p = classify(2.0, 1.0, 0.3, 0.5, 0.0, 1.0);
  EXPECT_EQ(p.label, RegimeLabel::EuRz);
  EXPECT_EQ(p.theta.theta_u, 0.0);
  EXPECT_EQ(p.theta.theta_z, 0.0);

  p = classify(2.0, 0.0, 1.0, 0.0, 1.0, 0.3);
  EXPECT_EQ(p.label, RegimeLabel::VuBz);
  EXPECT_NEAR(p.theta.theta_u, 0.5, 1e-12);

  p = classify(2.0, 0.0, 1.0, 1.0, 1.0, 2.0);
  EXPECT_EQ(p.label, RegimeLabel::Unclassified);
  EXPECT_TRUE(p.gap.infinite);

  p = classify(2.0, 0.0, 0.0, 1.0, 0.0, 2.0);
  EXPECT_EQ(p.label, RegimeLabel::EuVz);
  p = classify(1.0, 0.0, 1.0, 2.0, 1.0, 3.0);  // theta_u = theta_z = 1/2
  EXPECT_EQ(p.label, RegimeLabel::VuVz);
  p = classify(0.5, 0.0, 1.0, 0.0, 1.0, 0.3);
  EXPECT_EQ(p.label, RegimeLabel::VuRz);
  p = classify(0.5, 0.0, 0.0, 1.0, 0.0, 2.0);
  EXPECT_EQ(p.label, RegimeLabel::BuVz);
  p = classify(2.0, 1.0, 0.0, 0.0, 0.0, 0.3);
  EXPECT_EQ(p.label, RegimeLabel::Stationary);
}

TEST(ClassifyPoint, ConstructedContactPoints) {
  // Points built on the contact set of each regime: u' and eta related by theta_u,
  // z' and zeta by theta_z with zeta shifted by the subgradient of |z'|.
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> th(0.1, 0.9), mag(0.2, 2.0), in(-0.9, 0.9);
  std::bernoulli_distribution coin(0.5);
  auto sgn = [](double x) { return x > 0 ? 1.0 : -1.0; };
  auto vel = [&] { return coin(rng) ? mag(rng) : -mag(rng); };
  struct Case {
    double alpha, tp;
    RegimeLabel label;
  };
  const Case cases[] = {{2.0, 0.0, RegimeLabel::VuBz}, {2.0, 0.0, RegimeLabel::EuVz},
                        {1.0, 0.0, RegimeLabel::VuVz}, {0.5, 0.0, RegimeLabel::VuRz},
                        {0.5, 0.0, RegimeLabel::BuVz}, {2.0, 0.7, RegimeLabel::EuRz},
                        {1.0, 1.3, RegimeLabel::EuRz}, {0.5, 0.4, RegimeLabel::EuRz}};
  for (const auto& c : cases)
    for (int s = 0; s < 300; ++s) {
      double du = 0, dz = 0, eta = 0, zeta = in(rng);
      const double tu = th(rng), tz = c.label == RegimeLabel::VuVz ? tu : th(rng);
      switch (c.label) {
        case RegimeLabel::VuBz:
        case RegimeLabel::VuRz:
          du = vel();
          eta = tu * du / (1 - tu);
          break;
        case RegimeLabel::EuVz:
        case RegimeLabel::BuVz:
          dz = vel();
          zeta = sgn(dz) + tz * dz / (1 - tz);
          break;
        case RegimeLabel::VuVz:
          du = vel(), dz = vel();
          eta = tu * du / (1 - tu);
          zeta = sgn(dz) + tz * dz / (1 - tz);
          break;
        default:
          du = vel(), dz = coin(rng) ? vel() : 0.0;
          if (dz != 0.0) zeta = sgn(dz);
      }
      const auto p = classify(c.alpha, c.tp, du, dz, eta, zeta);
      EXPECT_EQ(to_string(p.label), to_string(c.label)) << c.alpha << " " << du << " " << dz;
      ASSERT_FALSE(p.gap.infinite) << to_string(c.label);
      EXPECT_LE(p.gap.value, 1e-9) << to_string(c.label);
    }
}

TEST(ClassifyPoint, RandomPointsAdmissibleAndMostlyContactConsistent) {
  // Near the thresholds the theta residual and the relative gap use different
  // scales, so agreement is checked as a rate.
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> U(-2, 2);
  std::bernoulli_distribution coin(0.5);
  for (double alpha : {0.5, 1.0, 2.0}) {
    int agree = 0, n = 3000;
    for (int s = 0; s < n; ++s) {
      double tp = coin(rng) ? 0.0 : std::abs(U(rng));
      double du = U(rng), dz = U(rng), eta = U(rng), zeta = U(rng);
      if (s % 3 == 0) dz = 0, zeta = std::clamp(zeta, -1.0, 1.0);
      if (s % 3 == 1) eta = 0;
      if (s % 5 == 0) eta = du * std::abs(U(rng));
      const auto p = classify(alpha, tp, du, dz, eta, zeta);
      EXPECT_TRUE(admissible(p.label, alpha)) << to_string(p.label) << " at alpha " << alpha;
      const bool contact = !p.gap.infinite && p.gap.value <= ClassifyOptions{}.gap_tol;
      agree += contact == (p.label != RegimeLabel::Unclassified);
    }
    EXPECT_GE(double(agree) / n, 0.9) << alpha;
  }
}

TEST(ClassifyPoint, SpecularBattery) {
  // alpha = 2 point (u', eta; z', zeta) mirrors to an alpha = 1/2 point with
  // z' := u' and zeta := eta + sign(u'), u' := z', eta := zeta - sign(z').
  auto mirror_label = [](RegimeLabel l) {
    switch (l) {
      case RegimeLabel::VuBz: return RegimeLabel::BuVz;
      case RegimeLabel::EuVz: return RegimeLabel::VuRz;
      default: return l;
    }
  };
  auto sgn = [](double x) { return x > 0 ? 1.0 : x < 0 ? -1.0 : 0.0; };
  const double pts[][4] = {{1.0, 0.0, 1.0, 0.3}, {0.6, 0.0, 1.8, -0.5}, {-0.4, 0.0, -0.4, 0.9},
                           {0.0, 1.0, 0.0, 2.0}, {0.0, -0.7, 0.0, -1.35}};
  for (const auto& p : pts) {
    const auto a = classify(2.0, 0.0, p[0], p[1], p[2], p[3]);
    const double eta_m = p[1] == 0.0 ? 0.0 : p[3] - sgn(p[1]);
    const double zeta_m = p[0] == 0.0 ? 0.0 : p[2] + sgn(p[0]);
    const auto b = classify(0.5, 0.0, p[1], p[0], eta_m, zeta_m);
    EXPECT_NE(a.label, RegimeLabel::Unclassified);
    EXPECT_EQ(to_string(mirror_label(a.label)), to_string(b.label));
  }
}

TEST(Labels, StringRoundTripAndAdmissibility) {
  for (auto l : {RegimeLabel::EuRz, RegimeLabel::VuBz, RegimeLabel::EuVz, RegimeLabel::VuVz,
                 RegimeLabel::BuVz, RegimeLabel::VuRz, RegimeLabel::Stationary, RegimeLabel::Unclassified})
    EXPECT_EQ(label_from_string(to_string(l)), l);
  EXPECT_EQ(to_string(RegimeLabel::EuRz), "E_uR_z");
  EXPECT_TRUE(admissible(RegimeLabel::VuBz, 2.0));
  EXPECT_FALSE(admissible(RegimeLabel::VuBz, 1.0));
  EXPECT_FALSE(admissible(RegimeLabel::VuVz, 2.0));
  EXPECT_TRUE(admissible(RegimeLabel::BuVz, 0.5));
  EXPECT_FALSE(admissible(RegimeLabel::EuVz, 0.5));
}

class PresetSequence : public ::testing::TestWithParam<std::pair<const char*, std::vector<std::string>>> {};

TEST_P(PresetSequence, MatchesExpectedLabels) {
  const auto& [name, expected] = GetParam();
  const auto r = run_preset(name);
  EXPECT_EQ(labels(r.cls), expected);
  EXPECT_GE(r.cls.contact.fraction, 0.95);
  EXPECT_EQ(r.cls.unclassified_fraction, 0.0);
  for (std::size_t i = 1; i < r.cls.cc.segments.size(); ++i) {
    EXPECT_EQ(r.cls.cc.segments[i].s_a, r.cls.cc.segments[i - 1].s_b);
    EXPECT_NE(r.cls.cc.segments[i].label, r.cls.cc.segments[i - 1].label);
  }
  EXPECT_EQ(r.cls.cc.segments.front().s_a, r.curve.s.front());
  EXPECT_EQ(r.cls.cc.segments.back().s_b, r.curve.s.back());
}

INSTANTIATE_TEST_SUITE_P(
    Presets, PresetSequence,
    ::testing::Values(
        std::make_pair("example1_a2", std::vector<std::string>{"V_uB_z", "E_uV_z", "E_uR_z"}),
        std::make_pair("example1_a1", std::vector<std::string>{"V_uV_z", "E_uR_z"}),
        std::make_pair("example1_a05", std::vector<std::string>{"B_uV_z", "V_uR_z", "E_uR_z"}),
        std::make_pair("example2_a2", std::vector<std::string>{"E_uR_z", "E_uV_z", "E_uR_z"}),
        std::make_pair("example2_a1", std::vector<std::string>{"E_uR_z", "V_uV_z", "E_uR_z"}),
        std::make_pair("example2_a05",
                       std::vector<std::string>{"E_uR_z", "V_uR_z", "B_uV_z", "V_uR_z", "E_uR_z"})),
    [](const auto& info) { return std::string(info.param.first); });

TEST(Relaxation, QuadraticAlphaTwo) {
  auto cfg = load_config(std::string(PBV_PRESET_DIR) + "/example1_a2.json");
  const double eps = 1e-4;
  const auto curve = build_curve(cfg.reparam, simulate(cfg, eps).traj);
  const auto model = std::make_shared<QuadraticExample>();
  const auto rep = verify_relaxation_structure(curve, model, cfg.potentials(), 2.0, 1e-3, eps);
  ASSERT_TRUE(rep.applicable);
  EXPECT_TRUE(rep.terminal);
  EXPECT_GT(rep.j_star, 0u);
  EXPECT_LE(rep.pre_z_drift, 1e-3);
  EXPECT_LE(rep.pre_t_drift, 1e-6);
  EXPECT_LE(rep.post_u_error, 5e-3);
  EXPECT_LE(rep.reduced.relative, 1e-3);
  // Pinned at the initial z, with u sweeping from 2 towards -1.5.
  EXPECT_NEAR(curve.q[rep.j_star].u[0], -1.5, 0.05);
}

TEST(Relaxation, EquilibriumStartAndNotApplicable) {
  const auto model = std::make_shared<QuadraticExample>();
  SolverConfig c;
  c.t_end = 1.0;
  const auto tr = integrate(*model, unit, RateParams(1e-2, 2.0), c, 0.0, State::scalar(-1.0, -1.0));
  const auto curve = arclength_reparam(tr);
  const auto rep = verify_relaxation_structure(curve, model, unit, 2.0, 1e-2);
  EXPECT_TRUE(rep.terminal);
  EXPECT_EQ(rep.j_star, 0u);
  EXPECT_EQ(rep.s_star, 0.0);
  EXPECT_FALSE(verify_relaxation_structure(curve, model, unit, 1.0, 1e-2).applicable);
}
