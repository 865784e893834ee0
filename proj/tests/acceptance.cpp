// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "pbv/experiments.hpp"

#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

using namespace pbv;

namespace {

RunConfig preset(const std::string& name) {
  auto c = load_config(std::string(PBV_PRESET_DIR) + "/" + name + ".json");
  c.validate();
  return c;
}

struct PresetRun {
  RunConfig cfg;
  SimulationResult sim;
  ParameterizedCurve curve;
  ClassificationResult cls;
};

PresetRun run(const std::string& name) {
  PresetRun r;
  r.cfg = preset(name);
  r.sim = simulate(r.cfg);
  r.curve = build_curve(r.cfg.reparam, r.sim.traj);
  r.cls = classify(r.cfg, r.curve);
  return r;
}

const std::vector<std::string> kPresets = {"example1_a2", "example2_a2", "example1_a1",
                                           "example2_a1", "example1_a05", "example2_a05"};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double dist2(const State& q, double u, double z) { return std::hypot(q.u[0] - u, q.z[0] - z); }

// Max deviation of u and z from given functions of t over nodes with t in [a, b].
std::pair<double, double> branch_error(const Trajectory& tr, double a, double b,
                                       const std::function<double(double)>& u,
                                       const std::function<double(double)>& z) {
  double eu = 0.0, ez = 0.0;
  for (const auto& nd : tr.nodes) {
    if (nd.t < a || nd.t > b) continue;
    eu = std::max(eu, std::abs(nd.q.u[0] - u(nd.t)));
    ez = std::max(ez, std::abs(nd.q.z[0] - z(nd.t)));
  }
  return {eu, ez};
}

std::string state_str(const State& q) {
  std::ostringstream os;
  os.precision(4);
  os << "(" << q.u[0] << ", " << q.z[0] << ")";
  return os.str();
}

Outcome c1() {
  const auto r = run("example1_a2");
  const auto [eu, ez] = branch_error(r.sim.traj, 0.2, 1.0, [](double t) { return 2 * t - 1; },
                                     [](double t) { return t - 1; });
  return {eu <= 0.02 && ez <= 0.02, "max|u-(2t-1)|=" + fmt("%.3g", eu) + " max|z-(t-1)|=" + fmt("%.3g", ez)};
}

Outcome segment_ends(const PresetRun& r, double u1, double z1, double u2, double z2) {
  const auto& s = r.cls.cc.segments;
  if (s.size() < 2) return {false, "fewer than two segments"};
  const State& a = r.curve.q[s[0].j_b];
  const State& b = r.curve.q[s[1].j_b];
  const double da = dist2(a, u1, z1), db = dist2(b, u2, z2);
  return {da <= 0.05 && db <= 0.05, "segment ends " + state_str(a) + " " + state_str(b)};
}

Outcome c2() { return segment_ends(run("example1_a2"), -1.5, -1.5, -1.0, -1.0); }

Outcome c3(std::string& note) {
  const auto r = run("example1_a05");
  const auto ends = segment_ends(r, 2.0, 0.5, 0.5, 0.5);
  const auto [eu, ez] = branch_error(r.sim.traj, 0.6, 1.4, [](double t) { return t - 0.5; },
                                     [](double) { return 0.5; });
  const auto [eu_alt, ez_alt] = branch_error(r.sim.traj, 0.6, 1.4, [](double t) { return t + 0.5; },
                                             [](double) { return 0.5; });
  note = "note 3: with u(t) = t+0.5, the equilibrium u = z+t at z = 0.5: max|u-(t+0.5)|=" +
         fmt("%.3g", eu_alt) + " max|z-0.5|=" + fmt("%.3g", ez_alt);
  return {ends.pass && eu <= 0.02 && ez <= 0.02,
          ends.detail + " max|u-(t-0.5)|=" + fmt("%.3g", eu) + " max|z-0.5|=" + fmt("%.3g", ez)};
}

Outcome c4(std::vector<PresetRun>& runs) {
  const std::map<std::string, std::vector<std::string>> want = {
      {"example1_a2", {"V_uB_z", "E_uV_z", "E_uR_z"}},
      {"example1_a1", {"V_uV_z", "E_uR_z"}},
      {"example1_a05", {"B_uV_z", "V_uR_z", "E_uR_z"}},
      {"example2_a2", {"E_uR_z", "E_uV_z", "E_uR_z"}},
      {"example2_a1", {"E_uR_z", "V_uV_z", "E_uR_z"}},
      {"example2_a05", {"E_uR_z", "V_uR_z", "B_uV_z", "V_uR_z", "E_uR_z"}}};
  bool ok = true;
  std::string detail;
  for (const auto& r : runs) {
    std::vector<std::string> got;
    for (auto l : label_sequence(r.cls.cc.segments)) got.push_back(to_string(l));
    const std::string name = r.cfg.out_dir.substr(r.cfg.out_dir.rfind('/') + 1);
    if (got != want.at(name)) {
      ok = false;
      detail += name + ":";
      for (const auto& g : got) detail += " " + g;
      detail += "; ";
    }
  }
  return {ok, ok ? "all six sequences match" : detail};
}

double fitted_order(const std::vector<double>& factors, const std::vector<double>& res) {
  const std::size_t n = res.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += std::log(factors[i]) / n, my += std::log(res[i]) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(factors[i]) - mx) * (std::log(res[i]) - my);
    sxx += (std::log(factors[i]) - mx) * (std::log(factors[i]) - mx);
  }
  return sxy / sxx;
}

Outcome c5(std::vector<PresetRun>& runs) {
  bool ok = true;
  double worst_rel = 0.0, worst_order = 1e9;
  const std::vector<double> f = {1.0, 0.5, 0.25, 0.125};
  for (auto& r : runs) {
    worst_rel = std::max(worst_rel, r.sim.balance.relative);
    ok = ok && r.sim.balance.relative <= 1e-3;
    std::vector<double> res{r.sim.balance.absolute};
    for (std::size_t i = 1; i < f.size(); ++i) {
      RunConfig c = r.cfg;
      c.solver = c.solver.refined(f[i]);
      res.push_back(simulate(c).balance.absolute);
    }
    const double order = fitted_order(f, res);
    worst_order = std::min(worst_order, order);
    ok = ok && order >= 0.9;
  }
  return {ok, "max relative residual " + fmt("%.3g", worst_rel) + ", min order " + fmt("%.3f", worst_order)};
}

Outcome c6() {
  const auto pot = Potentials::standard(1, 1);
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> U(-2, 2), P(0.1, 10.0);
  std::bernoulli_distribution coin(0.5);
  double min_gap = 1e300, max_hom = 0.0;
  for (double alpha : {2.0, 1.0, 0.5})
    for (int s = 0; s < 10000; ++s) {
      MArgs a;
      a.q = State::scalar(U(rng), U(rng));
      a.tau = coin(rng) ? 0.0 : std::abs(U(rng));
      a.dq = State::scalar(U(rng), U(rng));
      a.xi = State::scalar(U(rng), U(rng));
      if (s % 5 == 0) a.dq.u[0] = 0;
      if (s % 7 == 0) a.dq.z[0] = 0;
      if (s % 3 == 0) a.xi.u[0] = 0;
      if (s % 4 == 0) a.xi.z[0] = std::clamp(a.xi.z[0], -1.0, 1.0);
      const auto g = duality_gap(pot, a, alpha);
      if (!g.infinite) min_gap = std::min(min_gap, g.value);
      const double lam = P(rng);
      MArgs b = a;
      b.tau *= lam;
      b.dq = lam * a.dq;
      const auto m = eval_M0(pot, a, alpha), ml = eval_M0(pot, b, alpha);
      if (m.infinite != ml.infinite) return {false, "finiteness changes under scaling"};
      if (!m.infinite)
        max_hom = std::max(max_hom, std::abs(ml.value - lam * m.value) / std::max(1e-300, std::abs(lam * m.value)));
    }
  return {min_gap >= -1e-10 && max_hom <= 1e-9,
          "min gap " + fmt("%.3g", min_gap) + ", max homogeneity error " + fmt("%.3g", max_hom)};
}

Outcome c7() {
  const auto cfg = preset("gamma_battery");
  const auto r = run_gamma_battery(cfg.potentials(), cfg.gamma);
  double exponent = std::numeric_limits<double>::quiet_NaN();
  std::size_t passed = 0;
  for (const auto& [p, rep] : r.results) {
    passed += rep.passed;
    if (p.name == "a2_infinite") exponent = rep.divergence_exponent;
  }
  return {r.all_passed && r.results.size() == 12 && std::abs(exponent - 0.5) <= 0.1,
          std::to_string(passed) + "/" + std::to_string(r.results.size()) + " points, exponent " +
              fmt("%.3f", exponent)};
}

Outcome c8(std::vector<PresetRun>& runs) {
  double worst = 1.0;
  for (const auto& r : runs) worst = std::min(worst, r.cls.contact.fraction);
  return {worst >= 0.95, "min agreement " + fmt("%.4f", worst)};
}

Outcome c9() {
  const auto cfg = preset("example1_a2");
  const double eps = 1e-4;
  const auto curve = build_curve(cfg.reparam, simulate(cfg, eps).traj);
  const auto model = std::make_shared<QuadraticExample>();
  const auto rep = verify_relaxation_structure(curve, model, cfg.potentials(), 2.0, 1e-3, eps);
  const bool ok = rep.applicable && rep.terminal && rep.pre_z_drift <= 1e-3 && rep.pre_t_drift <= 1e-6 &&
                  rep.post_u_error <= 5e-3 && rep.reduced.relative <= 1e-3;
  return {ok, "terminal=" + std::string(rep.terminal ? "yes" : "no") + " z drift " + fmt("%.3g", rep.pre_z_drift) +
                  " t drift " + fmt("%.3g", rep.pre_t_drift) + " u error " + fmt("%.3g", rep.post_u_error) +
                  " reduced residual " + fmt("%.3g", rep.reduced.relative)};
}

Outcome c10() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"example1_a2", "example1_a1", "example1_a05"}) {
    auto cfg = preset(name);
    cfg.eps_list = {3e-2, 1e-2, 3e-3, 1e-3};
    const auto rep = run_sweep(cfg);
    const bool good = rep.tv_u_variation < 0.25 && rep.tv_z_variation < 0.25 && rep.sup_monotone;
    ok = ok && good;
    detail += std::string(name) + ": tv " + fmt("%.3f", rep.tv_u_variation) + "/" + fmt("%.3f", rep.tv_z_variation) +
              " sup";
    for (std::size_t i = 1; i < rep.entries.size(); ++i) detail += " " + fmt("%.3g", rep.entries[i].sup_distance);
    detail += "; ";
  }
  return {ok, detail};
}

}  // namespace

int main() {
  std::vector<PresetRun> runs;
  for (const auto& n : kPresets) runs.push_back(run(n));

  std::string note3;
  std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"Example 1, alpha=2: rate-independent branch", c1},
      {"Example 1, alpha=2: jump structure", c2},
      {"Example 1, alpha=1/2: jump structure and branch", [&] { return c3(note3); }},
      {"regime sequences", [&] { return c4(runs); }},
      {"energy-dissipation identity", [&] { return c5(runs); }},
      {"M_0 duality gap and homogeneity", c6},
      {"Gamma pointwise battery", c7},
      {"contact/classification agreement", [&] { return c8(runs); }},
      {"relaxation structure, alpha=2 (eps=1e-4)", c9},
      {"uniformity in eps", c10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << checks[i].first << ": " << o.detail
              << std::endl;
    if (i == 2 && !note3.empty()) std::cout << "     " << note3 << std::endl;
  }
  return failures ? 1 : 0;
}
