#pragma once

// Experiment pipeline shared by the CLI, tests and acceptance checks:
// simulate -> reparameterize -> classify / energy check, eps sweeps and the
// pointwise Gamma battery.

#include "pbv/config.hpp"
#include "pbv/svg.hpp"

#include <future>
#include <thread>

namespace pbv {

/// Speed separating viscous jumps from rate-independent sliding.
inline double jump_speed(const RateParams& p) {
  return std::max(10.0, 0.1 / std::max(p.eps, p.eps_u()));
}

inline constexpr double kJumpGap = 0.01;
inline constexpr double kJumpMinSize = 0.25;

struct SimulationResult {
  Trajectory traj;
  EnergyBalance balance;
  AprioriDiagnostics apriori;
  std::size_t jumps = 0;
  double seconds = 0.0;
};

inline SimulationResult simulate(const RunConfig& cfg, double eps) {
  const auto model = cfg.energy();
  const RateParams rate(eps, cfg.alpha);
  SimulationResult r;
  const auto start = std::chrono::steady_clock::now();
  r.traj = integrate(*model, cfg.potentials(), rate, cfg.solver_for_run(), cfg.t0, cfg.q0);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.balance = energy_balance_residual(r.traj);
  r.apriori = apriori_diagnostics(r.traj);
  r.jumps = count_jump_clusters(r.traj, jump_speed(rate), kJumpGap, kJumpMinSize);
  return r;
}

inline SimulationResult simulate(const RunConfig& cfg) { return simulate(cfg, cfg.eps); }

inline json summary_json(const RunConfig& cfg, const SimulationResult& r) {
  // Wall-clock time is left out so repeated runs give identical files.
  return json{{"model", cfg.model},
              {"eps", r.traj.params.eps},
              {"alpha", r.traj.params.alpha},
              {"t_span", {cfg.t0, cfg.T}},
              {"nodes", r.traj.size()},
              {"complete", r.traj.complete},
              {"final_t", r.traj.back().t},
              {"final_state", to_json(r.traj.back().q)},
              {"jumps", r.jumps},
              {"energy_balance", to_json(r.balance)},
              {"apriori", to_json(r.apriori)}};
}

inline ParameterizedCurve build_curve(const ReparamChoice& rc, const Trajectory& traj) {
  return rc.kind == CurveTag::Custom ? custom_reparam(traj, rc.floor, rc.nodes)
                                     : arclength_reparam(traj, rc.nodes);
}

struct ClassificationResult {
  CurveClassification cc;
  ContactAgreement contact;
  double unclassified_fraction = 0.0;  ///< by curve length
};

inline ClassificationResult classify(const RunConfig& cfg, const ParameterizedCurve& c) {
  const auto model = cfg.energy();
  ClassificationResult r;
  r.cc = segment_curve(c, *model, cfg.potentials(), cfg.alpha, cfg.segment);
  r.contact = contact_agreement(r.cc, cfg.segment.point.gap_tol);
  double un = 0.0;
  for (const auto& s : r.cc.segments)
    if (s.label == RegimeLabel::Unclassified) un += s.s_b - s.s_a;
  r.unclassified_fraction = c.length() > 0.0 ? un / c.length() : 0.0;
  return r;
}

inline json classification_json(const ClassificationResult& r) {
  return json{{"segments", to_json(r.cc.segments)},
              {"labels", [&] {
                 json a = json::array();
                 for (auto l : label_sequence(r.cc.segments)) a.push_back(to_string(l));
                 return a;
               }()},
              {"tol_t", r.cc.tol_t},
              {"contact_agreement", r.contact.fraction},
              {"unclassified_fraction", r.unclassified_fraction}};
}

struct EnergyCheckResult {
  ParamResidual param;
  std::vector<double> gaps;  ///< M_0 - <q', xi> per node (inf off the domain)
  double tol_t = 0.0;
};

/// Parameterized energy identity of a curve against M_0. With relax_eps > 0
/// nodes off the contact domain use inf_tau M_eps at that eps.
inline EnergyCheckResult energy_check(const RunConfig& cfg, const ParameterizedCurve& c,
                                      double relax_eps) {
  const auto model = cfg.energy();
  const auto pot = cfg.potentials();
  EnergyCheckResult r;
  r.tol_t = cfg.segment.point.tol_t >= 0.0 ? cfg.segment.point.tol_t : default_tol_t(c);
  ParamResidualOptions po;
  po.tol_t = r.tol_t;
  po.relax_eps = relax_eps;
  r.param = parameterized_energy_residual(c, *model, pot, cfg.alpha, po);
  r.gaps.reserve(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    const auto g = duality_gap(pot, curve_args(c, *model, j, r.tol_t), cfg.alpha);
    r.gaps.push_back(g.infinite ? std::numeric_limits<double>::infinity() : g.value);
  }
  return r;
}

// ----------------------------------------------------------------- eps sweep

struct SweepEntry {
  double eps = 0.0;
  AprioriDiagnostics apriori;
  EnergyBalance balance;
  ParamResidual param;
  double sup_distance = std::numeric_limits<double>::quiet_NaN();  ///< to previous entry
  std::size_t jumps = 0;
};

struct SweepReport {
  std::vector<SweepEntry> entries;
  bool sup_monotone = false;
  /// max relative spread of total_var_{u,z} over the two smallest eps.
  double tv_u_variation = 0.0;
  double tv_z_variation = 0.0;
};

struct SweepRun {
  SimulationResult sim;
  ParameterizedCurve curve;
  ParameterizedCurve normalized;
};

/// Runs every eps of cfg.eps_list on its own thread (at most `threads` at
/// once); results are collected in eps order.
inline SweepReport run_sweep(const RunConfig& cfg, unsigned threads = 0,
                             std::vector<SweepRun>* runs_out = nullptr) {
  if (cfg.eps_list.size() < 3) throw ConfigError("sweep needs at least three eps values");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t N = cfg.eps_list.size();
  std::vector<SweepRun> runs(N);
  auto work = [&cfg](double eps) {
    SweepRun r;
    r.sim = simulate(cfg, eps);
    r.curve = build_curve(cfg.reparam, r.sim.traj);
    r.normalized = normalize(r.curve, cfg.reparam.nodes);
    return r;
  };
  for (std::size_t first = 0; first < N; first += threads) {
    std::vector<std::future<SweepRun>> batch;
    for (std::size_t i = first; i < std::min(N, first + threads); ++i)
      batch.push_back(std::async(std::launch::async, work, cfg.eps_list[i]));
    for (std::size_t i = 0; i < batch.size(); ++i) runs[first + i] = batch[i].get();
  }

  const auto model = cfg.energy();
  const auto pot = cfg.potentials();
  SweepReport rep;
  for (std::size_t i = 0; i < N; ++i) {
    SweepEntry e;
    e.eps = cfg.eps_list[i];
    e.apriori = runs[i].sim.apriori;
    e.balance = runs[i].sim.balance;
    e.jumps = runs[i].sim.jumps;
    ParamResidualOptions po;
    po.relax_eps = e.eps;
    if (cfg.segment.point.tol_t >= 0.0) po.tol_t = cfg.segment.point.tol_t;
    e.param = parameterized_energy_residual(runs[i].curve, *model, pot, cfg.alpha, po);
    if (i > 0) e.sup_distance = sup_distance(runs[i - 1].normalized, runs[i].normalized);
    rep.entries.push_back(std::move(e));
  }
  rep.sup_monotone = true;
  for (std::size_t i = 2; i < N; ++i)
    rep.sup_monotone = rep.sup_monotone && rep.entries[i].sup_distance < rep.entries[i - 1].sup_distance;
  auto spread = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); };
  const auto& a = rep.entries[N - 2].apriori;
  const auto& b = rep.entries[N - 1].apriori;
  rep.tv_u_variation = spread(a.total_var_u, b.total_var_u);
  rep.tv_z_variation = spread(a.total_var_z, b.total_var_z);
  if (runs_out) *runs_out = std::move(runs);
  return rep;
}

inline json sweep_json(const SweepReport& rep) {
  json entries = json::array();
  for (const auto& e : rep.entries)
    entries.push_back(json{{"eps", e.eps},
                           {"apriori", to_json(e.apriori)},
                           {"energy_balance", to_json(e.balance)},
                           {"param_residual", to_json(e.param, {}, false)},
                           {"sup_distance", finite_or_null(e.sup_distance)},
                           {"jumps", e.jumps}});
  return json{{"entries", entries},
              {"sup_distance_monotone", rep.sup_monotone},
              {"tv_u_variation", rep.tv_u_variation},
              {"tv_z_variation", rep.tv_z_variation}};
}

// ------------------------------------------------------------- Gamma battery

/// Twelve scalar points (n = m = 1, unit potentials) covering every branch
/// of M_0 for alpha in {2, 1, 1/2}.
inline std::vector<GammaPoint> canonical_gamma_battery() {
  auto pt = [](std::string name, double alpha, double tau, double du, double dz, double xu,
               double xz) {
    GammaPoint g;
    g.name = std::move(name);
    g.alpha = alpha;
    g.args.q = State::scalar(0.0, 0.0);
    g.args.tau = tau;
    g.args.dq = State::scalar(du, dz);
    g.args.xi = State::scalar(xu, xz);
    return g;
  };
  return {
      pt("a2_rate_independent", 2.0, 1.0, 0.0, 0.7, 0.0, 0.5),
      pt("a2_viscous_u", 2.0, 0.0, 1.5, 0.0, 0.8, 0.3),
      pt("a2_viscous_z", 2.0, 0.0, 0.0, 1.2, 0.0, 1.6),
      pt("a2_infinite", 2.0, 0.0, 1.0, 1.0, 0.5, 1.5),
      pt("a1_rate_independent", 1.0, 0.5, 0.0, -0.4, 0.0, -0.9),
      pt("a1_balanced", 1.0, 0.0, 0.8, 0.6, -0.7, 1.4),
      pt("a1_balanced_u_only", 1.0, 0.0, 1.0, 0.0, 0.6, 0.0),
      pt("a1_infinite_tau", 1.0, 1.0, 0.3, 0.2, 0.4, 1.8),
      pt("a05_rate_independent", 0.5, 2.0, 0.0, 1.0, 0.0, 1.0),
      pt("a05_viscous_u", 0.5, 0.0, 0.9, 0.0, -1.1, 0.2),
      pt("a05_viscous_z", 0.5, 0.0, 0.0, -0.5, 0.0, -1.7),
      pt("a05_infinite", 0.5, 0.0, 0.7, 0.4, 0.9, 1.3),
  };
}

struct GammaBatteryResult {
  std::vector<std::pair<GammaPoint, GammaCheckReport>> results;
  bool all_passed = true;
};

inline GammaBatteryResult run_gamma_battery(const Potentials& pot, const GammaConfig& g) {
  GammaBatteryResult out;
  const auto points = g.points.empty() ? canonical_gamma_battery() : g.points;
  for (const auto& p : points) {
    auto rep = gamma_pointwise_check(pot, p.args, p.alpha, g.eps, g.tol);
    out.all_passed = out.all_passed && rep.passed;
    out.results.emplace_back(p, std::move(rep));
  }
  return out;
}

inline json gamma_json(const GammaBatteryResult& r) {
  json pts = json::array();
  for (const auto& [p, rep] : r.results) {
    json j = to_json(rep);
    j["name"] = p.name;
    j["alpha"] = p.alpha;
    pts.push_back(std::move(j));
  }
  return json{{"points", pts}, {"all_passed", r.all_passed}};
}

}  // namespace pbv
