#pragma once

// Adaptive semi-implicit integration of the multi-rate viscous system
//   eps^alpha V_u(q) u' + D_uE(t, q) = 0,
//   dR0(q, z') + eps V_z(q) z' + D_zE(t, q) ∋ 0,
// and the energy-dissipation diagnostics of the resulting trajectories.

#include "pbv/energy.hpp"
#include "pbv/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

namespace pbv {

enum class RateRegime { Fast, Balanced, Slow };  // alpha > 1, alpha = 1, alpha in (0,1)

struct RateParams {
  double eps = 1e-3;
  double alpha = 1.0;

  RateParams() = default;
  RateParams(double e, double a) : eps(e), alpha(a) { validate(); }

  void validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("eps must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
  }

  double eps_u() const { return std::pow(eps, alpha); }

  RateRegime regime() const {
    if (alpha > 1.0) return RateRegime::Fast;
    if (alpha == 1.0) return RateRegime::Balanced;
    return RateRegime::Slow;
  }
};

struct SolverConfig {
  double t_end = 1.0;
  double h0 = 1e-6;
  double h_min = 1e-14;
  double h_max = 1e-3;
  double delta_max = 1e-3;      ///< cap on |q_{k+1} - q_k|
  double defect_tol = 1e-3;     ///< local energy-balance defect per unit time
  double newton_tol = 1e-12;
  double inclusion_tol = 1e-9;  ///< relative inclusion residual
  int grow_after = 5;
  double grow_factor = 1.5;
  std::size_t max_steps = 50'000'000;

  void validate() const {
    if (!(h_min > 0.0 && h_min <= h0 && h0 <= h_max))
      throw ConfigError("solver config needs 0 < h_min <= h0 <= h_max");
    if (!(delta_max > 0.0)) throw ConfigError("solver config needs delta_max > 0");
    if (!(defect_tol > 0.0)) throw ConfigError("solver config needs defect_tol > 0");
  }

  /// All step controls scaled by `factor` (refinement studies).
  SolverConfig refined(double factor) const {
    SolverConfig c = *this;
    c.h0 *= factor;
    c.h_max *= factor;
    c.delta_max *= factor;
    c.defect_tol *= factor;
    c.h_min = std::min(c.h_min, c.h0);
    return c;
  }
};

/// One sample of a viscous trajectory. Velocities are difference quotients
/// (q_{k+1} - q_k)/h_k attributed to the left node; the last node repeats the
/// previous velocity and has h = 0.
struct TrajectoryNode {
  double t = 0.0;
  State q;
  State dq;
  double E = 0.0;
  double dtE = 0.0;
  Vec DuE;
  Vec DzE;
  double h = 0.0;
  double incl_residual = 0.0;
  // Dissipation integrands: primal terms use the interval velocity, dual
  // terms the node forces.
  double R0 = 0.0;
  double visc_z = 0.0;  ///< eps V_z(q, z')
  double visc_u = 0.0;  ///< eps^alpha V_u(q, u')
  double dual_z = 0.0;  ///< W_z^*(q, -D_zE) / eps
  double dual_u = 0.0;  ///< V_u^*(q, -D_uE) / eps^alpha
};

struct Trajectory {
  std::vector<TrajectoryNode> nodes;
  RateParams params;
  bool complete = true;  ///< false when integration stopped early

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  const TrajectoryNode& operator[](std::size_t k) const { return nodes[k]; }
  const TrajectoryNode& back() const { return nodes.back(); }
};

struct StepDiagnostics {
  double newton_residual = 0.0;
  double incl_residual = 0.0;  ///< relative residual of the z-inclusion
  int newton_iterations = 0;
};

struct StepResult {
  State q_next;
  StepDiagnostics diag;
};

/// Positive semidefinite part of a symmetric matrix.
inline Mat psd_part(const Mat& H) {
  if (H.size() == 1) return Mat::Constant(1, 1, std::max(H(0, 0), 0.0));
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.transpose()));
  const Vec lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

/// One step of size h from (t, q).
///
/// z-substep: linearly implicit resolvent of the coupled system. With
/// a = D_uE, g = D_zE at (t+h, q) and B = eps^a V_u / h + D_uu E, eliminating
/// the linearized u-increment gives
///   0 ∈ dR0(q, v) + (eps V_z(q) + h [S]_+) v + g - D_zu E B^{-1} a,
///   S = D_zz E - D_zu E B^{-1} D_uz E,
/// and z+ = z + h v. Without the curvature term this is the frozen-force
/// resolvent prox_z.
/// u-substep: eps^a V_u(q) (u+ - u)/h + D_uE(t+h, u+, z+) = 0 by Newton, so
/// u+ is exactly balanced against the updated z.
inline StepResult step(const EnergyModel& model, const Potentials& pot, const RateParams& params,
                       double t, const State& q, double h, double newton_tol = 1e-12,
                       int newton_max = 50) {
  if (!(h > 0.0)) throw ConfigError("step size must be positive");
  const double t1 = t + h;
  const double eu = params.eps_u();
  const bool has_u = q.n() > 0;

  StepResult res;
  Mat Vu;
  Eigen::LDLT<Mat> B;
  Vec a;
  if (has_u) {
    Vu = pot.vu.matrix(q);
    a = model.Du(t1, q);
    B.compute(eu * Vu / h + model.Duu(t1, q));
  }

  Vec z_next = q.z;
  Vec v = Vec::Zero(q.m());
  if (q.m() > 0) {
    Vec g = model.Dz(t1, q);
    Mat S = model.Dzz(t1, q);
    Mat Euz;
    if (has_u) {
      Euz = model.Duz(t1, q);
      g -= Euz.transpose() * B.solve(a);
      S -= Euz.transpose() * B.solve(Euz);
    }
    const Mat A = params.eps * pot.vz.matrix(q) + h * psd_part(S);
    v = resolvent(pot.r0, q, A, g);
    const Vec force = -A * v - g;
    const double scale = g.norm() + pot.r0.max_weight(q) + 1e-300;
    res.diag.incl_residual = pot.r0.subdiff_distance(q, v, force) / scale;
    z_next = q.z + h * v;
    if (has_u) a += h * Euz * v;  // linearized predictor for the u-solve
  }

  State trial(q.u, z_next);
  if (has_u) {
    trial.u = q.u - B.solve(a);
    Vec r;
    int it = 0;
    for (; it < newton_max; ++it) {
      const Vec DuE = model.Du(t1, trial);
      r = eu * Vu * (trial.u - q.u) / h + DuE;
      if (r.norm() <= newton_tol * (1.0 + DuE.norm())) break;
      const Mat J = eu * Vu / h + model.Duu(t1, trial);
      const Vec du = J.ldlt().solve(r);
      trial.u -= du;
      // Roundoff floor of the residual when eps^a / h is large.
      if (du.norm() <= 1e-14 * (1.0 + trial.u.norm())) break;
    }
    if (it == newton_max) throw ConvergenceError("u-substep Newton failed", trial.u, r.norm());
    res.diag.newton_iterations = it;
    res.diag.newton_residual = r.norm();
  }
  res.q_next = std::move(trial);
  return res;
}

/// Fills the per-node energy quantities and dual dissipation integrands.
inline void fill_node_energetics(const EnergyModel& model, const Potentials& pot,
                                 const RateParams& params, TrajectoryNode& node) {
  const EnergyEval ev = model.eval(node.t, node.q);
  node.E = ev.E;
  node.dtE = ev.dtE;
  node.DuE = ev.DuE;
  node.DzE = ev.DzE;
  node.dual_z = pot.conj_Wz(node.q, -ev.DzE) / params.eps;
  node.dual_u = pot.vu.conj(node.q, -ev.DuE) / params.eps_u();
}

inline void fill_interval_dissipation(const Potentials& pot, const RateParams& params,
                                      TrajectoryNode& node) {
  node.R0 = node.q.m() ? pot.r0.eval(node.q, node.dq.z) : 0.0;
  node.visc_z = params.eps * pot.vz.eval(node.q, node.dq.z);
  node.visc_u = params.eps_u() * pot.vu.eval(node.q, node.dq.u);
}

/// Integration error that keeps the partial trajectory.
struct IntegrationError : NumericalError {
  IntegrationError(const std::string& what, Trajectory partial_)
      : NumericalError(what), partial(std::move(partial_)) {}
  Trajectory partial;
};

/// Adaptive integration on [t0, config.t_end]. A step is accepted iff
/// |dq| <= delta_max, the inclusion residual is within tolerance and the
/// step's energy-balance defect is at most defect_tol * h * (1 + power +
/// dissipation rate); rejected steps halve h, and h grows by grow_factor
/// after grow_after accepts.
inline Trajectory integrate(const EnergyModel& model, const Potentials& pot,
                            const RateParams& params, const SolverConfig& cfg, double t0,
                            const State& q0) {
  params.validate();
  cfg.validate();
  if (!(t0 < cfg.t_end)) throw ConfigError("integrate needs t0 < T");
  if (!q0.finite()) throw ConfigError("initial state is not finite");
  if (q0.n() != model.n() || q0.m() != model.m())
    throw ConfigError("initial state dimensions do not match the model");

  Trajectory traj;
  traj.params = params;
  TrajectoryNode first;
  first.t = t0;
  first.q = q0;
  fill_node_energetics(model, pot, params, first);
  traj.nodes.push_back(std::move(first));

  double t = t0;
  State q = q0;
  double h = cfg.h0;
  int accepted_run = 0;
  const double t_eps = 1e-14 * std::max(1.0, std::abs(cfg.t_end));

  for (std::size_t n_steps = 0; cfg.t_end - t > t_eps; ++n_steps) {
    if (n_steps >= cfg.max_steps) {
      traj.complete = false;
      throw IntegrationError("step budget exhausted", std::move(traj));
    }
    const bool last = t + h >= cfg.t_end - t_eps;
    const double h_try = last ? cfg.t_end - t : h;
    StepResult sr;
    bool ok = true;
    try {
      sr = step(model, pot, params, t, q, h_try, cfg.newton_tol);
      ok = (sr.q_next - q).norm() <= cfg.delta_max && sr.diag.incl_residual <= cfg.inclusion_tol &&
           sr.q_next.finite();
    } catch (const ConvergenceError&) {
      ok = false;
    }
    TrajectoryNode left_try, next;
    if (ok) {
      left_try = traj.nodes.back();
      left_try.h = h_try;
      left_try.dq = (1.0 / h_try) * (sr.q_next - q);
      left_try.incl_residual = sr.diag.incl_residual;
      fill_interval_dissipation(pot, params, left_try);
      next.t = last ? cfg.t_end : t + h_try;
      next.q = sr.q_next;
      fill_node_energetics(model, pot, params, next);
      const double diss = left_try.R0 + left_try.visc_z + left_try.visc_u + next.dual_z + next.dual_u;
      const double power = 0.5 * (left_try.dtE + next.dtE);
      const double defect = next.E - left_try.E + h_try * (diss - power);
      ok = std::abs(defect) <= cfg.defect_tol * h_try * (1.0 + std::abs(power) + diss);
    }
    if (!ok) {
      h = 0.5 * std::min(h, h_try);
      accepted_run = 0;
      if (h < cfg.h_min) {
        traj.complete = false;
        throw IntegrationError(detail::concat("step size underflow at t=", t), std::move(traj));
      }
      continue;
    }

    traj.nodes.back() = std::move(left_try);
    t = next.t;
    q = next.q;
    traj.nodes.push_back(std::move(next));

    if (++accepted_run >= cfg.grow_after) {
      h = std::min(h * cfg.grow_factor, cfg.h_max);
      accepted_run = 0;
    }
  }

  auto& tail = traj.nodes.back();
  if (traj.nodes.size() >= 2) {
    tail.dq = traj.nodes[traj.nodes.size() - 2].dq;
  } else {
    tail.dq = State(Vec::Zero(q0.n()), Vec::Zero(q0.m()));
  }
  fill_interval_dissipation(pot, params, tail);
  return traj;
}

struct EnergyBalance {
  double lhs = 0.0;          ///< E(t2) + dissipation
  double rhs = 0.0;          ///< E(t1) + power
  double dissipation = 0.0;  ///< total primal + dual dissipation
  double absolute = 0.0;
  double relative = 0.0;     ///< absolute / dissipation
};

/// Discrete energy-dissipation identity on [t_{k1}, t_{k2}]. Primal terms are
/// integrated exactly for the piecewise-constant velocity and the power dtE by
/// the trapezoidal rule. Dual terms use the right node of each interval, the
/// force the implicit step is in Fenchel equality with; trapezoid weights on
/// them are off by O(h / eps^alpha) once steps outgrow the relaxation time.
inline EnergyBalance energy_balance_residual(const Trajectory& traj, std::size_t k1,
                                             std::size_t k2) {
  if (k1 > k2 || k2 >= traj.size()) throw ConfigError("energy balance: bad index range");
  EnergyBalance b;
  double power = 0.0;
  for (std::size_t k = k1; k < k2; ++k) {
    const auto& a = traj[k];
    const auto& c = traj[k + 1];
    const double h = c.t - a.t;
    b.dissipation += h * (a.R0 + a.visc_z + a.visc_u);
    b.dissipation += h * (c.dual_z + c.dual_u);
    power += 0.5 * h * (a.dtE + c.dtE);
  }
  b.lhs = traj[k2].E + b.dissipation;
  b.rhs = traj[k1].E + power;
  b.absolute = std::abs(b.lhs - b.rhs);
  b.relative = b.dissipation > 0.0 ? b.absolute / b.dissipation : b.absolute;
  return b;
}

inline EnergyBalance energy_balance_residual(const Trajectory& traj) {
  return energy_balance_residual(traj, 0, traj.size() - 1);
}

struct AprioriDiagnostics {
  double sup_E = -std::numeric_limits<double>::infinity();
  double sup_q = 0.0;
  double total_var_z = 0.0;
  double total_var_u = 0.0;
};

inline AprioriDiagnostics apriori_diagnostics(const Trajectory& traj) {
  if (traj.empty()) throw ConfigError("apriori_diagnostics: empty trajectory");
  AprioriDiagnostics d;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    d.sup_E = std::max(d.sup_E, traj[k].E);
    d.sup_q = std::max(d.sup_q, traj[k].q.norm());
    if (k + 1 < traj.size()) {
      d.total_var_u += (traj[k + 1].q.u - traj[k].q.u).norm();
      d.total_var_z += (traj[k + 1].q.z - traj[k].q.z).norm();
    }
  }
  return d;
}

/// Gronwall bound for sup E from E(t) <= E(0) + C1 int_0^t E, applied to the
/// shifted energy E + shift >= 1: sup (E + shift) <= (E(0) + shift) exp(C1 T).
inline double gronwall_energy_bound(double E0, double shift, double c1, double duration) {
  return (E0 + shift) * std::exp(c1 * duration) - shift;
}

/// |D_uE(t0, q0)| / eps^alpha; bounded along eps sequences for well-prepared data.
inline double well_preparedness_ratio(const EnergyModel& model, const RateParams& params,
                                      double t0, const State& q0) {
  return model.Du(t0, q0).norm() / params.eps_u();
}

/// Number of jump clusters: maximal runs of intervals with speed |dq|/h above
/// `speed`, merged when separated by at most `gap` in time, whose summed
/// displacement is at least `min_size`. Viscous jumps run at speeds ~ 1/eps
/// while rate-independent sliding stays O(1); `min_size` drops short
/// relaxation layers of ill-prepared data.
inline std::size_t count_jump_clusters(const Trajectory& traj, double speed, double gap,
                                       double min_size = 0.0) {
  std::size_t clusters = 0;
  double last_t = -std::numeric_limits<double>::infinity();
  double size = 0.0;
  bool open = false;
  auto close = [&] {
    if (open && size >= min_size) ++clusters;
    open = false;
    size = 0.0;
  };
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double h = traj[k + 1].t - traj[k].t;
    const double d = (traj[k + 1].q - traj[k].q).norm();
    if (d > speed * h) {
      if (traj[k].t - last_t > gap) close();
      open = true;
      size += d;
      last_t = traj[k + 1].t;
    }
  }
  close();
  return clusters;
}

}  // namespace pbv
