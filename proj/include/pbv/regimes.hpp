#pragma once

// Switching parameters (theta_u, theta_z), pointwise regime labels, curve
// segmentation, and the relaxation structure for alpha > 1.

#include "pbv/mfunctional.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace pbv {

enum class RegimeLabel { EuRz, VuBz, EuVz, VuVz, BuVz, VuRz, Stationary, Unclassified };

inline std::string to_string(RegimeLabel l) {
  switch (l) {
    case RegimeLabel::EuRz: return "E_uR_z";
    case RegimeLabel::VuBz: return "V_uB_z";
    case RegimeLabel::EuVz: return "E_uV_z";
    case RegimeLabel::VuVz: return "V_uV_z";
    case RegimeLabel::BuVz: return "B_uV_z";
    case RegimeLabel::VuRz: return "V_uR_z";
    case RegimeLabel::Stationary: return "Stationary";
    case RegimeLabel::Unclassified: return "Unclassified";
  }
  return "Unclassified";
}

inline RegimeLabel label_from_string(const std::string& s) {
  for (auto l : {RegimeLabel::EuRz, RegimeLabel::VuBz, RegimeLabel::EuVz, RegimeLabel::VuVz,
                 RegimeLabel::BuVz, RegimeLabel::VuRz, RegimeLabel::Stationary,
                 RegimeLabel::Unclassified})
    if (to_string(l) == s) return l;
  throw ConfigError("unknown regime label '" + s + "'");
}

/// Labels admissible for a given alpha (Stationary and Unclassified aside).
inline bool admissible(RegimeLabel l, double alpha) {
  switch (l) {
    case RegimeLabel::EuRz: return true;
    case RegimeLabel::VuBz:
    case RegimeLabel::EuVz: return alpha > 1.0;
    case RegimeLabel::VuVz: return alpha == 1.0;
    case RegimeLabel::BuVz:
    case RegimeLabel::VuRz: return alpha < 1.0;
    default: return true;
  }
}

struct ThetaEstimate {
  double theta = 0.0;
  double residual = 0.0;  ///< relative violation of the relation
  bool free = false;      ///< every theta in [0,1] satisfies the relation
};

struct ThetaPair {
  double theta_u = 0.0;
  double theta_z = 0.0;
  double residual_u = 0.0;
  double residual_z = 0.0;
};

/// Least-squares theta in [0,1] for theta V_u u' = (1-theta) eta.
inline ThetaEstimate recover_theta_u(const Potentials& pot, const State& q, const Vec& du,
                                     const Vec& eta) {
  ThetaEstimate r;
  if (du.size() == 0) {
    r.free = true;
    return r;
  }
  const Vec a = pot.vu.matrix(q) * du;
  const Vec sum = a + eta;
  const double den = sum.squaredNorm();
  if (a.norm() == 0.0 && eta.norm() == 0.0) {
    r.free = true;
    return r;
  }
  r.theta = den > 0.0 ? std::clamp(eta.dot(sum) / den, 0.0, 1.0) : 0.0;
  r.residual = (r.theta * a - (1.0 - r.theta) * eta).norm() / (a.norm() + eta.norm() + 1e-300);
  return r;
}

namespace detail {

/// dist((1-theta) zeta - theta V_z z', (1-theta) dR0(q, z')).
inline double theta_z_distance(const Potentials& pot, const State& q, const Vec& dz,
                               const Vec& zeta, const Vec& vzdz, double theta) {
  const double s = 1.0 - theta;
  const Vec target = s * zeta - theta * vzdz;
  if (s <= 0.0) return target.norm();
  return s * pot.r0.subdiff_distance(q, dz, target / s);
}

}  // namespace detail

/// Smallest theta in [0,1] with
/// dist((1-theta) zeta - theta V_z z', (1-theta) dR0(q, z')) <= tol * scale.
/// The distance is convex in theta: golden section locates the minimum and
/// bisection the smallest admissible point left of it.
inline ThetaEstimate recover_theta_z(const Potentials& pot, const State& q, const Vec& dz,
                                     const Vec& zeta, double tol = 1e-6) {
  ThetaEstimate r;
  if (dz.size() == 0) {
    r.free = true;
    return r;
  }
  const Vec vzdz = pot.vz.matrix(q) * dz;
  const double scale = zeta.norm() + vzdz.norm() + pot.r0.max_weight(q);
  auto f = [&](double th) { return detail::theta_z_distance(pot, q, dz, zeta, vzdz, th) / scale; };

  if (dz.norm() == 0.0) {
    const double d0 = f(0.0);
    if (d0 <= tol) {
      r.free = true;
      r.residual = d0;
    } else {
      r.theta = 1.0;
    }
    return r;
  }
  if (f(0.0) <= tol) {
    r.residual = f(0.0);
    return r;
  }
  double a = 0.0, b = 1.0;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    if (f1 <= f2) {
      b = x2, x2 = x1, f2 = f1;
      x1 = b - g * (b - a), f1 = f(x1);
    } else {
      a = x1, x1 = x2, f1 = f2;
      x2 = a + g * (b - a), f2 = f(x2);
    }
  }
  double best = 0.5 * (a + b);
  double fbest = f(best);
  if (fbest <= tol) {
    double lo = 0.0, hi = best;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) <= tol ? hi : lo) = mid;
    }
    best = hi;
    fbest = f(best);
  }
  r.theta = best;
  r.residual = fbest;
  return r;
}

/// Relative residual of the u-relation at a given theta.
inline double theta_u_residual(const Potentials& pot, const State& q, const Vec& du,
                               const Vec& eta, double theta) {
  if (du.size() == 0) return 0.0;
  const Vec a = pot.vu.matrix(q) * du;
  return (theta * a - (1.0 - theta) * eta).norm() / (a.norm() + eta.norm() + 1e-300);
}

/// Relative residual of the z-relation at a given theta.
inline double theta_z_residual(const Potentials& pot, const State& q, const Vec& dz,
                               const Vec& zeta, double theta) {
  if (dz.size() == 0) return 0.0;
  const Vec vzdz = pot.vz.matrix(q) * dz;
  const double scale = zeta.norm() + vzdz.norm() + pot.r0.max_weight(q);
  return detail::theta_z_distance(pot, q, dz, zeta, vzdz, theta) / scale;
}

struct ClassifyOptions {
  double tol_t = 1e-3;       ///< t' below this counts as zero
  double zero_tol = 1e-6;    ///< relative zero test for velocities and forces
  double theta_tol = 0.02;   ///< theta below this counts as 0
  double switch_tol = 0.02;  ///< bound on t' theta and on the alpha relation
  double residual_tol = 0.05;
  double gap_tol = 0.05;     ///< relative contact gap
};

struct PointClass {
  RegimeLabel label = RegimeLabel::Unclassified;
  ThetaPair theta;
  bool free_u = false;
  bool free_z = false;
  ExtendedValue gap;  ///< duality gap with the classification's zero gating
};

/// Switching t' theta = 0 and the alpha relation, each within tol.
inline bool check_alpha_constraints(const ThetaPair& p, double tprime, double alpha, double tol) {
  if (tprime * p.theta_u > tol || tprime * p.theta_z > tol) return false;
  if (alpha > 1.0) return p.theta_u * (1.0 - p.theta_z) <= tol;
  if (alpha == 1.0) return std::abs(p.theta_u - p.theta_z) <= tol;
  return p.theta_z * (1.0 - p.theta_u) <= tol;
}

/// Relative contact gap: |M_0 - <q', xi>| over |q'| |xi| + R_0. The zero tests
/// of M_0 act on quadratic terms, so zero_tol is a squared relative size. Near
/// a branch threshold both readings of the zero test are tried and the smaller
/// gap wins.
inline ExtendedValue contact_gap(const Potentials& pot, const MArgs& a, double alpha,
                                 double zero_tol) {
  const double r0 = a.q.m() ? pot.r0.eval(a.q, a.dq.z) : 0.0;
  const double scale = a.dq.norm() * a.xi.norm() + r0 + a.tau * 1e-300;
  auto rel = [&](double tol0) {
    M0Options o;
    o.tol0 = tol0;
    ExtendedValue g = duality_gap(pot, a, alpha, o);
    if (!g.infinite) g.value = scale > 0.0 ? std::abs(g.value) / scale : std::abs(g.value);
    return g;
  };
  ExtendedValue g = rel(zero_tol);
  if (!g.infinite && g.value == 0.0) return g;
  const ExtendedValue strict = rel(M0Options{}.tol0);
  if (!strict.infinite && (g.infinite || strict.value < g.value)) return strict;
  return g;
}

/// Label of one curve point with forces xi = -D_qE.
inline PointClass classify_point(const Potentials& pot, const State& q, double tprime,
                                 const State& dq, const State& xi, double alpha,
                                 const ClassifyOptions& opt = {}) {
  PointClass pc;
  const double speed = tprime + dq.norm();
  const double fscale = xi.norm() + (q.m() ? pot.r0.max_weight(q) : 0.0);
  // Velocities below the zero tolerance are treated as exactly zero.
  const Vec du = dq.u.norm() <= opt.zero_tol * speed ? Vec::Zero(dq.n()) : dq.u;
  const Vec dz = dq.z.norm() <= opt.zero_tol * speed ? Vec::Zero(dq.m()) : dq.z;
  const Vec eta = xi.u.norm() <= opt.zero_tol * fscale ? Vec::Zero(xi.n()) : xi.u;

  const ThetaEstimate tu = recover_theta_u(pot, q, du, eta);
  const ThetaEstimate tz = recover_theta_z(pot, q, dz, xi.z, opt.zero_tol);
  pc.free_u = tu.free;
  pc.free_z = tz.free;
  pc.theta = {tu.theta, tz.theta, tu.residual, tz.residual};

  const bool tau0 = tprime <= opt.tol_t;
  MArgs a{q, tau0 ? 0.0 : tprime, State(du, dz), State(eta, xi.z)};
  pc.gap = contact_gap(pot, a, alpha, opt.theta_tol * opt.theta_tol);

  if (tu.residual > opt.residual_tol || tz.residual > opt.residual_tol) return pc;

  if (!tau0) {
    if (tprime * (tu.free ? 0.0 : tu.theta) <= opt.switch_tol &&
        tprime * (tz.free ? 0.0 : tz.theta) <= opt.switch_tol) {
      pc.label = dq.norm() <= opt.zero_tol * speed ? RegimeLabel::Stationary : RegimeLabel::EuRz;
      if (tu.free) pc.theta.theta_u = 0.0;
      if (tz.free) pc.theta.theta_z = 0.0;
    }
    return pc;
  }

  // t' = 0: the label follows the dominant theta; free thetas take the value
  // that satisfies the alpha relation, which is then checked within tolerance.
  ThetaPair& th = pc.theta;
  RegimeLabel cand;
  if (alpha > 1.0) {
    if (tu.free) th.theta_u = 0.0;
    cand = th.theta_u <= opt.theta_tol ? RegimeLabel::EuVz : RegimeLabel::VuBz;
    if (tz.free) th.theta_z = cand == RegimeLabel::VuBz ? 1.0 : 0.0;
  } else if (alpha == 1.0) {
    if (tu.free && tz.free) {
      pc.label = RegimeLabel::Stationary;
      return pc;
    }
    if (tu.free) th.theta_u = th.theta_z;
    if (tz.free) th.theta_z = th.theta_u;
    // Near sticking z' and dist(zeta, dR0) vanish together and theta_z is
    // ill-conditioned; a shared theta satisfying both relations to force
    // accuracy theta_tol^2 is accepted as well.
    const double ftol = opt.theta_tol * opt.theta_tol;
    for (double cand_th : {th.theta_u, th.theta_z}) {
      if (std::abs(th.theta_u - th.theta_z) <= opt.theta_tol) break;
      if (theta_u_residual(pot, q, du, eta, cand_th) <= ftol &&
          theta_z_residual(pot, q, dz, xi.z, cand_th) <= ftol) {
        th.theta_u = th.theta_z = cand_th;
      }
    }
    cand = RegimeLabel::VuVz;
  } else {
    if (tz.free) th.theta_z = 0.0;
    cand = th.theta_z <= opt.theta_tol ? RegimeLabel::VuRz : RegimeLabel::BuVz;
    if (tu.free) th.theta_u = cand == RegimeLabel::BuVz ? 1.0 : 0.0;
  }
  const double rel_tol = alpha == 1.0 ? opt.theta_tol : opt.switch_tol;
  if (check_alpha_constraints(th, 0.0, alpha, rel_tol)) pc.label = cand;
  return pc;
}

struct RegimeSegment {
  double s_a = 0.0;
  double s_b = 0.0;
  std::size_t j_a = 0;  ///< first node
  std::size_t j_b = 0;  ///< last node
  RegimeLabel label = RegimeLabel::Unclassified;
  double theta_u = 0.0;  ///< mean over the segment
  double theta_z = 0.0;
  double max_residual = 0.0;
};

struct SegmentOptions {
  /// point.tol_t < 0 selects default_tol_t of the curve.
  ClassifyOptions point{-1.0};
  std::size_t min_run = 5;
  /// Runs shorter than this fraction of the curve length are also absorbed.
  double min_fraction = 0.0;
};

struct CurveClassification {
  std::vector<PointClass> points;
  std::vector<RegimeLabel> smoothed;
  std::vector<RegimeSegment> segments;
  double tol_t = 0.0;
};

namespace detail {

struct Run {
  std::size_t a, b;  // inclusive node range
  RegimeLabel label;
};

inline std::vector<Run> runs_of(const std::vector<RegimeLabel>& l) {
  std::vector<Run> r;
  for (std::size_t j = 0; j < l.size(); ++j) {
    if (!r.empty() && r.back().label == l[j]) {
      r.back().b = j;
    } else {
      r.push_back({j, j, l[j]});
    }
  }
  return r;
}

}  // namespace detail

/// Per-node labels, smoothed by absorbing short runs into their neighbours,
/// then merged into maximal segments.
inline CurveClassification segment_curve(const ParameterizedCurve& c, const EnergyModel& model,
                                         const Potentials& pot, double alpha,
                                         SegmentOptions opt = {}) {
  if (c.size() < 2) throw ConfigError("segment_curve: curve too short");
  CurveClassification out;
  out.tol_t = opt.point.tol_t >= 0.0 ? opt.point.tol_t : default_tol_t(c);
  opt.point.tol_t = out.tol_t;
  out.points.resize(c.size());
  for (std::size_t j = 0; j < c.size(); ++j)
    out.points[j] =
        classify_point(pot, c.q[j], c.dt[j], c.dq[j], model.force(c.t[j], c.q[j]), alpha, opt.point);

  std::vector<RegimeLabel> lab(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    lab[j] = out.points[j].label;
    if (lab[j] == RegimeLabel::Stationary) lab[j] = RegimeLabel::EuRz;
  }

  // Absorb the shortest short run into its longer neighbour until none is left.
  const double S = c.length();
  auto too_short = [&](const detail::Run& r) {
    const double len = c.s[r.b] - c.s[r.a];
    return r.b - r.a + 1 < opt.min_run || len < opt.min_fraction * S;
  };
  for (;;) {
    auto runs = detail::runs_of(lab);
    if (runs.size() <= 1) break;
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (!too_short(runs[i])) continue;
      if (!pick || runs[i].b - runs[i].a < runs[*pick].b - runs[*pick].a) pick = i;
    }
    if (!pick) break;
    const auto& r = runs[*pick];
    RegimeLabel into;
    if (*pick == 0) {
      into = runs[1].label;
    } else if (*pick + 1 == runs.size()) {
      into = runs[*pick - 1].label;
    } else {
      const auto& L = runs[*pick - 1];
      const auto& R = runs[*pick + 1];
      into = (L.b - L.a) >= (R.b - R.a) ? L.label : R.label;
    }
    for (std::size_t j = r.a; j <= r.b; ++j) lab[j] = into;
  }
  out.smoothed = lab;

  for (const auto& r : detail::runs_of(lab)) {
    RegimeSegment seg;
    seg.j_a = r.a;
    seg.j_b = r.b;
    seg.s_a = c.s[r.a];
    seg.s_b = r.b + 1 < c.size() ? c.s[r.b + 1] : c.s[r.b];
    seg.label = r.label;
    for (std::size_t j = r.a; j <= r.b; ++j) {
      const auto& p = out.points[j].theta;
      seg.theta_u += p.theta_u;
      seg.theta_z += p.theta_z;
      seg.max_residual = std::max({seg.max_residual, p.residual_u, p.residual_z});
    }
    const double cnt = static_cast<double>(r.b - r.a + 1);
    seg.theta_u /= cnt;
    seg.theta_z /= cnt;
    out.segments.push_back(seg);
  }
  return out;
}

inline std::vector<RegimeLabel> label_sequence(const std::vector<RegimeSegment>& segs) {
  std::vector<RegimeLabel> l;
  for (const auto& s : segs) l.push_back(s.label);
  return l;
}

/// Fraction of nodes, outside bands of `band` nodes around segment
/// boundaries, where "gap <= gap_tol" agrees with "label != Unclassified".
struct ContactAgreement {
  std::size_t counted = 0;
  std::size_t agree = 0;
  double fraction = 0.0;
};

inline ContactAgreement contact_agreement(const CurveClassification& cc, double gap_tol,
                                          std::size_t band = 5) {
  std::vector<bool> skip(cc.points.size(), false);
  for (std::size_t i = 1; i < cc.segments.size(); ++i) {
    const std::size_t b = cc.segments[i].j_a;
    const std::size_t lo = b >= band ? b - band : 0;
    for (std::size_t j = lo; j < std::min(cc.points.size(), b + band); ++j) skip[j] = true;
  }
  ContactAgreement r;
  for (std::size_t j = 0; j < cc.points.size(); ++j) {
    if (skip[j]) continue;
    const auto& p = cc.points[j];
    const bool contact = !p.gap.infinite && p.gap.value <= gap_tol;
    const bool labeled = p.label != RegimeLabel::Unclassified;
    ++r.counted;
    if (contact == labeled) ++r.agree;
  }
  r.fraction = r.counted ? static_cast<double>(r.agree) / r.counted : 1.0;
  return r;
}

struct RelaxationReport {
  bool applicable = false;
  bool terminal = false;          ///< {|D_uE| <= tol} is [s*, S]
  std::size_t j_star = 0;
  double s_star = 0.0;
  double pre_z_drift = 0.0;       ///< max |z(s) - z(0)| before s*
  double pre_t_drift = 0.0;       ///< max |t(s) - t(0)| before s*
  double post_u_error = 0.0;      ///< max |u(s) - M(t(s), z(s))| after s*
  ParamResidual reduced;          ///< reduced balance for (t, z) after s*
  std::size_t late_exits = 0;     ///< nodes after s* outside the set
};

/// Equilibrium set {|D_uE| <= tol}, its terminal-interval structure, and the
/// reduced system on [s*, S]. The reduced balance uses the reduced energy
/// I(t, z) = min_u E and, with relax_eps > 0, its relaxed M_0.
inline RelaxationReport verify_relaxation_structure(const ParameterizedCurve& c,
                                                    std::shared_ptr<const EnergyModel> model,
                                                    const Potentials& pot, double alpha,
                                                    double tol, double relax_eps = 0.0) {
  RelaxationReport r;
  if (!(alpha > 1.0)) return r;
  r.applicable = true;
  const std::size_t N = c.size();
  std::vector<bool> in(N);
  for (std::size_t j = 0; j < N; ++j) in[j] = model->Du(c.t[j], c.q[j]).norm() <= tol;

  std::size_t js = N;
  while (js > 0 && in[js - 1]) --js;
  r.j_star = js;
  r.s_star = js < N ? c.s[js] : c.s.back();
  for (std::size_t j = 0; j < js; ++j)
    if (in[j]) ++r.late_exits;  // members before the terminal run
  r.terminal = js < N && r.late_exits == 0;

  for (std::size_t j = 0; j < js; ++j) {
    r.pre_z_drift = std::max(r.pre_z_drift, (c.q[j].z - c.q.front().z).norm());
    r.pre_t_drift = std::max(r.pre_t_drift, std::abs(c.t[j] - c.t.front()));
  }
  if (js >= N) return r;

  Vec guess = c.q[js].u;
  for (std::size_t j = js; j < N; ++j) {
    guess = equilibrium_map(*model, c.t[j], c.q[j].z, guess);
    r.post_u_error = std::max(r.post_u_error, (c.q[j].u - guess).norm());
  }

  // Reduced curve (t, z) on [s*, S].
  ParameterizedCurve red;
  red.tag = c.tag;
  for (std::size_t j = js; j < N; ++j) {
    red.s.push_back(c.s[j]);
    red.t.push_back(c.t[j]);
    red.q.emplace_back(Vec(0), c.q[j].z);
  }
  if (red.size() < 2) return r;
  fill_derivatives(red);
  const ReducedEnergy I(model);
  Potentials rp{pot.r0, QuadraticForm::identity(0), pot.vz};
  ParamResidualOptions po;
  po.relax_eps = relax_eps;
  r.reduced = parameterized_energy_residual(red, I, rp, alpha, po);
  return r;
}

}  // namespace pbv
