#pragma once

// Parameterized curves s -> (t(s), q(s)) built from viscous trajectories.

#include "pbv/viscous_solver.hpp"

// Boost 1.74 pchip calls unqualified isnan; <math.h> declares it globally.
#include <math.h>
#include <boost/math/interpolators/pchip.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace pbv {

enum class CurveTag { Arclength, Custom, Normalized };

inline std::string to_string(CurveTag tag) {
  switch (tag) {
    case CurveTag::Arclength: return "arclength";
    case CurveTag::Custom: return "custom";
    case CurveTag::Normalized: return "normalized";
  }
  return "unknown";
}

/// Samples (s_j, t_j, q_j) with difference-quotient derivatives.
struct ParameterizedCurve {
  std::vector<double> s;
  std::vector<double> t;
  std::vector<State> q;
  std::vector<double> dt;
  std::vector<State> dq;
  CurveTag tag = CurveTag::Arclength;

  std::size_t size() const { return s.size(); }
  bool empty() const { return s.empty(); }
  double length() const { return s.empty() ? 0.0 : s.back() - s.front(); }
  Eigen::Index n() const { return q.empty() ? 0 : q.front().n(); }
  Eigen::Index m() const { return q.empty() ? 0 : q.front().m(); }

  /// t' + |q'| at node j.
  double speed(std::size_t j) const { return dt[j] + dq[j].norm(); }
};

inline constexpr std::size_t kDefaultCurveNodes = 4096;

/// Central differences in the interior, one-sided at the ends.
inline void fill_derivatives(ParameterizedCurve& c) {
  const std::size_t N = c.size();
  c.dt.assign(N, 0.0);
  c.dq.assign(N, State(Vec::Zero(c.n()), Vec::Zero(c.m())));
  if (N < 2) return;
  for (std::size_t j = 0; j < N; ++j) {
    const std::size_t a = j == 0 ? 0 : j - 1;
    const std::size_t b = j + 1 == N ? N - 1 : j + 1;
    const double ds = c.s[b] - c.s[a];
    c.dt[j] = (c.t[b] - c.t[a]) / ds;
    c.dq[j] = (1.0 / ds) * (c.q[b] - c.q[a]);
  }
}

/// Resamples knots (x_k, t_k, q_k), x strictly increasing, onto `nodes`
/// uniform points of [x_0, x_K] with monotone cubic (PCHIP) interpolation.
/// PCHIP keeps t nondecreasing and does not overshoot across jumps.
inline ParameterizedCurve resample_uniform(const std::vector<double>& x,
                                           const std::vector<double>& t,
                                           const std::vector<State>& q, std::size_t nodes,
                                           CurveTag tag) {
  if (x.size() != t.size() || x.size() != q.size()) throw ConfigError("resample: size mismatch");
  if (x.size() < 2) throw ConfigError("resample: need at least two knots");
  if (nodes < 2) throw ConfigError("resample: need at least two output nodes");
  for (std::size_t k = 1; k < x.size(); ++k)
    if (!(x[k] > x[k - 1])) throw NumericalError("resample: knots not strictly increasing");

  const Eigen::Index n = q.front().n(), m = q.front().m();
  const std::size_t K = x.size();
  std::vector<double> xs = x;
  std::vector<std::vector<double>> comps(1 + n + m, std::vector<double>(K));
  for (std::size_t k = 0; k < K; ++k) {
    comps[0][k] = t[k];
    for (Eigen::Index i = 0; i < n; ++i) comps[1 + i][k] = q[k].u[i];
    for (Eigen::Index i = 0; i < m; ++i) comps[1 + n + i][k] = q[k].z[i];
  }
  // PCHIP needs four knots: subdivide short inputs linearly.
  if (K < 4) {
    std::vector<double> xl;
    std::vector<std::vector<double>> cl(comps.size());
    for (std::size_t k = 0; k + 1 < K; ++k) {
      for (int r = 0; r < 3; ++r) {
        const double w = r / 3.0;
        xl.push_back(xs[k] + w * (xs[k + 1] - xs[k]));
        for (std::size_t c = 0; c < comps.size(); ++c)
          cl[c].push_back(comps[c][k] + w * (comps[c][k + 1] - comps[c][k]));
      }
    }
    xl.push_back(xs.back());
    for (std::size_t c = 0; c < comps.size(); ++c) cl[c].push_back(comps[c].back());
    xs = std::move(xl);
    comps = std::move(cl);
  }

  const double x0 = xs.front(), x1 = xs.back();
  ParameterizedCurve out;
  out.tag = tag;
  out.s.resize(nodes);
  for (std::size_t j = 0; j < nodes; ++j)
    out.s[j] = j + 1 == nodes ? x1 : x0 + (x1 - x0) * static_cast<double>(j) / (nodes - 1);

  std::vector<std::vector<double>> vals(comps.size(), std::vector<double>(nodes));
  for (std::size_t c = 0; c < comps.size(); ++c) {
    auto xc = xs;
    auto yc = comps[c];
    boost::math::interpolators::pchip<std::vector<double>> p(std::move(xc), std::move(yc));
    for (std::size_t j = 0; j < nodes; ++j) vals[c][j] = p(out.s[j]);
    vals[c].front() = comps[c].front();
    vals[c].back() = comps[c].back();
  }

  out.t = vals[0];
  for (std::size_t j = 1; j < nodes; ++j) out.t[j] = std::max(out.t[j], out.t[j - 1]);
  out.q.resize(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    Vec u(n), z(m);
    for (Eigen::Index i = 0; i < n; ++i) u[i] = vals[1 + i][j];
    for (Eigen::Index i = 0; i < m; ++i) z[i] = vals[1 + n + i][j];
    out.q[j] = State(std::move(u), std::move(z));
  }
  fill_derivatives(out);
  return out;
}

namespace detail {

template <typename Increment>
ParameterizedCurve reparam_by(const Trajectory& traj, std::size_t nodes, CurveTag tag,
                              Increment ds_of) {
  if (traj.empty()) throw ConfigError("reparam: empty trajectory");
  std::vector<double> x, t;
  std::vector<State> q;
  x.reserve(traj.size());
  x.push_back(0.0);
  t.push_back(traj[0].t);
  q.push_back(traj[0].q);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double h = traj[k].t - traj[k - 1].t;
    const double ds = ds_of(h, traj[k].q - traj[k - 1].q);
    if (!(ds > 0.0)) continue;
    x.push_back(x.back() + ds);
    t.push_back(traj[k].t);
    q.push_back(traj[k].q);
  }
  if (x.size() == 1) {
    // Single node: a degenerate but valid curve of zero length is not
    // resamplable, so duplicate with unit length in s.
    x.push_back(1.0);
    t.push_back(t.back());
    q.push_back(q.back());
  }
  return resample_uniform(x, t, q, nodes, tag);
}

}  // namespace detail

/// s = int (1 + |q'|) dt. For the piecewise linear interpolant of the
/// trajectory the increment h + |dq| is exact.
inline ParameterizedCurve arclength_reparam(const Trajectory& traj,
                                            std::size_t nodes = kDefaultCurveNodes) {
  return detail::reparam_by(traj, nodes, CurveTag::Arclength,
                            [](double h, const State& d) { return h + d.norm(); });
}

/// s' = max(floor, |u'|, |z'|), exact for piecewise constant velocities.
inline ParameterizedCurve custom_reparam(const Trajectory& traj, double floor,
                                         std::size_t nodes = kDefaultCurveNodes) {
  if (!(floor > 0.0)) throw ConfigError("custom_reparam: floor must be positive");
  return detail::reparam_by(traj, nodes, CurveTag::Custom, [floor](double h, const State& d) {
    return std::max({floor * h, d.u.norm(), d.z.norm()});
  });
}

/// Reparameterization by sigma = int (t' + |q'|) ds. Plateaus with zero
/// increment collapse to points.
inline ParameterizedCurve normalize(const ParameterizedCurve& c,
                                    std::size_t nodes = kDefaultCurveNodes) {
  if (c.size() < 2) throw ConfigError("normalize: curve needs at least two nodes");
  std::vector<double> x{0.0}, t{c.t.front()};
  std::vector<State> q{c.q.front()};
  double total = 0.0;
  for (std::size_t j = 1; j < c.size(); ++j) total += (c.t[j] - c.t[j - 1]) + (c.q[j] - c.q[j - 1]).norm();
  if (!(total > 0.0)) throw NumericalError("normalize: totally degenerate curve");
  const double floor = 1e-14 * total;
  for (std::size_t j = 1; j < c.size(); ++j) {
    const double d = (c.t[j] - c.t[j - 1]) + (c.q[j] - c.q[j - 1]).norm();
    if (d <= floor) continue;
    x.push_back(x.back() + d);
    t.push_back(c.t[j]);
    q.push_back(c.q[j]);
  }
  // Keep the exact endpoint even if the last increment was dropped.
  t.back() = c.t.back();
  q.back() = c.q.back();
  return resample_uniform(x, t, q, nodes, CurveTag::Normalized);
}

/// max_j |(t, q)_a(j) - (t, q)_b(j)| after resampling both normalized curves
/// onto a common relative grid sigma / S in [0, 1].
inline double sup_distance(const ParameterizedCurve& a, const ParameterizedCurve& b,
                           std::size_t nodes = kDefaultCurveNodes) {
  auto rescale = [nodes](const ParameterizedCurve& c) {
    std::vector<double> x(c.size());
    const double S = c.length();
    for (std::size_t j = 0; j < c.size(); ++j) x[j] = (c.s[j] - c.s.front()) / S;
    return resample_uniform(x, c.t, c.q, nodes, c.tag);
  };
  const auto ra = rescale(a), rb = rescale(b);
  double d = 0.0;
  for (std::size_t j = 0; j < nodes; ++j) {
    const double dt = ra.t[j] - rb.t[j];
    const State dq = ra.q[j] - rb.q[j];
    d = std::max(d, std::sqrt(dt * dt + dq.u.squaredNorm() + dq.z.squaredNorm()));
  }
  return d;
}

}  // namespace pbv
