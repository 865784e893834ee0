#pragma once

// Dissipation potentials: the 1-homogeneous rate-independent part R0(q, z'),
// quadratic viscous potentials V(q, v) = 1/2 <V(q) v, v>, their conjugates,
// the stable set K(q) = dR0(q, 0) and the resolvent of dR0 + A.

#include "pbv/types.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <utility>

namespace pbv {

enum class R0Mode {
  WeightedL1,  ///< R0(q, v) = sum_i w_i(q) |v_i|, K(q) is a box
  Isotropic,   ///< R0(q, v) = w(q) |v|, K(q) is a ball; only w_0 is used
};

/// Rate-independent dissipation R0 given by state-dependent weights.
class Dissipation {
 public:
  using WeightFn = std::function<Vec(const State&)>;

  Dissipation(R0Mode mode, WeightFn weights, double c0 = 0.0,
              double c1 = std::numeric_limits<double>::infinity())
      : mode_(mode), weights_(std::move(weights)), c0_(c0), c1_(c1) {}

  /// Constant weights.
  static Dissipation constant(R0Mode mode, Vec w) {
    const double lo = w.minCoeff();
    const double hi = w.maxCoeff();
    return Dissipation(mode, [w](const State&) { return w; }, lo, hi);
  }

  /// Unit weights, R0(v) = |v|_1 (m = 1 gives Sign(z')).
  static Dissipation unit(Eigen::Index m, R0Mode mode = R0Mode::WeightedL1) {
    return constant(mode, Vec::Ones(m));
  }

  R0Mode mode() const { return mode_; }
  double declared_lower() const { return c0_; }
  double declared_upper() const { return c1_; }

  Vec weights(const State& q) const {
    Vec w = weights_(q);
    if (mode_ == R0Mode::Isotropic) w.conservativeResize(1);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (!(w[i] > 0.0) || !std::isfinite(w[i]))
        throw ConfigError(detail::concat("R0 weight ", i, " is not positive (", w[i], ")"));
    }
    return w;
  }

  double eval(const State& q, const Vec& v) const {
    const Vec w = weights(q);
    if (mode_ == R0Mode::Isotropic) return w[0] * v.norm();
    return w.cwiseProduct(v.cwiseAbs()).sum();
  }

  /// Euclidean distance of zeta to K(q).
  double dist_to_stable(const State& q, const Vec& zeta) const {
    return (zeta - project_stable_euclid(q, zeta)).norm();
  }

  bool in_stable_set(const State& q, const Vec& zeta, double tol) const {
    return dist_to_stable(q, zeta) <= tol;
  }

  /// Euclidean projection onto K(q): clamping for the box, radial for the ball.
  Vec project_stable_euclid(const State& q, const Vec& zeta) const {
    const Vec w = weights(q);
    if (mode_ == R0Mode::Isotropic) {
      const double r = zeta.norm();
      return r <= w[0] ? Vec(zeta) : Vec(zeta * (w[0] / r));
    }
    return zeta.cwiseMax(-w).cwiseMin(w);
  }

  /// Euclidean projection of xi onto dR0(q, v). Components of v with
  /// |v_i| <= vtol are treated as zero.
  Vec project_subdiff(const State& q, const Vec& v, const Vec& xi, double vtol = 0.0) const {
    const Vec w = weights(q);
    if (mode_ == R0Mode::Isotropic) {
      const double nv = v.norm();
      if (nv <= vtol) return project_stable_euclid(q, xi);
      return v * (w[0] / nv);
    }
    Vec p(xi.size());
    for (Eigen::Index i = 0; i < xi.size(); ++i) {
      if (std::abs(v[i]) <= vtol)
        p[i] = std::clamp(xi[i], -w[i], w[i]);
      else
        p[i] = v[i] > 0 ? w[i] : -w[i];
    }
    return p;
  }

  double subdiff_distance(const State& q, const Vec& v, const Vec& xi, double vtol = 0.0) const {
    return (xi - project_subdiff(q, v, xi, vtol)).norm();
  }

  /// zeta in dR0(q, v) up to tol, via <zeta, w> <= R0(w) and <zeta, v> >= R0(v).
  bool in_subdiff(const State& q, const Vec& v, const Vec& zeta, double tol) const {
    if (dist_to_stable(q, zeta) > tol) return false;
    return zeta.dot(v) >= eval(q, v) - tol;
  }

  /// Largest weight, i.e. sup over K(q) of |omega| in the box/ball sense.
  double max_weight(const State& q) const { return weights(q).maxCoeff(); }

 private:
  R0Mode mode_;
  WeightFn weights_;
  double c0_, c1_;
};

/// Quadratic viscous potential V(q, v) = 1/2 <V(q) v, v> with SPD V(q).
class QuadraticForm {
 public:
  using MatrixFn = std::function<Mat(const State&)>;

  QuadraticForm(MatrixFn matrix, bool constant, double c0 = 0.0,
                double c1 = std::numeric_limits<double>::infinity())
      : matrix_(std::move(matrix)), constant_(constant), c0_(c0), c1_(c1) {}

  static QuadraticForm constant(Mat V) {
    double lo = 1.0, hi = 1.0;
    if (V.size()) {
      Eigen::SelfAdjointEigenSolver<Mat> es(V);
      lo = es.eigenvalues().minCoeff();
      hi = es.eigenvalues().maxCoeff();
    }
    return QuadraticForm([V](const State&) { return V; }, true, lo, hi);
  }

  static QuadraticForm identity(Eigen::Index d) { return constant(Mat::Identity(d, d)); }

  bool is_constant() const { return constant_; }
  double declared_lower() const { return c0_; }
  double declared_upper() const { return c1_; }

  Mat matrix(const State& q) const { return matrix_(q); }

  double eval(const State& q, const Vec& v) const {
    if (v.size() == 0) return 0.0;
    return 0.5 * v.dot(matrix(q) * v);
  }

  /// 1/2 <V(q)^{-1} xi, xi>.
  double conj(const State& q, const Vec& xi) const {
    if (xi.size() == 0) return 0.0;
    return 0.5 * xi.dot(solve(matrix(q), xi));
  }

  /// Solves V x = b for SPD V; throws with the condition number otherwise.
  static Vec solve(const Mat& V, const Vec& b) {
    Eigen::LLT<Mat> llt(V);
    if (llt.info() != Eigen::Success) {
      Eigen::JacobiSVD<Mat> svd(V);
      const auto& s = svd.singularValues();
      const double cond = s.size() ? s(0) / s(s.size() - 1) : 0.0;
      throw NumericalError(
          detail::concat("viscous matrix is not SPD (condition number ", cond, ")"));
    }
    Vec x = llt.solve(b);
    if (!x.allFinite()) throw NumericalError("singular viscous matrix");
    return x;
  }

 private:
  MatrixFn matrix_;
  bool constant_;
  double c0_, c1_;
};

/// Projection of zeta onto K(q) in the metric of M^{-1}:
///   argmin_{omega in K(q)} 1/2 <M^{-1}(zeta - omega), zeta - omega>.
/// Closed form for diagonal M with the box and for scalar M with the ball;
/// projected gradient otherwise.
inline Vec project_stable_metric(const Dissipation& r0, const State& q, const Mat& M,
                                 const Vec& zeta, double tol = 1e-12, int max_iter = 200000) {
  const Eigen::Index m = zeta.size();
  const bool diagonal = M.isDiagonal(0.0);
  const bool scalar = diagonal && (M.diagonal().array() == M(0, 0)).all();
  if ((r0.mode() == R0Mode::WeightedL1 && diagonal) || (r0.mode() == R0Mode::Isotropic && scalar) ||
      m == 1)
    return r0.project_stable_euclid(q, zeta);

  const Mat Minv = M.llt().solve(Mat::Identity(m, m));
  Eigen::SelfAdjointEigenSolver<Mat> es(Minv);
  const double L = es.eigenvalues().maxCoeff();
  Vec omega = r0.project_stable_euclid(q, zeta);
  for (int it = 0; it < max_iter; ++it) {
    const Vec grad = -Minv * (zeta - omega);
    const Vec next = r0.project_stable_euclid(q, omega - grad / L);
    const double change = (next - omega).norm();
    omega = next;
    if (change <= tol * (1.0 + omega.norm())) return omega;
  }
  throw ConvergenceError("projected gradient for K(q) did not converge", omega, 0.0);
}

/// The minimizer omega in K(q) of V_z^*(q, zeta - omega).
inline Vec project_K(const Dissipation& r0, const QuadraticForm& vz, const State& q,
                     const Vec& zeta) {
  return project_stable_metric(r0, q, vz.matrix(q), zeta);
}

/// W_z^*(q, zeta) = min_{omega in K(q)} V_z^*(q, zeta - omega).
inline double conj_Wz(const Dissipation& r0, const QuadraticForm& vz, const State& q,
                      const Vec& zeta) {
  if (zeta.size() == 0) return 0.0;
  const Vec omega = project_K(r0, vz, q, zeta);
  return vz.conj(q, zeta - omega);
}

/// Resolvent: the v solving 0 in dR0(q, v) + A v + g for SPD A.
/// Dual form v = -A^{-1}(g + omega), omega the A^{-1}-projection of -g onto K(q).
inline Vec resolvent(const Dissipation& r0, const State& q, const Mat& A, const Vec& g) {
  const Vec w = r0.weights(q);
  if (r0.mode() == R0Mode::WeightedL1 && A.isDiagonal(0.0)) {
    Vec v(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double shrink = std::max(std::abs(g[i]) - w[i], 0.0);
      v[i] = (g[i] > 0 ? -shrink : shrink) / A(i, i);
    }
    return v;
  }
  const Vec omega = project_stable_metric(r0, q, A, -g);
  return -QuadraticForm::solve(A, g + omega);
}

/// Resolvent of the z-equation with D_zE frozen at g:
/// v solves 0 in dR0(q, v) + eps V_z(q) v + g.
inline Vec prox_z(const Dissipation& r0, const QuadraticForm& vz, const State& q, const Vec& g,
                  double eps) {
  if (!(eps > 0.0)) throw ConfigError("prox_z requires eps > 0");
  return resolvent(r0, q, eps * vz.matrix(q), g);
}

/// The triple (R0, V_u, V_z) of a multi-rate system.
struct Potentials {
  Dissipation r0;
  QuadraticForm vu;
  QuadraticForm vz;

  /// Unit weights and identity viscous matrices ("standard" potentials).
  static Potentials standard(Eigen::Index n, Eigen::Index m) {
    return {Dissipation::unit(m), QuadraticForm::identity(n), QuadraticForm::identity(m)};
  }

  double conj_Wz(const State& q, const Vec& zeta) const { return pbv::conj_Wz(r0, vz, q, zeta); }
};

/// Sampled check of the declared coercivity constants of a quadratic form on
/// a set of states: returns the observed (min, max) eigenvalues and whether
/// they lie in the declared interval and the matrix stayed symmetric.
struct FormCheck {
  double min_eig = std::numeric_limits<double>::infinity();
  double max_eig = -std::numeric_limits<double>::infinity();
  double max_asymmetry = 0.0;
  bool constant_ok = true;
  bool ok = true;
};

template <typename StateRange>
FormCheck check_form(const QuadraticForm& form, const StateRange& states) {
  FormCheck rep;
  std::optional<Mat> first;
  for (const State& q : states) {
    const Mat V = form.matrix(q);
    rep.max_asymmetry = std::max(rep.max_asymmetry, (V - V.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (V + V.transpose()));
    rep.min_eig = std::min(rep.min_eig, es.eigenvalues().minCoeff());
    rep.max_eig = std::max(rep.max_eig, es.eigenvalues().maxCoeff());
    if (!first) first = V;
    else if (form.is_constant() && (V - *first).cwiseAbs().maxCoeff() > 0.0)
      rep.constant_ok = false;
  }
  rep.ok = rep.constant_ok && rep.max_asymmetry <= 1e-12 && rep.min_eig > 0.0 &&
           rep.min_eig >= form.declared_lower() * (1 - 1e-12) &&
           rep.max_eig <= form.declared_upper() * (1 + 1e-12);
  return rep;
}

}  // namespace pbv
