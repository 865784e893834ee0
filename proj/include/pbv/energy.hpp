#pragma once

// Energy models E(t, u, z), assumption diagnostics, the equilibrium map
// M(t, z) = argmin_u E(t, u, z) and the reduced energy I(t, z) = E(t, M(t, z), z).

#include "pbv/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace pbv {

struct EnergyEval {
  double E = 0.0;
  double dtE = 0.0;
  Vec DuE;
  Vec DzE;
};

/// Declared structural constants; absent ones are not checked.
struct EnergyConstants {
  std::optional<double> c0;      ///< coercivity: E >= c0 |q|^2 - c0_hat
  std::optional<double> c0_hat;
  std::optional<double> c1;      ///< power control: |dtE| <= c1 E
  std::optional<double> mu;      ///< uniform convexity in u
};

class EnergyModel {
 public:
  virtual ~EnergyModel() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index n() const = 0;
  virtual Eigen::Index m() const = 0;

  virtual double energy(double t, const State& q) const = 0;
  virtual double dt(double t, const State& q) const = 0;
  virtual Vec Du(double t, const State& q) const = 0;
  virtual Vec Dz(double t, const State& q) const = 0;
  virtual Mat Duu(double t, const State& q) const = 0;
  virtual Mat Duz(double t, const State& q) const = 0;
  virtual Mat Dzz(double t, const State& q) const = 0;

  virtual EnergyConstants constants() const { return {}; }

  /// All first-order quantities; throws ModelError on non-finite output.
  EnergyEval eval(double t, const State& q) const {
    EnergyEval r{energy(t, q), dt(t, q), Du(t, q), Dz(t, q)};
    if (!std::isfinite(r.E) || !std::isfinite(r.dtE) || !r.DuE.allFinite() || !r.DzE.allFinite())
      throw ModelError(detail::concat(name(), ": non-finite energy at t=", t, " q=(",
                                      q.u.transpose(), " | ", q.z.transpose(), ")"));
    return r;
  }

  /// -D_qE split as (eta, zeta).
  State force(double t, const State& q) const { return {-Du(t, q), -Dz(t, q)}; }
};

/// E(t,u,z) = 1/2 (u - z)^2 + 1/2 z^2 - t u.
class QuadraticExample final : public EnergyModel {
 public:
  std::string name() const override { return "example1"; }
  Eigen::Index n() const override { return 1; }
  Eigen::Index m() const override { return 1; }

  double energy(double t, const State& q) const override {
    const double u = q.u[0], z = q.z[0];
    return 0.5 * (u - z) * (u - z) + 0.5 * z * z - t * u;
  }
  double dt(double, const State& q) const override { return -q.u[0]; }
  Vec Du(double t, const State& q) const override {
    return Vec::Constant(1, q.u[0] - q.z[0] - t);
  }
  Vec Dz(double, const State& q) const override {
    return Vec::Constant(1, 2.0 * q.z[0] - q.u[0]);
  }
  Mat Duu(double, const State&) const override { return Mat::Constant(1, 1, 1.0); }
  Mat Duz(double, const State&) const override { return Mat::Constant(1, 1, -1.0); }
  Mat Dzz(double, const State&) const override { return Mat::Constant(1, 1, 2.0); }

  EnergyConstants constants() const override {
    // E >= c |q|^2 - t u with c the smallest eigenvalue of [[1,-1],[-1,2]]/2.
    const double lam = 0.5 * (1.5 - std::sqrt(1.25));
    return {0.5 * lam, 1.0 / lam, std::nullopt, 1.0};
  }
};

/// E(t,u,z) = 1/2 (u - g(z))^2 + F(z) - t u with g(z) = 4z^3 - 4z and
/// F' given in closed form. F itself is tabulated by quadrature from
/// z0 = -1.2 (F(z0) = 0) and evaluated by cubic Hermite interpolation.
class CubicNonconvexExample final : public EnergyModel {
 public:
  static constexpr double z_ref = -1.2;

  explicit CubicNonconvexExample(double z_lo = -3.0, double z_hi = 3.0, double step = 1e-4)
      : lo_(z_lo), step_(step) {
    const auto cells = static_cast<std::size_t>(std::llround((z_hi - z_lo) / step));
    table_.resize(cells + 1);
    const auto ref_index = static_cast<std::ptrdiff_t>(std::llround((z_ref - lo_) / step_));
    const double z_at_ref = lo_ + static_cast<double>(ref_index) * step_;
    table_[static_cast<std::size_t>(ref_index)] = integrate_Fp(z_ref, z_at_ref);
    for (auto i = ref_index; i < static_cast<std::ptrdiff_t>(cells); ++i)
      table_[i + 1] = table_[i] + integrate_Fp(node(i), node(i + 1));
    for (auto i = ref_index; i > 0; --i)
      table_[i - 1] = table_[i] - integrate_Fp(node(i - 1), node(i));
  }

  std::string name() const override { return "example2"; }
  Eigen::Index n() const override { return 1; }
  Eigen::Index m() const override { return 1; }

  static double g(double z) { return 4.0 * z * z * z - 4.0 * z; }
  static double dg(double z) { return 12.0 * z * z - 4.0; }
  static double d2g(double z) { return 24.0 * z; }

  static double Fp(double z) {
    const double a = z + 1.0;
    const double b = z + 0.5;
    return -1.0 + a * a * (-40.0 + 10.0 * a * a + 38.0 * std::exp(-10.0 * b * b));
  }

  static double Fpp(double z) {
    const double a = z + 1.0;
    const double b = z + 0.5;
    const double gauss = std::exp(-10.0 * b * b);
    const double inner = -40.0 + 10.0 * a * a + 38.0 * gauss;
    const double dinner = 20.0 * a - 760.0 * b * gauss;
    return 2.0 * a * inner + a * a * dinner;
  }

  /// F(z) with F(z_ref) = 0.
  double F(double z) const {
    const double x = (z - lo_) / step_;
    const auto last = static_cast<std::ptrdiff_t>(table_.size()) - 1;
    auto i = static_cast<std::ptrdiff_t>(std::floor(x));
    if (i < 0 || i >= last) {
      // Outside the table: integrate from the nearest end.
      const auto end = i < 0 ? std::ptrdiff_t{0} : last;
      return table_[end] + integrate_Fp(node(end), z);
    }
    const double z0 = node(i), z1 = node(i + 1);
    const double s = (z - z0) / step_;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * table_[i] + h10 * step_ * Fp(z0) + h01 * table_[i + 1] + h11 * step_ * Fp(z1);
  }

  double energy(double t, const State& q) const override {
    const double u = q.u[0], z = q.z[0];
    const double r = u - g(z);
    return 0.5 * r * r + F(z) - t * u;
  }
  double dt(double, const State& q) const override { return -q.u[0]; }
  Vec Du(double t, const State& q) const override {
    return Vec::Constant(1, q.u[0] - g(q.z[0]) - t);
  }
  Vec Dz(double, const State& q) const override {
    const double z = q.z[0];
    return Vec::Constant(1, Fp(z) + dg(z) * (g(z) - q.u[0]));
  }
  Mat Duu(double, const State&) const override { return Mat::Constant(1, 1, 1.0); }
  Mat Duz(double, const State& q) const override { return Mat::Constant(1, 1, -dg(q.z[0])); }
  Mat Dzz(double, const State& q) const override {
    const double z = q.z[0];
    return Mat::Constant(1, 1, Fpp(z) + d2g(z) * (g(z) - q.u[0]) + dg(z) * dg(z));
  }

  EnergyConstants constants() const override { return {std::nullopt, std::nullopt, std::nullopt, 1.0}; }

 private:
  double node(std::ptrdiff_t i) const { return lo_ + static_cast<double>(i) * step_; }

  // 5-point Gauss-Legendre, subdivided so each panel is at most one table step.
  double integrate_Fp(double a, double b) const {
    static constexpr std::array<double, 5> x{0.0, -0.5384693101056831, 0.5384693101056831,
                                             -0.9061798459386640, 0.9061798459386640};
    static constexpr std::array<double, 5> w{0.5688888888888889, 0.4786286704993665,
                                             0.4786286704993665, 0.2369268850561891,
                                             0.2369268850561891};
    const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / step_)));
    const double hp = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double c = a + (p + 0.5) * hp;
      for (std::size_t k = 0; k < 5; ++k) sum += w[k] * Fp(c + 0.5 * hp * x[k]);
    }
    return 0.5 * hp * sum;
  }

  double lo_;
  double step_;
  std::vector<double> table_;
};

/// Built-in models by name ("example1", "example2").
inline std::shared_ptr<const EnergyModel> make_builtin_model(const std::string& name) {
  if (name == "example1") return std::make_shared<QuadraticExample>();
  if (name == "example2") return std::make_shared<CubicNonconvexExample>();
  throw ConfigError("unknown energy model '" + name + "'");
}

// ---------------------------------------------------------------------------
// Equilibrium map and reduced energy

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 100;
};

/// u = M(t, z), the unique zero of D_uE(t, ., z). Newton with backtracking on
/// E(t, ., z); requires uniform convexity in u.
inline Vec equilibrium_map(const EnergyModel& model, double t, const Vec& z, const Vec& u_guess,
                           const NewtonOptions& opt = {}) {
  State q(u_guess, z);
  Vec r = model.Du(t, q);
  for (int it = 0; it < opt.max_iter; ++it) {
    if (r.norm() <= opt.tol) return q.u;
    const Vec step = model.Duu(t, q).ldlt().solve(-r);
    double lambda = 1.0;
    const double E0 = model.energy(t, q);
    State trial = q;
    for (int ls = 0; ls < 40; ++ls) {
      trial.u = q.u + lambda * step;
      if (model.energy(t, trial) <= E0 + 1e-4 * lambda * r.dot(step) ||
          model.Du(t, trial).norm() < r.norm())
        break;
      lambda *= 0.5;
    }
    q = trial;
    r = model.Du(t, q);
  }
  if (r.norm() <= opt.tol) return q.u;
  throw ConvergenceError("equilibrium map: Newton did not converge", q.u, r.norm());
}

struct ReducedValue {
  double I = 0.0;
  Vec DzI;
  Vec u;  ///< M(t, z)
};

/// I(t, z) = E(t, M(t,z), z) and D_zI = D_zE(t, M(t,z), z).
inline ReducedValue reduced_I(const EnergyModel& model, double t, const Vec& z,
                              const Vec& u_guess) {
  ReducedValue r;
  r.u = equilibrium_map(model, t, z, u_guess);
  const State q(r.u, z);
  r.I = model.energy(t, q);
  r.DzI = model.Dz(t, q);
  return r;
}

inline Vec reduced_I_guess(const EnergyModel& model) { return Vec::Zero(model.n()); }

/// The reduced rate-independent system on z alone: n = 0, energy I(t, z).
/// Carries a mutable warm start for Newton; not for concurrent use.
class ReducedEnergy final : public EnergyModel {
 public:
  explicit ReducedEnergy(std::shared_ptr<const EnergyModel> full) : full_(std::move(full)) {
    warm_ = Vec::Zero(full_->n());
  }

  std::string name() const override { return full_->name() + "-reduced"; }
  Eigen::Index n() const override { return 0; }
  Eigen::Index m() const override { return full_->m(); }

  double energy(double t, const State& q) const override { return full_->energy(t, lift(t, q)); }
  double dt(double t, const State& q) const override { return full_->dt(t, lift(t, q)); }
  Vec Du(double, const State&) const override { return Vec(0); }
  Vec Dz(double t, const State& q) const override { return full_->Dz(t, lift(t, q)); }
  Mat Duu(double, const State&) const override { return Mat(0, 0); }
  Mat Duz(double, const State&) const override { return Mat(0, full_->m()); }
  Mat Dzz(double t, const State& q) const override {
    // Schur complement: D_zz I = Ezz - Ezu Euu^{-1} Euz.
    const State l = lift(t, q);
    const Mat Euz = full_->Duz(t, l);
    return full_->Dzz(t, l) - Euz.transpose() * full_->Duu(t, l).ldlt().solve(Euz);
  }

  State lift(double t, const State& q) const {
    warm_ = equilibrium_map(*full_, t, q.z, warm_);
    return State(warm_, q.z);
  }

 private:
  std::shared_ptr<const EnergyModel> full_;
  mutable Vec warm_;
};

// ---------------------------------------------------------------------------
// Assumption diagnostics

/// Axis-aligned sampling region in (t, u, z).
struct SamplingBox {
  double t_lo = 0.0, t_hi = 1.0;
  Vec u_lo, u_hi, z_lo, z_hi;

  static SamplingBox scalar(double t0, double t1, double u0, double u1, double z0, double z1) {
    return {t0, t1, Vec::Constant(1, u0), Vec::Constant(1, u1), Vec::Constant(1, z0),
            Vec::Constant(1, z1)};
  }
};

struct AssumptionReport {
  std::size_t samples = 0;
  double energy_shift = 0.0;      ///< constant added to E before forming ratios
  double min_coercivity_gap = 0;  ///< min of E - (c0|q|^2 - c0_hat), if declared
  double max_power_ratio = 0.0;   ///< max |dtE| / (E + shift)
  double min_convexity = std::numeric_limits<double>::infinity();  ///< min eig of D_uu E
  double max_mixed = 0.0;         ///< max |D_uz E| entry
  double max_gradient_error = 0;  ///< relative FD mismatch of D_uE, D_zE, dtE
  bool coercivity_ok = true;
  bool power_ok = true;
  bool convexity_ok = true;
  bool gradients_ok = true;
};

/// Relative mismatch between analytic first derivatives and central finite
/// differences of E at (t, q) with step h.
inline double gradient_fd_error(const EnergyModel& model, double t, const State& q, double h) {
  const EnergyEval ev = model.eval(t, q);
  double err = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); };
  err = std::max(err, rel((model.energy(t + h, q) - model.energy(t - h, q)) / (2 * h), ev.dtE));
  for (Eigen::Index i = 0; i < q.n(); ++i) {
    State p = q, mns = q;
    p.u[i] += h;
    mns.u[i] -= h;
    err = std::max(err, rel((model.energy(t, p) - model.energy(t, mns)) / (2 * h), ev.DuE[i]));
  }
  for (Eigen::Index i = 0; i < q.m(); ++i) {
    State p = q, mns = q;
    p.z[i] += h;
    mns.z[i] -= h;
    err = std::max(err, rel((model.energy(t, p) - model.energy(t, mns)) / (2 * h), ev.DzE[i]));
  }
  return err;
}

/// Samples the box uniformly (fixed seed) and reports worst-case ratios for
/// the declared constants. E is shifted so that E + shift >= 1 on the samples
/// before the power-control ratio is formed.
inline AssumptionReport check_assumptions(const EnergyModel& model, const SamplingBox& box,
                                          std::size_t samples, unsigned seed = 12345) {
  if (!(box.t_hi >= box.t_lo) || box.u_lo.size() != model.n() || box.z_lo.size() != model.m())
    throw ConfigError("check_assumptions: degenerate or mismatched sampling box");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto lerp = [&](double a, double b) { return a + (b - a) * U(rng); };

  struct Sample {
    double t;
    State q;
  };
  std::vector<Sample> pts;
  pts.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    Sample s{lerp(box.t_lo, box.t_hi), State(Vec(model.n()), Vec(model.m()))};
    for (Eigen::Index i = 0; i < model.n(); ++i) s.q.u[i] = lerp(box.u_lo[i], box.u_hi[i]);
    for (Eigen::Index i = 0; i < model.m(); ++i) s.q.z[i] = lerp(box.z_lo[i], box.z_hi[i]);
    pts.push_back(std::move(s));
  }

  AssumptionReport rep;
  rep.samples = samples;
  double min_E = std::numeric_limits<double>::infinity();
  for (const auto& s : pts) min_E = std::min(min_E, model.energy(s.t, s.q));
  rep.energy_shift = std::max(0.0, 1.0 - min_E);

  const EnergyConstants c = model.constants();
  rep.min_coercivity_gap = std::numeric_limits<double>::infinity();
  for (const auto& s : pts) {
    const EnergyEval ev = model.eval(s.t, s.q);
    if (c.c0 && c.c0_hat) {
      const double q2 = s.q.u.squaredNorm() + s.q.z.squaredNorm();
      rep.min_coercivity_gap = std::min(rep.min_coercivity_gap, ev.E - (*c.c0 * q2 - *c.c0_hat));
    }
    rep.max_power_ratio = std::max(rep.max_power_ratio, std::abs(ev.dtE) / (ev.E + rep.energy_shift));
    if (model.n() > 0) {
      Eigen::SelfAdjointEigenSolver<Mat> es(model.Duu(s.t, s.q));
      rep.min_convexity = std::min(rep.min_convexity, es.eigenvalues().minCoeff());
      rep.max_mixed = std::max(rep.max_mixed, model.Duz(s.t, s.q).cwiseAbs().maxCoeff());
    }
    rep.max_gradient_error = std::max(rep.max_gradient_error, gradient_fd_error(model, s.t, s.q, 1e-5));
  }
  if (c.c0 && c.c0_hat) rep.coercivity_ok = rep.min_coercivity_gap >= -1e-12;
  if (c.c1) rep.power_ok = rep.max_power_ratio <= *c.c1;
  rep.power_ok = rep.power_ok && std::isfinite(rep.max_power_ratio);
  if (c.mu) rep.convexity_ok = rep.min_convexity >= *c.mu - 1e-12;
  rep.gradients_ok = rep.max_gradient_error <= 1e-6;
  return rep;
}

}  // namespace pbv
