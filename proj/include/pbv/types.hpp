#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pbv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Point q = (u, z) of the extended phase space R^n x R^m.
struct State {
  Vec u;
  Vec z;

  State() = default;
  State(Vec u_, Vec z_) : u(std::move(u_)), z(std::move(z_)) {}

  static State scalar(double u, double z) {
    return State(Vec::Constant(1, u), Vec::Constant(1, z));
  }

  Eigen::Index n() const { return u.size(); }
  Eigen::Index m() const { return z.size(); }

  Vec stacked() const {
    Vec q(u.size() + z.size());
    q << u, z;
    return q;
  }

  double norm() const { return std::sqrt(u.squaredNorm() + z.squaredNorm()); }

  bool finite() const { return u.allFinite() && z.allFinite(); }
};

inline State operator+(const State& a, const State& b) { return {a.u + b.u, a.z + b.z}; }
inline State operator-(const State& a, const State& b) { return {a.u - b.u, a.z - b.z}; }
inline State operator*(double s, const State& a) { return {s * a.u, s * a.z}; }

inline double dot(const State& a, const State& b) { return a.u.dot(b.u) + a.z.dot(b.z); }

// Error hierarchy. ConfigError maps to CLI exit code 1, NumericalError to 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelError : NumericalError {
  using NumericalError::NumericalError;
};

/// Raised by iterative solvers; carries the last iterate and residual.
struct ConvergenceError : NumericalError {
  ConvergenceError(const std::string& what, Vec last, double res)
      : NumericalError(what), last_iterate(std::move(last)), residual(res) {}
  Vec last_iterate;
  double residual;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail
}  // namespace pbv
