#pragma once

// Run configuration: one JSON document per experiment.

#include "pbv/io.hpp"

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace pbv {

struct ReparamChoice {
  CurveTag kind = CurveTag::Arclength;
  double floor = 0.5;  ///< custom reparameterization only
  std::size_t nodes = kDefaultCurveNodes;
};

struct GammaPoint {
  std::string name;
  MArgs args;
  double alpha = 2.0;
};

struct GammaConfig {
  std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<GammaPoint> points;  ///< empty: the canonical battery
  double tol = 1e-2;
};

struct RunConfig {
  std::string model;
  R0Mode r0_mode = R0Mode::WeightedL1;
  Vec r0_weights;
  Mat Vu;
  Mat Vz;
  double eps = 0.0;
  std::vector<double> eps_list;  ///< sweeps
  double alpha = 0.0;
  double t0 = 0.0;
  double T = 0.0;
  State q0;
  SolverConfig solver;
  ReparamChoice reparam;
  SegmentOptions segment;
  double max_unclassified_fraction = 0.0;  ///< exit code 3 above this
  GammaConfig gamma;
  std::string out_dir = "out";

  Potentials potentials() const {
    return {Dissipation::constant(r0_mode, r0_weights), QuadraticForm::constant(Vu),
            QuadraticForm::constant(Vz)};
  }

  std::shared_ptr<const EnergyModel> energy() const { return make_builtin_model(model); }

  RateParams rate() const { return RateParams(eps, alpha); }

  void validate() const {
    const auto m = energy();
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
    if (eps_list.empty() && !(eps > 0.0)) throw ConfigError("eps must be positive");
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
      if (!(eps_list[i] > 0.0)) throw ConfigError("eps_list entries must be positive");
      if (i && !(eps_list[i] < eps_list[i - 1]))
        throw ConfigError("eps_list must be strictly decreasing");
    }
    if (!(t0 < T)) throw ConfigError("t_span needs t0 < T");
    if (q0.n() != m->n() || q0.m() != m->m())
      throw ConfigError(detail::concat("initial state has dims (", q0.n(), ",", q0.m(),
                                       "), model needs (", m->n(), ",", m->m(), ")"));
    if (!q0.finite()) throw ConfigError("initial state is not finite");
    if (r0_weights.size() != m->m() || (r0_weights.array() <= 0.0).any())
      throw ConfigError("dissipation weights must be positive with one entry per z component");
    if (Vu.rows() != m->n() || Vu.cols() != m->n()) throw ConfigError("Vu has wrong dimensions");
    if (Vz.rows() != m->m() || Vz.cols() != m->m()) throw ConfigError("Vz has wrong dimensions");
    auto spd = [](const Mat& V, const char* what) {
      if (V.size() == 0) return;
      if (!V.isApprox(V.transpose())) throw ConfigError(std::string(what) + " is not symmetric");
      Eigen::SelfAdjointEigenSolver<Mat> es(V);
      if (!(es.eigenvalues().minCoeff() > 0.0))
        throw ConfigError(std::string(what) + " is not positive definite");
    };
    spd(Vu, "Vu");
    spd(Vz, "Vz");
    SolverConfig s = solver;
    s.t_end = T;
    s.validate();
    if (reparam.kind == CurveTag::Custom && !(reparam.floor > 0.0))
      throw ConfigError("custom reparameterization needs a positive floor");
    if (reparam.nodes < 16) throw ConfigError("reparam nodes must be at least 16");
    if (max_unclassified_fraction < 0.0 || max_unclassified_fraction > 1.0)
      throw ConfigError("max_unclassified_fraction must lie in [0, 1]");
  }

  SolverConfig solver_for_run() const {
    SolverConfig s = solver;
    s.t_end = T;
    return s;
  }
};

namespace detail {

template <typename T>
T get_required(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(concat("config: missing required field '", key, "'"));
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(concat("config: field '", key, "': ", e.what()));
  }
}

template <typename T>
void get_optional(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(concat("config: field '", key, "': ", e.what()));
  }
}

inline Vec vec_from(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Mat mat_from(const json& j, const char* key) {
  const auto rows = get_required<std::vector<std::vector<double>>>(j, key);
  Mat M(static_cast<Eigen::Index>(rows.size()),
        rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != M.cols())
      throw ConfigError(concat("config: matrix '", key, "' is ragged"));
    for (std::size_t c = 0; c < rows[r].size(); ++c) M(r, c) = rows[r][c];
  }
  return M;
}

inline State state_from(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(concat("config: missing required field '", key, "'"));
  const json& s = j.at(key);
  return State(vec_from(get_required<std::vector<double>>(s, "u")),
               vec_from(get_required<std::vector<double>>(s, "z")));
}

inline MArgs margs_from(const json& j) {
  MArgs a;
  a.q = state_from(j, "q");
  a.tau = get_required<double>(j, "tau");
  a.dq = state_from(j, "dq");
  a.xi = state_from(j, "xi");
  return a;
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using namespace detail;
  RunConfig c;
  c.model = get_required<std::string>(j, "model");

  if (!j.contains("dissipation")) throw ConfigError("config: missing required field 'dissipation'");
  const json& d = j.at("dissipation");
  const auto mode = get_required<std::string>(d, "mode");
  if (mode == "weighted_l1") c.r0_mode = R0Mode::WeightedL1;
  else if (mode == "isotropic") c.r0_mode = R0Mode::Isotropic;
  else throw ConfigError("config: dissipation mode must be 'weighted_l1' or 'isotropic'");
  c.r0_weights = vec_from(get_required<std::vector<double>>(d, "weights"));
  c.Vu = mat_from(j, "Vu");
  c.Vz = mat_from(j, "Vz");

  get_optional(j, "eps_list", c.eps_list);
  if (c.eps_list.empty()) c.eps = get_required<double>(j, "eps");
  else get_optional(j, "eps", c.eps);
  c.alpha = get_required<double>(j, "alpha");
  const auto span = get_required<std::vector<double>>(j, "t_span");
  if (span.size() != 2) throw ConfigError("config: t_span must be [t0, T]");
  c.t0 = span[0];
  c.T = span[1];
  c.q0 = state_from(j, "initial");

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    get_optional(s, "h0", c.solver.h0);
    get_optional(s, "h_min", c.solver.h_min);
    get_optional(s, "h_max", c.solver.h_max);
    get_optional(s, "delta_max", c.solver.delta_max);
    get_optional(s, "defect_tol", c.solver.defect_tol);
    get_optional(s, "newton_tol", c.solver.newton_tol);
    get_optional(s, "inclusion_tol", c.solver.inclusion_tol);
    get_optional(s, "grow_after", c.solver.grow_after);
    get_optional(s, "grow_factor", c.solver.grow_factor);
    get_optional(s, "max_steps", c.solver.max_steps);
  }
  if (j.contains("reparam")) {
    const json& r = j.at("reparam");
    std::string kind = "arclength";
    get_optional(r, "kind", kind);
    if (kind == "arclength") c.reparam.kind = CurveTag::Arclength;
    else if (kind == "custom") c.reparam.kind = CurveTag::Custom;
    else throw ConfigError("config: reparam kind must be 'arclength' or 'custom'");
    get_optional(r, "floor", c.reparam.floor);
    get_optional(r, "nodes", c.reparam.nodes);
  }
  if (j.contains("classify")) {
    const json& k = j.at("classify");
    auto& p = c.segment.point;
    get_optional(k, "tol_t", p.tol_t);
    get_optional(k, "zero_tol", p.zero_tol);
    get_optional(k, "theta_tol", p.theta_tol);
    get_optional(k, "switch_tol", p.switch_tol);
    get_optional(k, "residual_tol", p.residual_tol);
    get_optional(k, "gap_tol", p.gap_tol);
    get_optional(k, "min_run", c.segment.min_run);
    get_optional(k, "min_fraction", c.segment.min_fraction);
    get_optional(k, "max_unclassified_fraction", c.max_unclassified_fraction);
  }
  if (j.contains("gamma")) {
    const json& g = j.at("gamma");
    get_optional(g, "eps", c.gamma.eps);
    get_optional(g, "tol", c.gamma.tol);
    if (g.contains("points")) {
      for (const auto& p : g.at("points")) {
        GammaPoint gp;
        get_optional(p, "name", gp.name);
        gp.args = margs_from(p);
        gp.alpha = get_required<double>(p, "alpha");
        c.gamma.points.push_back(std::move(gp));
      }
    }
  }
  get_optional(j, "out", c.out_dir);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(detail::concat("config ", path, ": ", e.what()));
  }
  return parse_config(j);
}

}  // namespace pbv
