#pragma once

// CSV and JSON persistence for trajectories, curves and reports.

#include "pbv/regimes.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace pbv {

/// Malformed input file; `line` is 1-based, 0 when not tied to a line.
struct ParseError : ConfigError {
  ParseError(const std::string& what, std::size_t line_)
      : ConfigError(line_ ? detail::concat("line ", line_, ": ", what) : what), line(line_) {}
  std::size_t line;
};

namespace detail {

inline void indexed(std::vector<std::string>& cols, const char* stem, Eigen::Index k) {
  for (Eigen::Index i = 1; i <= k; ++i) cols.push_back(concat(stem, "_", i));
}

inline void write_row(std::ostream& os, const std::vector<double>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ',';
    os << row[i];
  }
  os << '\n';
}

inline void write_header(std::ostream& os, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& cell, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw ParseError(concat("not a number: '", cell, "'"), line);
  }
  while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
  if (used != cell.size()) throw ParseError(concat("trailing characters in '", cell, "'"), line);
  return v;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

/// Numbers of u_* and z_* columns in a header.
struct CsvLayout {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
};

inline CsvLayout layout_from_header(const std::vector<std::string>& cols) {
  CsvLayout l;
  for (const auto& c : cols) {
    if (c.rfind("u_", 0) == 0) ++l.n;
    if (c.rfind("z_", 0) == 0) ++l.m;
  }
  return l;
}

inline std::vector<std::vector<double>> read_table(std::istream& is,
                                                   std::vector<std::string>& header) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<double>> rows;
  if (!std::getline(is, line)) throw ParseError("empty CSV input", 0);
  ++lineno;
  header = split_csv(strip_cr(line));
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw ParseError(concat("expected ", header.size(), " fields, found ", cells.size()), lineno);
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void expect_header(const std::vector<std::string>& got,
                          const std::vector<std::string>& want) {
  if (got != want) {
    std::string w;
    for (const auto& c : want) w += (w.empty() ? "" : ",") + c;
    throw ParseError("unexpected header, want " + w, 1);
  }
}

}  // namespace detail

// ---------------------------------------------------------------- trajectory

inline std::vector<std::string> trajectory_columns(Eigen::Index n, Eigen::Index m) {
  std::vector<std::string> c{"t"};
  detail::indexed(c, "u", n);
  detail::indexed(c, "z", m);
  detail::indexed(c, "du", n);
  detail::indexed(c, "dz", m);
  c.push_back("E");
  c.push_back("dtE");
  detail::indexed(c, "DuE", n);
  detail::indexed(c, "DzE", m);
  c.push_back("h");
  c.push_back("incl_residual");
  return c;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.empty()) throw ConfigError("write_trajectory_csv: empty trajectory");
  const Eigen::Index n = traj[0].q.n(), m = traj[0].q.m();
  os << std::setprecision(17);
  detail::write_header(os, trajectory_columns(n, m));
  std::vector<double> row;
  for (const auto& nd : traj.nodes) {
    row.clear();
    row.push_back(nd.t);
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(nd.q.u[i]);
    for (Eigen::Index i = 0; i < m; ++i) row.push_back(nd.q.z[i]);
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(nd.dq.u.size() ? nd.dq.u[i] : 0.0);
    for (Eigen::Index i = 0; i < m; ++i) row.push_back(nd.dq.z.size() ? nd.dq.z[i] : 0.0);
    row.push_back(nd.E);
    row.push_back(nd.dtE);
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(nd.DuE.size() ? nd.DuE[i] : 0.0);
    for (Eigen::Index i = 0; i < m; ++i) row.push_back(nd.DzE.size() ? nd.DzE[i] : 0.0);
    row.push_back(nd.h);
    row.push_back(nd.incl_residual);
    detail::write_row(os, row);
  }
}

/// Restores the stored columns. Dissipation integrands are not stored; call
/// refill_energetics to recompute them for a given model.
inline Trajectory read_trajectory_csv(std::istream& is) {
  std::vector<std::string> header;
  const auto rows = detail::read_table(is, header);
  const auto l = detail::layout_from_header(header);
  detail::expect_header(header, trajectory_columns(l.n, l.m));
  if (rows.empty()) throw ParseError("trajectory CSV has no data rows", 0);
  Trajectory traj;
  std::size_t lineno = 1;
  for (const auto& r : rows) {
    ++lineno;
    TrajectoryNode nd;
    std::size_t c = 0;
    auto take = [&](Eigen::Index k) {
      Vec v(k);
      for (Eigen::Index i = 0; i < k; ++i) v[i] = r[c++];
      return v;
    };
    nd.t = r[c++];
    Vec u = take(l.n), z = take(l.m);
    nd.q = State(std::move(u), std::move(z));
    Vec du = take(l.n), dz = take(l.m);
    nd.dq = State(std::move(du), std::move(dz));
    nd.E = r[c++];
    nd.dtE = r[c++];
    nd.DuE = take(l.n);
    nd.DzE = take(l.m);
    nd.h = r[c++];
    nd.incl_residual = r[c++];
    if (!traj.nodes.empty() && !(nd.t >= traj.nodes.back().t))
      throw ParseError("time column is not nondecreasing", lineno);
    traj.nodes.push_back(std::move(nd));
  }
  return traj;
}

/// Recomputes energies, forces and dissipation integrands of every node.
inline void refill_energetics(Trajectory& traj, const EnergyModel& model, const Potentials& pot,
                              const RateParams& params) {
  traj.params = params;
  for (auto& nd : traj.nodes) {
    fill_node_energetics(model, pot, params, nd);
    fill_interval_dissipation(pot, params, nd);
  }
}

// --------------------------------------------------------------------- curve

inline std::vector<std::string> curve_columns(Eigen::Index n, Eigen::Index m) {
  std::vector<std::string> c{"s", "t"};
  detail::indexed(c, "u", n);
  detail::indexed(c, "z", m);
  c.push_back("dt");
  detail::indexed(c, "du", n);
  detail::indexed(c, "dz", m);
  return c;
}

inline void write_curve_csv(std::ostream& os, const ParameterizedCurve& c) {
  if (c.empty()) throw ConfigError("write_curve_csv: empty curve");
  const Eigen::Index n = c.n(), m = c.m();
  os << std::setprecision(17);
  detail::write_header(os, curve_columns(n, m));
  std::vector<double> row;
  for (std::size_t j = 0; j < c.size(); ++j) {
    row.clear();
    row.push_back(c.s[j]);
    row.push_back(c.t[j]);
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(c.q[j].u[i]);
    for (Eigen::Index i = 0; i < m; ++i) row.push_back(c.q[j].z[i]);
    row.push_back(c.dt[j]);
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(c.dq[j].u[i]);
    for (Eigen::Index i = 0; i < m; ++i) row.push_back(c.dq[j].z[i]);
    detail::write_row(os, row);
  }
}

inline ParameterizedCurve read_curve_csv(std::istream& is, CurveTag tag = CurveTag::Arclength) {
  std::vector<std::string> header;
  const auto rows = detail::read_table(is, header);
  const auto l = detail::layout_from_header(header);
  detail::expect_header(header, curve_columns(l.n, l.m));
  if (rows.size() < 2) throw ParseError("curve CSV needs at least two rows", 0);
  ParameterizedCurve c;
  c.tag = tag;
  std::size_t lineno = 1;
  for (const auto& r : rows) {
    ++lineno;
    std::size_t k = 0;
    auto take = [&](Eigen::Index cnt) {
      Vec v(cnt);
      for (Eigen::Index i = 0; i < cnt; ++i) v[i] = r[k++];
      return v;
    };
    const double s = r[k++];
    if (!c.s.empty() && !(s > c.s.back())) throw ParseError("s column is not increasing", lineno);
    c.s.push_back(s);
    c.t.push_back(r[k++]);
    Vec u = take(l.n), z = take(l.m);
    c.q.emplace_back(std::move(u), std::move(z));
    c.dt.push_back(r[k++]);
    Vec du = take(l.n), dz = take(l.m);
    c.dq.emplace_back(std::move(du), std::move(dz));
  }
  return c;
}

// ---------------------------------------------------------------------- json

using nlohmann::json;

inline json to_json(const State& q) {
  return json{{"u", std::vector<double>(q.u.data(), q.u.data() + q.u.size())},
              {"z", std::vector<double>(q.z.data(), q.z.data() + q.z.size())}};
}

inline json to_json(const EnergyBalance& b) {
  return json{{"lhs", b.lhs},
              {"rhs", b.rhs},
              {"dissipation", b.dissipation},
              {"absolute", b.absolute},
              {"relative", b.relative}};
}

inline json to_json(const AprioriDiagnostics& d) {
  return json{{"sup_E", d.sup_E},
              {"sup_q", d.sup_q},
              {"total_var_u", d.total_var_u},
              {"total_var_z", d.total_var_z}};
}

inline json to_json(const std::vector<RegimeSegment>& segs) {
  json a = json::array();
  for (const auto& s : segs)
    a.push_back(json{{"s_a", s.s_a},
                     {"s_b", s.s_b},
                     {"label", to_string(s.label)},
                     {"theta_u", s.theta_u},
                     {"theta_z", s.theta_z},
                     {"max_residual", s.max_residual}});
  return a;
}

/// Non-finite values become null so the output stays valid JSON.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// `gaps`, when non-empty, is the per-node duality gap M_0 - <q', xi>.
inline json to_json(const ParamResidual& r, const std::vector<double>& gaps = {},
                    bool per_node = true) {
  json j{{"residual", r.residual},
         {"dissipation", r.dissipation},
         {"relative", r.relative},
         {"relaxed", r.relaxed},
         {"violations", r.violations}};
  if (per_node) {
    json m0 = json::array(), br = json::array();
    for (double v : r.M0) m0.push_back(finite_or_null(v));
    for (auto b : r.branch) br.push_back(to_string(b));
    j["M0"] = std::move(m0);
    j["branch"] = std::move(br);
    if (!gaps.empty()) {
      json g = json::array();
      for (double v : gaps) g.push_back(finite_or_null(v));
      j["gap"] = std::move(g);
    }
  }
  return j;
}

inline json to_json(const GammaCheckReport& g) {
  json errs = json::array(), vals = json::array();
  for (double e : g.error) errs.push_back(finite_or_null(e));
  for (double v : g.Meps) vals.push_back(finite_or_null(v));
  return json{{"target", finite_or_null(g.target.value)},
              {"target_infinite", g.target.infinite},
              {"eps", g.eps},
              {"tau", g.tau},
              {"M_eps", vals},
              {"error", errs},
              {"rate", finite_or_null(g.rate)},
              {"divergence_exponent", finite_or_null(g.divergence_exponent)},
              {"monotone", g.monotone},
              {"passed", g.passed}};
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

}  // namespace pbv
