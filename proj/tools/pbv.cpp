// pbv: simulate, reparameterize, classify and check multi-rate viscous
// approximations of rate-independent systems.

#include "pbv/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace pbv;

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumerical = 2, kUnclassified = 3 };

struct Common {
  std::string config;
  std::string out;
  std::optional<double> eps;
  std::optional<double> alpha;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "run configuration (JSON)")->required();
  sub->add_option("--out", c.out, "output directory (overrides the config)");
  sub->add_option("--eps", c.eps, "override eps");
  sub->add_option("--alpha", c.alpha, "override alpha");
}

RunConfig load(const Common& c) {
  RunConfig cfg = load_config(c.config);
  if (c.eps) {
    if (!(*c.eps > 0.0)) throw ConfigError("--eps must be positive");
    cfg.eps = *c.eps;
    cfg.eps_list.clear();
  }
  if (c.alpha) {
    if (!(*c.alpha > 0.0)) throw ConfigError("--alpha must be positive");
    cfg.alpha = *c.alpha;
  }
  if (!c.out.empty()) cfg.out_dir = c.out;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  return cfg;
}

std::string path_in(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  return is;
}

void write_text(const std::string& path, const std::string& text) { open_out(path) << text; }

int cmd_simulate(const Common& c) {
  const RunConfig cfg = load(c);
  SimulationResult r;
  try {
    r = simulate(cfg);
  } catch (const IntegrationError& e) {
    if (!e.partial.empty()) {
      auto os = open_out(path_in(cfg, "trajectory.csv"));
      write_trajectory_csv(os, e.partial);
      write_json_file(path_in(cfg, "summary.json"),
                      json{{"complete", false}, {"error", e.what()}, {"nodes", e.partial.size()}});
    }
    throw;
  }
  auto os = open_out(path_in(cfg, "trajectory.csv"));
  write_trajectory_csv(os, r.traj);
  const json s = summary_json(cfg, r);
  write_json_file(path_in(cfg, "summary.json"), s);
  std::cout << "final state u=" << r.traj.back().q.u.transpose() << " z=" << r.traj.back().q.z.transpose()
            << "  jumps=" << r.jumps << "  energy residual (rel)=" << r.balance.relative << '\n';
  return kOk;
}

int cmd_reparam(const Common& c, std::string traj_path) {
  const RunConfig cfg = load(c);
  if (traj_path.empty()) traj_path = path_in(cfg, "trajectory.csv");
  auto is = open_in(traj_path);
  const Trajectory traj = read_trajectory_csv(is);
  const auto curve = build_curve(cfg.reparam, traj);
  auto os = open_out(path_in(cfg, "curve.csv"));
  write_curve_csv(os, curve);
  std::cout << to_string(curve.tag) << " curve: " << curve.size() << " nodes, length "
            << curve.length() << '\n';
  return kOk;
}

ParameterizedCurve read_curve(const RunConfig& cfg, std::string curve_path) {
  if (curve_path.empty()) curve_path = path_in(cfg, "curve.csv");
  auto is = open_in(curve_path);
  return read_curve_csv(is, cfg.reparam.kind);
}

int cmd_classify(const Common& c, const std::string& curve_path) {
  const RunConfig cfg = load(c);
  const auto curve = read_curve(cfg, curve_path);
  const auto r = classify(cfg, curve);
  write_json_file(path_in(cfg, "segments.json"), classification_json(r));
  write_text(path_in(cfg, "regimes.svg"),
             svg::regime_plot(curve, r.cc.segments,
                              detail::concat(cfg.model, ", alpha=", cfg.alpha, ", eps=", cfg.eps)));
  for (const auto& s : r.cc.segments)
    std::cout << to_string(s.label) << "  s in [" << s.s_a << ", " << s.s_b << "]\n";
  std::cout << "contact agreement " << r.contact.fraction << '\n';
  if (r.unclassified_fraction > cfg.max_unclassified_fraction) {
    std::cerr << "unclassified fraction " << r.unclassified_fraction << " exceeds "
              << cfg.max_unclassified_fraction << '\n';
    return kUnclassified;
  }
  return kOk;
}

int cmd_energy_check(const Common& c, const std::string& traj_path) {
  const RunConfig cfg = load(c);
  Trajectory traj;
  if (traj_path.empty()) {
    traj = simulate(cfg).traj;
  } else {
    auto is = open_in(traj_path);
    traj = read_trajectory_csv(is);
    refill_energetics(traj, *cfg.energy(), cfg.potentials(), cfg.rate());
  }
  const auto balance = energy_balance_residual(traj);
  const auto curve = build_curve(cfg.reparam, traj);
  const auto ec = energy_check(cfg, curve, cfg.eps);
  json j{{"energy_balance", to_json(balance)},
         {"tol_t", ec.tol_t},
         {"param_residual", to_json(ec.param, ec.gaps)}};
  write_json_file(path_in(cfg, "energy_check.json"), j);
  std::cout << "discrete residual " << balance.absolute << " (relative " << balance.relative
            << ")\nparameterized residual " << ec.param.residual << " (relative "
            << ec.param.relative << ", " << ec.param.relaxed << " relaxed nodes)\n";
  return kOk;
}

int cmd_sweep(const Common& c, unsigned threads) {
  const RunConfig cfg = load(c);
  const auto rep = run_sweep(cfg, threads);
  write_json_file(path_in(cfg, "sweep.json"), sweep_json(rep));
  std::vector<double> eps, sup, tvu, tvz, res;
  for (const auto& e : rep.entries) {
    eps.push_back(e.eps);
    sup.push_back(e.sup_distance);
    tvu.push_back(e.apriori.total_var_u);
    tvz.push_back(e.apriori.total_var_z);
    res.push_back(e.param.relative);
  }
  write_text(path_in(cfg, "convergence.svg"),
             svg::loglog_plot(eps, {{"sup distance", sup}, {"TV u", tvu}, {"TV z", tvz},
                                    {"param residual", res}},
                              detail::concat(cfg.model, ", alpha=", cfg.alpha), "eps"));
  for (const auto& e : rep.entries)
    std::cout << "eps=" << e.eps << "  TV(u)=" << e.apriori.total_var_u
              << "  TV(z)=" << e.apriori.total_var_z << "  sup-dist=" << e.sup_distance << '\n';
  std::cout << "sup distances monotone: " << (rep.sup_monotone ? "yes" : "no") << '\n';
  return kOk;
}

int cmd_gamma_check(const Common& c) {
  const RunConfig cfg = load(c);
  const auto pot = Potentials::standard(1, 1);
  const auto r = run_gamma_battery(cfg.gamma.points.empty() ? pot : cfg.potentials(), cfg.gamma);
  write_json_file(path_in(cfg, "gamma.json"), gamma_json(r));
  for (const auto& [p, rep] : r.results)
    std::cout << (rep.passed ? "pass " : "FAIL ") << p.name << '\n';
  std::cout << (r.all_passed ? "all points passed" : "some points failed") << '\n';
  return kOk;
}

int cmd_plot_phase(const Common& c, const std::vector<std::string>& files, double t) {
  const RunConfig cfg = load(c);
  const auto model = cfg.energy();
  if (model->n() != 1 || model->m() != 1) throw ConfigError("plot-phase needs a scalar model");
  svg::Box box = svg::Box::empty();
  std::vector<svg::PhaseTrack> tracks;
  static const char* colors[] = {"#1f4e9c", "#c0392b", "#27ae60", "#8e44ad"};
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto is = open_in(files[i]);
    const auto traj = read_trajectory_csv(is);
    svg::PhaseTrack tr;
    tr.color = colors[i % 4];
    for (const auto& nd : traj.nodes) {
      tr.z.push_back(nd.q.z[0]);
      tr.u.push_back(nd.q.u[0]);
      box.include(nd.q.z[0], nd.q.u[0]);
    }
    tracks.push_back(std::move(tr));
  }
  box = tracks.empty() ? svg::Box{-3, 3, -3, 3} : box.padded(0.15);
  write_text(path_in(cfg, "phase.svg"),
             svg::phase_plot(*model, cfg.potentials(), t, box, tracks,
                             cfg.model + ": locally stable region"));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-rate viscous approximation of rate-independent systems"};
  app.require_subcommand(1);

  Common common;
  std::string traj_path, curve_path;
  unsigned threads = 0;
  std::vector<std::string> phase_files;
  double phase_t = 0.0;

  auto* sim = app.add_subcommand("simulate", "integrate the viscous system");
  add_common(sim, common);
  auto* rep = app.add_subcommand("reparam", "parameterize a trajectory");
  add_common(rep, common);
  rep->add_option("--trajectory", traj_path, "trajectory CSV (default <out>/trajectory.csv)");
  auto* cls = app.add_subcommand("classify", "segment a curve into regimes");
  add_common(cls, common);
  cls->add_option("--curve", curve_path, "curve CSV (default <out>/curve.csv)");
  auto* en = app.add_subcommand("energy-check", "discrete and parameterized energy identities");
  add_common(en, common);
  en->add_option("--trajectory", traj_path, "trajectory CSV (simulates when omitted)");
  auto* sw = app.add_subcommand("sweep", "run a decreasing eps sequence");
  add_common(sw, common);
  sw->add_option("--threads", threads, "concurrent runs (default: hardware threads)");
  auto* gm = app.add_subcommand("gamma-check", "pointwise Gamma-limit checks");
  add_common(gm, common);
  auto* ph = app.add_subcommand("plot-phase", "trajectories over the stable region");
  add_common(ph, common);
  ph->add_option("trajectories", phase_files, "trajectory CSV files");
  ph->add_option("--time", phase_t, "time at which the stable region is drawn");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) return cmd_simulate(common);
    if (*rep) return cmd_reparam(common, traj_path);
    if (*cls) return cmd_classify(common, curve_path);
    if (*en) return cmd_energy_check(common, traj_path);
    if (*sw) return cmd_sweep(common, threads);
    if (*gm) return cmd_gamma_check(common);
    if (*ph) return cmd_plot_phase(common, phase_files, phase_t);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
