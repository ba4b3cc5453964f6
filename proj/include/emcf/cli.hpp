#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "emcf/config.hpp"
#include "emcf/expanders.hpp"
#include "emcf/graph_flow.hpp"
#include "emcf/level_set.hpp"
#include "emcf/morse.hpp"
#include "emcf/report.hpp"
#include "emcf/spectral.hpp"

namespace emcf {

namespace cli_detail {

inline std::string default_run_id() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::gmtime(&tt));
  return buf;
}

inline std::string make_run_dir(const std::string& out_root, const std::string& cmd,
                                const RunConfig& cfg) {
  std::string run_id = cfg.j.value("run_id", std::string());
  if (run_id.empty()) run_id = default_run_id();
  const std::string dir = out_root + "/" + cmd + "/" + run_id;
  std::filesystem::create_directories(dir);
  return dir;
}

inline GridParams grid_from(const RunConfig& cfg) {
  GridParams g;
  g.h = cfg.num("grid", "h");
  g.r_max = cfg.num("grid", "R_grid");
  g.z_max = cfg.num("grid", "Z_grid");
  g.z_min = -g.z_max;
  g.n = cfg.j.at("n").get<int>();
  return g;
}

inline SolveOptions solve_options(const RunConfig& cfg) {
  SolveOptions s;
  s.shoot.r_max = std::max(2.0 * cfg.num("grid", "R_trunc"), 16.0);
  return s;
}

inline Cone cone_from(const RunConfig& cfg) {
  Cone c;
  c.aperture = cfg.num("cone", "aperture");
  c.double_symmetric = cfg.j.at("cone").at("double_symmetric").get<bool>();
  return c;
}

struct BranchSet {
  std::vector<ExpanderProfile> all;
  std::optional<std::size_t> unstable;  // smallest-neck connected branch
  std::optional<std::size_t> disk;
};

inline BranchSet solve_branches(const RunConfig& cfg) {
  BranchSet out;
  out.all = solve_expander(cfg.j.at("n").get<int>(), cone_from(cfg), solve_options(cfg));
  for (std::size_t k = 0; k < out.all.size(); ++k) {
    const auto& p = out.all[k];
    if (p.family == ShootFamily::Disk && !out.disk) out.disk = k;
    if (p.family == ShootFamily::Neck &&
        (!out.unstable ||
         p.shooting_parameter < out.all[*out.unstable].shooting_parameter))
      out.unstable = k;
  }
  return out;
}

inline const ExpanderProfile& pick_branch(const BranchSet& bs, const std::string& sel) {
  if (sel == "unstable") {
    if (!bs.unstable) throw ConfigError("no connected branch found for 'unstable'");
    return bs.all[*bs.unstable];
  }
  if (sel == "disk") {
    if (!bs.disk) throw ConfigError("no disk branch found");
    return bs.all[*bs.disk];
  }
  const std::size_t k = std::stoul(sel);
  if (k >= bs.all.size()) throw ConfigError("branch index out of range");
  return bs.all[k];
}

inline Shape shape_from(const RunConfig& cfg, const BranchSet* branches) {
  const auto& ls = cfg.j.at("levelset");
  const std::string kind = ls.at("shape").get<std::string>();
  if (kind == "ball") return shape_ball(ls.at("z0").get<double>(), ls.at("rho").get<double>());
  if (kind == "halfspace") return shape_halfspace_below(ls.at("z0").get<double>());
  if (kind == "expander-neck") {
    if (!branches || !branches->unstable) throw ConfigError("no connected branch available");
    return shape_neck_inside(branches->all[*branches->unstable].base);
  }
  if (kind == "expander-disk") {
    if (!branches || !branches->disk) throw ConfigError("no disk branch available");
    return shape_graph_region(branches->all[*branches->disk].base, false);
  }
  throw ConfigError("unknown levelset.shape: " + kind);
}

inline Json branch_json(const ExpanderProfile& p, const std::string& csv_rel) {
  Json b = Json::object();
  b["h"] = p.shooting_parameter;
  b["aperture"] = p.achieved_aperture;
  b["branch"] = to_string(p.branch);
  b["family"] = p.family == ShootFamily::Disk ? "disk" : "neck";
  b["residual_sup"] = p.residual_sup;
  b["profile_csv_path"] = csv_rel;
  return b;
}

}  // namespace cli_detail

// Subcommand dispatch. Exit code 0 on pass, 1 on a failed run assertion,
// 2 on configuration errors (thrown as ConfigError by the caller's parse).
inline int dispatch(const std::string& cmd, RunConfig cfg, const std::string& out_root) {
  using namespace cli_detail;
  cfg.validate();
  const std::string dir = make_run_dir(out_root, cmd, cfg);
  bool pass = true;
  write_text(dir + "/config.json", cfg.j.dump(2) + "\n");
  Json manifest = Json::object();
  manifest["subcommand"] = cmd;
  manifest["config_path"] = "config.json";

  if (cmd == "solve-expander") {
    BranchSet bs = solve_branches(cfg);
    auto ordered = order_expanders(bs.all);
    Json list = Json::array();
    for (std::size_t k = 0; k < ordered.ordered.size(); ++k) {
      const auto& p = ordered.ordered[k];
      char name[64];
      std::snprintf(name, sizeof(name), "branch_%02zu.csv", k);
      write_profile_csv(p.base, dir + "/" + name);
      list.push_back(branch_json(p, name));
      if (p.residual_sup > 1e-6) pass = false;
      if (std::abs(p.achieved_aperture - p.cone.aperture) > 1e-8) pass = false;
    }
    manifest["branches"] = list;
    manifest["partial_order_warning"] = ordered.partial_order_warning;
  } else if (cmd == "spectrum") {
    BranchSet bs = solve_branches(cfg);
    const auto& p = pick_branch(bs, cfg.j.at("branch").get<std::string>());
    const int m = std::max(200, int(cfg.num("flow", "m")));
    const auto op = assemble_stability_operator(p, cfg.num("grid", "R_trunc"), m);
    const auto res = lowest_eigenpair(op);
    std::string verdict;
    try {
      verdict = to_string(stability_verdict(res));
    } catch (const DegenerateSpectrumError&) {
      verdict = "inconclusive";
      pass = false;
    }
    std::ostringstream csv;
    csv << "s,f\n";
    for (std::size_t i = 0; i < res.f.size(); ++i)
      csv << Json::format_double(op.geom.s[i]) << ',' << Json::format_double(res.f[i])
          << '\n';
    write_text(dir + "/eigenfunction.csv", csv.str());
    manifest["lambda0"] = res.lambda0;
    manifest["verdict"] = verdict;
    manifest["R_trunc"] = op.r_trunc;
    manifest["m"] = op.m;
    manifest["eigenfunction_csv_path"] = "eigenfunction.csv";
    if (std::abs(res.lambda0 - op.rayleigh(res.f)) > 1e-8) pass = false;
    for (double v : res.f)
      if (!(v > 0.0)) pass = false;
  } else if (cmd == "flow-graphical") {
    BranchSet bs = solve_branches(cfg);
    const auto& p = pick_branch(bs, cfg.j.at("branch").get<std::string>());
    GraphFlowOptions o;
    o.dt = cfg.num("flow", "dt");
    o.eta = cfg.num("flow", "eta");
    o.m = std::max(200, int(cfg.num("flow", "m")));
    o.sample_dt = cfg.num("flow", "sample_dt");
    o.r_trunc = cfg.num("grid", "R_trunc");
    o.normal_sign = -1.0;
    GraphFlow flow(p, o);
    const auto spec = lowest_eigenpair(flow.op());
    const double eps = cfg.num("eps");
    std::vector<double> v0(spec.f.size());
    for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = eps * spec.f[i];
    const auto traj = flow.run(v0, cfg.num("flow", "t_end"));
    write_trajectory_csv(traj, dir + "/trajectory.csv");
    for (std::size_t k = 0; k < traj.v.size(); ++k) {
      if (k % std::max<std::size_t>(1, traj.v.size() / 8) != 0) continue;
      char name[64];
      std::snprintf(name, sizeof(name), "/snapshot_%04zu.csv", k);
      write_profile_csv(push_graph(flow.op().grid, flow.op().geom, traj.v[k], -1.0),
                        dir + name);
    }
    manifest["lambda0"] = spec.lambda0;
    manifest["gauge_broke"] = traj.gauge_broke;
    manifest["t_break"] = traj.t_break;
    manifest["trajectory_csv_path"] = "trajectory.csv";
    const auto rep = monitor_reverse_poincare(traj);
    manifest["max_kappa"] = rep.max_kappa;
    if (eps > 0.0 && !check_monotone(traj).empty()) pass = false;
  } else if (cmd == "flow-levelset") {
    BranchSet bs;
    const std::string kind = cfg.j.at("levelset").at("shape").get<std::string>();
    if (kind == "expander-neck" || kind == "expander-disk") bs = solve_branches(cfg);
    const auto f0 = init_from_domain(shape_from(cfg, &bs), grid_from(cfg));
    EvolveOptions eo;
    eo.sample_dt = cfg.num("levelset", "sample_dt");
    auto evo = evolve(f0, cfg.num("levelset", "t_end"), eo);
    for (std::size_t k = 0; k < evo.snapshots.size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof(name), "/field_%04zu", k);
      write_field(evo.snapshots[k], dir + name);
      std::snprintf(name, sizeof(name), "/contour_%04zu.csv", k);
      write_contour_csv(evo.snapshots[k], dir + name);
    }
    write_events_jsonl(evo.events, dir + "/events.jsonl");
    manifest["extinct"] = evo.extinct;
    manifest["extinction_time"] = evo.extinction_time;
    manifest["monotone_violations"] = evo.monotone_violations;
    manifest["snapshots"] = int(evo.snapshots.size());
    Json evs = Json::array();
    for (const auto& e : evo.events) {
      Json je = Json::object();
      je["t"] = e.t;
      je["kind"] = to_string(e.kind);
      evs.push_back(je);
    }
    manifest["events"] = evs;
    if (cfg.j.at("levelset").at("expect_monotone").get<bool>() &&
        evo.monotone_violations != 0)
      pass = false;
  } else if (cmd == "avoidance") {
    const auto& av = cfg.j.at("avoidance");
    const auto g = grid_from(cfg);
    const auto a =
        init_from_domain(shape_ball(av.at("z0_a").get<double>(), av.at("rho_a").get<double>()), g);
    const auto b =
        init_from_domain(shape_ball(av.at("z0_b").get<double>(), av.at("rho_b").get<double>()), g);
    EvolveOptions eo;
    eo.sample_dt = cfg.num("levelset", "sample_dt");
    auto evoA = evolve(a, cfg.num("levelset", "t_end"), eo);
    auto evoB = evolve(b, cfg.num("levelset", "t_end"), eo);
    auto rep = avoidance_test(evoA, evoB, av.at("c_grid").get<double>());
    Json rows = Json::array();
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
      Json r = Json::object();
      r["t"] = rep.times[k];
      r["distance"] = rep.distance[k];
      r["bound"] = rep.bound[k];
      rows.push_back(r);
    }
    manifest["eta"] = rep.eta;
    manifest["lambda"] = rep.lambda;
    manifest["rows"] = rows;
    manifest["pass"] = rep.pass;
    pass = rep.pass;
  } else if (cmd == "barrier") {
    const auto& ba = cfg.j.at("barrier");
    const auto g = grid_from(cfg);
    const auto f0 = init_from_domain(
        shape_ball(cfg.num("levelset", "z0"), cfg.num("levelset", "rho")), g);
    const double delta = ba.at("delta").get<double>();
    const double c = ba.at("c").get<double>();
    EvolveOptions eo;
    eo.sample_dt = delta * delta / c / 24.0;
    auto evo = evolve(f0, delta * delta / c, eo);
    auto rep = barrier_test(evo, ba.at("z0").get<double>(), delta, c);
    manifest["c0"] = rep.c0;
    manifest["tau"] = rep.tau;
    manifest["pass"] = rep.pass;
    pass = rep.pass;
  } else if (cmd == "smooth") {
    const auto& sm = cfg.j.at("smooth");
    const auto g = grid_from(cfg);
    const auto A =
        init_from_domain(shape_ball(sm.at("z0_a").get<double>(), sm.at("rho_a").get<double>()), g);
    const auto B =
        init_from_domain(shape_ball(sm.at("z0_b").get<double>(), sm.at("rho_b").get<double>()), g);
    auto out = smooth_mean_convex(A, B, sm.at("eps_s").get<double>());
    write_field(out, dir + "/smoothed");
    write_contour_csv(out, dir + "/smoothed_contour.csv");
    double min_res = 1e300;
    for (double r : interface_residual(out)) min_res = std::min(min_res, r);
    manifest["min_interface_residual"] = min_res;
    pass = min_res > 0.0;
  } else if (cmd == "morse-line" || cmd == "certify") {
    BranchSet bs = solve_branches(cfg);
    if (!bs.unstable) throw ConfigError("no connected branch for the pipeline");
    MorseOptions mo;
    mo.flow.m = std::max(200, int(cfg.num("flow", "m")));
    mo.flow.eta = cfg.num("flow", "eta");
    mo.flow.dt = cfg.num("flow", "dt");
    mo.flow.sample_dt = cfg.num("flow", "sample_dt");
    mo.flow.r_trunc = cfg.num("grid", "R_trunc");
    mo.omega0_frac = cfg.num("flow", "omega0_frac");
    mo.eps_list = cfg.j.at("flow").at("eps_list").get<std::vector<double>>();
    mo.lookback = cfg.num("morse", "lookback");
    mo.grid = grid_from(cfg);
    mo.evolve.sample_dt = cfg.num("levelset", "sample_dt");
    mo.t_forward = cfg.num("morse", "t_forward");
    mo.match_tol_cells = cfg.num("morse", "match_tol_cells");

    MorsePipeline pipe(bs.all[*bs.unstable], mo);
    MorseLineRecord rec;
    rec.sigma_minus = pipe.sigma_minus();
    rec.lambda0 = pipe.spectral().lambda0;
    rec.epsilons = mo.eps_list;
    rec.ancient = pipe.ancient_limit(mo.eps_list, mo.lookback, &rec.trajectories, &rec.t0_eps);
    auto handoff = pipe.to_handoff(mo.eps_list.front());
    rec.handoff_v = handoff.v;
    rec.handoff_time = handoff.t;
    auto fwd = pipe.forward_continue(handoff, bs.all);
    rec.forward = std::move(fwd.evolution);
    rec.sigma_plus = fwd.sigma_plus;
    rec.unresolved_limit = fwd.unresolved;
    rec.terminal_hausdorff = fwd.terminal_hausdorff;
    rec.terminal_motion = fwd.terminal_motion;
    Witness wit;
    wit.z0 = bs.disk ? bs.all[*bs.disk].base[0].z + 0.5 : 1.0;
    wit.rho = 0.12;
    rec.certification = certify(rec, wit);
    write_record(rec, dir);
    manifest["record_dir"] = ".";
    manifest["certification"] = certification_json(rec.certification);
    pass = rec.certification.all_evaluated_pass();
  } else {
    throw ConfigError("unknown subcommand: " + cmd);
  }

  manifest["pass"] = pass;
  write_json(dir + "/manifest.json", manifest);
  return pass ? 0 : 1;
}

}  // namespace emcf
