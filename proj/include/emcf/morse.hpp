#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emcf/expanders.hpp"
#include "emcf/graph_flow.hpp"
#include "emcf/level_set.hpp"
#include "emcf/report.hpp"
#include "emcf/spectral.hpp"

namespace emcf {

struct WrongBranchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CalibrationError : std::runtime_error {
  double max_w0;
  CalibrationError(const std::string& what, double mx)
      : std::runtime_error(what), max_w0(mx) {}
};
struct UnresolvedLimitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MorseOptions {
  GraphFlowOptions flow;          // normal_sign picks the side of Sigma_-
  // omega0 = frac * ||f||_{W,0}; the calibrated state has C2 proxy about
  // frac, which must stay below eta/2 to remain deep in gauge
  double omega0_frac = 0.05;
  std::vector<double> eps_list = {1e-2, 1e-3, 1e-4};
  double lookback = 1.0;
  GridParams grid;                // forward continuation lattice
  EvolveOptions evolve;
  double t_forward = 1.2;
  // The handoff leg runs the graphical engine under its own exposed gauge:
  // the neck-radius criterion is the effective trigger (the level-set
  // engine needs the neck several cells deep to see it), and the C2 bound
  // acts as an embedding guard.
  double handoff_gauge = 8.0;
  double handoff_neck_cells = 10.0;
  double match_tol_cells = 10.0;  // terminal Hausdorff tolerance in cells

  MorseOptions() {
    flow.normal_sign = -1.0;
    grid.h = 1.0 / 64;
    grid.r_max = 2.5;
    grid.z_min = -2.0;
    grid.z_max = 2.0;
  }
};

struct AncientFamily {
  std::vector<double> s;                       // translated clock in [-lookback, 0]
  std::vector<std::vector<double>> w;          // finest-eps samples per s (full grid)
  std::vector<double> w0;                      // ||w(s)||_{W,0} for the finest eps
  std::vector<std::vector<double>> cauchy;     // per eps-pair sup differences per s
  bool convergence_warning = false;
};

struct CertificationReport {
  bool monotone = false;
  bool strictly_monotone = false;
  bool asymptotic_to_cone = false;
  bool backward_limit = false;
  bool forward_limit = false;
  std::optional<bool> witness_contained;   // only when a witness was supplied
  // measure-theoretic clauses are reported, never evaluated
  std::string regular = "not evaluated";
  std::string strongly_regular = "not evaluated";

  bool all_evaluated_pass() const {
    return monotone && strictly_monotone && asymptotic_to_cone && backward_limit &&
           forward_limit && witness_contained.value_or(true);
  }
};

struct MorseLineRecord {
  ExpanderProfile sigma_minus;
  double lambda0 = 0.0;
  std::vector<double> epsilons;
  std::vector<double> t0_eps;
  std::vector<GraphFlowTrajectory> trajectories;  // one per eps, up to calibration
  AncientFamily ancient;
  std::vector<double> handoff_v;                  // graph at handoff (full grid)
  double handoff_time = 0.0;
  LevelSetEvolution forward;
  std::optional<ExpanderProfile> sigma_plus;
  bool unresolved_limit = false;
  double terminal_hausdorff = 0.0;
  double terminal_motion = 0.0;
  CertificationReport certification;
};

// The ancient-to-forward pipeline over one strictly unstable base branch.
class MorsePipeline {
 public:
  MorsePipeline(const ExpanderProfile& sigma_minus, MorseOptions opt = {})
      : opt_(std::move(opt)), sigma_(sigma_minus), flow_(sigma_minus, opt_.flow),
        spec_(lowest_eigenpair(flow_.op())) {
    if (stability_verdict(spec_) != StabilityVerdict::StrictlyUnstable)
      throw WrongBranchError("base expander is not strictly unstable");
    omega0_ = opt_.omega0_frac * spec_.f_w0;
  }

  const GraphFlow& flow() const { return flow_; }
  const SpectralResult& spectral() const { return spec_; }
  double omega0() const { return omega0_; }

  // initial graph eps * f along the configured side; f is the positive
  // first eigenfunction with unit C^2-proxy norm, so c2_proxy(v0) = eps
  std::vector<double> perturb(double eps) const {
    if (eps < 0.0) throw std::invalid_argument("perturb: eps must be >= 0");
    if (eps > opt_.flow.eta * opt_.flow.alpha0_frac)
      throw GaugeBreakdownError(0.0);
    std::vector<double> v0(spec_.f.size());
    for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = eps * spec_.f[i];
    return v0;
  }

  // run one eps until w0 first reaches omega0 (plus a margin for sampling)
  GraphFlowTrajectory run_eps(double eps, double extra_time = 0.5) const {
    const double growth = -spec_.lambda0;
    const double t_guess = std::log(omega0_ / (eps * spec_.f_w0)) / growth;
    return flow_.run(perturb(eps), std::max(t_guess, 0.0) + extra_time);
  }

  double calibrate(const GraphFlowTrajectory& traj) const {
    return calibrate_time_translation(traj, omega0_);
  }

  static double calibrate_time_translation(const GraphFlowTrajectory& traj, double omega0) {
    double max_w0 = 0.0;
    for (std::size_t k = 0; k < traj.diag.size(); ++k) {
      max_w0 = std::max(max_w0, traj.diag[k].w0);
      if (traj.diag[k].w0 >= omega0) {
        if (k == 0) return traj.diag[0].t;
        const double w_prev = traj.diag[k - 1].w0, w_here = traj.diag[k].w0;
        const double th = (omega0 - w_prev) / (w_here - w_prev);
        return traj.diag[k - 1].t + th * (traj.diag[k].t - traj.diag[k - 1].t);
      }
    }
    throw CalibrationError("trajectory never reaches omega0", max_w0);
  }

  // translated snapshot family w^eps(s) = v^eps(s + T0^eps) on
  // s in [-lookback, 0], with cross-eps Cauchy differences
  AncientFamily ancient_limit(const std::vector<double>& eps_list, double lookback,
                              std::vector<GraphFlowTrajectory>* keep_trajs = nullptr,
                              std::vector<double>* keep_t0 = nullptr) const {
    if (eps_list.size() < 3) throw std::invalid_argument("need at least 3 epsilons");
    for (std::size_t k = 1; k < eps_list.size(); ++k)
      if (!(eps_list[k] < eps_list[k - 1]))
        throw std::invalid_argument("eps_list must decrease strictly");
    const int S = 21;
    AncientFamily fam;

    std::vector<GraphFlowTrajectory> trajs;
    std::vector<double> t0s;
    for (double eps : eps_list) {
      trajs.push_back(run_eps(eps));
      t0s.push_back(calibrate(trajs.back()));
      if (keep_trajs) keep_trajs->push_back(trajs.back());
      if (keep_t0) keep_t0->push_back(t0s.back());
    }
    // the translated clock only reaches back to the shortest calibration
    const double t0_min = *std::min_element(t0s.begin(), t0s.end());
    const double lb = std::min(lookback, 0.98 * t0_min);
    for (int i = 0; i < S; ++i) fam.s.push_back(-lb + lb * i / double(S - 1));

    std::vector<std::vector<std::vector<double>>> samples;  // [eps][s][node]
    for (std::size_t k = 0; k < trajs.size(); ++k) {
      std::vector<std::vector<double>> per_s;
      for (double s : fam.s) per_s.push_back(interp_state(trajs[k], t0s[k] + s));
      samples.push_back(std::move(per_s));
    }
    fam.w = samples.back();
    for (const auto& w : fam.w) {
      fam.w0.push_back(weighted_norm(flow_.op().grid, flow_.op().geom, w, 0,
                                     flow_.options().r_trunc));
    }
    for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
      std::vector<double> diff_per_s;
      for (int i = 0; i < S; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < samples[k][i].size(); ++j)
          d = std::max(d, std::abs(samples[k][i][j] - samples[k + 1][i][j]));
        diff_per_s.push_back(d);
      }
      fam.cauchy.push_back(std::move(diff_per_s));
    }
    // compare successive differences only above the sampling noise floor
    // (0.1% of the state amplitude at that clock)
    for (std::size_t k = 0; k + 1 < fam.cauchy.size(); ++k)
      for (int i = 0; i < S; ++i) {
        double amp = 0.0;
        for (double x : fam.w[i]) amp = std::max(amp, std::abs(x));
        const double floor_ = std::max(1e-9, 1e-3 * amp);
        if (fam.cauchy[k][i] > floor_ && fam.cauchy[k + 1][i] > fam.cauchy[k][i])
          fam.convergence_warning = true;
      }
    return fam;
  }

  // graphical phase to the handoff state: gauge at eta * handoff_frac or
  // neck radius below handoff_neck_cells * h, whichever first
  struct Handoff {
    std::vector<double> v;   // full grid
    double t = 0.0;
    GraphFlowTrajectory traj;
  };

  Handoff to_handoff(double eps) const {
    GraphFlowOptions o = opt_.flow;
    o.eta = opt_.handoff_gauge;
    o.m = std::max(o.m, 2000);  // the handoff residual check wants low grid noise
    GraphFlow deep(sigma_.base, sigma_.start_symmetry, o);
    const auto spec = lowest_eigenpair(deep.op());
    std::vector<double> v0(spec.f.size());
    for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = eps * spec.f[i];
    const double t_max = std::log(1.0 / eps) / (-spec.lambda0) * 3.0 + 8.0;
    auto traj = deep.run(v0, t_max);
    const double neck_floor = opt_.handoff_neck_cells * opt_.grid.h;
    Handoff h;
    h.traj = traj;
    std::size_t pick = traj.v.size() - 1;
    for (std::size_t k = 0; k < traj.v.size(); ++k) {
      const auto pushed = push_graph(deep.op().grid, deep.op().geom, traj.v[k],
                                     opt_.flow.normal_sign);
      double rmin = 1e300;
      for (const auto& p : pushed.samples) rmin = std::min(rmin, p.r);
      const double c2 = ck_proxy(deep.op().grid, deep.op().geom, traj.v[k]).c2;
      if (rmin < neck_floor || c2 > 0.5 * opt_.handoff_gauge) {
        pick = k;
        break;
      }
    }
    h.v = traj.v[pick];
    h.t = traj.times[pick];
    handoff_grid_ = deep.op().grid;
    handoff_geom_ = curve_geometry(handoff_grid_, sigma_.start_symmetry, EndSymmetry::None);
    return h;
  }

  // level-set continuation from the handoff graph; the terminal state is
  // matched against the solved branches
  struct ForwardResult {
    LevelSetEvolution evolution;
    std::optional<ExpanderProfile> sigma_plus;
    double terminal_hausdorff = 0.0;
    double terminal_motion = 0.0;
    bool unresolved = false;
  };

  ForwardResult forward_continue(const Handoff& h,
                                 const std::vector<ExpanderProfile>& candidates) const {
    const auto pushed = push_graph(handoff_grid_, handoff_geom_, h.v, opt_.flow.normal_sign);
    // strict expander mean convexity of the handoff, measured against the
    // base grid's own discrete residual (same stencil, so the systematic
    // part cancels) above a small absolute floor and inside the box
    const auto res = expander_residual(pushed, sigma_.start_symmetry, EndSymmetry::None);
    const auto base_res = expander_residual(handoff_grid_, sigma_.start_symmetry,
                                            EndSymmetry::None);
    const double box = std::hypot(opt_.grid.r_max, std::max(std::abs(opt_.grid.z_min),
                                                            opt_.grid.z_max));
    int pos = 0, neg = 0;
    for (std::size_t i = 1; i + 1 < res.size(); ++i) {
      if (norm(pushed[i]) > box) continue;
      const double corrected = res[i] - base_res[i];
      if (std::abs(corrected) <= 1e-5) continue;
      (corrected > 0 ? pos : neg)++;
    }
    if (pos && neg)
      throw UnresolvedLimitError("handoff state is not expander mean convex (mixed residual)");

    const auto ls0 = init_from_domain(shape_neck_inside(pushed), opt_.grid);
    ForwardResult out;
    out.evolution = evolve(ls0, opt_.t_forward, opt_.evolve);

    const auto& terminal = out.evolution.snapshots.back();
    const double band = 4 * opt_.grid.h;
    const auto pts = clip_points(interface_points(terminal), 0, opt_.grid.r_max - band,
                                 opt_.grid.z_min + band, opt_.grid.z_max - band);
    double best = 1e300, second = 1e300;
    const ExpanderProfile* who = nullptr;
    for (const auto& c : candidates) {
      const double d = hausdorff_to_branch(pts, c, band);
      if (d < best) {
        second = best;
        best = d;
        who = &c;
      } else {
        second = std::min(second, d);
      }
    }
    out.terminal_hausdorff = best;
    // near-static check in place of a pointwise residual bound
    auto tail = evolve(terminal, 0.05, opt_.evolve);
    const auto pts2 = clip_points(interface_points(tail.snapshots.back()), 0,
                                  opt_.grid.r_max - band, opt_.grid.z_min + band,
                                  opt_.grid.z_max - band);
    out.terminal_motion = hausdorff(pts, pts2);

    const double tol = opt_.match_tol_cells * opt_.grid.h;
    if (!who || best > tol || out.terminal_motion > 5 * opt_.grid.h) {
      out.unresolved = true;
      return out;
    }
    if (second < 2.0 * best)
      throw UnresolvedLimitError("terminal branch matching is ambiguous");
    out.sigma_plus = *who;
    return out;
  }

  // full interface polyline of a candidate branch within the grid box
  double hausdorff_to_branch(const std::vector<Vec2>& pts, const ExpanderProfile& c,
                             double band) const {
    std::vector<Vec2> poly;
    auto add_clipped = [&](const ProfileCurve& cur) {
      for (const auto& p : cur.samples)
        if (p.r < opt_.grid.r_max - band && p.z > opt_.grid.z_min + band &&
            p.z < opt_.grid.z_max - band)
          poly.push_back(p);
    };
    if (c.family == ShootFamily::Neck) {
      add_clipped(mirror_through_equator(c.base));
    } else {
      add_clipped(c.base);
      if (c.mirrored) add_clipped(mirror_z(c.base));
    }
    if (poly.empty() || pts.empty()) return 1e300;
    double d = 0.0;
    for (const Vec2& p : pts) d = std::max(d, detail::dist_to_polyline(poly, p.r, p.z));
    for (const Vec2& q : poly) d = std::max(d, dist_to_points(q, pts));
    return d;
  }

  const ProfileCurve& handoff_grid() const { return handoff_grid_; }
  const CurveGeometry& handoff_geom() const { return handoff_geom_; }
  const MorseOptions& options() const { return opt_; }
  const ExpanderProfile& sigma_minus() const { return sigma_; }

 private:
  static std::vector<double> interp_state(const GraphFlowTrajectory& traj, double t) {
    if (t <= traj.times.front()) return traj.v.front();
    for (std::size_t k = 1; k < traj.times.size(); ++k) {
      if (traj.times[k] >= t) {
        const double th = (t - traj.times[k - 1]) / (traj.times[k] - traj.times[k - 1]);
        std::vector<double> out(traj.v[k].size());
        for (std::size_t i = 0; i < out.size(); ++i)
          out[i] = (1 - th) * traj.v[k - 1][i] + th * traj.v[k][i];
        return out;
      }
    }
    return traj.v.back();
  }

  MorseOptions opt_;
  ExpanderProfile sigma_;
  GraphFlow flow_;
  SpectralResult spec_;
  double omega0_ = 0.0;
  mutable ProfileCurve handoff_grid_;
  mutable CurveGeometry handoff_geom_;
};

// Witness domain for the containment clause: a ball that must stay inside
// Omega(t) for every stored time.
struct Witness {
  double z0 = 0.0;
  double rho = 0.1;
};

inline CertificationReport certify(const MorseLineRecord& rec,
                                   const std::optional<Witness>& witness = {},
                                   double eps_asym = 0.05, double r0_asym = 2.0) {
  CertificationReport cert;
  // (1) monotone / strictly monotone with one-cell slack: later sets stay
  // within the one-cell inflation of earlier sets, and the run moves
  // inward by at least one cell somewhere (a static flow is monotone but
  // not strict)
  cert.monotone = rec.forward.monotone_violations == 0;
  bool slack_ok = true;
  const auto& snaps = rec.forward.snapshots;
  for (std::size_t k = 1; k < snaps.size() && slack_ok; ++k) {
    const auto& a = snaps[k - 1];
    const auto& b = snaps[k];
    for (std::size_t c = 0; c < a.phi.size(); ++c) {
      if (b.phi[c] <= 0.0 && a.phi[c] > a.grid.h) {
        slack_ok = false;
        break;
      }
    }
  }
  double max_inward = 0.0;
  if (snaps.size() >= 2) {
    const auto& a = snaps.front();
    const auto& b = snaps.back();
    for (std::size_t c = 0; c < a.phi.size(); ++c)
      if (std::abs(a.phi[c]) <= 2 * a.grid.h)
        max_inward = std::max(max_inward, b.phi[c] - a.phi[c]);
  }
  cert.strictly_monotone = cert.monotone && slack_ok && max_inward >= snaps.front().grid.h;

  // (2) asymptotics: early graph (sigma_minus) and terminal branch admit a
  // radius R0 beyond which they are C^1-close to the cone (the clause
  // quantifies existentially over R0)
  auto cone_close_beyond = [&](const ProfileCurve& c, double alpha, double r0) {
    bool any = false;
    for (std::size_t i = 1; i + 1 < c.samples.size(); ++i) {
      const auto& p = c.samples[i];
      if (p.r < r0) continue;
      any = true;
      const double dz = (c.samples[i + 1].z - c.samples[i - 1].z);
      const double dr = (c.samples[i + 1].r - c.samples[i - 1].r);
      const double slope = dr != 0 ? dz / dr : 1e300;
      if (std::abs(std::abs(p.z) - alpha * p.r) / std::max(p.r, 1.0) > eps_asym ||
          std::abs(std::abs(slope) - alpha) > eps_asym) {
        return false;
      }
    }
    return any;
  };
  auto cone_close = [&](const ProfileCurve& c, double alpha) {
    for (double r0 : {r0_asym, 2.0 * r0_asym, 3.0 * r0_asym, 4.0 * r0_asym})
      if (cone_close_beyond(c, alpha, r0)) return true;
    return false;
  };
  const double alpha = rec.sigma_minus.cone.aperture;
  cert.asymptotic_to_cone = cone_close(rec.sigma_minus.base, alpha) &&
                            (!rec.sigma_plus || cone_close(rec.sigma_plus->base, alpha));

  // (3) backward limit: translated norms decay toward the base going back
  bool decay = rec.ancient.w0.size() >= 3;
  for (std::size_t k = 1; k < rec.ancient.w0.size() && decay; ++k)
    if (rec.ancient.w0[k] < rec.ancient.w0[k - 1] * (1.0 - 1e-9)) decay = false;
  cert.backward_limit = decay && !rec.ancient.convergence_warning;

  // (4) forward limit
  cert.forward_limit = rec.sigma_plus.has_value() && !rec.unresolved_limit;

  if (witness) {
    bool contained = true;
    for (const auto& s : snaps) {
      for (int i = 0; i < s.nr && contained; ++i)
        for (int j = 0; j < s.nz; ++j) {
          const double d = std::hypot(s.r(i), s.z(j) - witness->z0);
          if (d <= witness->rho && s.at(i, j) > 0.0) {
            contained = false;
            break;
          }
        }
      if (!contained) break;
    }
    cert.witness_contained = contained;
  }
  return cert;
}

inline Json certification_json(const CertificationReport& c) {
  Json j = Json::object();
  j["monotone"] = c.monotone;
  j["strictly_monotone"] = c.strictly_monotone;
  j["asymptotic_to_cone"] = c.asymptotic_to_cone;
  j["backward_limit_is_sigma_minus"] = c.backward_limit;
  j["forward_limit_is_sigma_plus"] = c.forward_limit;
  if (c.witness_contained) j["witness_contained"] = *c.witness_contained;
  j["regular"] = c.regular;
  j["strongly_regular"] = c.strongly_regular;
  return j;
}

// Persist a record as a directory: manifest.json, per-eps trajectory CSVs,
// level-set snapshot binaries, terminal profile CSV.
inline void write_record(const MorseLineRecord& rec, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Json m = Json::object();
  m["lambda0"] = rec.lambda0;
  m["aperture"] = rec.sigma_minus.cone.aperture;
  m["shooting_parameter"] = rec.sigma_minus.shooting_parameter;
  Json eps = Json::array();
  for (double e : rec.epsilons) eps.push_back(e);
  m["epsilons"] = eps;
  Json t0 = Json::array();
  for (double t : rec.t0_eps) t0.push_back(t);
  m["t0_eps"] = t0;
  m["handoff_time"] = rec.handoff_time;
  m["terminal_hausdorff"] = rec.terminal_hausdorff;
  m["terminal_motion"] = rec.terminal_motion;
  m["unresolved_limit"] = rec.unresolved_limit;
  m["sigma_plus_found"] = rec.sigma_plus.has_value();
  if (rec.sigma_plus) {
    m["sigma_plus_family"] =
        rec.sigma_plus->family == ShootFamily::Disk ? "disk" : "neck";
    m["sigma_plus_parameter"] = rec.sigma_plus->shooting_parameter;
  }
  m["certification"] = certification_json(rec.certification);
  Json evs = Json::array();
  for (const auto& e : rec.forward.events) {
    Json je = Json::object();
    je["t"] = e.t;
    je["kind"] = to_string(e.kind);
    evs.push_back(je);
  }
  m["events"] = evs;
  write_json(dir + "/manifest.json", m);

  for (std::size_t k = 0; k < rec.trajectories.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof(name), "/trajectory_eps%zu.csv", k);
    write_trajectory_csv(rec.trajectories[k], dir + name);
  }
  for (std::size_t k = 0; k < rec.forward.snapshots.size(); ++k) {
    char name[64];
    std::snprintf(name, sizeof(name), "/field_%04zu", k);
    write_field(rec.forward.snapshots[k], dir + name);
  }
  if (!rec.forward.snapshots.empty())
    write_contour_csv(rec.forward.snapshots.back(), dir + "/terminal_profile.csv");
  if (rec.sigma_plus) write_profile_csv(rec.sigma_plus->base, dir + "/sigma_plus.csv");
  write_profile_csv(rec.sigma_minus.base, dir + "/sigma_minus.csv");
}

}  // namespace emcf
