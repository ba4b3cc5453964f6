#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "emcf/morse.hpp"

using namespace emcf;
using Catch::Approx;

namespace {

struct Branches {
  std::vector<ExpanderProfile> all;
  ExpanderProfile disk;
  ExpanderProfile neck_unstable;
};

const Branches& branches() {
  static const Branches B = [] {
    Cone cone;
    cone.aperture = 0.35;
    cone.double_symmetric = true;
    SolveOptions opt;
    opt.shoot.r_max = 16.0;
    Branches b;
    b.all = solve_expander(2, cone, opt);
    bool have_disk = false, have_neck = false;
    for (const auto& q : b.all) {
      if (q.family == ShootFamily::Disk && !have_disk) {
        b.disk = q;
        have_disk = true;
      }
      if (q.family == ShootFamily::Neck &&
          (!have_neck || q.shooting_parameter < b.neck_unstable.shooting_parameter)) {
        b.neck_unstable = q;
        have_neck = true;
      }
    }
    REQUIRE(have_disk);
    REQUIRE(have_neck);
    return b;
  }();
  return B;
}

MorseOptions coarse_options() {
  MorseOptions mo;
  mo.flow.m = 700;
  mo.flow.sample_dt = 0.01;
  mo.grid.h = 1.0 / 64;
  mo.grid.r_max = 2.5;
  mo.grid.z_min = -2.0;
  mo.grid.z_max = 2.0;
  mo.evolve.sample_dt = 0.05;
  mo.eps_list = {4e-3, 2e-3, 1e-3};
  mo.lookback = 0.6;
  mo.t_forward = 1.6;
  return mo;
}

const MorsePipeline& pipeline() {
  static const MorsePipeline p(branches().neck_unstable, coarse_options());
  return p;
}

}  // namespace

TEST_CASE("perturb: zero eps, exact C2 normalization, wrong branch rejected") {
  const auto& P = pipeline();
  const auto v0 = P.perturb(0.0);
  for (double v : v0) REQUIRE(v == 0.0);
  for (double eps : {1e-3, 1e-2}) {
    const auto v = P.perturb(eps);
    std::vector<double> full(P.flow().op().m, 0.0);
    std::copy(v.begin(), v.end(), full.begin());
    const double c2 = ck_proxy(P.flow().op().grid, P.flow().op().geom, full).c2;
    REQUIRE(c2 == Approx(eps).epsilon(1e-12));
  }
  REQUIRE_THROWS_AS(MorsePipeline(branches().disk, coarse_options()), WrongBranchError);
}

TEST_CASE("perturbed graph has negative relative entropy") {
  const auto& P = pipeline();
  const auto v0 = P.perturb(1e-2);
  const auto d = P.flow().diagnostics(v0, 0.0);
  REQUIRE(d.e_rel < 0.0);
}

TEST_CASE("calibration on a synthetic exponential trajectory") {
  GraphFlowTrajectory traj;
  const double eps = 1e-3, c = 2.0, omega0 = 0.05;
  for (int k = 0; k <= 200; ++k) {
    const double t = k * 0.02;
    GraphDiagnostics d;
    d.t = t;
    d.w0 = eps * std::exp(c * t);
    traj.times.push_back(t);
    traj.diag.push_back(d);
    traj.v.push_back({});
  }
  const double t0 = MorsePipeline::calibrate_time_translation(traj, omega0);
  REQUIRE(t0 == Approx(std::log(omega0 / eps) / c).epsilon(1e-3));
  REQUIRE_THROWS_AS(MorsePipeline::calibrate_time_translation(traj, 1e9), CalibrationError);
}

TEST_CASE("halving eps shifts the calibration time by log(2)/|lambda0|") {
  const auto& P = pipeline();
  const auto t0a = P.calibrate(P.run_eps(2e-3));
  const auto t0b = P.calibrate(P.run_eps(1e-3));
  const double expect = std::log(2.0) / (-P.spectral().lambda0);
  REQUIRE(t0b - t0a == Approx(expect).epsilon(0.05));
  REQUIRE(t0b > t0a);
}

TEST_CASE("T0 is affine in -log(eps) with small fit residual; w0 stays below omega0") {
  const auto& P = pipeline();
  const auto& eps_list = P.options().eps_list;
  std::vector<double> x, y;
  for (double eps : eps_list) {
    const auto traj = P.run_eps(eps);
    const double t0 = P.calibrate(traj);
    x.push_back(-std::log(eps));
    y.push_back(t0);
    for (const auto& d : traj.diag) {
      if (d.t <= t0) REQUIRE(d.w0 <= P.omega0() * (1.0 + 1e-6));
    }
  }
  // affine fit and max relative residual
  const std::size_t K = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < K; ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  const double slope = (K * sxy - sx * sy) / (K * sxx - sx * sx);
  const double icept = (sy - slope * sx) / K;
  REQUIRE(slope > 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double fit = icept + slope * x[k];
    REQUIRE(std::abs(fit - y[k]) <= 0.1 * std::abs(y[k]));
  }
}

TEST_CASE("kappa admits an eps-independent cap over the calibrated windows") {
  const auto& P = pipeline();
  std::vector<double> caps;
  for (double eps : P.options().eps_list) {
    const auto traj = P.run_eps(eps);
    const double t0 = P.calibrate(traj);
    double mx = 0.0;
    for (const auto& d : traj.diag)
      if (d.t <= t0 && d.w0 > 0) mx = std::max(mx, d.kappa);
    caps.push_back(mx);
  }
  const double lo = *std::min_element(caps.begin(), caps.end());
  const double hi = *std::max_element(caps.begin(), caps.end());
  REQUIRE(hi <= 1.5 * lo);
}

TEST_CASE("ancient family: calibrated at s = 0, decaying backward, Cauchy in eps") {
  const auto& P = pipeline();
  const auto fam = P.ancient_limit(P.options().eps_list, P.options().lookback);
  REQUIRE(fam.s.front() >= -P.options().lookback - 1e-12);
  REQUIRE(fam.s.front() <= -0.5 * P.options().lookback);
  REQUIRE(fam.s.back() == Approx(0.0).margin(1e-12));
  REQUIRE(fam.w0.back() == Approx(P.omega0()).epsilon(0.01));
  for (std::size_t k = 1; k < fam.w0.size(); ++k) REQUIRE(fam.w0[k] >= fam.w0[k - 1]);
  REQUIRE(fam.cauchy.size() == 2);
  // cross-eps agreement tightens by at least 2x per halving at the far end
  // of the window, unless both pairs already agree to measurement noise
  double amp0 = 0.0;
  for (double x : fam.w[0]) amp0 = std::max(amp0, std::abs(x));
  const bool at_noise = fam.cauchy[0][0] <= 1e-4 * amp0 && fam.cauchy[1][0] <= 1e-4 * amp0;
  REQUIRE((at_noise || fam.cauchy[1][0] <= 0.5 * fam.cauchy[0][0]));
  REQUIRE_FALSE(fam.convergence_warning);
}

TEST_CASE("full pipeline: handoff, pinch, two-disk limit, certification") {
  const auto& P = pipeline();
  const auto& B = branches();
  auto handoff = P.to_handoff(P.options().eps_list.front());
  // handoff residual is one-signed where it exceeds the grid's own
  // discrete residual noise (strict expander mean convexity)
  const auto pushed =
      push_graph(P.handoff_grid(), P.handoff_geom(), handoff.v, -1.0);
  const auto res = expander_residual(pushed, EndSymmetry::Equator, EndSymmetry::None);
  const auto base_res =
      expander_residual(P.handoff_grid(), EndSymmetry::Equator, EndSymmetry::None);
  int pos = 0, neg = 0;
  for (std::size_t i = 1; i + 1 < res.size(); ++i) {
    if (norm(pushed[i]) > 3.2) continue;
    const double corrected = res[i] - base_res[i];
    if (std::abs(corrected) <= 1e-5) continue;
    (corrected > 0 ? pos : neg)++;
  }
  REQUIRE(pos > 0);
  REQUIRE(neg == 0);

  auto fwd = P.forward_continue(handoff, B.all);
  REQUIRE_FALSE(fwd.unresolved);
  REQUIRE(fwd.sigma_plus.has_value());
  REQUIRE(fwd.sigma_plus->family == ShootFamily::Disk);
  REQUIRE(fwd.terminal_hausdorff <= 10 * P.options().grid.h);
  bool pinched = false;
  for (const auto& e : fwd.evolution.events)
    if (e.kind == EventKind::Pinch) pinched = true;
  REQUIRE(pinched);
  REQUIRE(fwd.evolution.monotone_violations == 0);

  MorseLineRecord rec;
  rec.sigma_minus = P.sigma_minus();
  rec.lambda0 = P.spectral().lambda0;
  rec.epsilons = P.options().eps_list;
  rec.ancient = P.ancient_limit(P.options().eps_list, P.options().lookback, &rec.trajectories,
                                &rec.t0_eps);
  rec.handoff_v = handoff.v;
  rec.handoff_time = handoff.t;
  rec.forward = fwd.evolution;
  rec.sigma_plus = fwd.sigma_plus;
  rec.unresolved_limit = fwd.unresolved;
  rec.terminal_hausdorff = fwd.terminal_hausdorff;
  rec.terminal_motion = fwd.terminal_motion;

  Witness wit;
  wit.z0 = B.disk.base[0].z + 0.45;
  wit.rho = 0.12;
  rec.certification = certify(rec, wit);
  REQUIRE(rec.certification.monotone);
  REQUIRE(rec.certification.strictly_monotone);
  REQUIRE(rec.certification.asymptotic_to_cone);
  REQUIRE(rec.certification.backward_limit);
  REQUIRE(rec.certification.forward_limit);
  REQUIRE(rec.certification.witness_contained.has_value());
  REQUIRE(*rec.certification.witness_contained);
  REQUIRE(rec.certification.regular == "not evaluated");

  // record persists as a directory with the expected artifacts
  const std::string dir = "/tmp/emcf_test_record";
  std::filesystem::remove_all(dir);
  write_record(rec, dir);
  REQUIRE(std::filesystem::exists(dir + "/manifest.json"));
  REQUIRE(std::filesystem::exists(dir + "/trajectory_eps0.csv"));
  REQUIRE(std::filesystem::exists(dir + "/terminal_profile.csv"));
  REQUIRE(std::filesystem::exists(dir + "/sigma_minus.csv"));
  REQUIRE(std::filesystem::exists(dir + "/sigma_plus.csv"));
  std::ifstream mf(dir + "/manifest.json");
  std::string text((std::istreambuf_iterator<char>(mf)), {});
  for (const char* key :
       {"monotone", "strictly_monotone", "asymptotic_to_cone",
        "backward_limit_is_sigma_minus", "forward_limit_is_sigma_plus", "regular",
        "strongly_regular", "witness_contained"})
    REQUIRE(text.find(key) != std::string::npos);
}

TEST_CASE("degenerate static record: monotone holds, strictness fails") {
  const auto& B = branches();
  GridParams g;
  g.h = 1.0 / 64;
  g.r_max = 2.0;
  g.z_min = -2.0;
  g.z_max = 2.0;
  const auto f = init_from_domain(shape_graph_region(B.disk.base, false), g);
  MorseLineRecord rec;
  rec.sigma_minus = B.neck_unstable;
  EvolveOptions eo;
  eo.sample_dt = 0.05;
  rec.forward = evolve(f, 0.1, eo);
  rec.sigma_plus = B.disk;
  rec.ancient.w0 = {1.0, 2.0, 3.0};  // synthetic increasing history
  const auto cert = certify(rec);
  REQUIRE(cert.monotone);
  REQUIRE_FALSE(cert.strictly_monotone);
  REQUIRE_FALSE(cert.witness_contained.has_value());
}
