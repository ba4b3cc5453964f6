#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "emcf/expanders.hpp"
#include "emcf/graph_flow.hpp"
#include "emcf/spectral.hpp"

using namespace emcf;
using Catch::Approx;

namespace {

ProfileCurve flat_profile(int n, double r_max, std::size_t m) {
  ProfileCurve c;
  c.n = n;
  c.kind = CurveKind::GraphOverRadius;
  for (std::size_t i = 0; i < m; ++i)
    c.samples.push_back({r_max * double(i) / double(m - 1), 0.0});
  return c;
}

struct UnstableFixture {
  ExpanderProfile branch;
  GraphFlow flow;
  SpectralResult spec;

  UnstableFixture()
      : branch([] {
          Cone cone;
          cone.aperture = 0.35;
          cone.double_symmetric = true;
          SolveOptions opt;
          opt.shoot.r_max = 16.0;
          auto found = solve_expander(2, cone, opt);
          const ExpanderProfile* best = nullptr;
          for (const auto& q : found)
            if (q.family == ShootFamily::Neck &&
                (!best || q.shooting_parameter < best->shooting_parameter))
              best = &q;
          return *best;
        }()),
        flow(branch, [] {
          GraphFlowOptions o;
          o.m = 900;
          o.normal_sign = -1.0;  // perturb into the neck region
          return o;
        }()),
        spec(lowest_eigenpair(flow.op())) {}
};

const UnstableFixture& fx() {
  static UnstableFixture f;
  return f;
}

std::vector<double> scaled(const std::vector<double>& f, double c) {
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = c * f[i];
  return out;
}

}  // namespace

TEST_CASE("zero graph is an exact fixed point") {
  const auto& F = fx();
  std::vector<double> v0(F.flow.op().unknowns(), 0.0);
  const auto traj = F.flow.run(v0, 1.0);
  REQUIRE_FALSE(traj.gauge_broke);
  for (const auto& d : traj.diag) REQUIRE(d.w0 <= 1e-8);
}

TEST_CASE("positive eigenfunction data grows pointwise after one step") {
  const auto& F = fx();
  REQUIRE(F.spec.lambda0 < -1e-3);
  const auto v0 = scaled(F.spec.f, 1e-3);
  const auto v1 = F.flow.step(v0, 1e-3);
  for (std::size_t i = 0; i < v0.size(); ++i) REQUIRE(v1[i] >= v0[i] - 1e-12);
}

TEST_CASE("one step matches the assembled operator on small data") {
  const auto& F = fx();
  const double eps = 1e-4, dt = 1e-5;
  const auto v0 = scaled(F.spec.f, eps);
  const auto v1 = F.flow.step(v0, dt);
  const auto& op = F.flow.op();
  std::vector<double> Mv;
  op.apply_form(v0, Mv);
  std::vector<double> diff(v0.size()), lv_vec(v0.size());
  for (std::size_t i = 0; i < v0.size(); ++i) {
    lv_vec[i] = -Mv[i] / op.mass[i];  // L v0
    diff[i] = (v1[i] - v0[i]) / dt - lv_vec[i];
  }
  auto w0_of = [&](const std::vector<double>& u) {
    std::vector<double> full(op.m, 0.0);
    std::copy(u.begin(), u.end(), full.begin());
    return weighted_norm(op.grid, op.geom, full, 0, op.r_trunc);
  };
  REQUIRE(w0_of(diff) <= 0.02 * w0_of(lv_vec));
}

TEST_CASE("quadratic nonlinearity: remainder scales with the square of the data") {
  const auto& F = fx();
  const auto& op = F.flow.op();
  auto w0_of = [&](const std::vector<double>& u) {
    std::vector<double> full(op.m, 0.0);
    std::copy(u.begin(), u.end(), full.begin());
    return weighted_norm(op.grid, op.geom, full, 0, op.r_trunc);
  };
  // remainder of the nonlinear speed against the assembled linear part,
  // with the eps-proportional discretization mismatch (measured in the
  // small-eps limit) removed
  auto remainder = [&](double eps) {
    const auto v0 = scaled(F.spec.f, eps);
    const auto Fv = F.flow.nonlinear_speed(v0);
    std::vector<double> Mv;
    op.apply_form(v0, Mv);
    std::vector<double> rem(v0.size());
    for (std::size_t i = 0; i < v0.size(); ++i) rem[i] = Fv[i] + Mv[i] / op.mass[i];
    return rem;
  };
  const double e_lo = 1e-4;
  const auto base = remainder(e_lo);
  auto resid = [&](double eps) {
    auto r = remainder(eps);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= (eps / e_lo) * base[i];
    return w0_of(r);
  };
  const double r1 = resid(2e-2);
  const double r2 = resid(1e-2);
  const double p = std::log(r1 / r2) / std::log(2.0);
  REQUIRE(p >= 1.9);
  REQUIRE(p <= 2.1);
}

TEST_CASE("unstable growth of ln w0 matches -lambda0") {
  const auto& F = fx();
  const double eps = 1e-4;
  const auto traj = F.flow.run(scaled(F.spec.f, eps), 0.6);
  REQUIRE_FALSE(traj.gauge_broke);
  std::vector<double> ts, ln_w0;
  for (const auto& d : traj.diag) {
    if (d.t < 0.05) continue;
    ts.push_back(d.t);
    ln_w0.push_back(std::log(d.w0));
  }
  REQUIRE(ts.size() >= 5);
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    st += ts[k];
    sy += ln_w0[k];
    stt += ts[k] * ts[k];
    sty += ts[k] * ln_w0[k];
  }
  const double nk = double(ts.size());
  const double slope = (nk * sty - st * sy) / (nk * stt - st * st);
  REQUIRE(slope == Approx(-F.spec.lambda0).epsilon(0.05));
}

TEST_CASE("stable base: w0 decays monotonically") {
  const auto base = flat_profile(2, 8.0, 8000);
  GraphFlowOptions o;
  o.m = 800;
  GraphFlow flow(base, EndSymmetry::Axis, o);
  const auto spec = lowest_eigenpair(flow.op());
  REQUIRE(spec.lambda0 == Approx(1.5).epsilon(0.02));
  const auto traj = flow.run(scaled(spec.f, 1e-3), 0.5);
  for (std::size_t k = 1; k < traj.diag.size(); ++k)
    REQUIRE(traj.diag[k].w0 <= traj.diag[k - 1].w0 * (1.0 + 1e-10));
}

TEST_CASE("monotone flows: eigenfunction run has no violations") {
  const auto& F = fx();
  const auto traj = F.flow.run(scaled(F.spec.f, 1e-3), 0.4);
  REQUIRE(check_monotone(traj).empty());
}

TEST_CASE("hand-built decreasing sequence is reported with indices") {
  GraphFlowTrajectory traj;
  traj.times = {0.0, 1.0};
  traj.v = {{0.0, 2.0, 0.0}, {0.0, 1.0, 0.0}};
  const auto viol = check_monotone(traj);
  REQUIRE(viol.size() == 1);
  REQUIRE(viol[0].sample == 1);
  REQUIRE(viol[0].t_earlier == 0.0);
  REQUIRE(viol[0].t_later == 1.0);
}

TEST_CASE("pure mode has constant kappa; high-frequency data is flagged") {
  const auto& F = fx();
  GraphFlowTrajectory traj;
  for (double c : {1e-4, 2e-4, 5e-4, 1e-3}) {
    traj.times.push_back(traj.times.size() * 0.1);
    traj.v.push_back(F.flow.full(scaled(F.spec.f, c)));
    traj.diag.push_back(F.flow.diagnostics(scaled(F.spec.f, c), traj.times.back()));
  }
  const auto rep = monitor_reverse_poincare(traj);
  double kmin = 1e300, kmax = 0;
  for (const auto& d : traj.diag) {
    kmin = std::min(kmin, d.kappa);
    kmax = std::max(kmax, d.kappa);
  }
  REQUIRE(kmax - kmin <= 1e-6 * kmax);
  REQUIRE_FALSE(rep.flagged);

  GraphFlowTrajectory hf;
  hf.times = {0.0};
  std::vector<double> osc(F.flow.op().unknowns());
  const double quarter[4] = {0.0, 1.0, 0.0, -1.0};
  for (std::size_t i = 0; i < osc.size(); ++i) osc[i] = 1e-6 * quarter[i % 4];
  hf.v.push_back(F.flow.full(osc));
  hf.diag.push_back(F.flow.diagnostics(osc, 0.0));
  const auto rep2 = monitor_reverse_poincare(hf, 50.0);
  REQUIRE(rep2.flagged);
}

TEST_CASE("degenerate ratio is surfaced") {
  GraphFlowTrajectory traj;
  GraphDiagnostics d;
  d.w0 = 0.0;
  d.w1 = 1.0;
  traj.diag.push_back(d);
  REQUIRE_THROWS_AS(monitor_reverse_poincare(traj), DegenerateRatioError);
}

TEST_CASE("comparison principle: ordered initial data stays ordered") {
  const auto& F = fx();
  const auto lo = F.flow.run(scaled(F.spec.f, 5e-4), 0.3);
  const auto hi = F.flow.run(scaled(F.spec.f, 1e-3), 0.3);
  REQUIRE(lo.times.size() == hi.times.size());
  for (std::size_t k = 0; k < lo.times.size(); ++k)
    for (std::size_t i = 0; i < lo.v[k].size(); ++i)
      REQUIRE(lo.v[k][i] <= hi.v[k][i] + 1e-9);
}

TEST_CASE("growth bound with fitted constant") {
  const auto& F = fx();
  const auto traj = F.flow.run(scaled(F.spec.f, 1e-4), 0.6);
  double C = 0.0;
  const double w00 = traj.diag.front().w0;
  for (const auto& d : traj.diag)
    if (d.t > 0) C = std::max(C, std::log(d.w0 / w00) / d.t);
  for (const auto& d : traj.diag)
    REQUIRE(d.w0 <= std::exp(1.1 * C * d.t) * w00 * (1.0 + 1e-9));
}

TEST_CASE("relative entropy is negative and nonincreasing on the unstable run") {
  const auto& F = fx();
  const auto traj = F.flow.run(scaled(F.spec.f, 1e-2), 0.4);
  for (std::size_t k = 1; k < traj.diag.size(); ++k) {
    if (traj.diag[k].t < 0.01) continue;
    REQUIRE(traj.diag[k].e_rel < 0.0);
    REQUIRE(traj.diag[k].e_rel <= traj.diag[k - 1].e_rel + 1e-12);
  }
}

TEST_CASE("gauge breakdown is recorded with its first violating time") {
  const auto& F = fx();
  GraphFlowOptions o = F.flow.options();
  o.eta = 0.02;  // tight gauge so the unstable growth exits quickly
  GraphFlow flow(F.branch, o);
  const auto spec = lowest_eigenpair(flow.op());
  const auto traj = flow.run(scaled(spec.f, 4e-3), 5.0);
  REQUIRE(traj.gauge_broke);
  REQUIRE(traj.t_break > 0.0);
  REQUIRE(traj.t_break < 5.0);
}

TEST_CASE("initial data beyond alpha0 is rejected") {
  const auto& F = fx();
  REQUIRE_THROWS_AS(F.flow.run(scaled(F.spec.f, 0.9), 1.0), GaugeBreakdownError);
}
