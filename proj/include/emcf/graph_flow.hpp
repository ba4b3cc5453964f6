#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "emcf/geometry.hpp"
#include "emcf/spectral.hpp"

namespace emcf {

struct GaugeBreakdownError : std::runtime_error {
  double t_break;
  explicit GaugeBreakdownError(double t)
      : std::runtime_error("graphical gauge broke down at t = " + std::to_string(t)),
        t_break(t) {}
};
struct StepSizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateRatioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GraphFlowOptions {
  double dt = 1e-3;
  double eta = 0.1;            // C^2-proxy gauge bound
  double alpha0_frac = 0.25;   // initial data bound, alpha0 = eta * frac
  double sample_dt = 0.02;
  double r_trunc = 8.0;
  int m = 1200;
  double kappa_cap = 1e3;
  double tol_mono = 1e-8;
  double normal_sign = 1.0;    // graph direction relative to the right-hand normal
  double dt_min = 1e-8;
};

struct GraphDiagnostics {
  double t = 0.0;
  double w0 = 0.0, w1 = 0.0;
  double kappa = 0.0;
  double c2_proxy = 0.0;
  double e_rel = 0.0;
  double min_v = 0.0, max_v = 0.0;
};

struct GraphFlowTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> v;   // full grid samples per stored time
  std::vector<GraphDiagnostics> diag;
  double eta = 0.1;
  bool gauge_broke = false;
  double t_break = 0.0;                 // surrogate of T^eps(eta) when gauge_broke
};

// Graphical EMCF over a fixed base expander profile. The step computes the
// full expander residual of the pushed-forward curve and converts it to
// normal-gauge speed; the assembled stability operator provides the
// implicit linear part.
class GraphFlow {
 public:
  GraphFlow(const ProfileCurve& base, EndSymmetry start_sym, GraphFlowOptions opt = {})
      : opt_(opt), op_(assemble_stability_operator(base, start_sym, opt.r_trunc, opt.m)) {
    base_speed_ = nonlinear_speed_raw(std::vector<double>(op_.unknowns(), 0.0));
  }
  GraphFlow(const ExpanderProfile& p, GraphFlowOptions opt = {})
      : GraphFlow(p.base, p.start_symmetry, opt) {}

  const StabilityOperator& op() const { return op_; }
  const GraphFlowOptions& options() const { return opt_; }

  std::vector<double> full(const std::vector<double>& v) const {
    std::vector<double> f(op_.m, 0.0);
    std::copy(v.begin(), v.end(), f.begin());
    return f;
  }

  double c2_proxy_of(const std::vector<double>& v) const {
    return ck_proxy(op_.grid, op_.geom, full(v)).c2;
  }

  // dv/dt of the exact nonlinear normal-gauge equation at each unknown
  // node, with the base profile's own discrete residual subtracted so the
  // solved expander is an exact fixed point of the discrete dynamics.
  std::vector<double> nonlinear_speed(const std::vector<double>& v) const {
    std::vector<double> F = nonlinear_speed_raw(v);
    for (std::size_t i = 0; i < F.size(); ++i) F[i] -= base_speed_[i];
    return F;
  }

  // one semi-implicit step: linear part treated by the assembled operator,
  // nonlinear remainder explicit
  std::vector<double> step(const std::vector<double>& v, double dt) const {
    const std::size_t N = op_.unknowns();
    const std::vector<double> F = nonlinear_speed(v);
    std::vector<double> Mv;
    op_.apply_form(v, Mv);
    // (B + dt M) v' = B v + dt (B F + M v)
    std::vector<double> adiag(N), rhs(N);
    for (std::size_t i = 0; i < N; ++i) {
      adiag[i] = op_.mass[i] + dt * op_.diag[i];
      rhs[i] = op_.mass[i] * v[i] + dt * (op_.mass[i] * F[i] + Mv[i]);
    }
    std::vector<double> sub(N - 1), sup(N - 1);
    for (std::size_t i = 0; i + 1 < N; ++i) sub[i] = sup[i] = dt * op_.off[i];
    detail::solve_tridiag_pivoted(adiag, sub, sup, rhs);
    return rhs;
  }

  GraphDiagnostics diagnostics(const std::vector<double>& v, double t) const {
    GraphDiagnostics d;
    d.t = t;
    const std::vector<double> f = full(v);
    d.w0 = weighted_norm(op_.grid, op_.geom, f, 0, opt_.r_trunc);
    d.w1 = weighted_norm(op_.grid, op_.geom, f, 1, opt_.r_trunc);
    d.kappa = d.w0 > 0.0 ? d.w1 / d.w0 : 0.0;
    d.c2_proxy = ck_proxy(op_.grid, op_.geom, f).c2;
    try {
      d.e_rel = relative_expander_entropy(op_.grid, op_.geom, f, opt_.r_trunc, opt_.eta,
                                          opt_.normal_sign);
    } catch (const GraphBreakdownError&) {
      d.e_rel = std::numeric_limits<double>::quiet_NaN();
    }
    d.min_v = *std::min_element(f.begin(), f.end());
    d.max_v = *std::max_element(f.begin(), f.end());
    return d;
  }

  GraphFlowTrajectory run(const std::vector<double>& v0_in, double t_end) const {
    std::vector<double> v = v0_in;
    v.resize(op_.unknowns(), 0.0);
    if (c2_proxy_of(v) > opt_.eta * opt_.alpha0_frac)
      throw GaugeBreakdownError(0.0);
    GraphFlowTrajectory traj;
    traj.eta = opt_.eta;
    double t = 0.0;
    double next_sample = 0.0;
    auto store = [&](double tt) {
      traj.times.push_back(tt);
      traj.v.push_back(full(v));
      traj.diag.push_back(diagnostics(v, tt));
    };
    store(0.0);
    next_sample = opt_.sample_dt;
    double dt = opt_.dt;
    while (t < t_end - 1e-15) {
      const double step_dt = std::min(dt, t_end - t);
      std::vector<double> vn;
      bool ok = true;
      try {
        vn = step(v, step_dt);
      } catch (const GraphBreakdownError&) {
        ok = false;
      }
      if (ok) {
        for (double x : vn)
          if (!std::isfinite(x)) { ok = false; break; }
      }
      if (!ok) {
        dt *= 0.5;
        if (dt < opt_.dt_min) throw StepSizeError("graphical step size underflow");
        continue;
      }
      const double c2 = c2_proxy_of(vn);
      if (c2 > opt_.eta) {
        traj.gauge_broke = true;
        traj.t_break = t + step_dt;
        store(traj.t_break);
        return traj;
      }
      v = vn;
      t += step_dt;
      if (t + 1e-12 >= next_sample) {
        store(t);
        next_sample += opt_.sample_dt;
      }
    }
    if (traj.times.empty() || traj.times.back() < t - 1e-12) store(t);
    return traj;
  }

 private:
  std::vector<double> nonlinear_speed_raw(const std::vector<double>& v) const {
    const std::vector<double> f = full(v);
    const ProfileCurve graph = push_graph(op_.grid, op_.geom, f, opt_.normal_sign);
    const CurveGeometry gg = curve_geometry(graph, op_.start_sym, EndSymmetry::None);
    std::vector<double> F(op_.unknowns());
    for (std::size_t i = 0; i < F.size(); ++i) {
      const double res = gg.kappa[i] + gg.axis_term[i] + 0.5 * gg.x_dot_n[i];
      const double align = dot(op_.geom.normal[i], gg.normal[i]);
      if (align < 0.2)
        throw GraphBreakdownError("graph normal degenerated against base");
      F[i] = -opt_.normal_sign * res / align;
    }
    return F;
  }

  GraphFlowOptions opt_;
  StabilityOperator op_;
  std::vector<double> base_speed_;
};

// Max of kappa(t) = w1/w0 over the stored trajectory; flags when the cap
// is exceeded.
struct ReversePoincareReport {
  double max_kappa = 0.0;
  double t_max = 0.0;
  bool flagged = false;
};

inline ReversePoincareReport monitor_reverse_poincare(const GraphFlowTrajectory& traj,
                                                      double kappa_cap = 1e3) {
  ReversePoincareReport rep;
  for (const auto& d : traj.diag) {
    if (d.w0 == 0.0) {
      if (d.w1 > 0.0) throw DegenerateRatioError("w0 = 0 with w1 > 0");
      continue;
    }
    if (d.kappa > rep.max_kappa) {
      rep.max_kappa = d.kappa;
      rep.t_max = d.t;
    }
  }
  rep.flagged = rep.max_kappa > kappa_cap;
  return rep;
}

struct MonotoneViolation {
  double t_earlier = 0.0;
  double t_later = 0.0;
  std::size_t sample = 0;
  double excess = 0.0;
};

// Violations of 0 <= v(t,.) <= v(t',.) between consecutive stored times.
inline std::vector<MonotoneViolation> check_monotone(const GraphFlowTrajectory& traj,
                                                     double tol = 1e-8) {
  std::vector<MonotoneViolation> out;
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const auto& a = traj.v[k];
    const auto& b = traj.v[k + 1];
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] > b[i] + tol)
        out.push_back({traj.times[k], traj.times[k + 1], i, a[i] - b[i]});
    }
  }
  return out;
}

}  // namespace emcf
