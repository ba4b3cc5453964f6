#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emcf/geometry.hpp"
#include "emcf/profile.hpp"

namespace emcf {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StiffnessError : SolverError {
  using SolverError::SolverError;
};

// Profile ODE for rotationally symmetric self-expanders in arclength form.
// State (r, z, theta) with (r', z') = (cos theta, sin theta) and
//   theta' = -[(n-1) sin(theta)/r + (r sin(theta) - z cos(theta))/2],
// the curvature forced by the vanishing of the expander residual. For a
// graph z = u(r) this reduces to
//   u'' = (1 + u'^2) [(u - r u')/2 - (n-1) u'/r],
// the standard reduction of H + (x.n)/2 = 0; the axis singularity is
// resolved by the Taylor start u(r) = h + (h/(4n)) r^2 + O(r^4).
namespace detail {

struct ShootState {
  double r, z, th;
};

inline ShootState ode_rhs(const ShootState& y, int n) {
  const double st = std::sin(y.th), ct = std::cos(y.th);
  const double axis = (y.r > 1e-12) ? (n - 1) * st / y.r : 0.0;
  return {ct, st, -(axis + 0.5 * (y.r * st - y.z * ct))};
}

inline ShootState axpy(const ShootState& y, double a, const ShootState& d) {
  return {y.r + a * d.r, y.z + a * d.z, y.th + a * d.th};
}

// One Dormand-Prince 5(4) step; returns the 5th-order solution and the
// embedded error estimate.
inline void dp45_step(const ShootState& y, double h, int n, ShootState& out,
                      double& err) {
  const ShootState k1 = ode_rhs(y, n);
  const ShootState k2 = ode_rhs(axpy(y, h / 5.0, k1), n);
  ShootState t = y;
  t = axpy(t, h * 3.0 / 40.0, k1);
  t = axpy(t, h * 9.0 / 40.0, k2);
  const ShootState k3 = ode_rhs(t, n);
  t = y;
  t = axpy(t, h * 44.0 / 45.0, k1);
  t = axpy(t, h * -56.0 / 15.0, k2);
  t = axpy(t, h * 32.0 / 9.0, k3);
  const ShootState k4 = ode_rhs(t, n);
  t = y;
  t = axpy(t, h * 19372.0 / 6561.0, k1);
  t = axpy(t, h * -25360.0 / 2187.0, k2);
  t = axpy(t, h * 64448.0 / 6561.0, k3);
  t = axpy(t, h * -212.0 / 729.0, k4);
  const ShootState k5 = ode_rhs(t, n);
  t = y;
  t = axpy(t, h * 9017.0 / 3168.0, k1);
  t = axpy(t, h * -355.0 / 33.0, k2);
  t = axpy(t, h * 46732.0 / 5247.0, k3);
  t = axpy(t, h * 49.0 / 176.0, k4);
  t = axpy(t, h * -5103.0 / 18656.0, k5);
  const ShootState k6 = ode_rhs(t, n);
  out = y;
  out = axpy(out, h * 35.0 / 384.0, k1);
  out = axpy(out, h * 500.0 / 1113.0, k3);
  out = axpy(out, h * 125.0 / 192.0, k4);
  out = axpy(out, h * -2187.0 / 6784.0, k5);
  out = axpy(out, h * 11.0 / 84.0, k6);
  const ShootState k7 = ode_rhs(out, n);
  // difference between 5th- and 4th-order solutions
  const double e1 = 35.0 / 384.0 - 5179.0 / 57600.0;
  const double e3 = 500.0 / 1113.0 - 7571.0 / 16695.0;
  const double e4 = 125.0 / 192.0 - 393.0 / 640.0;
  const double e5 = -2187.0 / 6784.0 + 92097.0 / 339200.0;
  const double e6 = 11.0 / 84.0 - 187.0 / 2100.0;
  const double e7 = -1.0 / 40.0;
  const double er = h * (e1 * k1.r + e3 * k3.r + e4 * k4.r + e5 * k5.r + e6 * k6.r + e7 * k7.r);
  const double ez = h * (e1 * k1.z + e3 * k3.z + e4 * k4.z + e5 * k5.z + e6 * k6.z + e7 * k7.z);
  const double et = h * (e1 * k1.th + e3 * k3.th + e4 * k4.th + e5 * k5.th + e6 * k6.th + e7 * k7.th);
  err = std::sqrt(er * er + ez * ez + et * et);
}

}  // namespace detail

enum class BranchLabel { Innermost, Outermost, MiddleUnstable, Unclassified };

inline std::string to_string(BranchLabel b) {
  switch (b) {
    case BranchLabel::Innermost: return "innermost";
    case BranchLabel::Outermost: return "outermost";
    case BranchLabel::MiddleUnstable: return "middle/unstable";
    case BranchLabel::Unclassified: return "unclassified";
  }
  return "?";
}

enum class ShootFamily { Disk, Neck };

struct ShootOptions {
  double r_max = 24.0;      // stop radius
  double ds_out = 5e-4;     // output sampling (also the step size)
  double rtol = 1e-11;
  double atol = 1e-13;
  double s_max = 400.0;     // arclength guard
  double z_max = 200.0;     // blow-up guard
};

struct ShootResult {
  ProfileCurve profile;       // sampled curve from the start point outward
  double aperture = 0.0;      // Richardson-extrapolated asymptotic slope
  double slope_at_rmax = 0.0;
  bool complete = false;      // reached r_max
  bool blow_up = false;
  ShootFamily family = ShootFamily::Disk;
  double parameter = 0.0;     // axis height h or neck radius r0
};

// Integrate the profile ODE from either the axis (disk family, parameter =
// axis height u(0) = h, u'(0) = 0) or the neck (connected family,
// parameter = neck radius, vertical tangent at z = 0).
inline ShootResult shoot_profile(int n, ShootFamily family, double param,
                                 const ShootOptions& opt = {}) {
  if (n < 2) throw std::invalid_argument("shoot_profile requires n >= 2");
  if (!std::isfinite(param)) throw std::invalid_argument("non-finite shooting parameter");
  ShootResult out;
  out.family = family;
  out.parameter = param;
  out.profile.n = n;
  out.profile.kind = CurveKind::AxisToInfinity;

  detail::ShootState y{};
  if (family == ShootFamily::Disk) {
    // quartic Taylor launch past the axis singularity:
    // u = h + a r^2 + b r^4, a = h/(4n), b = (8a^3 - a/2)/(4n + 8)
    const double r0 = opt.ds_out;
    const double a = param / (4.0 * n);
    const double b = (8.0 * a * a * a - 0.5 * a) / (4.0 * n + 8.0);
    const double u0 = param + a * r0 * r0 + b * r0 * r0 * r0 * r0;
    const double up0 = 2.0 * a * r0 + 4.0 * b * r0 * r0 * r0;
    y = {r0, u0, std::atan(up0)};
    out.profile.samples.push_back({0.0, param});
  } else {
    if (!(param > 0.0)) throw std::invalid_argument("neck radius must be positive");
    y = {param, 0.0, std::numbers::pi / 2.0};
  }
  out.profile.samples.push_back({y.r, y.z});

  const double r_mid = opt.r_max / std::numbers::sqrt2;
  double slope_mid = 0.0;
  bool have_mid = false;

  double h = opt.ds_out;
  double s = 0.0;
  int rejects_in_row = 0;
  while (true) {
    if (s > opt.s_max) break;
    if (std::abs(y.z) > opt.z_max || y.r > 4.0 * opt.r_max) {
      out.blow_up = true;
      break;
    }
    detail::ShootState ynew;
    double err;
    detail::dp45_step(y, h, n, ynew, err);
    const double sc = opt.atol + opt.rtol * std::max({std::abs(y.r), std::abs(y.z), 1.0});
    if (err > sc) {
      h = std::max(h * std::clamp(0.9 * std::pow(sc / err, 0.2), 0.2, 1.0), 1e-14);
      if (++rejects_in_row > 60) throw StiffnessError("step size underflow in shoot_profile");
      continue;
    }
    rejects_in_row = 0;

    auto clip_to_radius = [&](double r_target) {
      // shrink the accepted step so it lands on r = r_target
      double lo = 0.0, hi = h;
      detail::ShootState yt = ynew;
      for (int it = 0; it < 60 && std::abs(yt.r - r_target) > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        double e2;
        detail::dp45_step(y, mid, n, yt, e2);
        if (yt.r < r_target) lo = mid; else hi = mid;
      }
      return yt;
    };

    if (!have_mid && y.r < r_mid && ynew.r >= r_mid) {
      const detail::ShootState ymid = clip_to_radius(r_mid);
      slope_mid = std::tan(ymid.th);
      have_mid = true;
    }
    if (ynew.r >= opt.r_max) {
      y = clip_to_radius(opt.r_max);
      out.profile.samples.push_back({y.r, y.z});
      out.complete = true;
      break;
    }

    y = ynew;
    s += h;
    out.profile.samples.push_back({y.r, y.z});
    if (family == ShootFamily::Neck && y.r <= 1e-10) {
      out.blow_up = true;  // neck curve collapsed onto the axis
      break;
    }
    h = std::min({h * std::clamp(0.9 * std::pow(sc / std::max(err, 1e-30), 0.2), 0.2, 5.0),
                  opt.ds_out});
  }

  out.slope_at_rmax = std::tan(y.th);
  if (out.complete && have_mid) {
    // slope converges as alpha - beta/r^2; eliminate the r^{-2} term
    const double ra2 = r_mid * r_mid, rb2 = opt.r_max * opt.r_max;
    out.aperture = (out.slope_at_rmax * rb2 - slope_mid * ra2) / (rb2 - ra2);
  } else {
    out.aperture = out.slope_at_rmax;
  }
  if (family == ShootFamily::Disk && param == 0.0) out.aperture = 0.0;
  return out;
}

// Solved self-expander branch. For double cones the stored curve is the
// upper half (disk sheet from the axis, or connected profile from the
// neck); `start_symmetry` records how it continues past its first sample
// and `mirrored` whether the z -> -z copy belongs to the same expander.
struct ExpanderProfile {
  ProfileCurve base;
  Cone cone;
  ShootFamily family = ShootFamily::Disk;
  double shooting_parameter = 0.0;
  double achieved_aperture = 0.0;
  BranchLabel branch = BranchLabel::Unclassified;
  double residual_sup = 0.0;
  EndSymmetry start_symmetry = EndSymmetry::Axis;
  bool mirrored = false;
};

inline double profile_residual_sup(const ExpanderProfile& p) {
  const auto res = expander_residual(p.base, p.start_symmetry, EndSymmetry::None);
  return sup_interior(res);
}

struct SolveOptions {
  double window_lo = 0.0;   // family-specific defaults chosen in solve_expander
  double window_hi = 0.0;
  int sweep_points = 96;
  double match_tol = 1e-8;
  double merge_tol = 1e-6;
  int max_roots = 8;
  ShootOptions shoot;
};

namespace detail {

inline std::vector<double> bisect_roots(const std::function<double(double)>& f,
                                        double lo, double hi, int sweep_points,
                                        double match_tol, double merge_tol,
                                        int max_roots) {
  std::vector<double> roots;
  std::vector<double> xs(sweep_points), fs(sweep_points);
  for (int i = 0; i < sweep_points; ++i) {
    xs[i] = lo + (hi - lo) * i / double(sweep_points - 1);
    fs[i] = f(xs[i]);
  }
  for (int i = 0; i + 1 < sweep_points; ++i) {
    if (fs[i] == 0.0) {
      roots.push_back(xs[i]);
      continue;
    }
    if (fs[i] * fs[i + 1] < 0.0) {
      double a = xs[i], b = xs[i + 1], fa = fs[i];
      double fm = 0.0, m = 0.5 * (a + b);
      for (int it = 0; it < 200; ++it) {
        m = 0.5 * (a + b);
        fm = f(m);
        if (std::abs(fm) <= match_tol && (b - a) < 1e-10) break;
        if (fa * fm <= 0.0) b = m; else { a = m; fa = fm; }
      }
      if (std::abs(fm) > match_tol)
        throw SolverError("root polishing did not converge to matching tolerance");
      roots.push_back(m);
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [&](double a, double b) { return std::abs(a - b) < merge_tol; }),
              roots.end());
  if ((int)roots.size() > max_roots) roots.resize(max_roots);
  return roots;
}

}  // namespace detail

// All self-expanders asymptotic to the cone found by sign changes of the
// aperture matching function over the sweep window. Disk-type profiles are
// sought for any cone; connected (neck) profiles additionally for
// double-symmetric cones.
inline std::vector<ExpanderProfile> solve_expander(int n, const Cone& cone,
                                                   const SolveOptions& opt = {}) {
  std::vector<ExpanderProfile> out;
  auto make = [&](ShootFamily fam, double p) {
    ShootResult sr = shoot_profile(n, fam, p, opt.shoot);
    ExpanderProfile ep;
    ep.base = std::move(sr.profile);
    ep.cone = cone;
    ep.family = fam;
    ep.shooting_parameter = p;
    ep.achieved_aperture = sr.aperture;
    ep.start_symmetry = fam == ShootFamily::Disk ? EndSymmetry::Axis : EndSymmetry::Equator;
    ep.mirrored = cone.double_symmetric && fam == ShootFamily::Disk;
    ep.residual_sup = profile_residual_sup(ep);
    return ep;
  };

  {
    const double lo = opt.window_lo != 0.0 || opt.window_hi != 0.0 ? opt.window_lo
                      : (cone.double_symmetric ? 1e-4 : -3.0);
    const double hi = opt.window_lo != 0.0 || opt.window_hi != 0.0 ? opt.window_hi : 3.0;
    auto f = [&](double h) {
      return shoot_profile(n, ShootFamily::Disk, h, opt.shoot).aperture - cone.aperture;
    };
    std::vector<double> roots;
    if (!cone.double_symmetric && cone.aperture == 0.0) {
      roots = {0.0};  // the hyperplane; the sweep sign change sits exactly at h = 0
    } else {
      roots = detail::bisect_roots(f, lo, hi, opt.sweep_points, opt.match_tol,
                                   opt.merge_tol, opt.max_roots);
    }
    for (double h : roots) out.push_back(make(ShootFamily::Disk, h));
  }
  if (cone.double_symmetric) {
    const double lo = 0.02, hi = 4.0;
    auto f = [&](double r0) {
      return shoot_profile(n, ShootFamily::Neck, r0, opt.shoot).aperture - cone.aperture;
    };
    for (double r0 : detail::bisect_roots(f, lo, hi, opt.sweep_points, opt.match_tol,
                                          opt.merge_tol, opt.max_roots))
      out.push_back(make(ShootFamily::Neck, r0));
  }
  return out;
}

// Upper-sheet height |z|(r) of a solved branch, interpolated on the outer
// graph part of the curve.
inline double sheet_height(const ExpanderProfile& p, double r) {
  const auto& pts = p.base.samples;
  // walk from the outer end inward; the profile is a graph over r there
  for (std::size_t i = pts.size() - 1; i > 0; --i) {
    const double r1 = pts[i].r, r0 = pts[i - 1].r;
    if (r0 <= r && r <= r1 && r1 > r0) {
      const double t = (r - r0) / (r1 - r0);
      return std::abs(pts[i - 1].z + t * (pts[i].z - pts[i - 1].z));
    }
  }
  return std::abs(pts.back().z);
}

struct OrderResult {
  std::vector<ExpanderProfile> ordered;  // innermost first
  bool partial_order_warning = false;
};

// Sort branches by pointwise domination of |z(r)| on a window [R/2, R]
// where the sheets still separate numerically; ties beyond that radius are
// resolved by a stable sort on z(r_max).
inline OrderResult order_expanders(std::vector<ExpanderProfile> list,
                                   double compare_radius = 6.0) {
  OrderResult res;
  if (list.empty()) return res;
  if (list.size() == 1) {
    list[0].branch = BranchLabel::Innermost;  // single branch is both extremes
    res.ordered = std::move(list);
    return res;
  }
  double r_extent = 1e30;
  for (const auto& p : list) r_extent = std::min(r_extent, p.base.samples.back().r);
  const double rc = std::min(compare_radius, 0.9 * r_extent);
  const int K = 33;
  auto cmp_key = [&](const ExpanderProfile& p) {
    double acc = 0.0;
    for (int k = 0; k < K; ++k) acc += sheet_height(p, rc / 2.0 + (rc / 2.0) * k / (K - 1));
    return acc / K;
  };
  // detect crossings pairwise on the window
  for (std::size_t a = 0; a < list.size() && !res.partial_order_warning; ++a)
    for (std::size_t b = a + 1; b < list.size(); ++b) {
      bool above = false, below = false;
      for (int k = 0; k < K; ++k) {
        const double r = rc / 2.0 + (rc / 2.0) * k / (K - 1);
        const double d = sheet_height(list[a], r) - sheet_height(list[b], r);
        if (d > 1e-9) above = true;
        if (d < -1e-9) below = true;
      }
      if (above && below) {
        res.partial_order_warning = true;
        break;
      }
    }
  std::stable_sort(list.begin(), list.end(),
                   [&](const ExpanderProfile& a, const ExpanderProfile& b) {
                     if (res.partial_order_warning)
                       return std::abs(a.base.samples.back().z) <
                              std::abs(b.base.samples.back().z);
                     return cmp_key(a) < cmp_key(b);
                   });
  for (auto& p : list) p.branch = BranchLabel::Unclassified;
  list.front().branch = BranchLabel::Innermost;
  list.back().branch = BranchLabel::Outermost;
  res.ordered = std::move(list);
  return res;
}

}  // namespace emcf
