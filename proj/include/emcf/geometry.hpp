#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "emcf/profile.hpp"

namespace emcf {

// Area of the unit (k)-sphere S^k in R^{k+1}.
inline double unit_sphere_area(int k) {
  // 2 pi^{(k+1)/2} / Gamma((k+1)/2)
  const double half = 0.5 * (k + 1);
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

// Symmetry of the curve continuation past an endpoint. Axis: reflect r -> -r
// (curve meets the rotation axis perpendicular to it). Equator: reflect
// z -> -z (half of a curve symmetric about the z = 0 plane, e.g. the neck of
// a connected expander).
enum class EndSymmetry { None, Axis, Equator };

inline Vec2 reflect(Vec2 p, EndSymmetry s) {
  if (s == EndSymmetry::Axis) return {-p.r, p.z};
  if (s == EndSymmetry::Equator) return {p.r, -p.z};
  return p;
}

// Per-node discrete frame of a revolved profile. The normal is the
// right-hand normal of the traversal order: N = (z', -r'). All quantities
// are with respect to this orientation; flip signs at the call site when
// the opposite normal is meant.
struct CurveGeometry {
  int n = 2;
  std::vector<double> s;        // cumulative chord length
  std::vector<Vec2> tangent;    // unit tangent
  std::vector<Vec2> normal;     // unit right-hand normal (z', -r')
  std::vector<double> kappa;    // profile curvature w.r.t. normal
  std::vector<double> axis_term;   // (n-1) * N_r / r, regularized at the axis
  std::vector<double> x_dot_n;  // position dot normal
  std::vector<double> a_sq;     // |A|^2 of the revolved surface
  std::vector<double> weight;   // r^{n-1} e^{|x|^2/4}
  std::vector<double> xnorm;    // |x|
};

namespace detail {

// Non-uniform 3-point first/second derivative weights at the middle node,
// spacings a (left) and b (right).
struct Stencil3 {
  double d1m, d1c, d1p;
  double d2m, d2c, d2p;
};

inline Stencil3 stencil3(double a, double b) {
  Stencil3 w{};
  w.d1m = -b / (a * (a + b));
  w.d1c = (b - a) / (a * b);
  w.d1p = a / (b * (a + b));
  w.d2m = 2.0 / (a * (a + b));
  w.d2c = -2.0 / (a * b);
  w.d2p = 2.0 / (b * (a + b));
  return w;
}

inline constexpr double kAxisEps = 1e-9;

}  // namespace detail

inline CurveGeometry curve_geometry(const ProfileCurve& c,
                                    EndSymmetry start_sym = EndSymmetry::None,
                                    EndSymmetry end_sym = EndSymmetry::None) {
  validate(c, 3);
  const std::size_t m = c.size();
  CurveGeometry g;
  g.n = c.n;
  g.s.resize(m);
  g.tangent.resize(m);
  g.normal.resize(m);
  g.kappa.resize(m);
  g.axis_term.resize(m);
  g.x_dot_n.resize(m);
  g.a_sq.resize(m);
  g.weight.resize(m);
  g.xnorm.resize(m);

  g.s[0] = 0.0;
  for (std::size_t i = 1; i < m; ++i) g.s[i] = g.s[i - 1] + norm(c[i] - c[i - 1]);

  auto node = [&](std::size_t i, Vec2 pm, Vec2 pc, Vec2 pp, double a, double b) {
    const auto st = detail::stencil3(a, b);
    const Vec2 d1 = st.d1m * pm + st.d1c * pc + st.d1p * pp;
    const Vec2 d2 = st.d2m * pm + st.d2c * pc + st.d2p * pp;
    const double sp = norm(d1);
    if (sp == 0.0) throw MalformedCurveError("degenerate tangent");
    g.tangent[i] = (1.0 / sp) * d1;
    g.normal[i] = {g.tangent[i].z, -g.tangent[i].r};
    // curvature of the plane curve w.r.t. the right-hand normal
    g.kappa[i] = (d1.r * d2.z - d1.z * d2.r) / (sp * sp * sp);
    const double r = pc.r;
    const double nu_r = g.normal[i].r;
    g.axis_term[i] = (r > detail::kAxisEps) ? (c.n - 1) * nu_r / r
                                            : (c.n - 1) * g.kappa[i];
    g.x_dot_n[i] = dot(pc, g.normal[i]);
    const double rot = (r > detail::kAxisEps) ? nu_r / r : g.kappa[i];
    g.a_sq[i] = g.kappa[i] * g.kappa[i] + (c.n - 1) * rot * rot;
    g.xnorm[i] = norm(pc);
    g.weight[i] = std::pow(std::max(r, 0.0), c.n - 1) * std::exp(g.xnorm[i] * g.xnorm[i] / 4.0);
  };

  // one-sided 3-point estimates at an end node (first node of the triple
  // when lead = true, last when lead = false)
  auto node_one_sided = [&](std::size_t i, Vec2 p0, Vec2 p1, Vec2 p2, double a,
                            double b, bool lead) {
    Vec2 d1, d2;
    if (lead) {
      d1 = (-(2 * a + b) / (a * (a + b))) * p0 + ((a + b) / (a * b)) * p1 +
           (-a / (b * (a + b))) * p2;
    } else {
      d1 = (b / (a * (a + b))) * p0 + (-(a + b) / (a * b)) * p1 +
           ((a + 2 * b) / (b * (a + b))) * p2;
    }
    d2 = (2.0 / (a * (a + b))) * p0 + (-2.0 / (a * b)) * p1 + (2.0 / (b * (a + b))) * p2;
    const Vec2 pc = lead ? p0 : p2;
    const double sp = norm(d1);
    if (sp == 0.0) throw MalformedCurveError("degenerate tangent");
    g.tangent[i] = (1.0 / sp) * d1;
    g.normal[i] = {g.tangent[i].z, -g.tangent[i].r};
    g.kappa[i] = (d1.r * d2.z - d1.z * d2.r) / (sp * sp * sp);
    const double r = pc.r;
    const double nu_r = g.normal[i].r;
    g.axis_term[i] = (r > detail::kAxisEps) ? (c.n - 1) * nu_r / r
                                            : (c.n - 1) * g.kappa[i];
    g.x_dot_n[i] = dot(pc, g.normal[i]);
    const double rot = (r > detail::kAxisEps) ? nu_r / r : g.kappa[i];
    g.a_sq[i] = g.kappa[i] * g.kappa[i] + (c.n - 1) * rot * rot;
    g.xnorm[i] = norm(pc);
    g.weight[i] = std::pow(std::max(r, 0.0), c.n - 1) * std::exp(g.xnorm[i] * g.xnorm[i] / 4.0);
  };

  for (std::size_t i = 1; i + 1 < m; ++i) {
    const double a = g.s[i] - g.s[i - 1];
    const double b = g.s[i + 1] - g.s[i];
    node(i, c[i - 1], c[i], c[i + 1], a, b);
  }
  // endpoints: ghost reflection when a symmetry is declared, one-sided
  // stencil otherwise
  if (start_sym != EndSymmetry::None) {
    const Vec2 ghost = reflect(c[1], start_sym);
    const double a = norm(c[0] - ghost);
    node(0, ghost, c[0], c[1], a, g.s[1] - g.s[0]);
  } else {
    node_one_sided(0, c[0], c[1], c[2], g.s[1] - g.s[0], g.s[2] - g.s[1], true);
  }
  if (end_sym != EndSymmetry::None) {
    const Vec2 ghost = reflect(c[m - 2], end_sym);
    const double b = norm(ghost - c[m - 1]);
    node(m - 1, c[m - 2], c[m - 1], ghost, g.s[m - 1] - g.s[m - 2], b);
  } else {
    node_one_sided(m - 1, c[m - 3], c[m - 2], c[m - 1], g.s[m - 2] - g.s[m - 3],
                   g.s[m - 1] - g.s[m - 2], false);
  }
  return g;
}

// Expander residual R = div_Sigma(N) + (x . N)/2 per sample, with respect
// to the right-hand normal of the traversal order. R == 0 on a
// self-expander; R > 0 means the expander mean curvature vector points
// opposite to N.
inline std::vector<double> expander_residual(const ProfileCurve& c,
                                             EndSymmetry start_sym = EndSymmetry::None,
                                             EndSymmetry end_sym = EndSymmetry::None) {
  validate(c, 5);
  const CurveGeometry g = curve_geometry(c, start_sym, end_sym);
  std::vector<double> res(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    res[i] = g.kappa[i] + g.axis_term[i] + 0.5 * g.x_dot_n[i];
  return res;
}

inline double sup_interior(const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s = std::max(s, std::abs(v[i]));
  return s;
}

struct TruncationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trapezoid quadrature of f over the revolved curve restricted to
// |x| <= R_trunc, with the rotational area factor r^{n-1} and the measure
// of the revolved sphere.
inline double revolved_integral(const ProfileCurve& c, const CurveGeometry& g,
                                const std::vector<double>& f, double r_trunc) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    const bool in0 = g.xnorm[i] <= r_trunc;
    const bool in1 = g.xnorm[i + 1] <= r_trunc;
    if (!in0 && !in1) continue;
    const double ell = g.s[i + 1] - g.s[i];
    double contrib = 0.5 * (f[i] * g.weight[i] + f[i + 1] * g.weight[i + 1]) * ell;
    if (in0 != in1) contrib *= 0.5;  // half cell straddles the truncation sphere
    acc += contrib;
  }
  return unit_sphere_area(c.n - 1) * acc;
}

// C^k sup-norm proxies by divided differences over the curve samples:
// c0 = sup |u|, c1 = c0 + sup |Du|, c2 = c1 + sup |D^2 u|.
struct CkProxy {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
};

inline CkProxy ck_proxy(const ProfileCurve& base, const CurveGeometry& g,
                        const std::vector<double>& u) {
  CkProxy p;
  const std::size_t m = u.size();
  double sup_u = 0.0, sup_du = 0.0, sup_d2u = 0.0;
  std::vector<double> us(m, 0.0), uss(m, 0.0);
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const auto st = detail::stencil3(g.s[i] - g.s[i - 1], g.s[i + 1] - g.s[i]);
    us[i] = st.d1m * u[i - 1] + st.d1c * u[i] + st.d1p * u[i + 1];
    uss[i] = st.d2m * u[i - 1] + st.d2c * u[i] + st.d2p * u[i + 1];
  }
  if (m >= 3) {
    us[0] = us[1];
    uss[0] = uss[1];
    us[m - 1] = us[m - 2];
    uss[m - 1] = uss[m - 2];
  }
  for (std::size_t i = 0; i < m; ++i) {
    sup_u = std::max(sup_u, std::abs(u[i]));
    sup_du = std::max(sup_du, std::abs(us[i]));
    const double r = base[i].r;
    const double rot = (r > detail::kAxisEps) ? (base.n - 1) * g.tangent[i].r * us[i] / r
                                              : (base.n - 1) * uss[i];
    sup_d2u = std::max(sup_d2u, std::hypot(uss[i], rot));
  }
  p.c0 = sup_u;
  p.c1 = p.c0 + sup_du;
  p.c2 = p.c1 + sup_d2u;
  return p;
}

// Weighted Sobolev norm ||u||_{W,k} truncated at R_trunc. Cumulative in k,
// so the k = 0,1,2 values are nondecreasing.
inline double weighted_norm(const ProfileCurve& base, const CurveGeometry& g,
                            const std::vector<double>& u, int k, double r_trunc) {
  if (u.size() != base.size())
    throw std::invalid_argument("weighted_norm: samples do not match base curve");
  double max_extent = 0.0;
  for (double x : g.xnorm) max_extent = std::max(max_extent, x);
  if (r_trunc > max_extent * (1.0 + 1e-12) + 1e-12)
    throw TruncationError("R_trunc exceeds base curve extent");
  const std::size_t m = u.size();
  std::vector<double> f(m);
  for (std::size_t i = 0; i < m; ++i) f[i] = u[i] * u[i];
  double total = revolved_integral(base, g, f, r_trunc);
  if (k >= 1) {
    std::vector<double> us(m, 0.0);
    for (std::size_t i = 1; i + 1 < m; ++i) {
      const auto st = detail::stencil3(g.s[i] - g.s[i - 1], g.s[i + 1] - g.s[i]);
      us[i] = st.d1m * u[i - 1] + st.d1c * u[i] + st.d1p * u[i + 1];
    }
    us[0] = us[1];
    us[m - 1] = us[m - 2];
    for (std::size_t i = 0; i < m; ++i) f[i] = us[i] * us[i];
    total += revolved_integral(base, g, f, r_trunc);
    if (k >= 2) {
      std::vector<double> uss(m, 0.0);
      for (std::size_t i = 1; i + 1 < m; ++i) {
        const auto st = detail::stencil3(g.s[i] - g.s[i - 1], g.s[i + 1] - g.s[i]);
        uss[i] = st.d2m * u[i - 1] + st.d2c * u[i] + st.d2p * u[i + 1];
      }
      uss[0] = uss[1];
      uss[m - 1] = uss[m - 2];
      for (std::size_t i = 0; i < m; ++i) {
        const double r = base[i].r;
        const double rot = (r > detail::kAxisEps)
                               ? g.tangent[i].r * us[i] / r
                               : uss[i];
        f[i] = uss[i] * uss[i] + (base.n - 1) * rot * rot;
      }
      total += revolved_integral(base, g, f, r_trunc);
    }
  }
  return std::sqrt(std::max(total, 0.0));
}

inline double weighted_norm(const ProfileCurve& base, const std::vector<double>& u,
                            int k, double r_trunc) {
  return weighted_norm(base, curve_geometry(base), u, k, r_trunc);
}

struct WeightedNorms {
  double w0 = 0.0, w1 = 0.0, w2 = 0.0;
  double r_trunc = 0.0;
};

inline WeightedNorms weighted_norms(const ProfileCurve& base, const CurveGeometry& g,
                                    const std::vector<double>& u, double r_trunc) {
  WeightedNorms w;
  w.w0 = weighted_norm(base, g, u, 0, r_trunc);
  w.w1 = weighted_norm(base, g, u, 1, r_trunc);
  w.w2 = weighted_norm(base, g, u, 2, r_trunc);
  w.r_trunc = r_trunc;
  return w;
}

// Expander functional E[Sigma] = integral of e^{|x|^2/4} over the revolved
// curve inside B_{R_trunc}.
inline double expander_energy(const ProfileCurve& c, double r_trunc) {
  if (c.samples.size() < 2) return 0.0;
  const CurveGeometry g = curve_geometry(c);
  std::vector<double> ones(c.size(), 1.0);
  return revolved_integral(c, g, ones, r_trunc);
}

struct GraphBreakdownError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Normal graph of u over the base curve: Y = X + sign * u * N with N the
// right-hand normal of the base.
inline ProfileCurve push_graph(const ProfileCurve& base, const CurveGeometry& g,
                               const std::vector<double>& u, double sign = 1.0) {
  ProfileCurve out;
  out.n = base.n;
  out.kind = base.kind == CurveKind::GraphOverRadius ? CurveKind::AxisToInfinity
                                                     : base.kind;
  out.samples.resize(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    out.samples[i] = base[i] + (sign * u[i]) * g.normal[i];
    if (out.samples[i].r < 0.0) out.samples[i].r = 0.0;
  }
  return out;
}

// Relative expander entropy of the normal graph of u against the base:
// difference of truncated weighted areas computed under the common
// parametrization. Exactly zero when u vanishes.
inline double relative_expander_entropy(const ProfileCurve& base, const CurveGeometry& g,
                                        const std::vector<double>& u, double r_trunc,
                                        double gauge_eta = 0.1, double sign = 1.0) {
  const CkProxy p = ck_proxy(base, g, u);
  if (p.c2 > gauge_eta)
    throw GraphBreakdownError("graph gauge violated: C2 proxy " + std::to_string(p.c2));
  bool all_zero = true;
  for (double v : u)
    if (v != 0.0) { all_zero = false; break; }
  if (all_zero) return 0.0;
  const ProfileCurve graph = push_graph(base, g, u, sign);
  double acc = 0.0;
  const double area = unit_sphere_area(base.n - 1);
  for (std::size_t i = 0; i + 1 < base.size(); ++i) {
    if (g.xnorm[i] > r_trunc || g.xnorm[i + 1] > r_trunc) continue;
    const double lx = g.s[i + 1] - g.s[i];
    const double ly = norm(graph[i + 1] - graph[i]);
    auto wt = [&](const Vec2& q) {
      return std::pow(std::max(q.r, 0.0), base.n - 1) * std::exp(dot(q, q) / 4.0);
    };
    const double ex = 0.5 * (wt(base[i]) + wt(base[i + 1])) * lx;
    const double ey = 0.5 * (wt(graph[i]) + wt(graph[i + 1])) * ly;
    acc += ey - ex;
  }
  return area * acc;
}

// EMCF -> MCF change of variables: samples scale by e^{t/2}, flow clock
// maps to s = e^t.
struct DictionaryImage {
  ProfileCurve curve;
  double mcf_time = 1.0;
};

inline DictionaryImage dictionary_map(const ProfileCurve& c, double t) {
  DictionaryImage out;
  out.curve = c;
  const double factor = std::exp(0.5 * t);
  for (Vec2& p : out.curve.samples) p = factor * p;
  out.mcf_time = std::exp(t);
  return out;
}

// Inverse of the spatial scaling in dictionary_map (divides by the same
// factor; exact only when the factor is a power of two).
inline ProfileCurve dictionary_unmap(const ProfileCurve& c, double t) {
  ProfileCurve out = c;
  const double factor = std::exp(0.5 * t);
  for (Vec2& p : out.samples) {
    p.r /= factor;
    p.z /= factor;
  }
  return out;
}

}  // namespace emcf
