#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "emcf/expanders.hpp"
#include "emcf/geometry.hpp"
#include "emcf/profile.hpp"

namespace emcf {

struct SpectralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSpectrumError : SpectralError {
  using SpectralError::SpectralError;
};
struct AssemblyError : SpectralError {
  using SpectralError::SpectralError;
};

// Symmetric tridiagonal discretization of -L_Sigma, L = Delta + (x/2).grad
// + |A|^2 - 1/2, in the weighted space e^{|x|^2/4} r^{n-1} ds. M is the
// quadratic form int(|f'|^2 + (1/2 - |A|^2) f^2) w, B the weighted mass;
// the drift term is absorbed by the divergence-form weight. Dirichlet at
// R_trunc (last node eliminated), natural condition at the axis/neck.
struct StabilityOperator {
  ProfileCurve grid;        // uniform-arclength resampling of the base
  CurveGeometry geom;
  EndSymmetry start_sym = EndSymmetry::Axis;
  std::vector<double> diag;   // form matrix M, size m-1
  std::vector<double> off;    // subdiagonal of M, size m-2
  std::vector<double> mass;   // diagonal of B, size m-1
  double h = 0.0;             // arclength spacing
  double r_trunc = 0.0;
  int m = 0;                  // grid points including the Dirichlet node

  std::size_t unknowns() const { return diag.size(); }

  // y = M x
  void apply_form(const std::vector<double>& x, std::vector<double>& y) const {
    const std::size_t N = diag.size();
    y.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      double v = diag[i] * x[i];
      if (i > 0) v += off[i - 1] * x[i - 1];
      if (i + 1 < N) v += off[i] * x[i + 1];
      y[i] = v;
    }
  }

  double form_value(const std::vector<double>& x) const {
    std::vector<double> y;
    apply_form(x, y);
    double q = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) q += x[i] * y[i];
    return q;
  }

  double mass_value(const std::vector<double>& x) const {
    double q = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) q += mass[i] * x[i] * x[i];
    return q;
  }

  double rayleigh(const std::vector<double>& x) const {
    return form_value(x) / mass_value(x);
  }
};

namespace detail {

// Resample a curve uniformly in arclength up to |x| = r_trunc.
inline ProfileCurve resample_to_radius(const ProfileCurve& c, double r_trunc, int m) {
  const CurveGeometry g = curve_geometry(c);
  double s_tr = -1.0;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    if (g.xnorm[i] <= r_trunc && g.xnorm[i + 1] > r_trunc) {
      const double t = (r_trunc - g.xnorm[i]) / (g.xnorm[i + 1] - g.xnorm[i]);
      s_tr = g.s[i] + t * (g.s[i + 1] - g.s[i]);
      break;
    }
  }
  if (s_tr < 0.0) {
    if (g.xnorm.back() < r_trunc * (1.0 - 1e-12))
      throw TruncationError("R_trunc exceeds profile extent");
    s_tr = g.s.back();
  }
  ProfileCurve out;
  out.n = c.n;
  out.kind = c.kind;
  out.samples.resize(m);
  std::size_t j = 0;
  for (int i = 0; i < m; ++i) {
    const double s = s_tr * i / double(m - 1);
    while (j + 2 < c.size() && g.s[j + 1] < s) ++j;
    const double t = (s - g.s[j]) / (g.s[j + 1] - g.s[j]);
    out.samples[i] = c[j] + t * (c[j + 1] - c[j]);
  }
  return out;
}

}  // namespace detail

inline StabilityOperator assemble_stability_operator(const ProfileCurve& base,
                                                     EndSymmetry start_sym,
                                                     double r_trunc, int m) {
  if (m < 200) throw std::invalid_argument("assemble_stability_operator: m >= 200 required");
  StabilityOperator op;
  op.grid = detail::resample_to_radius(base, r_trunc, m);
  op.geom = curve_geometry(op.grid, start_sym, EndSymmetry::None);
  op.start_sym = start_sym;
  op.r_trunc = r_trunc;
  op.m = m;
  op.h = op.geom.s.back() / (m - 1);
  const int N = m - 1;  // Dirichlet node dropped
  op.diag.assign(N, 0.0);
  op.off.assign(N - 1, 0.0);
  op.mass.assign(N, 0.0);

  auto wt = [&](const Vec2& p) {
    return std::pow(std::max(p.r, 0.0), base.n - 1) * std::exp(dot(p, p) / 4.0);
  };
  // dual-cell masses; the first cell is evaluated at its own midpoint so an
  // axis node (w = 0 there) still carries positive mass
  for (int i = 0; i < N; ++i) {
    if (i == 0) {
      const Vec2 q = 0.75 * op.grid[0] + 0.25 * op.grid[1];
      op.mass[0] = wt(q) * 0.5 * op.h;
    } else {
      op.mass[i] = wt(op.grid[i]) * op.h;
    }
    const double V = 0.5 - op.geom.a_sq[i];
    op.diag[i] = V * op.mass[i];
  }
  for (int e = 0; e + 1 < m; ++e) {
    const Vec2 mid = 0.5 * (op.grid[e] + op.grid[e + 1]);
    const double k = wt(mid) / op.h;
    if (e < N) op.diag[e] += k;
    if (e + 1 < N) {
      op.diag[e + 1] += k;
      op.off[e] = -k;
    }
  }
  return op;
}

inline StabilityOperator assemble_stability_operator(const ExpanderProfile& p,
                                                     double r_trunc, int m) {
  if (p.residual_sup > 1e-6)
    throw AssemblyError("expander residual too large for spectral assembly");
  return assemble_stability_operator(p.base, p.start_symmetry, r_trunc, m);
}

namespace detail {

// Number of eigenvalues of the generalized pencil (M, B) strictly below x,
// via the Sturm sequence of M - x B.
inline int count_below(const StabilityOperator& op, double x) {
  const std::size_t N = op.diag.size();
  int cnt = 0;
  double d = op.diag[0] - x * op.mass[0];
  if (d < 0) ++cnt;
  for (std::size_t i = 1; i < N; ++i) {
    double piv = d;
    if (piv == 0.0) piv = 1e-300;
    d = (op.diag[i] - x * op.mass[i]) - op.off[i - 1] * op.off[i - 1] / piv;
    if (d < 0) ++cnt;
  }
  return cnt;
}

inline double bisect_eigenvalue(const StabilityOperator& op, int index) {
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < op.diag.size(); ++i) {
    const double center = op.diag[i] / op.mass[i];
    double radius = 0.0;
    if (i > 0) radius += std::abs(op.off[i - 1]);
    if (i + 1 < op.diag.size()) radius += std::abs(op.off[i]);
    radius /= op.mass[i];
    lo = std::min(lo, center - radius);
    hi = std::max(hi, center + radius);
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (count_below(op, mid) > index) hi = mid; else lo = mid;
    if (hi - lo < 1e-13 * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

// Tridiagonal solve with partial pivoting (one extra superdiagonal of
// fill-in); safe for the indefinite shifted systems of inverse iteration.
inline void solve_tridiag_pivoted(std::vector<double> a, std::vector<double> b,
                                  std::vector<double> c, std::vector<double>& x) {
  // a: diag, b: sub, c: super (sizes N, N-1, N-1); x: rhs in, solution out
  const std::size_t N = a.size();
  std::vector<double> d(N, 0.0);  // second superdiagonal fill-in
  for (std::size_t k = 0; k + 1 < N; ++k) {
    if (std::abs(b[k]) > std::abs(a[k])) {
      std::swap(a[k], b[k]);
      const double t = c[k];
      c[k] = a[k + 1];
      a[k + 1] = t;
      if (k + 2 < N) {
        d[k] = c[k + 1];
        c[k + 1] = 0.0;
      }
      std::swap(x[k], x[k + 1]);
    }
    if (a[k] == 0.0) a[k] = 1e-300;
    const double m_ = b[k] / a[k];
    a[k + 1] -= m_ * c[k];
    if (k + 2 < N) c[k + 1] -= m_ * d[k];
    x[k + 1] -= m_ * x[k];
  }
  if (a[N - 1] == 0.0) a[N - 1] = 1e-300;
  x[N - 1] /= a[N - 1];
  if (N >= 2) x[N - 2] = (x[N - 2] - c[N - 2] * x[N - 1]) / a[N - 2];
  for (std::size_t k = N - 2; k-- > 0;) {
    double v = x[k] - c[k] * x[k + 1];
    if (k + 2 < N) v -= d[k] * x[k + 2];
    x[k] = v / a[k];
  }
}

}  // namespace detail

struct SpectralResult {
  double lambda0 = 0.0;
  std::vector<double> f;     // eigenfunction on the operator grid (0..m-2), positive
  double gap = 0.0;          // lambda1 - lambda0
  double r_trunc = 0.0;
  int m = 0;
  double f_w0 = 0.0;         // ||f||_{W,0} after normalization
};

// Lowest eigenpair of -L by Sturm bisection plus shifted inverse
// iteration; f sign-fixed positive and normalized to unit discrete
// C^2-proxy norm.
inline SpectralResult lowest_eigenpair(const StabilityOperator& op) {
  const std::size_t N = op.diag.size();
  const double l0 = detail::bisect_eigenvalue(op, 0);
  const double l1 = detail::bisect_eigenvalue(op, 1);

  const double scale = std::max({std::abs(l0), std::abs(l1), 1.0});
  const double sigma = l0 - 1e-10 * scale;
  std::vector<double> f(N, 1.0), y(N);
  double lam = l0, lam_prev = l0 + 1.0;
  bool converged = false;
  for (int it = 0; it < 10000; ++it) {
    // (M - sigma B) y = B f
    std::vector<double> a(N), rhs(N);
    for (std::size_t i = 0; i < N; ++i) {
      a[i] = op.diag[i] - sigma * op.mass[i];
      rhs[i] = op.mass[i] * f[i];
    }
    std::vector<double> sub(op.off), sup(op.off);
    detail::solve_tridiag_pivoted(a, sub, sup, rhs);
    double nrm = 0.0;
    for (double v : rhs) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < N; ++i) y[i] = rhs[i] / nrm;
    f = y;
    lam = op.rayleigh(f);
    if (it >= 1 && std::abs(lam - lam_prev) <= 1e-13 * std::max(1.0, std::abs(lam))) {
      converged = true;
      break;
    }
    lam_prev = lam;
  }
  if (!converged) throw SpectralError("inverse iteration did not converge in 10^4 steps");

  // sign-fix positive
  double mx = 0.0;
  std::size_t imx = 0;
  for (std::size_t i = 0; i < N; ++i)
    if (std::abs(f[i]) > mx) { mx = std::abs(f[i]); imx = i; }
  if (f[imx] < 0.0)
    for (double& v : f) v = -v;

  SpectralResult res;
  res.gap = l1 - lam;
  res.r_trunc = op.r_trunc;
  res.m = op.m;

  // normalize so the discrete C^2 proxy norm over the grid equals 1
  std::vector<double> full(op.m, 0.0);
  for (std::size_t i = 0; i < N; ++i) full[i] = f[i];
  const CkProxy p = ck_proxy(op.grid, op.geom, full);
  if (p.c2 <= 0.0) throw SpectralError("degenerate eigenfunction");
  for (double& v : f) v /= p.c2;
  for (double& v : full) v /= p.c2;
  res.f = f;
  res.lambda0 = lam;
  res.f_w0 = weighted_norm(op.grid, op.geom, full, 0, op.r_trunc);
  return res;
}

enum class StabilityVerdict { Stable, StrictlyUnstable };

inline std::string to_string(StabilityVerdict v) {
  return v == StabilityVerdict::Stable ? "stable" : "strictly_unstable";
}

// lambda0 < -1e-6: strictly unstable; lambda0 > 1e-6: stable; the band in
// between is surfaced as a degenerate (inconclusive) spectrum.
inline StabilityVerdict stability_verdict(const SpectralResult& r) {
  if (r.lambda0 < -1e-6) return StabilityVerdict::StrictlyUnstable;
  if (r.lambda0 > 1e-6) return StabilityVerdict::Stable;
  throw DegenerateSpectrumError("lambda0 within the inconclusive band: " +
                                std::to_string(r.lambda0));
}

}  // namespace emcf
