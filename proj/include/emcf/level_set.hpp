#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "emcf/geometry.hpp"
#include "emcf/profile.hpp"

namespace emcf {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CflError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransversalityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PartitionViolationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridParams {
  double h = 1.0 / 64;
  double r_max = 2.0;
  double z_min = -2.0;
  double z_max = 2.0;
  int n = 2;
};

// Axisymmetric level-set field phi(r, z) with Omega = {phi <= 0} on a
// uniform lattice; index (i, j) -> i * nz + j, i along r, j along z.
struct LevelSetField {
  GridParams grid;
  int nr = 0, nz = 0;
  std::vector<double> phi;
  double t = 0.0;

  LevelSetField() = default;
  explicit LevelSetField(const GridParams& g) : grid(g) {
    nr = int(std::round(g.r_max / g.h)) + 1;
    nz = int(std::round((g.z_max - g.z_min) / g.h)) + 1;
    phi.assign(std::size_t(nr) * nz, 1.0);
  }
  double r(int i) const { return i * grid.h; }
  double z(int j) const { return grid.z_min + j * grid.h; }
  std::size_t idx(int i, int j) const { return std::size_t(i) * nz + j; }
  double& at(int i, int j) { return phi[idx(i, j)]; }
  double at(int i, int j) const { return phi[idx(i, j)]; }
  bool inside(int i, int j) const { return at(i, j) <= 0.0; }
};

// ---------------- shapes -----------------

// Signed-distance-style generator: negative inside the region.
using Shape = std::function<double(double r, double z)>;

inline Shape shape_ball(double z0, double rho) {
  return [=](double r, double z) { return std::hypot(r, z - z0) - rho; };
}

inline Shape shape_halfspace_below(double zc) {
  return [=](double r, double z) { (void)r; return z - zc; };
}

inline Shape shape_complement(Shape s) {
  return [s = std::move(s)](double r, double z) { return -s(r, z); };
}

inline Shape shape_intersection(Shape a, Shape b) {
  return [a = std::move(a), b = std::move(b)](double r, double z) {
    return std::max(a(r, z), b(r, z));
  };
}

inline Shape shape_union(Shape a, Shape b) {
  return [a = std::move(a), b = std::move(b)](double r, double z) {
    return std::min(a(r, z), b(r, z));
  };
}

namespace detail {

inline double dist_to_polyline(const std::vector<Vec2>& pts, double r, double z) {
  double best = std::numeric_limits<double>::max();
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const Vec2 a = pts[k], b = pts[k + 1];
    const double vr = b.r - a.r, vz = b.z - a.z;
    const double L2 = vr * vr + vz * vz;
    double tt = L2 > 0 ? ((r - a.r) * vr + (z - a.z) * vz) / L2 : 0.0;
    tt = std::clamp(tt, 0.0, 1.0);
    best = std::min(best, std::hypot(r - (a.r + tt * vr), z - (a.z + tt * vz)));
  }
  return best;
}

}  // namespace detail

// Region below/above the graph z = u(r) of a profile curve (upper sheet,
// r increasing along the outer part).
inline Shape shape_graph_region(const ProfileCurve& curve, bool below) {
  auto pts = std::make_shared<std::vector<Vec2>>(curve.samples);
  return [pts, below](double r, double z) {
    // height by interpolation on the monotone-in-r tail
    const auto& P = *pts;
    double u = P.back().z;
    if (r <= P.front().r) {
      u = P.front().z;
    } else {
      for (std::size_t k = 0; k + 1 < P.size(); ++k) {
        if (P[k].r <= r && r <= P[k + 1].r && P[k + 1].r > P[k].r) {
          const double tt = (r - P[k].r) / (P[k + 1].r - P[k].r);
          u = P[k].z + tt * (P[k + 1].z - P[k].z);
          break;
        }
      }
      if (r > P.back().r) u = P.back().z + (r - P.back().r) * 1e6;  // outside data
    }
    const double d = detail::dist_to_polyline(P, r, z);
    const double side = below ? (z - u) : (u - z);
    return side <= 0.0 ? -d : d;
  };
}

// Region around the rotation axis bounded by a connected (neck-type) half
// profile r = g(z), z >= 0, completed by its z -> -z mirror:
// inside = {r <= g(|z|)}.
inline Shape shape_neck_inside(const ProfileCurve& half) {
  auto pts = std::make_shared<std::vector<Vec2>>(half.samples);
  auto full = std::make_shared<std::vector<Vec2>>();
  for (auto it = pts->rbegin(); it != pts->rend(); ++it)
    full->push_back({it->r, -it->z});
  for (std::size_t k = 1; k < pts->size(); ++k) full->push_back((*pts)[k]);
  return [pts, full](double r, double z) {
    const double az = std::abs(z);
    const auto& P = *pts;
    double g = P.back().r;
    if (az <= P.front().z) {
      g = P.front().r;
    } else {
      for (std::size_t k = 0; k + 1 < P.size(); ++k) {
        if (P[k].z <= az && az <= P[k + 1].z && P[k + 1].z > P[k].z) {
          const double tt = (az - P[k].z) / (P[k + 1].z - P[k].z);
          g = P[k].r + tt * (P[k + 1].r - P[k].r);
          break;
        }
      }
      if (az > P.back().z) g = P.back().r + (az - P.back().z) * 1e6;
    }
    const double d = detail::dist_to_polyline(*full, r, z);
    return r <= g ? -d : d;
  };
}

// Signed distance to an arbitrary closed polyline region given by an
// inside test.
inline Shape shape_from_polyline(std::vector<Vec2> pts,
                                 std::function<bool(double, double)> inside_test) {
  auto P = std::make_shared<std::vector<Vec2>>(std::move(pts));
  return [P, inside_test = std::move(inside_test)](double r, double z) {
    const double d = detail::dist_to_polyline(*P, r, z);
    return inside_test(r, z) ? -d : d;
  };
}

// ---------------- engine -----------------

struct EvolveOptions {
  double sample_dt = 0.05;      // snapshot cadence
  int reinit_every = 20;
  int reinit_iters = 4;
  int event_check_every = 200;  // component tracking cadence
  double dt_factor = 0.2;       // dt = factor * h^2 / (1 + r_max)
  int freeze_band = 2;          // frozen boundary cells
  bool track_arrival = true;
};

enum class EventKind { Pinch, ComponentVanish, Extinction };

inline std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::Pinch: return "pinch";
    case EventKind::ComponentVanish: return "component-vanish";
    case EventKind::Extinction: return "extinction";
  }
  return "?";
}

struct FlowEvent {
  double t = 0.0;
  EventKind kind = EventKind::Pinch;
  int components_before = 0;
  int components_after = 0;
};

struct LevelSetEvolution {
  std::vector<double> snapshot_times;
  std::vector<LevelSetField> snapshots;
  std::vector<FlowEvent> events;
  std::vector<double> arrival;       // first-exit time; 0 outside Omega(0); inf if never exits
  int monotone_violations = 0;       // cells that re-entered Omega after exiting
  bool extinct = false;
  double extinction_time = 0.0;
  GridParams grid;
};

namespace detail {

inline int count_components(const LevelSetField& f) {
  const int nr = f.nr, nz = f.nz;
  std::vector<std::uint8_t> seen(f.phi.size(), 0);
  std::vector<std::int32_t> stack;
  int comps = 0;
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nz; ++j) {
      const std::size_t id = f.idx(i, j);
      if (seen[id] || f.phi[id] > 0.0) continue;
      ++comps;
      stack.push_back(std::int32_t(id));
      seen[id] = 1;
      while (!stack.empty()) {
        const std::int32_t c = stack.back();
        stack.pop_back();
        const int ci = c / nz, cj = c % nz;
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int ni = ci + di[k], nj = cj + dj[k];
          if (ni < 0 || ni >= nr || nj < 0 || nj >= nz) continue;
          const std::size_t nid = f.idx(ni, nj);
          if (!seen[nid] && f.phi[nid] <= 0.0) {
            seen[nid] = 1;
            stack.push_back(std::int32_t(nid));
          }
        }
      }
    }
  return comps;
}

}  // namespace detail

// One explicit step of phi_t = |grad phi| div(grad phi/|grad phi|)
//                     + (n-1) phi_r / r + (x . grad phi)/2,
// central differences for curvature, upwind for the drift, with the sphere
// ODE rho' = -n/rho - rho/2 pinning the signs. Frozen band at the outer
// boundaries, symmetric ghost at the axis.
inline void level_set_step_into(const LevelSetField& f, std::vector<double>& out,
                                double dt, const LevelSetField& frozen, int band) {
  const int nr = f.nr, nz = f.nz;
  const double h = f.grid.h;
  const int n = f.grid.n;
  out.resize(f.phi.size());
  const double* p = f.phi.data();
  double* q = out.data();
  const double inv2h = 0.5 / h, invh2 = 1.0 / (h * h), invh = 1.0 / h;
  const double cap = 2.0 / h;

  for (int i = 0; i < nr - band; ++i) {
    const double r = i * h;
    const double axis_coef = (i > 0) ? (n - 1) / r : 0.0;
    for (int j = band; j < nz - band; ++j) {
      const std::size_t id = std::size_t(i) * nz + j;
      const double c = p[id];
      const double pim = (i > 0) ? p[id - nz] : p[id + nz];  // axis ghost
      const double pip = p[id + nz];
      const double pjm = p[id - 1];
      const double pjp = p[id + 1];
      const double pr = (pip - pim) * inv2h;
      const double pz = (pjp - pjm) * inv2h;
      const double prr = (pip - 2.0 * c + pim) * invh2;
      const double pzz = (pjp - 2.0 * c + pjm) * invh2;
      double prz;
      if (i > 0) {
        prz = (p[id + nz + 1] - p[id + nz - 1] - p[id - nz + 1] + p[id - nz - 1]) *
              (0.25 * invh2);
      } else {
        prz = 0.0;  // phi even in r at the axis
      }
      const double g2 = pr * pr + pz * pz + 1e-12;
      double curv = (prr * pz * pz - 2.0 * pr * pz * prz + pzz * pr * pr) / g2;
      curv += (i > 0) ? axis_coef * pr : (n - 1) * prr;
      curv = std::clamp(curv, -cap, cap);
      // drift (x . grad phi)/2 upwinded against the advection field -x/2
      const double zj = f.grid.z_min + j * h;
      const double dr_up = (pip - c) * invh;  // a_r = -r/2 <= 0
      const double dz_up = (zj > 0.0 ? (pjp - c) : (c - pjm)) * invh;
      const double drift = 0.5 * r * dr_up + 0.5 * zj * dz_up;
      q[id] = c + dt * (curv + drift);
    }
  }
  // frozen band
  for (int i = nr - band; i < nr; ++i)
    for (int j = 0; j < nz; ++j) q[f.idx(i, j)] = frozen.phi[f.idx(i, j)];
  for (int i = 0; i < nr - band; ++i) {
    for (int j = 0; j < band; ++j) q[f.idx(i, j)] = frozen.phi[f.idx(i, j)];
    for (int j = nz - band; j < nz; ++j) q[f.idx(i, j)] = frozen.phi[f.idx(i, j)];
  }
}

inline void level_set_step(LevelSetField& f, double dt, const LevelSetField& frozen,
                           int band) {
  static thread_local std::vector<double> buf;
  level_set_step_into(f, buf, dt, frozen, band);
  f.phi.swap(buf);
}

// Godunov redistancing relaxation toward |grad phi| = 1.
inline void reinitialize(LevelSetField& f, int iters, const LevelSetField& frozen,
                         int band) {
  const int nr = f.nr, nz = f.nz;
  const double h = f.grid.h;
  static thread_local std::vector<double> buf;
  buf.resize(f.phi.size());
  const double dtau = 0.5 * h;
  for (int it = 0; it < iters; ++it) {
    const double* p = f.phi.data();
    double* q = buf.data();
    for (int i = 0; i < nr - band; ++i) {
      for (int j = band; j < nz - band; ++j) {
        const std::size_t id = std::size_t(i) * nz + j;
        const double c = p[id];
        const double pim = (i > 0) ? p[id - nz] : p[id + nz];
        const double pip = p[id + nz];
        const double pjm = p[id - 1];
        const double pjp = p[id + 1];
        const double am = (c - pim) / h, ap = (pip - c) / h;
        const double bm = (c - pjm) / h, bp = (pjp - c) / h;
        const double S = c / std::sqrt(c * c + h * h);
        double G;
        if (S > 0) {
          const double gr = std::max(std::max(am, 0.0) * std::max(am, 0.0),
                                     std::min(ap, 0.0) * std::min(ap, 0.0));
          const double gz = std::max(std::max(bm, 0.0) * std::max(bm, 0.0),
                                     std::min(bp, 0.0) * std::min(bp, 0.0));
          G = std::sqrt(gr + gz) - 1.0;
        } else {
          const double gr = std::max(std::min(am, 0.0) * std::min(am, 0.0),
                                     std::max(ap, 0.0) * std::max(ap, 0.0));
          const double gz = std::max(std::min(bm, 0.0) * std::min(bm, 0.0),
                                     std::max(bp, 0.0) * std::max(bp, 0.0));
          G = std::sqrt(gr + gz) - 1.0;
        }
        q[id] = c - dtau * S * G;
      }
    }
    for (int i = nr - band; i < nr; ++i)
      for (int j = 0; j < nz; ++j) q[f.idx(i, j)] = frozen.phi[f.idx(i, j)];
    for (int i = 0; i < nr - band; ++i) {
      for (int j = 0; j < band; ++j) q[f.idx(i, j)] = frozen.phi[f.idx(i, j)];
      for (int j = nz - band; j < nz; ++j) q[f.idx(i, j)] = frozen.phi[f.idx(i, j)];
    }
    f.phi.swap(buf);
  }
}

inline LevelSetField init_from_domain(const Shape& shape, const GridParams& grid,
                                      int clean_iters = 10) {
  LevelSetField f(grid);
  bool any_inside = false;
  for (int i = 0; i < f.nr; ++i)
    for (int j = 0; j < f.nz; ++j) {
      f.at(i, j) = shape(f.r(i), f.z(j));
      if (f.at(i, j) <= 0.0) any_inside = true;
    }
  if (!any_inside) throw DomainError("shape does not intersect the grid");
  LevelSetField frozen = f;
  reinitialize(f, clean_iters, frozen, 1);
  return f;
}

inline LevelSetEvolution evolve(const LevelSetField& start, double t_end,
                                const EvolveOptions& opt = {}) {
  LevelSetField f = start;
  const LevelSetField frozen = start;
  LevelSetEvolution evo;
  evo.grid = f.grid;
  const double h = f.grid.h;
  const double dt = opt.dt_factor * h * h / (1.0 + f.grid.r_max);
  if (!(dt > 0.0 && dt < h)) throw CflError("inadmissible time step");
  const std::size_t cells = f.phi.size();
  evo.arrival.assign(cells, 0.0);
  std::vector<std::uint8_t> exited(cells, 0);
  const double INF = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cells; ++c)
    evo.arrival[c] = f.phi[c] <= 0.0 ? INF : 0.0;

  auto snap = [&](double t) {
    f.t = t;
    evo.snapshot_times.push_back(t);
    evo.snapshots.push_back(f);
  };
  snap(0.0);
  double next_snap = opt.sample_dt;
  int ncomp = detail::count_components(f);
  double t = 0.0;
  long step_count = 0;
  std::vector<double> next;
  while (t < t_end - 1e-15) {
    level_set_step_into(f, next, dt, frozen, opt.freeze_band);
    t += dt;
    ++step_count;
    if (opt.track_arrival) {
      const double* a_ = f.phi.data();
      const double* b_ = next.data();
      for (std::size_t c = 0; c < cells; ++c) {
        const double a = a_[c], b = b_[c];
        if (a <= 0.0 && b > 0.0) {
          const double theta = a == b ? 0.0 : -a / (b - a);
          evo.arrival[c] = t - dt + theta * dt;
          exited[c] = 1;
        } else if (b <= 0.0 && exited[c]) {
          ++evo.monotone_violations;
          exited[c] = 0;
          evo.arrival[c] = INF;
        }
      }
    }
    f.phi.swap(next);
    if (step_count % opt.reinit_every == 0) reinitialize(f, opt.reinit_iters, frozen, opt.freeze_band);
    if (step_count % opt.event_check_every == 0) {
      const int nc = detail::count_components(f);
      if (nc != ncomp) {
        FlowEvent ev;
        ev.t = t;
        ev.components_before = ncomp;
        ev.components_after = nc;
        ev.kind = nc == 0 ? EventKind::Extinction
                          : (nc > ncomp ? EventKind::Pinch : EventKind::ComponentVanish);
        evo.events.push_back(ev);
        if (nc == 0) {
          evo.extinct = true;
          evo.extinction_time = t;
          snap(t);
          return evo;
        }
        ncomp = nc;
      }
    }
    if (t + 1e-12 >= next_snap) {
      snap(t);
      next_snap += opt.sample_dt;
    }
  }
  if (evo.snapshot_times.empty() || evo.snapshot_times.back() < t - 1e-12) snap(t);
  return evo;
}

// ---------------- interface extraction and metrics -----------------

inline std::vector<Vec2> interface_points(const LevelSetField& f) {
  std::vector<Vec2> pts;
  const double h = f.grid.h;
  for (int i = 0; i < f.nr - 1; ++i)
    for (int j = 0; j < f.nz - 1; ++j) {
      const double a = f.at(i, j);
      const double b = f.at(i + 1, j);
      const double c = f.at(i, j + 1);
      if ((a <= 0.0) != (b <= 0.0)) {
        const double th = a / (a - b);
        pts.push_back({f.r(i) + th * h, f.z(j)});
      }
      if ((a <= 0.0) != (c <= 0.0)) {
        const double th = a / (a - c);
        pts.push_back({f.r(i), f.z(j) + th * h});
      }
    }
  return pts;
}

// marching-squares interface segments, for contour energies and exports
inline std::vector<std::pair<Vec2, Vec2>> interface_segments(const LevelSetField& f) {
  std::vector<std::pair<Vec2, Vec2>> segs;
  const double h = f.grid.h;
  for (int i = 0; i < f.nr - 1; ++i)
    for (int j = 0; j < f.nz - 1; ++j) {
      const double v00 = f.at(i, j), v10 = f.at(i + 1, j);
      const double v01 = f.at(i, j + 1), v11 = f.at(i + 1, j + 1);
      std::vector<Vec2> xs;
      auto cross = [&](double a, double b, Vec2 pa, Vec2 pb) {
        if ((a <= 0.0) != (b <= 0.0)) {
          const double th = a / (a - b);
          xs.push_back(pa + th * (pb - pa));
        }
      };
      const Vec2 p00{f.r(i), f.z(j)}, p10{f.r(i + 1), f.z(j)};
      const Vec2 p01{f.r(i), f.z(j + 1)}, p11{f.r(i + 1), f.z(j + 1)};
      cross(v00, v10, p00, p10);
      cross(v10, v11, p10, p11);
      cross(v11, v01, p11, p01);
      cross(v01, v00, p01, p00);
      if (xs.size() == 2) segs.emplace_back(xs[0], xs[1]);
      else if (xs.size() == 4) {  // saddle: pair arbitrarily but consistently
        segs.emplace_back(xs[0], xs[1]);
        segs.emplace_back(xs[2], xs[3]);
      }
      (void)h;
    }
  return segs;
}

inline double dist_to_points(const Vec2& q, const std::vector<Vec2>& pts) {
  double best = std::numeric_limits<double>::max();
  for (const Vec2& p : pts) best = std::min(best, norm(q - p));
  return best;
}

inline double hausdorff(const std::vector<Vec2>& A, const std::vector<Vec2>& B) {
  if (A.empty() || B.empty()) return std::numeric_limits<double>::infinity();
  double d = 0.0;
  for (const Vec2& a : A) d = std::max(d, dist_to_points(a, B));
  for (const Vec2& b : B) d = std::max(d, dist_to_points(b, A));
  return d;
}

inline std::vector<Vec2> clip_points(const std::vector<Vec2>& pts, double r_lo,
                                     double r_hi, double z_lo, double z_hi) {
  std::vector<Vec2> out;
  for (const Vec2& p : pts)
    if (p.r >= r_lo && p.r <= r_hi && p.z >= z_lo && p.z <= z_hi) out.push_back(p);
  return out;
}

// symmetric discrepancy between an interface point cloud and a polyline
inline double hausdorff_points_polyline(const std::vector<Vec2>& pts,
                                        const std::vector<Vec2>& poly) {
  if (pts.empty() || poly.empty()) return std::numeric_limits<double>::infinity();
  double d = 0.0;
  for (const Vec2& p : pts)
    d = std::max(d, detail::dist_to_polyline(poly, p.r, p.z));
  for (const Vec2& q : poly) d = std::max(d, dist_to_points(q, pts));
  return d;
}

inline double min_set_distance(const std::vector<Vec2>& A, const std::vector<Vec2>& B) {
  double d = std::numeric_limits<double>::max();
  for (const Vec2& a : A)
    for (const Vec2& b : B) d = std::min(d, norm(a - b));
  return d;
}

// truncated expander energy of the interface contour
inline double interface_energy(const LevelSetField& f, double r_trunc) {
  const auto segs = interface_segments(f);
  double acc = 0.0;
  for (const auto& [a, b] : segs) {
    const Vec2 mid = 0.5 * (a + b);
    if (norm(mid) > r_trunc) continue;
    const double ell = norm(b - a);
    acc += std::pow(std::max(mid.r, 0.0), f.grid.n - 1) * std::exp(dot(mid, mid) / 4.0) * ell;
  }
  return unit_sphere_area(f.grid.n - 1) * acc;
}

// Expander residual of the zero set sampled at interface-adjacent cells,
// with respect to the outward normal grad(phi)/|grad(phi)|. Positive
// residual means strictly expander mean convex toward the interior.
inline std::vector<double> interface_residual(const LevelSetField& f) {
  std::vector<double> out;
  const double h = f.grid.h;
  const int n = f.grid.n;
  for (int i = 1; i < f.nr - 1; ++i)
    for (int j = 1; j < f.nz - 1; ++j) {
      if (std::abs(f.at(i, j)) > 1.2 * h) continue;
      bool near = false;
      if ((f.at(i, j) <= 0) != (f.at(i + 1, j) <= 0) ||
          (f.at(i, j) <= 0) != (f.at(i - 1, j) <= 0) ||
          (f.at(i, j) <= 0) != (f.at(i, j + 1) <= 0) ||
          (f.at(i, j) <= 0) != (f.at(i, j - 1) <= 0))
        near = true;
      if (!near) continue;
      const double c = f.at(i, j);
      const double pim = f.at(i - 1, j), pip = f.at(i + 1, j);
      const double pjm = f.at(i, j - 1), pjp = f.at(i, j + 1);
      const double pr = (pip - pim) / (2 * h), pz = (pjp - pjm) / (2 * h);
      const double prr = (pip - 2 * c + pim) / (h * h), pzz = (pjp - 2 * c + pjm) / (h * h);
      const double prz = (f.at(i + 1, j + 1) - f.at(i + 1, j - 1) - f.at(i - 1, j + 1) +
                          f.at(i - 1, j - 1)) /
                         (4 * h * h);
      const double g2 = pr * pr + pz * pz;
      if (g2 < 0.25) continue;
      const double g = std::sqrt(g2);
      const double H = (prr * pz * pz - 2 * pr * pz * prz + pzz * pr * pr) / (g2 * g) +
                       (n - 1) * pr / (std::max(f.r(i), 1e-9) * g);
      const double xn = (f.r(i) * pr + f.z(j) * pz) / g;
      out.push_back(H + 0.5 * xn);
    }
  return out;
}

// max |grad phi| deviation band check after reinitialization
inline std::pair<double, double> band_gradient_range(const LevelSetField& f) {
  const double h = f.grid.h;
  double lo = std::numeric_limits<double>::max(), hi = 0.0;
  for (int i = 1; i < f.nr - 1; ++i)
    for (int j = 1; j < f.nz - 1; ++j) {
      if (std::abs(f.at(i, j)) > 3 * h) continue;
      const double pr = (f.at(i + 1, j) - f.at(i - 1, j)) / (2 * h);
      const double pz = (f.at(i, j + 1) - f.at(i, j - 1)) / (2 * h);
      const double g = std::hypot(pr, pz);
      lo = std::min(lo, g);
      hi = std::max(hi, g);
    }
  return {lo, hi};
}

// ---------------- derived checks -----------------

struct ArrivalCheck {
  int shared_cells = 0;      // cells claimed by two distinct arrival levels
  double max_jump = 0.0;     // max arrival difference across adjacent cells away from events
};

inline const LevelSetField& snapshot_at(const LevelSetEvolution& evo, double t) {
  double best = std::numeric_limits<double>::max();
  std::size_t k = 0;
  for (std::size_t i = 0; i < evo.snapshot_times.size(); ++i) {
    const double d = std::abs(evo.snapshot_times[i] - t);
    if (d < best) { best = d; k = i; }
  }
  return evo.snapshots[k];
}

// Avoidance report: distance between the two evolving sets at each sampled
// time against the e^{lambda t} eta lower bound, lambda = -1/2 in the
// expander setting (Ric^X = -|v|^2/2 for X = -x/2).
struct AvoidanceReport {
  std::vector<double> times;
  std::vector<double> distance;
  std::vector<double> bound;
  double lambda = -0.5;
  double eta = 0.0;
  bool pass = true;
};

inline AvoidanceReport avoidance_test(const LevelSetEvolution& A, const LevelSetEvolution& B,
                                      double c_grid = 4.0) {
  AvoidanceReport rep;
  const auto& fa = A.snapshots.front();
  const auto& fb = B.snapshots.front();
  for (std::size_t c = 0; c < fa.phi.size(); ++c)
    if (fa.phi[c] <= 0.0 && fb.phi[c] <= 0.0)
      throw DomainError("avoidance_test: initial sets overlap");
  const auto pa0 = interface_points(fa);
  const auto pb0 = interface_points(fb);
  rep.eta = min_set_distance(pa0, pb0);
  const double h = A.grid.h;
  const std::size_t K = std::min(A.snapshots.size(), B.snapshots.size());
  for (std::size_t k = 0; k < K; ++k) {
    const auto pa = interface_points(A.snapshots[k]);
    const auto pb = interface_points(B.snapshots[k]);
    if (pa.empty() || pb.empty()) break;  // first extinction
    const double t = A.snapshot_times[k];
    const double d = min_set_distance(pa, pb);
    const double bound = std::exp(rep.lambda * t) * rep.eta - c_grid * h;
    rep.times.push_back(t);
    rep.distance.push_back(d);
    rep.bound.push_back(bound);
    if (d < bound) rep.pass = false;
  }
  return rep;
}

// Shrinking-sphere strong barrier check with the constant
// c0 = 4n + 2 delta sup_{B_delta(p)} |X|, X = -x/2.
struct BarrierReport {
  double c0 = 0.0;
  double tau = 0.0;
  bool pass = true;
};

inline double barrier_c0(int n, double z0, double delta) {
  return 4.0 * n + 2.0 * delta * 0.5 * (std::abs(z0) + delta);
}

inline BarrierReport barrier_test(const LevelSetEvolution& evo, double z0, double delta,
                                  double c) {
  BarrierReport rep;
  rep.c0 = barrier_c0(evo.grid.n, z0, delta);
  if (!(c > rep.c0))
    throw DomainError("barrier_test: c must exceed c0 = " + std::to_string(rep.c0));
  rep.tau = delta * delta / c;
  const auto p0 = interface_points(evo.snapshots.front());
  const double d0 = dist_to_points({0.0, z0}, p0);
  const bool p_inside = evo.snapshots.front().at(0, 0) <= 0.0;  // not used; p given on axis
  (void)p_inside;
  if (d0 <= delta) throw DomainError("barrier_test: initial ball not disjoint from the set");
  for (std::size_t k = 0; k < evo.snapshots.size(); ++k) {
    const double t = evo.snapshot_times[k];
    if (t > rep.tau) break;
    const double rad = std::sqrt(std::max(delta * delta - c * t, 0.0));
    const auto pts = interface_points(evo.snapshots[k]);
    if (pts.empty()) break;
    // the barrier ball must stay disjoint from Omega(t)
    const double d = dist_to_points({0.0, z0}, pts);
    const bool center_inside = [&] {
      const auto& f = evo.snapshots[k];
      const int i = 0;
      const int j = int(std::round((z0 - f.grid.z_min) / f.grid.h));
      return f.at(i, std::clamp(j, 0, f.nz - 1)) <= 0.0;
    }();
    if (center_inside || d < rad) rep.pass = false;
  }
  return rep;
}

// Semigroup restart: evolve a fresh run from the snapshot at T and compare
// boundaries at T + t_probe.
inline double restart_check(const LevelSetEvolution& evo, double T, double t_probe,
                            const EvolveOptions& opt = {}) {
  const LevelSetField& mid = snapshot_at(evo, T);
  LevelSetEvolution again = evolve(mid, t_probe, opt);
  const auto a = interface_points(snapshot_at(evo, T + t_probe));
  const auto b = interface_points(again.snapshots.back());
  return hausdorff(a, b);
}

// Corner smoothing: intersect two strictly expander-mean-convex domains,
// redistance, and run the flow for a short time eps_s.
inline LevelSetField smooth_mean_convex(const LevelSetField& A, const LevelSetField& B,
                                        double eps_s, const EvolveOptions& opt = {}) {
  if (A.nr != B.nr || A.nz != B.nz) throw DomainError("smooth_mean_convex: grid mismatch");
  const double h = A.grid.h;
  // transversality at corner cells (axis column included via the symmetric
  // ghost)
  for (int i = 0; i < A.nr - 1; ++i)
    for (int j = 1; j < A.nz - 1; ++j) {
      if (std::abs(A.at(i, j)) > 1.5 * h || std::abs(B.at(i, j)) > 1.5 * h) continue;
      const double aim = i > 0 ? A.at(i - 1, j) : A.at(1, j);
      const double bim = i > 0 ? B.at(i - 1, j) : B.at(1, j);
      const double ar = (A.at(i + 1, j) - aim) / (2 * h);
      const double az = (A.at(i, j + 1) - A.at(i, j - 1)) / (2 * h);
      const double br = (B.at(i + 1, j) - bim) / (2 * h);
      const double bz = (B.at(i, j + 1) - B.at(i, j - 1)) / (2 * h);
      const double na = std::hypot(ar, az), nb = std::hypot(br, bz);
      if (na < 0.3 || nb < 0.3) continue;
      // a crease cell with antiparallel normals is a tangential contact of
      // the two boundaries (degenerate lens); parallel normals (e.g. A = B)
      // produce no corner at all
      const double align = (ar * br + az * bz) / (na * nb);
      if (align < -(1.0 - 1e-3))
        throw TransversalityError("tangential intersection at corner cell");
    }
  LevelSetField f = A;
  bool any = false;
  for (std::size_t c = 0; c < f.phi.size(); ++c) {
    f.phi[c] = std::max(A.phi[c], B.phi[c]);
    if (f.phi[c] <= 0.0) any = true;
  }
  if (!any) throw DomainError("smooth_mean_convex: empty intersection");
  LevelSetField frozen = f;
  reinitialize(f, 10, frozen, 1);
  if (eps_s > 0.0) {
    LevelSetEvolution evo = evolve(f, eps_s, opt);
    return evo.snapshots.back();
  }
  return f;
}

}  // namespace emcf
