#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "emcf/geometry.hpp"
#include "emcf/profile.hpp"

using namespace emcf;
using Catch::Approx;

namespace {

ProfileCurve hyperplane_profile(int n, double r_max, std::size_t m) {
  ProfileCurve c;
  c.n = n;
  c.kind = CurveKind::GraphOverRadius;
  for (std::size_t i = 0; i < m; ++i)
    c.samples.push_back({r_max * double(i) / double(m - 1), 0.0});
  return c;
}

// circle of radius rho about the origin, south pole to north pole, so the
// right-hand normal points outward
ProfileCurve sphere_profile(int n, double rho, std::size_t m) {
  ProfileCurve c;
  c.n = n;
  c.kind = CurveKind::AxisToInfinity;
  for (std::size_t i = 0; i < m; ++i) {
    const double phi = -std::numbers::pi / 2 + std::numbers::pi * double(i) / double(m - 1);
    c.samples.push_back({rho * std::cos(phi), rho * std::sin(phi)});
  }
  return c;
}

}  // namespace

TEST_CASE("hyperplane residual vanishes") {
  const auto c = hyperplane_profile(2, 8.0, 1000);
  const auto res = expander_residual(c, EndSymmetry::Axis, EndSymmetry::None);
  for (double r : res) REQUIRE(std::abs(r) < 1e-12);
}

TEST_CASE("sphere residual matches n/rho + rho/2") {
  for (double rho : {0.5, 1.0, 2.0}) {
    const int n = 2;
    const auto c = sphere_profile(n, rho, 4001);
    const auto res = expander_residual(c, EndSymmetry::Axis, EndSymmetry::Axis);
    const double expect = n / rho + rho / 2.0;
    for (std::size_t i = 0; i < res.size(); ++i)
      REQUIRE(res[i] == Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("degenerate curve raises malformed-curve error") {
  ProfileCurve c;
  c.n = 2;
  c.kind = CurveKind::AxisToInfinity;
  c.samples = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
  REQUIRE_THROWS_AS(expander_residual(c), MalformedCurveError);
}

TEST_CASE("weighted norm: zero function and homogeneity") {
  const auto base = hyperplane_profile(2, 8.0, 1500);
  const auto g = curve_geometry(base, EndSymmetry::Axis, EndSymmetry::None);
  std::vector<double> zero(base.size(), 0.0);
  for (int k : {0, 1, 2}) REQUIRE(weighted_norm(base, g, zero, k, 8.0) == 0.0);

  std::mt19937 rng(42);
  std::normal_distribution<double> dist;
  std::vector<double> u(base.size());
  for (double& x : u) x = dist(rng);
  const double c = 3.7;
  std::vector<double> cu(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) cu[i] = c * u[i];
  for (int k : {0, 1, 2}) {
    const double a = weighted_norm(base, g, u, k, 8.0);
    const double b = weighted_norm(base, g, cu, k, 8.0);
    REQUIRE(b == Approx(c * a).epsilon(1e-12));
  }
}

TEST_CASE("weighted norm: gaussian on the hyperplane matches 1d quadrature") {
  // u = e^{-|x|^2/4}, n = 2, k = 0, R_trunc = 8:
  // ||u||^2 = 2 pi * int_0^8 e^{-r^2/4} r dr = 4 pi (1 - e^{-16})
  const auto base = hyperplane_profile(2, 8.0, 6000);
  const auto g = curve_geometry(base, EndSymmetry::Axis, EndSymmetry::None);
  std::vector<double> u(base.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = std::exp(-base[i].r * base[i].r / 4.0);
  const double got = weighted_norm(base, g, u, 0, 8.0);
  const double expect = std::sqrt(4.0 * std::numbers::pi * (1.0 - std::exp(-16.0)));
  REQUIRE(got == Approx(expect).epsilon(1e-4));
  REQUIRE(got == Approx(3.5449).epsilon(1e-4));
}

TEST_CASE("weighted norm: triangle inequality at quadrature level") {
  const auto base = hyperplane_profile(2, 8.0, 800);
  const auto g = curve_geometry(base, EndSymmetry::Axis, EndSymmetry::None);
  std::mt19937 rng(7);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> u(base.size()), v(base.size()), w(base.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = dist(rng);
      v[i] = dist(rng);
      w[i] = u[i] + v[i];
    }
    for (int k : {0, 1, 2}) {
      const double nu = weighted_norm(base, g, u, k, 8.0);
      const double nv = weighted_norm(base, g, v, k, 8.0);
      const double nw = weighted_norm(base, g, w, k, 8.0);
      REQUIRE(nw <= nu + nv + 1e-10 * (nu + nv));
    }
  }
}

TEST_CASE("weighted norm ordering w0 <= w1 <= w2") {
  const auto base = hyperplane_profile(2, 8.0, 900);
  const auto g = curve_geometry(base, EndSymmetry::Axis, EndSymmetry::None);
  std::mt19937 rng(3);
  std::normal_distribution<double> dist;
  std::vector<double> u(base.size());
  for (double& x : u) x = dist(rng);
  const auto w = weighted_norms(base, g, u, 8.0);
  REQUIRE(w.w0 <= w.w1);
  REQUIRE(w.w1 <= w.w2);
}

TEST_CASE("truncation beyond curve extent raises") {
  const auto base = hyperplane_profile(2, 4.0, 400);
  const auto g = curve_geometry(base, EndSymmetry::Axis, EndSymmetry::None);
  std::vector<double> u(base.size(), 1.0);
  REQUIRE_THROWS_AS(weighted_norm(base, g, u, 0, 8.0), TruncationError);
}

TEST_CASE("expander energy: empty, monotone, pinned hyperplane value") {
  ProfileCurve empty;
  empty.n = 2;
  REQUIRE(expander_energy(empty, 4.0) == 0.0);

  const auto s1 = sphere_profile(2, 1.0, 2000);
  const auto s2 = sphere_profile(2, 2.0, 2000);
  REQUIRE(expander_energy(s2, 3.0) > expander_energy(s1, 3.0));

  // hyperplane, n = 2, R_trunc = 4: E = 2 pi int_0^4 e^{r^2/4} r dr
  //                                   = 4 pi (e^{4} - 1)
  const auto base = hyperplane_profile(2, 4.0, 6000);
  const double expect = 4.0 * std::numbers::pi * (std::exp(4.0) - 1.0);
  REQUIRE(expander_energy(base, 4.0) == Approx(expect).epsilon(1e-5));
}

TEST_CASE("relative entropy: zero graph gives exactly zero") {
  const auto base = hyperplane_profile(2, 8.0, 1200);
  const auto g = curve_geometry(base, EndSymmetry::Axis, EndSymmetry::None);
  std::vector<double> u(base.size(), 0.0);
  REQUIRE(relative_expander_entropy(base, g, u, 8.0) == 0.0);
}

TEST_CASE("relative entropy: gauge violation raises graph-breakdown") {
  const auto base = hyperplane_profile(2, 8.0, 1200);
  const auto g = curve_geometry(base, EndSymmetry::Axis, EndSymmetry::None);
  std::vector<double> u(base.size(), 5.0);
  REQUIRE_THROWS_AS(relative_expander_entropy(base, g, u, 8.0), GraphBreakdownError);
}

TEST_CASE("dictionary map: identity at t = 0, sphere scaling, round trip") {
  const auto c = sphere_profile(2, 1.3, 500);
  const auto im = dictionary_map(c, 0.0);
  REQUIRE(im.mcf_time == 1.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    REQUIRE(im.curve[i].r == c[i].r);
    REQUIRE(im.curve[i].z == c[i].z);
  }

  const double t = 0.37;
  const auto im2 = dictionary_map(c, t);
  REQUIRE(im2.mcf_time == Approx(std::exp(t)));
  const double f = std::exp(0.5 * t);
  for (std::size_t i = 0; i < c.size(); ++i)
    REQUIRE(norm(im2.curve[i] - f * c[i]) == 0.0);

  // round trip: dividing by the same factor undoes the scaling to the last
  // bit when the factor is a power of two, and to <= 1 ulp otherwise
  const auto back = dictionary_unmap(im2.curve, t);
  for (std::size_t i = 0; i < c.size(); ++i) {
    REQUIRE(back[i].r == Approx(c[i].r).margin(0.0).epsilon(1e-15));
    REQUIRE(back[i].z == Approx(c[i].z).margin(1e-300).epsilon(1e-15));
  }
}

TEST_CASE("dictionary map: EMCF sphere trajectory maps to MCF trajectory") {
  // EMCF: rho^2(t) = (rho0^2 + 2n) e^{-t} - 2n  maps to
  // MCF:  rho~^2(s) = rho0^2 + 2n - 2ns with s = e^t
  const int n = 2;
  const double rho0 = 1.0;
  for (double t : {0.05, 0.1, 0.15}) {
    const double rho_sq = (rho0 * rho0 + 2 * n) * std::exp(-t) - 2 * n;
    REQUIRE(rho_sq > 0);
    const auto c = sphere_profile(n, std::sqrt(rho_sq), 200);
    const auto im = dictionary_map(c, t);
    const double s = im.mcf_time;
    const double expect = std::sqrt(rho0 * rho0 + 2 * n - 2 * n * s);
    // mapped samples all sit at radius e^{t/2} rho(t) = expect
    for (const auto& p : im.curve.samples)
      REQUIRE(norm(p) == Approx(expect).epsilon(1e-12));
  }
}
