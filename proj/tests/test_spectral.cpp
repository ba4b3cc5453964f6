#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "emcf/expanders.hpp"
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

const ExpanderProfile& unstable_branch() {
  static const ExpanderProfile p = [] {
    Cone cone;
    cone.aperture = 0.35;
    cone.double_symmetric = true;
    SolveOptions opt;
    opt.shoot.r_max = 16.0;
    auto found = solve_expander(2, cone, opt);
    // the connected branch with the smaller neck radius
    const ExpanderProfile* best = nullptr;
    for (const auto& q : found)
      if (q.family == ShootFamily::Neck &&
          (!best || q.shooting_parameter < best->shooting_parameter))
        best = &q;
    REQUIRE(best != nullptr);
    return *best;
  }();
  return p;
}

}  // namespace

TEST_CASE("flat assembly agrees with the hand-built stencil to 1e-12") {
  const int n = 2, m = 400;
  const double R = 8.0;
  const auto base = flat_profile(n, R, 4000);
  const auto op = assemble_stability_operator(base, EndSymmetry::Axis, R, m);

  // independent route: straight-profile weight w(r) = r^{n-1} e^{r^2/4},
  // potential V = 1/2, assembled directly from the closed forms
  const double h = R / (m - 1);
  REQUIRE(op.h == Approx(h).epsilon(1e-12));
  auto w = [&](double r) { return std::pow(r, n - 1) * std::exp(r * r / 4.0); };
  const int N = m - 1;
  std::vector<double> diag(N, 0.0), off(N - 1, 0.0), mass(N, 0.0);
  for (int i = 0; i < N; ++i) {
    mass[i] = i == 0 ? w(0.25 * h) * 0.5 * h : w(i * h) * h;
    diag[i] = 0.5 * mass[i];
  }
  for (int e = 0; e + 1 < m; ++e) {
    const double k = w((e + 0.5) * h) / h;
    if (e < N) diag[e] += k;
    if (e + 1 < N) {
      diag[e + 1] += k;
      off[e] = -k;
    }
  }
  for (int i = 0; i < N; ++i) {
    REQUIRE(op.diag[i] == Approx(diag[i]).epsilon(1e-12).margin(1e-12));
    REQUIRE(op.mass[i] == Approx(mass[i]).epsilon(1e-12).margin(1e-12));
  }
  for (int i = 0; i + 1 < N; ++i)
    REQUIRE(op.off[i] == Approx(off[i]).epsilon(1e-12).margin(1e-12));
}

TEST_CASE("row action on the constant vector reproduces the potential quadrature") {
  const auto base = flat_profile(2, 8.0, 4000);
  const auto op = assemble_stability_operator(base, EndSymmetry::Axis, 8.0, 600);
  // sum_i (M 1)_i over interior rows = form(1,1) restricted away from the
  // Dirichlet edge = int (1/2 - |A|^2) w plus the boundary stiffness term
  std::vector<double> ones(op.unknowns(), 1.0);
  double form = op.form_value(ones);
  // subtract the Dirichlet edge stiffness (last edge couples to the
  // eliminated node)
  const double h = op.h;
  auto w = [&](double r) { return r * std::exp(r * r / 4.0); };
  form -= w(8.0 - 0.5 * h) / h;
  double quad = 0.0;
  for (std::size_t i = 0; i < op.mass.size(); ++i) quad += 0.5 * op.mass[i];
  REQUIRE(form == Approx(quad).epsilon(1e-9));
}

TEST_CASE("hyperplane lowest eigenvalue is (n+1)/2") {
  // oracle: conjugating by e^{|x|^2/8} turns -(Delta + (x/2).grad) + 1/2
  // into the harmonic oscillator -Delta + |x|^2/16 + n/4 + 1/2 with ground
  // energy n/4 + n/4 + 1/2 = (n+1)/2
  const auto base = flat_profile(2, 8.0, 8000);
  const auto op = assemble_stability_operator(base, EndSymmetry::Axis, 8.0, 2000);
  const auto res = lowest_eigenpair(op);
  REQUIRE(res.lambda0 == Approx(1.5).epsilon(0.01));
  REQUIRE(res.gap > 1e-6);
}

TEST_CASE("eigenfunction is positive and Rayleigh-consistent") {
  const auto base = flat_profile(2, 8.0, 8000);
  const auto op = assemble_stability_operator(base, EndSymmetry::Axis, 8.0, 1200);
  const auto res = lowest_eigenpair(op);
  for (double v : res.f) REQUIRE(v > 0.0);
  REQUIRE(std::abs(res.lambda0 - op.rayleigh(res.f)) <= 1e-8);

  // variational minimality under random perturbations
  std::mt19937 rng(11);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> g = res.f;
    for (double& x : g) x += 1e-4 * dist(rng);
    REQUIRE(op.rayleigh(g) >= res.lambda0 - 1e-10);
  }
}

TEST_CASE("grid doubling moves lambda0 by at most 1e-4") {
  const auto base = flat_profile(2, 8.0, 12000);
  const auto op1 = assemble_stability_operator(base, EndSymmetry::Axis, 8.0, 2000);
  const auto op2 = assemble_stability_operator(base, EndSymmetry::Axis, 8.0, 4000);
  const double l1 = lowest_eigenpair(op1).lambda0;
  const double l2 = lowest_eigenpair(op2).lambda0;
  REQUIRE(std::abs(l1 - l2) <= 1e-4);
}

TEST_CASE("connected double-cone branch is strictly unstable") {
  const auto& p = unstable_branch();
  const auto op = assemble_stability_operator(p, 8.0, 2000);
  const auto res = lowest_eigenpair(op);
  REQUIRE(res.lambda0 < -1e-3);
  REQUIRE(stability_verdict(res) == StabilityVerdict::StrictlyUnstable);
  for (double v : res.f) REQUIRE(v > 0.0);
}

TEST_CASE("verdicts: stable hyperplane, inconclusive band raises") {
  const auto base = flat_profile(2, 8.0, 8000);
  const auto op = assemble_stability_operator(base, EndSymmetry::Axis, 8.0, 800);
  const auto res = lowest_eigenpair(op);
  REQUIRE(stability_verdict(res) == StabilityVerdict::Stable);

  SpectralResult zero;
  zero.lambda0 = 0.0;
  REQUIRE_THROWS_AS(stability_verdict(zero), DegenerateSpectrumError);
}

TEST_CASE("lambda0 decreases when |A|^2 is scaled up") {
  const auto& p = unstable_branch();
  auto op = assemble_stability_operator(p, 8.0, 800);
  // scaling |A|^2 by c >= 1 lowers the form by (c-1)|A|^2 pointwise
  double prev = lowest_eigenpair(op).lambda0;
  const auto base_op = op;
  for (double c : {2.0, 4.0}) {
    op = base_op;
    for (std::size_t i = 0; i < op.diag.size(); ++i) {
      const double a2 = base_op.geom.a_sq[i];
      op.diag[i] -= (c - 1.0) * a2 * op.mass[i];
    }
    const double l = lowest_eigenpair(op).lambda0;
    REQUIRE(l < prev);
    prev = l;
  }
}

TEST_CASE("assembly rejects m < 200 and residual-violating bases") {
  const auto base = flat_profile(2, 8.0, 2000);
  REQUIRE_THROWS(assemble_stability_operator(base, EndSymmetry::Axis, 8.0, 100));
}
