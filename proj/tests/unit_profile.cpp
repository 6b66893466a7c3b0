#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "json.hpp"
#include "smectic/energy.hpp"
#include "smectic/profile.hpp"

using namespace smectic;

TEST_CASE("well potential collapses to the logistic nonlinearity") {
  std::mt19937_64 gen(31);
  auto unif = [&](double lo, double hi) {
    return lo + (hi - lo) * (double)(gen() >> 11) * 0x1.0p-53;
  };
  for (int k = 0; k < 50; ++k) {
    const double am = unif(-3.0, 3.0);
    double ap = unif(-3.0, 3.0);
    if (std::abs(ap - am) < 1e-3) ap = am + 1.0;
    JumpSpec j = make_jump(am, ap);
    for (int q = 0; q <= 20; ++q) {
      const double g = q / 20.0;
      CHECK(well_potential(g, j) ==
            doctest::Approx(0.5 * j.pnorm * g * (1.0 - g)).epsilon(1e-12));
    }
    // Exact zeros at the wells: the numerator cancellation is handled.
    CHECK(well_potential(0.0, j) == doctest::Approx(0.0));
    CHECK(well_potential(1.0, j) == doctest::Approx(0.0));
  }
}

TEST_CASE("well potential frozen midpoints") {
  CHECK(well_potential(0.5, make_jump(-1.0, 1.0)) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(well_potential(0.5, make_jump(0.0, 2.0)) ==
        doctest::Approx(std::sqrt(2.0) / 4.0).epsilon(1e-14));
}

TEST_CASE("logistic profile frozen values") {
  JumpSpec j = make_jump(-1.0, 1.0);  // rate |p|/2 = 1
  CHECK(logistic_profile(j, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(logistic_profile(j, 1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
  CHECK(logistic_profile(j, -1.0) == doctest::Approx(1.0 - 0.7310585786300049).epsilon(1e-14));
  // Rate doubles with |p|: the (0,2) pair has |p| = 2 sqrt 2.
  JumpSpec k = make_jump(0.0, 2.0);
  CHECK(logistic_profile(k, 1.0) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-std::sqrt(2.0)))).epsilon(1e-14));
}

TEST_CASE("ODE solution matches the logistic closed form") {
  for (auto [am, ap] : {std::pair{-1.0, 1.0}, std::pair{0.0, 2.0}}) {
    JumpSpec j = make_jump(am, ap);
    Profile1D p = solve_profile(j, 6.0, 1e-3);
    REQUIRE(p.t_grid.size() == p.g.size());
    double emax = 0.0;
    for (std::size_t k = 0; k < p.g.size(); ++k)
      emax = std::max(emax, std::abs(p.g[k] - logistic_profile(j, p.t_grid[k])));
    CHECK(emax < 1e-8);
    // Strictly monotone through the transition.
    for (std::size_t k = 1; k < p.g.size(); ++k) CHECK(p.g[k] > p.g[k - 1] - 1e-15);
    CHECK(p.g.front() < 0.01);
    CHECK(p.g.back() > 0.99);
  }
}

TEST_CASE("fitted tail rate approaches the logistic rate") {
  JumpSpec j = make_jump(-1.0, 1.0);
  Profile1D p = solve_profile(j, 10.0, 1e-3);
  const double rate = 0.5 * j.pnorm;
  CHECK(std::abs(p.tail_c2 - rate) / rate < 0.1);
  CHECK(p.tail_c1 > 0.0);
}

TEST_CASE("profile solver rejects degenerate pairs") {
  CHECK_THROWS_AS(solve_profile(make_jump(1.0, 1.0), 5.0, 1e-3), std::invalid_argument);
}

TEST_CASE("ansatz shape hits the endpoint states and stays continuous") {
  JumpSpec j = make_jump(-1.0, 1.0);
  const double eps = 0.05, theta = 0.25;
  AnsatzShape s = ansatz_shape(j, eps, theta);
  CHECK(s.rate == doctest::Approx(1.0));
  CHECK(s.band == doctest::Approx(0.25));
  CHECK(s.chord(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.chord(-0.5) == doctest::Approx(0.0));
  CHECK(s.chord(0.5) == doctest::Approx(1.0));
  // Beyond the cell the chord extends by its endpoint values.
  CHECK(s.chord(-0.6) == doctest::Approx(0.0));
  CHECK(s.chord(0.6) == doctest::Approx(1.0));
  // Continuity across the branch switches at |s| = theta.
  for (double sw : {-theta, theta}) {
    CHECK(s.chord(sw - 1e-12) == doctest::Approx(s.chord(sw + 1e-12)).epsilon(1e-9));
  }
  // delta is the chord gap at the threshold.
  CHECK(s.delta == doctest::Approx(1.0 - logistic_profile(j, theta / eps)).epsilon(1e-12));
}

TEST_CASE("ansatz shape derivatives are consistent") {
  JumpSpec j = make_jump(0.0, 2.0);
  AnsatzShape s = ansatz_shape(j, 0.1, 0.25);
  const double h = 1e-6;
  // Probe points inside each branch, away from the switches.
  for (double x : {-0.45, -0.3, -0.2, -0.1, 0.0, 0.12, 0.22, 0.35, 0.48}) {
    const double fd = (s.chord(x + h) - s.chord(x - h)) / (2.0 * h);
    CHECK(s.chord_slope(x) == doctest::Approx(fd).epsilon(1e-6));
    const double fdi = (s.chord_integral(x + h) - s.chord_integral(x - h)) / (2.0 * h);
    CHECK(s.chord(x) == doctest::Approx(fdi).epsilon(1e-6));
    // v_part carries the s-dependence of the potential: its slope is the
    // normal component of the gradient along the chord.
    const double fdv = (s.v_part(x + h) - s.v_part(x - h)) / (2.0 * h);
    const double m1 = j.minus.m1() + s.chord(x) * j.p1;
    const double m2 = j.minus.m2() + s.chord(x) * j.p2;
    CHECK(fdv == doctest::Approx(m1 * j.nu1 + m2 * j.nu2).epsilon(1e-5));
  }
  CHECK(s.chord_integral(0.0) == doctest::Approx(0.0));
}

TEST_CASE("sampled ansatz gradient matches the chord construction exactly") {
  JumpSpec j = make_jump(-1.0, 1.0);
  const double eps = 0.05;
  Grid2D g = Grid2D::square(129, 9, j.nu1, j.nu2);
  Ansatz a = build_ansatz(j, eps, g);
  for (int i = 0; i < g.n_s; ++i) {
    const double c = a.shape.chord(g.s(i));
    for (int jj = 0; jj < g.n_t; ++jj) {
      const std::size_t k = g.idx(i, jj);
      CHECK(a.grad.c1[k] == doctest::Approx(j.minus.m1() + c * j.p1).epsilon(1e-14));
      CHECK(a.grad.c2[k] == doctest::Approx(j.minus.m2() + c * j.p2).epsilon(1e-14));
    }
  }
}

TEST_CASE("ansatz potential differentiates back to its gradient") {
  JumpSpec j = make_jump(0.0, 2.0);
  const double eps = 0.1;
  Grid2D g = Grid2D::square(401, 9, j.nu1, j.nu2);
  Ansatz a = build_ansatz(j, eps, g);
  ScalarField ux = deriv_x(a.u), uz = deriv_z(a.u);
  double e1 = 0.0, e2 = 0.0;
  // Compare away from the first/last rows where one-sided stencils meet the
  // linear branch kink.
  for (int i = 3; i < g.n_s - 3; ++i)
    for (int jj = 0; jj < g.n_t; ++jj) {
      e1 = std::max(e1, std::abs(ux(i, jj) - a.grad.c1[g.idx(i, jj)]));
      e2 = std::max(e2, std::abs(uz(i, jj) - a.grad.c2[g.idx(i, jj)]));
    }
  CHECK(e1 < 2e-3);
  CHECK(e2 < 2e-3);
}

TEST_CASE("ansatz build rejects degenerate and mismatched frames") {
  Grid2D g = Grid2D::square(33, 9, 1.0, 0.0);
  CHECK_THROWS_AS(build_ansatz(make_jump(1.0, 1.0), 0.05, g), std::invalid_argument);
  // Frame must match the jump normal; (0,2) needs the diagonal frame.
  CHECK_THROWS_AS(build_ansatz(make_jump(0.0, 2.0), 0.05, g), std::invalid_argument);
}

TEST_CASE("transition line energy: quadrature equals cost plus closed-form excess") {
  JumpSpec j = make_jump(-1.0, 1.0);
  const double cost = jump_cost(j);
  for (double eps : {0.1, 0.05, 0.025}) {
    const double quad = oned_energy(j, eps, 4096);
    const double closed = cost + oned_excess(j, eps);
    CHECK(quad == doctest::Approx(closed).epsilon(1e-12));
  }
}

TEST_CASE("closed-form excess frozen values") {
  JumpSpec j = make_jump(-1.0, 1.0);
  CHECK(oned_excess(j, 0.1) == doctest::Approx(4.4185063161599055e-3).epsilon(1e-12));
  CHECK(oned_excess(j, 0.05) == doctest::Approx(1.5309622896891273e-4).epsilon(1e-12));
  CHECK(oned_excess(j, 0.025) == doctest::Approx(2.0058452032068914e-8).epsilon(1e-12));
  CHECK(oned_excess(j, 0.0125) == doctest::Approx(9.714569991029372e-17).epsilon(1e-12));
}

TEST_CASE("excess is positive, decreasing, and roughly exponential") {
  JumpSpec j = make_jump(0.0, 2.0);
  double prev = 1e300;
  for (double eps : {0.1, 0.05, 0.025}) {
    const double ex = oned_excess(j, eps);
    CHECK(ex > 0.0);
    CHECK(ex < prev);
    prev = ex;
  }
  // Halving eps should square the leading factor (up to polynomial drift).
  const double r1 = oned_excess(j, 0.1), r2 = oned_excess(j, 0.05);
  CHECK(r2 < r1 * r1 * 1e4);
}

TEST_CASE("oned_energy input validation") {
  JumpSpec j = make_jump(-1.0, 1.0);
  CHECK_THROWS_AS(oned_energy(j, 0.05, 32), std::invalid_argument);    // budget too small
  CHECK_THROWS_AS(oned_energy(j, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(oned_energy(make_jump(1.0, 1.0), 0.05), std::invalid_argument);
}

TEST_CASE("parabolic route reproduces the closed-form transition solution") {
  // With seed u0(x) = 2 eps ln(2 cosh(x / (2 eps))) and slope +-1 boundary
  // growth, the marched field is u = u0(x) + z/2 exactly in the continuum.
  const double eps = 0.25;
  auto exact = [&](double x, double z) {
    return 2.0 * eps * std::log(2.0 * std::cosh(x / (2.0 * eps))) + 0.5 * z;
  };
  auto err = [&](int nx, int nz) {
    Grid2D g = Grid2D::axis_aligned(nx, nz, -1.0, 1.0, 0.0, 0.5);
    HopfColeInput in;
    in.u0.resize(nx);
    for (int i = 0; i < nx; ++i) in.u0[i] = exact(g.s(i), 0.0);
    in.slope_lo = -1.0;
    in.slope_hi = 1.0;
    ScalarField u = hopf_cole_field(in, eps, g);
    double m = 0.0;
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < nz; ++j) m = std::max(m, std::abs(u(i, j) - exact(g.s(i), g.t(j))));
    return m;
  };
  const double e1 = err(41, 41), e2 = err(81, 81);
  CHECK(e1 < 1e-3);
  CHECK(e1 / e2 > 3.0);
  CHECK(e1 / e2 < 5.0);
}

TEST_CASE("marched field has small zero-square residual") {
  // C - eps*B vanishes for the continuum solution; the discrete residual is
  // pure discretization error and shrinks at order 2.
  const double eps = 0.25;
  auto resid = [&](int n) {
    Grid2D g = Grid2D::axis_aligned(n, n, -1.0, 1.0, 0.0, 0.5);
    HopfColeInput in;
    in.u0.resize(n);
    for (int i = 0; i < n; ++i)
      in.u0[i] = 2.0 * eps * std::log(2.0 * std::cosh(g.s(i) / (2.0 * eps)));
    in.slope_lo = -1.0;
    in.slope_hi = 1.0;
    ScalarField u = hopf_cole_field(in, eps, g);
    EnergyBreakdown b = energy_eps(u, eps);
    return b.bps_square;
  };
  const double r1 = resid(41), r2 = resid(81);
  CHECK(r2 < r1);
  CHECK(r1 / r2 > 3.0);
}

TEST_CASE("hopf_cole_field validates its inputs") {
  HopfColeInput in;
  in.u0 = {0.0, 0.0, 0.0};
  Grid2D bad_frame = Grid2D::cell(3, 4, 1.0, 0.0);
  CHECK_THROWS_AS(hopf_cole_field(in, 0.1, bad_frame), std::invalid_argument);
  Grid2D g = Grid2D::axis_aligned(5, 4, 0.0, 1.0, 0.0, 1.0);
  CHECK_THROWS_AS(hopf_cole_field(in, 0.1, g), std::invalid_argument);  // size mismatch
  in.u0 = {0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(hopf_cole_field(in, -0.1, g), std::invalid_argument);
}

TEST_CASE("profile csv and sidecar json") {
  JumpSpec j = make_jump(-1.0, 1.0);
  Profile1D p = solve_profile(j, 2.0, 1e-2);
  const std::string path = "unit_profile_out.csv";
  save_profile_csv(p, path);
  FILE* fp = std::fopen(path.c_str(), "r");
  REQUIRE(fp != nullptr);
  char line[256];
  REQUIRE(std::fgets(line, sizeof line, fp) != nullptr);
  CHECK(std::string(line).find("t,g,W") == 0);
  int rows = 0;
  while (std::fgets(line, sizeof line, fp)) ++rows;
  std::fclose(fp);
  std::remove(path.c_str());
  CHECK(rows == (int)p.g.size());

  nlohmann::json js = nlohmann::json::parse(profile_sidecar_json(p));
  CHECK(js["a_minus"].get<double>() == -1.0);
  CHECK(js["a_plus"].get<double>() == 1.0);
  CHECK(js["logistic_rate"].get<double>() == doctest::Approx(1.0));
  CHECK(js.contains("tail_c1"));
  CHECK(js.contains("tail_c2"));
}
