#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "smectic/jump.hpp"

using namespace smectic;

TEST_CASE("make_jump derives the pair geometry") {
  JumpSpec j = make_jump(-1.0, 1.0);
  CHECK(!j.degenerate);
  CHECK(j.minus.a == -1.0);
  CHECK(j.plus.a == 1.0);
  CHECK(j.minus.m1() == -1.0);
  CHECK(j.minus.m2() == doctest::Approx(0.5));
  CHECK(j.p1 == doctest::Approx(2.0));
  CHECK(j.p2 == doctest::Approx(0.0));  // symmetric pair: equal parabola heights
  CHECK(j.pnorm == doctest::Approx(2.0));
  CHECK(j.n1 == doctest::Approx(1.0));
  CHECK(j.n2 == doctest::Approx(0.0));
  CHECK(j.nu1 > 0.0);
  CHECK(j.nu1 * j.nu1 + j.nu2 * j.nu2 == doctest::Approx(1.0).epsilon(1e-15));

  JumpSpec k = make_jump(0.0, 2.0);
  CHECK(k.p1 == doctest::Approx(2.0));
  CHECK(k.p2 == doctest::Approx(2.0));
  CHECK(k.pnorm == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-15));
  // nu parallel to p with positive first component.
  CHECK(k.nu1 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(k.nu2 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  // Swapping orientation flips p but keeps nu1 > 0.
  JumpSpec r = make_jump(1.0, -1.0);
  CHECK(r.p1 == doctest::Approx(-2.0));
  CHECK(r.nu1 > 0.0);
}

TEST_CASE("degenerate pairs carry zero cost and the flag") {
  // No jump, no cost; transition builders are the operations that reject
  // degenerate pairs.
  JumpSpec j = make_jump(0.7, 0.7);
  CHECK(j.degenerate);
  CHECK(jump_cost(j) == 0.0);
  JumpCostForms f = jump_cost_forms(j);
  CHECK(f.degenerate);
  CHECK(f.cost == 0.0);
}

TEST_CASE("frozen values: symmetric and asymmetric pairs") {
  // Symmetric unit pair: cost 2/3 exactly in the continuum.
  CHECK(jump_cost(make_jump(-1.0, 1.0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // One-sided pair (0, 2): |p|^3 = (2 sqrt 2)^3, denominator 12 sqrt 2,
  // giving 2/(3 sqrt 2) = 0.47140452079103168...
  CHECK(jump_cost(make_jump(0.0, 2.0)) == doctest::Approx(0.4714045207910317).epsilon(1e-15));
  // Orientation invariance.
  CHECK(jump_cost(make_jump(1.0, -1.0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(jump_cost(make_jump(2.0, 0.0)) == doctest::Approx(0.4714045207910317).epsilon(1e-15));
}

TEST_CASE("the two cost formulas agree on random pairs") {
  std::mt19937_64 gen(2024);
  auto unif = [&] { return 6.0 * (double)(gen() >> 11) * 0x1.0p-53 - 3.0; };
  int tested = 0;
  while (tested < 2000) {
    const double am = unif(), ap = unif();
    if (std::abs(ap - am) < 1e-6) continue;
    JumpCostForms f = jump_cost_forms(make_jump(am, ap));
    CHECK(std::abs(f.divergence_form) == doctest::Approx(f.closed_form).epsilon(1e-12));
    CHECK(f.cost == doctest::Approx(f.closed_form).epsilon(1e-15));
    CHECK(f.cost > 0.0);
    ++tested;
  }
}

TEST_CASE("cost matches the cubic law for small jumps") {
  // a_pm = a0 -+ d/2 with d -> 0: cost -> d^3 / (12 sqrt(1 + a0^2)).
  for (double a0 : {0.0, 0.5, -1.2}) {
    const double d = 1e-3;
    const double cost = jump_cost(make_jump(a0 - 0.5 * d, a0 + 0.5 * d));
    const double law = d * d * d / (12.0 * std::sqrt(1.0 + a0 * a0));
    CHECK(cost == doctest::Approx(law).epsilon(1e-4));
  }
}

TEST_CASE("cost scales cubically in the jump size for symmetric pairs") {
  // Symmetric pairs (-(s), s): cost = (2s)^3 / 12 = 2 s^3 / 3.
  for (double s : {0.25, 0.5, 1.0, 1.7}) {
    CHECK(jump_cost(make_jump(-s, s)) == doctest::Approx(2.0 * s * s * s / 3.0).epsilon(1e-13));
  }
}

TEST_CASE("jump condition holds automatically for derived specs") {
  std::mt19937_64 gen(5);
  auto unif = [&] { return 6.0 * (double)(gen() >> 11) * 0x1.0p-53 - 3.0; };
  for (int k = 0; k < 200; ++k) {
    const double am = unif(), ap = unif();
    if (std::abs(ap - am) < 1e-6) continue;
    CHECK(check_jump_condition(make_jump(am, ap)));
  }
}

TEST_CASE("jump condition fails for a misaligned normal") {
  JumpSpec j = make_jump(-1.0, 1.0);
  j.nu1 = 0.0;
  j.nu2 = 1.0;  // normal now perpendicular to p: traces differ tangentially
  CHECK(!check_jump_condition(j));
}

TEST_CASE("path energy sums cost times length over admissible segments") {
  // Vertical segment of length 2 carrying the symmetric unit pair: the
  // segment normal is horizontal, parallel to p = (2, 0).
  DefectPath path;
  path.vertices = {{0.0, 0.0}, {0.0, 2.0}};
  path.states = {{-1.0, 1.0}};
  CHECK(limit_energy(path) == doctest::Approx(2.0 * (2.0 / 3.0)).epsilon(1e-14));

  // Two collinear segments split the same line; energy is additive.
  DefectPath split;
  split.vertices = {{0.0, 0.0}, {0.0, 0.5}, {0.0, 2.0}};
  split.states = {{-1.0, 1.0}, {-1.0, 1.0}};
  CHECK(limit_energy(split) == doctest::Approx(limit_energy(path)).epsilon(1e-14));

  // The (0,2) pair has p parallel to (1,1); the matching segment runs along
  // (1,-1). Length sqrt(2) * L.
  DefectPath diag;
  diag.vertices = {{0.0, 0.0}, {1.0, -1.0}};
  diag.states = {{0.0, 2.0}};
  CHECK(limit_energy(diag) ==
        doctest::Approx(std::sqrt(2.0) * 0.4714045207910317).epsilon(1e-13));
}

TEST_CASE("inadmissible segments are rejected by index") {
  DefectPath path;
  path.vertices = {{0.0, 0.0}, {0.0, 1.0}, {2.0, 1.0}};
  path.states = {{-1.0, 1.0}, {-1.0, 1.0}};  // second segment normal is vertical
  CHECK_THROWS_AS(limit_energy(path), std::invalid_argument);
  try {
    limit_energy(path);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }

  DefectPath counts;
  counts.vertices = {{0.0, 0.0}, {0.0, 1.0}};
  counts.states = {};
  CHECK_THROWS_AS(limit_energy(counts), std::invalid_argument);
}

TEST_CASE("defect path json round-trips exactly") {
  DefectPath path;
  path.vertices = {{0.0, 0.0}, {0.125, 2.0}, {0.125, 3.0}};
  path.states = {{-1.0, 1.0}, {0.3333333333333333, 1.7}};
  DefectPath r = defect_path_from_json(to_json(path));
  REQUIRE(r.vertices.size() == path.vertices.size());
  REQUIRE(r.states.size() == path.states.size());
  for (std::size_t k = 0; k < path.vertices.size(); ++k) {
    CHECK(r.vertices[k][0] == path.vertices[k][0]);
    CHECK(r.vertices[k][1] == path.vertices[k][1]);
  }
  for (std::size_t k = 0; k < path.states.size(); ++k) {
    CHECK(r.states[k][0] == path.states[k][0]);
    CHECK(r.states[k][1] == path.states[k][1]);
  }
}

TEST_CASE("defect path json rejects malformed input") {
  CHECK_THROWS(defect_path_from_json("not json at all"));
  CHECK_THROWS(defect_path_from_json("{\"vertices\": [[0,0]]}"));  // missing states
}
