#pragma once

#include <string>
#include <vector>

#include "smectic/grid.hpp"
#include "smectic/jump.hpp"

namespace smectic {

// Well potential of the transition ODE g' = W(g):
//   W(g) = |g*p2 + m2_minus - (g*p1 + m1_minus)^2 / 2| / (p1*n1),
// which collapses algebraically to |p| * g * (1-g) / 2 on parabola data.
// The numerator cancels near g = 0 and g = 1, so it is evaluated in extended
// precision. W(0) = W(1) = 0 for every admissible spec.
double well_potential(double g, const JumpSpec& j);

// Closed-form solution of the ODE with g(0) = 1/2: the logistic
// 1 / (1 + exp(-|p| t / 2)).
double logistic_profile(const JumpSpec& j, double t);

// Sampled ODE solution on [-T, T] with fitted exponential tail constants:
// 1 - g(t) ~ c1 * exp(-c2 * t) for t > 0 (and symmetrically g(t) for t < 0),
// fitted by joint log-linear regression over |t| in [0.5T, 0.9T].
struct Profile1D {
  std::vector<double> t_grid;
  std::vector<double> g;
  JumpSpec jump;
  double ode_step = 0.0;
  double tail_c1 = 0.0, tail_c2 = 0.0;
};

// Classical 4th-order Runge-Kutta forward on [0, T] and backward on [-T, 0]
// from g(0) = 1/2. Throws on degenerate specs and when the solution exits
// [0, 1] by more than 1e-9 (step too large).
Profile1D solve_profile(const JumpSpec& j, double T, double step);

// The transition gradient stays on the parabola chord: grad u = c(s)*p + m_minus
// with a scalar chord coordinate c(s). The three-branch construction uses the
// logistic core c(s) = g(s/eps) for |s| <= theta and linear interpolation to
// the exact endpoint states at s = +/- 1/2 outside. All evaluators are
// closed-form and exact at sample points; chord_integral is the antiderivative
// with chord_integral(0) = 0, extended constantly/affinely beyond |s| = 1/2 so
// ghost rows of cell lattices can reuse it.
struct AnsatzShape {
  JumpSpec jump;
  double eps = 0.0;
  double theta = 0.25;   // interpolation threshold
  double rate = 0.0;     // |p| / 2, the logistic rate
  double delta = 0.0;    // 1 - g(theta/eps), the chord gap at the threshold
  double band = 0.25;    // 1/2 - theta, width of each outer branch

  double chord(double s) const;
  double chord_slope(double s) const;
  double chord_integral(double s) const;
  // Periodic part of the potential: u(s,t) = v_part(s) + (m . tau) * t.
  double v_part(double s) const;
};

AnsatzShape ansatz_shape(const JumpSpec& j, double eps, double theta = 0.25);

// Sampled transition field on a grid whose frame matches j.nu: the potential
// (recovered by exact line integration along s, valid since p is parallel to
// nu) and its exact gradient at the sample points.
struct Ansatz {
  ScalarField u;
  VectorField2 grad;
  AnsatzShape shape;
};

Ansatz build_ansatz(const JumpSpec& j, double eps, const Grid2D& grid, double theta = 0.25);

// 1-D cell energy of the transition profile: the energy density is
// t-independent, so r(eps) reduces to an integral over s in [-1/2, 1/2].
// Composite Gauss-Legendre quadrature per branch, carried in extended
// precision; quad_points is the total evaluation budget (>= 96).
double oned_energy(const JumpSpec& j, double eps, int quad_points = 2048, double theta = 0.25);

// The excess r(eps) - jump_cost in closed form. Every term carries the factor
// delta^2 = (1 - g(theta/eps))^2, so the value is accurate even when it sits
// far below the roundoff of the cost itself; quadrature cannot resolve that
// regime.
double oned_excess(const JumpSpec& j, double eps, double theta = 0.25);

// Seed line u(x, z0) for the parabolic route to zero-square fields, with the
// far-field slopes used for the x-boundary growth law.
struct HopfColeInput {
  std::vector<double> u0;
  double slope_lo = 0.0, slope_hi = 0.0;
};

// Substituting u = 2*eps*ln(phi) turns the zero-square condition
// dz u - (dx u)^2/2 - eps*dxx u = 0 into the linear heat flow
// phi_z = eps * phi_xx (z as time). The solver marches phi with
// Crank-Nicolson on an axis-aligned grid (t = z), Dirichlet x-boundaries
// following the affine growth law, and returns u. Throws if phi ever loses
// positivity (invalid initial data).
ScalarField hopf_cole_field(const HopfColeInput& data, double eps, const Grid2D& grid);

void save_profile_csv(const Profile1D& p, const std::string& path);
std::string profile_sidecar_json(const Profile1D& p);

}  // namespace smectic
