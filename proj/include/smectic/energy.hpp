#pragma once

#include <string>

#include "smectic/grid.hpp"

namespace smectic {

// The functional under study, for a displacement u(x, z):
//   E_eps(u) = 1/2 * integral of (1/eps) * C^2 + eps * B^2,
// with compression strain C = dz u - (dx u)^2 / 2 and bending B = dxx u.
// It also splits as a perfect square plus a flux term:
//   E_eps(u) = 1/2 * integral of (1/eps) * (C - eps*B)^2 + integral of div Sigma(grad u),
// where Sigma(m) = (m1*m2 - m1^3/6, -m1^2/2). Pointwise, for the same
// discrete derivatives, C^2/(2eps) + eps*B^2/2 - (C-eps*B)^2/(2eps) = C*B
// exactly, so the only gap between the two accountings is the O(h^2)
// difference between the discrete div Sigma and the product C*B.
struct EnergyBreakdown {
  double compression = 0.0;
  double bending = 0.0;
  double total = 0.0;
  double bps_square = 0.0;
  double bps_flux = 0.0;
  double epsilon = 0.0;
  double residual = 0.0;  // total - (bps_square + bps_flux)
};

EnergyBreakdown energy_eps(const ScalarField& u, double eps);

// (dx u, dz u) via the core stencils.
VectorField2 gradient_xz(const ScalarField& u);

// Componentwise Sigma(m) = (m1*m2 - m1^3/6, -m1^2/2). Pure algebra.
VectorField2 sigma(const VectorField2& m);

// Discrete divergence of Sigma(grad u), plus the smooth-calculus product form
// B*C it converges to at order 2.
struct DivSigma {
  ScalarField divergence;
  ScalarField product;
};
DivSigma div_sigma(const ScalarField& u);

// Contour integral of Sigma(grad u) . outward normal over the grid boundary;
// cross-check for the volume route on rectangular supports. Periodic-t side
// faces cancel and are skipped.
double bps_flux_boundary(const ScalarField& u);

// Flat JSON object with keys compression, bending, total, bps_square,
// bps_flux, epsilon, residual.
std::string to_json(const EnergyBreakdown& b);

}  // namespace smectic
