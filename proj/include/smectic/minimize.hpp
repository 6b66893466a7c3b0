#pragma once

#include <vector>

#include "smectic/energy.hpp"
#include "smectic/grid.hpp"
#include "smectic/jump.hpp"

namespace smectic {

// Discrete cell problem on the unit square in the (nu, tau) frame: gradient
// boundary data m_minus / m_plus on the s = -/+ 1/2 faces, period 1 in t.
//
// Representation: the tangential trace m.tau is shared by both states (the
// jump condition), so the potential winds linearly in t. The solver stores
// the periodic part v with u = v + (m_minus . tau) * t and carries the
// winding analytically through every stencil. The working lattice has
// n_s + 4 rows: two constraint rows beyond each face, pinned to the affine
// potentials of m_minus / m_plus (constants fixed once by the transition
// profile's potential, so every initializer minimizes the same constrained
// functional); all stencils are then central and the energy quadrature is
// trapezoid-in-s over the physical rows times rectangle-in-t.
struct CellProblem {
  JumpSpec jump;
  double eps = 0.05;
  int n_s = 129, n_t = 128;
  double theta = 0.25;        // ansatz interpolation threshold
  int max_iters = 2000;
  double grad_tol = 1e-8;     // weighted L2 norm of the functional derivative
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int lbfgs_memory = 16;
  enum class Init { ansatz, linear, random };
  Init init = Init::ansatz;
  unsigned long long seed = 1;
  int fd_check_every = 0;     // > 0: verify the gradient against central
                              // differences every k accepted iterations
  bool use_preconditioner = true;  // FFT-in-t + banded-in-s inverse of a
                                   // constant-coefficient surrogate Hessian;
                                   // requires power-of-two n_t, otherwise the
                                   // solver falls back to scaled identity
  int verbosity = 0;

  int rows() const { return n_s + 4; }          // physical rows plus 4 pinned
  std::size_t dofs() const { return std::size_t(rows()) * std::size_t(n_t); }
  Grid2D physical_grid() const;                 // the n_s x n_t periodic cell
};

struct MinimizeResult {
  ScalarField u_star;          // periodic part v on the physical grid
  double c_tau = 0.0;          // winding: full potential is v + c_tau * t
  EnergyBreakdown breakdown;   // cell-functional accounting of the minimizer
  int iterations = 0;
  double final_gradient_norm = 0.0;
  bool converged = false;
  double initial_energy = 0.0;
  double competitor_energy = 0.0;  // discrete energy of the transition-profile
                                   // initializer on this same lattice
  std::vector<double> energy_history;  // accepted iterates, non-increasing
};

MinimizeResult minimize_energy(const CellProblem& cp);

// Pieces exposed for testing. v vectors use the extended lattice layout
// (rows() x n_t, row-major); constraint rows hold pinned values.
std::vector<double> cell_initial(const CellProblem& cp);
double cell_energy(const CellProblem& cp, const std::vector<double>& v);
// Exact adjoint of the discretized energy; zero on constraint rows. Throws if
// v violates the pinned rows beyond 1e-12.
std::vector<double> cell_gradient(const CellProblem& cp, const std::vector<double>& v);
EnergyBreakdown cell_breakdown(const CellProblem& cp, const std::vector<double>& v);
double cell_gradient_norm(const CellProblem& cp, const std::vector<double>& g);

// Reconstructs the full potential u = v + c_tau * t on a non-periodic copy of
// the cell grid, safe for the plain stencil diagnostics.
ScalarField unwind_cell_field(const ScalarField& v, double c_tau);

}  // namespace smectic
