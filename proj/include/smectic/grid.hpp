#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace smectic {

// Thread count for grid loops. Default 1 (serial); overridable via the
// SMECTIC_THREADS environment variable or set_thread_count(). Results are
// bit-identical across thread counts: work is split into fixed-size chunks
// determined only by the problem size, and reductions combine per-chunk
// partial sums in a fixed order.
int thread_count();
void set_thread_count(int n);

// Runs fn(begin, end) over disjoint chunks of [0, n). Chunk boundaries depend
// only on n, never on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// Deterministic reduction: Kahan-compensated sum per fixed 4096-element chunk,
// chunk partials combined in index order.
double chunked_sum(std::size_t n, const std::function<double(std::size_t)>& term);

// Rectangular sampling lattice in a rotated frame. Sample (i, j) sits at
// (s, t) = (s0 + i*h_s, t0 + j*h_t) and at the physical point
// (x, z) = s*nu + t*tau. nu and tau are orthonormal; tau is nu rotated +90
// degrees. periodic_t marks period n_t*h_t in the tau direction.
struct Grid2D {
  int n_s = 0, n_t = 0;
  double h_s = 0.0, h_t = 0.0;
  double nu1 = 1.0, nu2 = 0.0;
  double tau1 = 0.0, tau2 = 1.0;
  double s0 = 0.0, t0 = 0.0;
  bool periodic_t = false;

  // Axis-aligned grid: s runs along x, t along z.
  static Grid2D axis_aligned(int nx, int nz, double x0, double x1, double z0, double z1,
                             bool periodic_z = false);
  // Unit cell [-1/2,1/2]^2 in the (nu, tau) frame, periodic in t.
  static Grid2D cell(int n_s, int n_t, double nu1, double nu2);
  // Same square, non-periodic in t. Use for fields that are not t-periodic
  // (the transition ansatz winds linearly in t unless its frame is
  // axis-aligned, so wrap-around stencils would straddle a jump).
  static Grid2D square(int n_s, int n_t, double nu1, double nu2);

  std::size_t size() const { return std::size_t(n_s) * std::size_t(n_t); }
  std::size_t idx(int i, int j) const { return std::size_t(i) * std::size_t(n_t) + std::size_t(j); }
  double s(int i) const { return s0 + i * h_s; }
  double t(int j) const { return t0 + j * h_t; }
  double x(int i, int j) const { return s(i) * nu1 + t(j) * tau1; }
  double z(int i, int j) const { return s(i) * nu2 + t(j) * tau2; }

  // Throws std::invalid_argument on non-orthonormal frame, non-positive
  // spacing, or empty dimensions.
  void validate() const;
};

struct ScalarField {
  Grid2D grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(const Grid2D& g, double fill = 0.0);
  double& operator()(int i, int j) { return v[grid.idx(i, j)]; }
  double operator()(int i, int j) const { return v[grid.idx(i, j)]; }
};

struct VectorField2 {
  Grid2D grid;
  std::vector<double> c1, c2;

  VectorField2() = default;
  explicit VectorField2(const Grid2D& g);
};

// Finite-difference passes. Second-order central stencils in the interior;
// second-order one-sided stencils at non-periodic edges; wrap-around stencils
// in the periodic t direction. First derivatives need >= 3 samples in the
// differentiated direction, plain second derivatives >= 4 when one-sided
// edge stencils are required.
ScalarField deriv_s(const ScalarField& f);
ScalarField deriv_t(const ScalarField& f);
ScalarField deriv_ss(const ScalarField& f);
ScalarField deriv_tt(const ScalarField& f);
ScalarField deriv_st(const ScalarField& f);

// Physical-frame derivatives via the chain rule on the rotated lattice:
// d/dx = nu1 d/ds + tau1 d/dt, d/dz = nu2 d/ds + tau2 d/dt, and
// d2/dx2 = nu1^2 d2/ds2 + 2 nu1 tau1 d2/dsdt + tau1^2 d2/dt2.
ScalarField deriv_x(const ScalarField& f);
ScalarField deriv_z(const ScalarField& f);
ScalarField deriv_xx(const ScalarField& f);

// Trapezoidal rule in non-periodic directions, rectangle rule in periodic
// ones; fixed-order deterministic summation.
double integrate(const ScalarField& f);
// The weight lattice used by integrate (product of the 1-D rules), so other
// modules can share the exact same quadrature.
ScalarField quadrature_weights(const Grid2D& g);

// Text snapshot: header "# n_s n_t h_s h_t nu1 nu2 periodic_t" then row-major
// values, %.17g. The reader recenters the lattice on the origin.
void save_field(const ScalarField& f, const std::string& path);
ScalarField load_field(const std::string& path);

}  // namespace smectic
