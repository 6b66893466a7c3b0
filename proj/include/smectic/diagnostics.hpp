#pragma once

#include <string>
#include <vector>

#include "smectic/energy.hpp"
#include "smectic/grid.hpp"
#include "smectic/jump.hpp"

namespace smectic {

// L2 norm of the compression strain C = dz u - (dx u)^2/2, computed with the
// energy quadrature, so compression_defect(u)^2 <= 2*eps*energy holds by
// construction (the square equals 2*eps times the compression term).
double compression_defect(const ScalarField& u);

// Conservation-law bookkeeping for v = dx u. With f(v) = -v^2/2 the field v
// satisfies D_z v + D_x f(v) = D_x C discretely up to round-off (mixed
// discrete partials commute). The production field pairs f with F(v) = v^3/3.
struct EntropyProduction {
  ScalarField field;        // D_z f(v) + D_x F(v)
  double l1_mass = 0.0;     // integral of |field|
  double rewrite_residual = 0.0;  // max |D_z v + D_x f(v) - D_x C|
};
EntropyProduction entropy_production(const ScalarField& u);

// Smallest radius rho such that grid rows with |s| <= rho carry at least
// `fraction` of the L1 mass of the field. Rows are banded by the grid's
// s-coordinate, so on cell/square grids the band is centered on the defect
// line s = 0.
double concentration_radius(const ScalarField& production, double fraction = 0.95);

// m = (dx u, -dz u); divergence-free up to the discrete commutator.
VectorField2 rotated_field(const ScalarField& u);
// L2 norm of D_z m1 + D_x m2.
double div_check(const VectorField2& m);

// Quadrature Lp norm; throws std::invalid_argument for p < 1.
double lp_norm(const ScalarField& f, double p);

// Least-squares line fit with Pearson correlation. Throws
// std::invalid_argument on mismatched lengths or fewer than 3 points.
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double correlation = 0.0;
};
RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// Indicative spectral H^{-1}-type seminorm: L2 in s, Fourier-weighted in the
// periodic t direction (weight 1/(1+mu_k^2) on mode k). Only defined for
// periodic-t grids with power-of-two n_t; throws std::invalid_argument
// otherwise. Reported for orientation only, never as a pass/fail gate.
double hminus1_indicative(const ScalarField& f);

// One transition-layer measurement at a fixed eps.
struct SequenceRecord {
  double eps = 0.0;
  EnergyBreakdown breakdown;
  double defect = 0.0;            // compression_defect
  double entropy_mass = 0.0;      // L1 mass of the production field
  double entropy_radius = 0.0;    // 95% concentration radius
  double rewrite_residual = 0.0;
  double div_residual = 0.0;      // div_check of the rotated field
  double oned_rate = 0.0;         // quadrature transition-line energy
  double oned_excess = 0.0;       // closed-form excess over the jump cost
  std::vector<double> lp;         // |dx u|_p per configured p
};

struct SweepConfig {
  JumpSpec jump;
  std::vector<double> eps_list;
  std::vector<double> p_list{2.0, 4.0, 8.0};
  double theta = 0.25;
  int samples_per_layer = 8;  // resolution rule: h_s <= eps / samples_per_layer
  int max_n_s = 4097;
  int n_t = 9;
};

struct SequenceReport {
  double a_minus = 0.0, a_plus = 0.0;
  double theta = 0.25;
  double limit_cost = 0.0;        // jump cost of the pair
  std::vector<double> p_list;
  std::vector<SequenceRecord> records;  // sorted by decreasing eps
  RateFit excess_fit;             // log(oned_excess) vs 1/eps
  RateFit defect_fit;             // log(defect) vs log(eps)
};

// Builds the transition ansatz on a non-periodic unit square per eps (the
// potential winds in t, so wrap-around stencils are not applicable) and
// collects all diagnostics. Members run concurrently when threads are
// enabled; results are deterministic either way.
SequenceReport run_sweep(const SweepConfig& cfg);

void save_sequence_csv(const SequenceReport& rep, const std::string& path);
std::string sequence_json(const SequenceReport& rep);

}  // namespace smectic
