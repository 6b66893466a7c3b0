#pragma once

#include <array>
#include <string>
#include <vector>

#include "smectic/grid.hpp"

namespace smectic {

// A point (a, a^2/2) on the parabola well of the compression potential; the
// admissible far-field gradient on one side of a defect line.
struct PhaseState {
  double a = 0.0;
  double m1() const { return a; }
  double m2() const { return 0.5 * a * a; }
};

// Ordered pair of parabola states with the derived defect geometry:
// p = m_plus - m_minus, n = p/|p|, and the defect normal nu parallel to n
// with nu1 > 0. p1 = a_plus - a_minus never vanishes for distinct states, so
// n1 != 0 and the orientation is well defined. Degenerate (equal) states are
// representable but carry the flag; transition-building operations reject
// them.
struct JumpSpec {
  PhaseState minus, plus;
  double p1 = 0.0, p2 = 0.0, pnorm = 0.0;
  double n1 = 0.0, n2 = 0.0;
  double nu1 = 1.0, nu2 = 0.0;
  bool degenerate = true;
};

JumpSpec make_jump(double a_minus, double a_plus);

// Per-unit-length defect cost, evaluated two independent ways:
//  - divergence_form: (n1/2) * (p1*p2 - m1_minus*p1^2 - p1^3/3), the entropy
//    flux difference across the jump, evaluated in compensated double-double
//    arithmetic (the expression cancels catastrophically for small jumps);
//  - closed_form: |a_plus - a_minus|^3 / (12*sqrt(1 + (a_plus+a_minus)^2/4)).
// cost is the absolute value; the constructor of the result asserts the two
// routes agree to 1e-12 relative and throws on disagreement.
struct JumpCostForms {
  double divergence_form = 0.0;
  double closed_form = 0.0;
  double cost = 0.0;
  bool degenerate = false;
};

JumpCostForms jump_cost_forms(const JumpSpec& j);
double jump_cost(const JumpSpec& j);

// Tangential continuity of the traces: m_plus . nu_perp == m_minus . nu_perp
// (nu_perp = nu rotated +90 degrees), to tolerance. Holds automatically when
// nu is parallel to p.
bool check_jump_condition(const JumpSpec& j, double tol = 1e-12);

// Polyline defect with per-segment traces (a_minus, a_plus): vertices[k] to
// vertices[k+1] carries states[k]. Admissible when each segment normal is
// parallel to its p within 1e-9 radians.
struct DefectPath {
  std::vector<std::array<double, 2>> vertices;           // (x, z)
  std::vector<std::array<double, 2>> states;             // (a_minus, a_plus)
};

// Sum over segments of jump_cost times segment length. Throws
// std::invalid_argument naming the first inadmissible segment.
double limit_energy(const DefectPath& path);

std::string to_json(const DefectPath& path);
DefectPath defect_path_from_json(const std::string& text);

}  // namespace smectic
