#include "smectic/jump.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace smectic {

namespace {

// Error-free transformations (Dekker/Knuth): unevaluated double-double sums
// and products. Used only for the divergence-form cost, whose literal
// expression loses ~|a|/|p1| digits to cancellation for small jumps; the
// 1e-12 dual-formula agreement must survive |a_plus - a_minus| down to 1e-6.
struct dd {
  double hi = 0.0, lo = 0.0;
};

dd two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

dd two_prod(double a, double b) {
  const double p = a * b;
  return {p, std::fma(a, b, -p)};
}

dd dd_add(dd a, dd b) {
  dd s = two_sum(a.hi, b.hi);
  s.lo += a.lo + b.lo;
  const dd r = two_sum(s.hi, s.lo);
  return r;
}

dd dd_sub(dd a, dd b) { return dd_add(a, {-b.hi, -b.lo}); }

dd dd_mul(dd a, dd b) {
  dd p = two_prod(a.hi, b.hi);
  p.lo += a.hi * b.lo + a.lo * b.hi;
  return two_sum(p.hi, p.lo);
}

dd dd_scale(dd a, double c) {
  dd p = two_prod(a.hi, c);
  p.lo += a.lo * c;
  return two_sum(p.hi, p.lo);
}

}  // namespace

JumpSpec make_jump(double a_minus, double a_plus) {
  if (!std::isfinite(a_minus) || !std::isfinite(a_plus))
    throw std::invalid_argument("make_jump: states must be finite");
  JumpSpec j;
  j.minus = {a_minus};
  j.plus = {a_plus};
  j.p1 = a_plus - a_minus;
  j.p2 = j.plus.m2() - j.minus.m2();
  j.degenerate = (j.p1 == 0.0);
  if (j.degenerate) {
    j.pnorm = 0.0;
    j.n1 = j.nu1 = 1.0;
    j.n2 = j.nu2 = 0.0;
    return j;
  }
  j.pnorm = std::hypot(j.p1, j.p2);
  j.n1 = j.p1 / j.pnorm;
  j.n2 = j.p2 / j.pnorm;
  const double sgn = j.n1 > 0.0 ? 1.0 : -1.0;
  j.nu1 = sgn * j.n1;
  j.nu2 = sgn * j.n2;
  return j;
}

JumpCostForms jump_cost_forms(const JumpSpec& j) {
  JumpCostForms out;
  if (j.degenerate) {
    out.degenerate = true;
    return out;
  }
  // Divergence form, evaluated literally from p1, p2, m1_minus.
  const dd p1 = two_sum(j.plus.a, -j.minus.a);
  const dd p2 = dd_scale(dd_mul(two_sum(j.plus.a, j.minus.a), p1), 0.5);
  const dd p1sq = dd_mul(p1, p1);
  const dd term1 = dd_mul(p1, p2);
  const dd term2 = dd_scale(p1sq, j.minus.a);
  const dd term3 = dd_scale(dd_mul(p1sq, p1), 1.0 / 3.0);
  const dd expr = dd_sub(dd_sub(term1, term2), term3);
  out.divergence_form = 0.5 * j.n1 * (expr.hi + expr.lo);

  // Closed form.
  const double d = std::abs(j.p1);
  const double s = j.plus.a + j.minus.a;
  out.closed_form = d * d * d / (12.0 * std::sqrt(1.0 + 0.25 * s * s));

  out.cost = std::abs(out.divergence_form);
  const double scale = std::max(std::abs(out.closed_form), std::abs(out.divergence_form));
  if (std::abs(std::abs(out.divergence_form) - out.closed_form) > 1e-12 * scale) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "jump_cost: internal consistency failure (%.17g vs %.17g)",
                  out.divergence_form, out.closed_form);
    throw std::runtime_error(buf);
  }
  return out;
}

double jump_cost(const JumpSpec& j) { return jump_cost_forms(j).cost; }

bool check_jump_condition(const JumpSpec& j, double tol) {
  const double perp1 = -j.nu2, perp2 = j.nu1;
  const double lhs = j.plus.m1() * perp1 + j.plus.m2() * perp2;
  const double rhs = j.minus.m1() * perp1 + j.minus.m2() * perp2;
  const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
  return std::abs(lhs - rhs) <= tol * scale;
}

double limit_energy(const DefectPath& path) {
  if (path.vertices.size() != path.states.size() + 1)
    throw std::invalid_argument("limit_energy: need one more vertex than segments");
  double total = 0.0;
  for (std::size_t k = 0; k < path.states.size(); ++k) {
    const double dx = path.vertices[k + 1][0] - path.vertices[k][0];
    const double dz = path.vertices[k + 1][1] - path.vertices[k][1];
    const double len = std::hypot(dx, dz);
    if (!(len > 0.0))
      throw std::invalid_argument("limit_energy: zero-length segment " + std::to_string(k));
    const JumpSpec j = make_jump(path.states[k][0], path.states[k][1]);
    if (j.degenerate) continue;  // no jump, no cost
    // Segment normal (rotate the direction +90 degrees) must be parallel to
    // p: inadmissible orientations have no finite-energy transition.
    const double normal1 = -dz / len, normal2 = dx / len;
    const double cross = normal1 * j.n2 - normal2 * j.n1;
    if (std::abs(std::asin(std::min(1.0, std::abs(cross)))) > 1e-9)
      throw std::invalid_argument("limit_energy: inadmissible segment " + std::to_string(k));
    total += jump_cost(j) * len;
  }
  return total;
}

std::string to_json(const DefectPath& path) {
  nlohmann::json out;
  out["vertices"] = nlohmann::json::array();
  for (const auto& v : path.vertices) out["vertices"].push_back({v[0], v[1]});
  out["segments"] = nlohmann::json::array();
  for (const auto& s : path.states)
    out["segments"].push_back({{"a_minus", s[0]}, {"a_plus", s[1]}});
  return out.dump(2);
}

DefectPath defect_path_from_json(const std::string& text) {
  DefectPath path;
  const nlohmann::json in = nlohmann::json::parse(text);
  for (const auto& v : in.at("vertices"))
    path.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  for (const auto& s : in.at("segments"))
    path.states.push_back({s.at("a_minus").get<double>(), s.at("a_plus").get<double>()});
  return path;
}

}  // namespace smectic
