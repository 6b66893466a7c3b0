#include "smectic/energy.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace smectic {

namespace {

void check_finite(const ScalarField& u) {
  for (double x : u.v)
    if (!std::isfinite(x)) throw std::invalid_argument("field contains non-finite values");
}

}  // namespace

VectorField2 gradient_xz(const ScalarField& u) {
  VectorField2 m(u.grid);
  m.c1 = deriv_x(u).v;
  m.c2 = deriv_z(u).v;
  return m;
}

VectorField2 sigma(const VectorField2& m) {
  if (m.c1.size() != m.grid.size() || m.c2.size() != m.grid.size())
    throw std::invalid_argument("sigma: shape mismatch");
  VectorField2 s(m.grid);
  parallel_for(m.grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const double m1 = m.c1[k], m2 = m.c2[k];
      s.c1[k] = m1 * m2 - m1 * m1 * m1 / 6.0;
      s.c2[k] = -0.5 * m1 * m1;
    }
  });
  return s;
}

DivSigma div_sigma(const ScalarField& u) {
  check_finite(u);
  const VectorField2 m = gradient_xz(u);
  const VectorField2 s = sigma(m);
  ScalarField s1(u.grid), s2(u.grid);
  s1.v = s.c1;
  s2.v = s.c2;
  DivSigma out{ScalarField(u.grid), ScalarField(u.grid)};
  const ScalarField d1 = deriv_x(s1);
  const ScalarField d2 = deriv_z(s2);
  const ScalarField uxx = deriv_xx(u);
  parallel_for(u.grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      out.divergence.v[k] = d1.v[k] + d2.v[k];
      const double strain = m.c2[k] - 0.5 * m.c1[k] * m.c1[k];
      out.product.v[k] = uxx.v[k] * strain;
    }
  });
  return out;
}

EnergyBreakdown energy_eps(const ScalarField& u, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("energy_eps: eps must be positive");
  check_finite(u);
  const ScalarField w = quadrature_weights(u.grid);
  const ScalarField ux = deriv_x(u);
  const ScalarField uz = deriv_z(u);
  const ScalarField uxx = deriv_xx(u);

  EnergyBreakdown b;
  b.epsilon = eps;
  const std::size_t n = u.grid.size();
  b.compression = chunked_sum(n, [&](std::size_t k) {
    const double c = uz.v[k] - 0.5 * ux.v[k] * ux.v[k];
    return w.v[k] * 0.5 / eps * c * c;
  });
  b.bending = chunked_sum(n, [&](std::size_t k) {
    return w.v[k] * 0.5 * eps * uxx.v[k] * uxx.v[k];
  });
  b.total = b.compression + b.bending;
  b.bps_square = chunked_sum(n, [&](std::size_t k) {
    const double c = uz.v[k] - 0.5 * ux.v[k] * ux.v[k];
    const double r = c - eps * uxx.v[k];
    return w.v[k] * 0.5 / eps * r * r;
  });
  const DivSigma ds = div_sigma(u);
  b.bps_flux = chunked_sum(n, [&](std::size_t k) { return w.v[k] * ds.divergence.v[k]; });
  b.residual = b.total - (b.bps_square + b.bps_flux);
  return b;
}

double bps_flux_boundary(const ScalarField& u) {
  const Grid2D& g = u.grid;
  const VectorField2 s = sigma(gradient_xz(u));
  // 1-D quadrature weights along each face.
  auto line_weight_t = [&](int j) {
    if (g.periodic_t) return g.h_t;
    return (j == 0 || j == g.n_t - 1) ? 0.5 * g.h_t : g.h_t;
  };
  auto line_weight_s = [&](int i) {
    return (i == 0 || i == g.n_s - 1) ? 0.5 * g.h_s : g.h_s;
  };
  double flux = 0.0;
  // Faces s = s_min (outward normal -nu) and s = s_max (outward normal +nu).
  for (int j = 0; j < g.n_t; ++j) {
    const std::size_t klo = g.idx(0, j), khi = g.idx(g.n_s - 1, j);
    const double lo = s.c1[klo] * g.nu1 + s.c2[klo] * g.nu2;
    const double hi = s.c1[khi] * g.nu1 + s.c2[khi] * g.nu2;
    flux += line_weight_t(j) * (hi - lo);
  }
  // Faces t = t_min / t_max unless they are identified by periodicity.
  if (!g.periodic_t) {
    for (int i = 0; i < g.n_s; ++i) {
      const std::size_t klo = g.idx(i, 0), khi = g.idx(i, g.n_t - 1);
      const double lo = s.c1[klo] * g.tau1 + s.c2[klo] * g.tau2;
      const double hi = s.c1[khi] * g.tau1 + s.c2[khi] * g.tau2;
      flux += line_weight_s(i) * (hi - lo);
    }
  }
  return flux;
}

std::string to_json(const EnergyBreakdown& b) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "{\"compression\": %.17g, \"bending\": %.17g, \"total\": %.17g, "
                "\"bps_square\": %.17g, \"bps_flux\": %.17g, \"epsilon\": %.17g, "
                "\"residual\": %.17g}",
                b.compression, b.bending, b.total, b.bps_square, b.bps_flux, b.epsilon,
                b.residual);
  return std::string(buf);
}

}  // namespace smectic
