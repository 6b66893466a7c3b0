#include "smectic/profile.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace smectic {

namespace {

const long double kLn2 = 0.693147180559945309417232121458L;

long double softplusl(long double x) {
  // log(1 + e^x), stable on both tails.
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

long double sigmoidl(long double x) {
  if (x >= 0) return 1.0L / (1.0L + std::exp(-x));
  const long double e = std::exp(x);
  return e / (1.0L + e);
}

void require_transition(const JumpSpec& j, const char* who) {
  if (j.degenerate)
    throw std::invalid_argument(std::string(who) + ": degenerate spec has no transition");
}

// 16-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; mirror for
// the negative nodes).
const long double kGaussX[8] = {
    0.0950125098376374401853193L, 0.2816035507792589132304605L,
    0.4580167776572273863424194L, 0.6178762444026437484466718L,
    0.7554044083550030338951012L, 0.8656312023878317438804679L,
    0.9445750230732325760779884L, 0.9894009349916499325961542L};
const long double kGaussW[8] = {
    0.1894506104550684962853967L, 0.1826034150449235888667637L,
    0.1691565193950025381893121L, 0.1495959888165767320815017L,
    0.1246289712555338720524763L, 0.0951585116824927848099251L,
    0.0622535239386478928628438L, 0.0271524594117540948517806L};

}  // namespace

double well_potential(double g, const JumpSpec& j) {
  require_transition(j, "well_potential");
  // Numerator g*p2 + m2_minus - (g*p1 + m1_minus)^2 / 2 in extended precision:
  // it vanishes at g = 0 and g = 1 only through cancellation.
  const long double gl = g;
  const long double m1 = (long double)j.minus.a;
  const long double m2 = 0.5L * m1 * m1;
  const long double p1 = (long double)j.plus.a - m1;
  const long double p2 = 0.5L * ((long double)j.plus.a + m1) * p1;
  const long double chord1 = gl * p1 + m1;
  const long double num = gl * p2 + m2 - 0.5L * chord1 * chord1;
  const double denom = j.p1 * j.n1;  // = p1^2 / |p| > 0
  return (double)(std::fabs(num) / (long double)denom);
}

double logistic_profile(const JumpSpec& j, double t) {
  require_transition(j, "logistic_profile");
  return (double)sigmoidl(0.5L * (long double)j.pnorm * (long double)t);
}

Profile1D solve_profile(const JumpSpec& j, double T, double step) {
  require_transition(j, "solve_profile");
  if (!(T > 0.0) || !(step > 0.0) || step > T)
    throw std::invalid_argument("solve_profile: need 0 < step <= T");
  const int n = (int)std::llround(T / step);
  const double h = T / n;

  Profile1D p;
  p.jump = j;
  p.ode_step = h;
  p.t_grid.resize(2 * n + 1);
  p.g.resize(2 * n + 1);
  for (int k = -n; k <= n; ++k) p.t_grid[k + n] = k * h;
  p.g[n] = 0.5;

  auto rhs = [&](double g) { return well_potential(g, j); };
  auto rk4 = [&](double g, double dt) {
    const double k1 = rhs(g);
    const double k2 = rhs(g + 0.5 * dt * k1);
    const double k3 = rhs(g + 0.5 * dt * k2);
    const double k4 = rhs(g + dt * k3);
    return g + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  for (int k = 0; k < n; ++k) p.g[n + k + 1] = rk4(p.g[n + k], h);
  for (int k = 0; k > -n; --k) p.g[n + k - 1] = rk4(p.g[n + k], -h);

  for (double g : p.g)
    if (g < -1e-9 || g > 1.0 + 1e-9)
      throw std::runtime_error("solve_profile: solution left [0,1]; refine the step");

  // Joint log-linear fit of the two tails over |t| in [0.5T, 0.9T]:
  // log(1-g) ~ log(c1) - c2*t on the right, log(g) ~ log(c1) + c2*t on the
  // left, regressed as log(value) vs |t|.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int k = 1; k <= n; ++k) {
    const double t = p.t_grid[n + k];
    if (t < 0.5 * T || t > 0.9 * T) continue;
    const double right = 1.0 - p.g[n + k];
    const double left = p.g[n - k];
    for (double val : {right, left}) {
      if (!(val > 0.0)) continue;
      const double y = std::log(val);
      sx += t; sy += y; sxx += t * t; sxy += t * y;
      ++cnt;
    }
  }
  if (cnt >= 3) {
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    const double inter = (sy - slope * sx) / cnt;
    p.tail_c2 = -slope;
    p.tail_c1 = std::exp(inter);
  }
  return p;
}

AnsatzShape ansatz_shape(const JumpSpec& j, double eps, double theta) {
  require_transition(j, "ansatz_shape");
  if (!(eps > 0.0)) throw std::invalid_argument("ansatz_shape: eps must be positive");
  if (!(theta > 0.0) || !(theta < 0.5))
    throw std::invalid_argument("ansatz_shape: threshold must lie in (0, 1/2)");
  AnsatzShape a;
  a.jump = j;
  a.eps = eps;
  a.theta = theta;
  a.rate = 0.5 * j.pnorm;
  a.delta = (double)sigmoidl(-(long double)a.rate * theta / eps);
  a.band = 0.5 - theta;
  return a;
}

double AnsatzShape::chord(double s) const {
  if (s >= 0.5) return 1.0;
  if (s <= -0.5) return 0.0;
  if (s > theta) return 1.0 - delta * (0.5 - s) / band;
  if (s < -theta) return delta * (s + 0.5) / band;
  return (double)sigmoidl((long double)rate * s / eps);
}

double AnsatzShape::chord_slope(double s) const {
  if (s >= 0.5 || s <= -0.5) return 0.0;
  if (s > theta || s < -theta) return delta / band;
  const double g = chord(s);
  return rate / eps * g * (1.0 - g);
}

double AnsatzShape::chord_integral(double s) const {
  // Branchwise antiderivative of chord, continuous, zero at s = 0.
  const long double r = rate, e = eps, d = delta, b = band, th = theta;
  auto mid = [&](long double x) { return (e / r) * (softplusl(r * x / e) - kLn2); };
  auto right_tail = [&](long double x) {
    // integral over [theta, x] of 1 - d*(1/2 - sigma)/b
    return (x - th) - (d / b) * ((0.5L * x - 0.5L * x * x) - (0.5L * th - 0.5L * th * th));
  };
  auto left_tail = [&](long double x) {
    // integral over [x, -theta] of d*(sigma + 1/2)/b
    return (d / b) * ((0.5L * th * th - 0.5L * th) - (0.5L * x * x + 0.5L * x));
  };
  if (s >= 0.5) return (double)(mid(th) + right_tail(0.5L) + ((long double)s - 0.5L));
  if (s > theta) return (double)(mid(th) + right_tail(s));
  if (s >= -theta) return (double)mid(s);
  if (s > -0.5) return (double)(mid(-th) - left_tail(s));
  return (double)(mid(-th) - left_tail(-0.5L));
}

double AnsatzShape::v_part(double s) const {
  const double m_dot_nu = jump.minus.m1() * jump.nu1 + jump.minus.m2() * jump.nu2;
  const double p_dot_nu = jump.p1 * jump.nu1 + jump.p2 * jump.nu2;
  return s * m_dot_nu + p_dot_nu * chord_integral(s);
}

Ansatz build_ansatz(const JumpSpec& j, double eps, const Grid2D& grid, double theta) {
  grid.validate();
  if (std::abs(grid.nu1 - j.nu1) > 1e-12 || std::abs(grid.nu2 - j.nu2) > 1e-12)
    throw std::invalid_argument("build_ansatz: grid frame does not match the jump normal");
  const AnsatzShape shape = ansatz_shape(j, eps, theta);
  Ansatz out{ScalarField(grid), VectorField2(grid), shape};
  const double c_tau = j.minus.m1() * grid.tau1 + j.minus.m2() * grid.tau2;
  for (int i = 0; i < grid.n_s; ++i) {
    const double s = grid.s(i);
    const double c = shape.chord(s);
    const double vp = shape.v_part(s);
    const double m1 = c * j.p1 + j.minus.m1();
    const double m2 = c * j.p2 + j.minus.m2();
    for (int jj = 0; jj < grid.n_t; ++jj) {
      const std::size_t k = grid.idx(i, jj);
      out.u.v[k] = vp + c_tau * grid.t(jj);
      out.grad.c1[k] = m1;
      out.grad.c2[k] = m2;
    }
  }
  return out;
}

double oned_energy(const JumpSpec& j, double eps, int quad_points, double theta) {
  const AnsatzShape a = ansatz_shape(j, eps, theta);
  if (quad_points < 96) throw std::invalid_argument("oned_energy: quad_points too small");
  // Energy density along the chord: with C = (p1^2/2) c(1-c) and
  // B = c'(s) p1 nu1, e(s) = (Kq/(2 eps)) c^2(1-c)^2 + (eps Lq/2) c'^2.
  const long double p1 = (long double)j.plus.a - (long double)j.minus.a;
  const long double Kq = 0.25L * p1 * p1 * p1 * p1;
  const long double pn = (long double)j.pnorm;
  const long double Lq = p1 * p1 * p1 * p1 / (pn * pn);
  const long double r = a.rate, e = eps, d = a.delta, b = a.band, th = theta;

  auto chordl = [&](long double s) -> long double {
    if (s > th) return 1.0L - d * (0.5L - s) / b;
    if (s < -th) return d * (s + 0.5L) / b;
    return sigmoidl(r * s / e);
  };
  auto slopel = [&](long double s) -> long double {
    if (s > th || s < -th) return d / b;
    const long double g = chordl(s);
    return (r / e) * g * (1.0L - g);
  };
  auto density = [&](long double s) -> long double {
    const long double c = chordl(s);
    const long double cc = c * (1.0L - c);
    const long double cp = slopel(s);
    return (Kq / (2.0L * e)) * cc * cc + (e * Lq / 2.0L) * cp * cp;
  };

  // Composite 16-point panels: two thirds of the budget on the core branch.
  const int panels_mid = std::max(8, (2 * quad_points / 3) / 16);
  const int panels_out = std::max(2, (quad_points / 6) / 16);
  auto integrate_branch = [&](long double lo, long double hi, int panels) -> long double {
    long double sum = 0.0L, comp = 0.0L;
    const long double hw = (hi - lo) / (2.0L * panels);
    for (int pnl = 0; pnl < panels; ++pnl) {
      const long double mid = lo + (2 * pnl + 1) * hw;
      for (int q = 0; q < 8; ++q) {
        for (int sgn : {-1, 1}) {
          const long double val = kGaussW[q] * hw * density(mid + sgn * kGaussX[q] * hw);
          const long double y = val - comp;
          const long double t = sum + y;
          comp = (t - sum) - y;
          sum = t;
        }
      }
    }
    return sum;
  };
  const long double total = integrate_branch(-0.5L, -th, panels_out) +
                            integrate_branch(-th, th, panels_mid) +
                            integrate_branch(th, 0.5L, panels_out);
  return (double)total;
}

double oned_excess(const JumpSpec& j, double eps, double theta) {
  const AnsatzShape a = ansatz_shape(j, eps, theta);
  // Exact branchwise integration of the chord density. Relative to the
  // full-line transition (whose energy is the jump cost), the core branch
  // loses the two tails beyond theta/eps and the outer branches add a linear
  // ramp; every resulting term carries delta^2:
  //   excess = delta^2 * [ (Kq/eps) b (1/3 - delta/2 + delta^2/5)   (ramp strain)
  //                      + eps Lq / b                               (ramp bending)
  //                      - (Kq/r) (1 - 2 delta/3) ]                 (lost tails)
  const long double p1 = (long double)j.plus.a - (long double)j.minus.a;
  const long double Kq = 0.25L * p1 * p1 * p1 * p1;
  const long double pn = (long double)j.pnorm;
  const long double Lq = p1 * p1 * p1 * p1 / (pn * pn);
  const long double r = a.rate, e = eps, b = a.band;
  const long double d = sigmoidl(-(long double)a.rate * theta / eps);
  const long double bracket = (Kq / e) * b * (1.0L / 3.0L - d / 2.0L + d * d / 5.0L) +
                              e * Lq / b - (Kq / r) * (1.0L - 2.0L * d / 3.0L);
  return (double)(d * d * bracket);
}

ScalarField hopf_cole_field(const HopfColeInput& data, double eps, const Grid2D& grid) {
  grid.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("hopf_cole_field: eps must be positive");
  if (grid.nu1 != 1.0 || grid.nu2 != 0.0 || grid.periodic_t)
    throw std::invalid_argument("hopf_cole_field: need an axis-aligned non-periodic grid");
  const int nx = grid.n_s, nz = grid.n_t;
  if ((int)data.u0.size() != nx)
    throw std::invalid_argument("hopf_cole_field: seed line does not match the grid");

  // Gauge the seed so exp() stays bounded at start; undone after the log.
  double gauge = data.u0[0];
  for (double v : data.u0) gauge = std::max(gauge, v);

  std::vector<double> phi(nx);
  for (int i = 0; i < nx; ++i) phi[i] = std::exp((data.u0[i] - gauge) / (2.0 * eps));

  ScalarField u(grid);
  auto store = [&](int j, const std::vector<double>& ph) {
    for (int i = 0; i < nx; ++i) {
      if (!(ph[i] > 0.0))
        throw std::runtime_error("hopf_cole_field: phi lost positivity (invalid initial data)");
      u(i, j) = 2.0 * eps * std::log(ph[i]) + gauge;
    }
  };
  store(0, phi);

  // Crank-Nicolson in z: (I - mu/2 D2) phi_next = (I + mu/2 D2) phi with
  // mu = eps*dz/dx^2 and affine-compatible Dirichlet ends
  // phi(edge, z) = phi(edge, z0) * exp(a_edge^2 (z - z0) / (4 eps)).
  const double dz = grid.h_t, dx = grid.h_s;
  const double mu = eps * dz / (dx * dx);
  const double glo = data.slope_lo * data.slope_lo / (4.0 * eps);
  const double ghi = data.slope_hi * data.slope_hi / (4.0 * eps);
  std::vector<double> rhsv(nx), cp(nx), dpthomas(nx), next(nx);
  for (int j = 1; j < nz; ++j) {
    const double zrel = j * dz;
    next[0] = std::exp((data.u0[0] - gauge) / (2.0 * eps) + glo * zrel);
    next[nx - 1] = std::exp((data.u0[nx - 1] - gauge) / (2.0 * eps) + ghi * zrel);
    for (int i = 1; i < nx - 1; ++i)
      rhsv[i] = phi[i] + 0.5 * mu * (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]);
    rhsv[1] += 0.5 * mu * next[0];
    rhsv[nx - 2] += 0.5 * mu * next[nx - 1];
    // Thomas solve of the constant tridiagonal (-mu/2, 1+mu, -mu/2).
    const double diag = 1.0 + mu, off = -0.5 * mu;
    cp[1] = off / diag;
    dpthomas[1] = rhsv[1] / diag;
    for (int i = 2; i < nx - 1; ++i) {
      const double m = diag - off * cp[i - 1];
      cp[i] = off / m;
      dpthomas[i] = (rhsv[i] - off * dpthomas[i - 1]) / m;
    }
    next[nx - 2] = dpthomas[nx - 2];
    for (int i = nx - 3; i >= 1; --i) next[i] = dpthomas[i] - cp[i] * next[i + 1];
    phi = next;
    store(j, phi);
  }
  return u;
}

void save_profile_csv(const Profile1D& p, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("save_profile_csv: cannot open " + path);
  std::fprintf(fp, "t,g,W\n");
  for (std::size_t k = 0; k < p.g.size(); ++k)
    std::fprintf(fp, "%.17g,%.17g,%.17g\n", p.t_grid[k], p.g[k], well_potential(p.g[k], p.jump));
  std::fclose(fp);
}

std::string profile_sidecar_json(const Profile1D& p) {
  nlohmann::json out;
  out["a_minus"] = p.jump.minus.a;
  out["a_plus"] = p.jump.plus.a;
  out["ode_step"] = p.ode_step;
  out["tail_c1"] = p.tail_c1;
  out["tail_c2"] = p.tail_c2;
  out["logistic_rate"] = 0.5 * p.jump.pnorm;
  return out.dump(2);
}

}  // namespace smectic
