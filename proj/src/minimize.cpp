#include "smectic/minimize.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

#include "smectic/detail/fft.hpp"
#include "smectic/profile.hpp"

namespace smectic {

namespace {

using cplx = std::complex<double>;
using vecd = std::vector<double>;

// ---------------------------------------------------------------------------
// Extended-lattice workspace. Layout: rows r = 0..R-1 with s(r) = -1/2 +
// (r-2)*h_s; rows {0, 1, R-2, R-1} are pinned, physical rows are [2, R-3].
// All stencils below are central; s-derivatives are only consumed on rows
// where their inputs exist, t-derivatives wrap.
struct Workspace {
  const CellProblem& cp;
  int R, nt;
  std::size_t N;
  double hs, ht, c_tau;
  double nu1, nu2, tau1, tau2;
  AnsatzShape shape;
  vecd pin_row;   // pinned v value per row (t-independent); NaN on free rows
  vecd weight;    // quadrature weight per node; 0 off the physical rows
  // scratch buffers
  vecd dsv, dtv, dssv, dttv, dstv, ux, uz, uxx, rC, rB, mrC, t1, t2;

  explicit Workspace(const CellProblem& p)
      : cp(p), R(p.rows()), nt(p.n_t), N(p.dofs()) {
    if (p.jump.degenerate) throw std::invalid_argument("cell problem: degenerate jump");
    if (p.n_s < 3 || p.n_t < 4) throw std::invalid_argument("cell problem: grid too small");
    if (!(p.eps > 0.0)) throw std::invalid_argument("cell problem: eps must be positive");
    hs = 1.0 / (p.n_s - 1);
    ht = 1.0 / p.n_t;
    nu1 = p.jump.nu1;
    nu2 = p.jump.nu2;
    tau1 = -nu2;
    tau2 = nu1;
    c_tau = p.jump.minus.m1() * tau1 + p.jump.minus.m2() * tau2;
    shape = ansatz_shape(p.jump, p.eps, p.theta);
    pin_row.assign(R, std::numeric_limits<double>::quiet_NaN());
    for (int r : {0, 1, R - 2, R - 1}) pin_row[r] = shape.v_part(s_of(r));
    weight.assign(N, 0.0);
    for (int r = 2; r <= R - 3; ++r) {
      const double ws = (r == 2 || r == R - 3) ? 0.5 * hs : hs;
      for (int j = 0; j < nt; ++j) weight[idx(r, j)] = ws * ht;
    }
    for (vecd* b : {&dsv, &dtv, &dssv, &dttv, &dstv, &ux, &uz, &uxx, &rC, &rB, &mrC, &t1, &t2})
      b->assign(N, 0.0);
  }

  double s_of(int r) const { return -0.5 + (r - 2) * hs; }
  std::size_t idx(int r, int j) const { return std::size_t(r) * nt + j; }
  bool pinned(int r) const { return r <= 1 || r >= R - 2; }

  void dt(const vecd& a, vecd& o) const {
    const double inv2h = 1.0 / (2.0 * ht);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const int j = int(k % nt);
        const std::size_t row = k - j;
        const int jp = (j + 1 == nt) ? 0 : j + 1;
        const int jm = (j == 0) ? nt - 1 : j - 1;
        o[k] = (a[row + jp] - a[row + jm]) * inv2h;
      }
    });
  }

  void dtt(const vecd& a, vecd& o) const {
    const double invh2 = 1.0 / (ht * ht);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const int j = int(k % nt);
        const std::size_t row = k - j;
        const int jp = (j + 1 == nt) ? 0 : j + 1;
        const int jm = (j == 0) ? nt - 1 : j - 1;
        o[k] = (a[row + jp] - 2.0 * a[k] + a[row + jm]) * invh2;
      }
    });
  }

  // Central s-derivative; rows 0 and R-1 are set to zero (never consumed).
  void ds(const vecd& a, vecd& o) const {
    const double inv2h = 1.0 / (2.0 * hs);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const int r = int(k / nt);
        o[k] = (r == 0 || r == R - 1) ? 0.0 : (a[k + nt] - a[k - nt]) * inv2h;
      }
    });
  }

  void dss(const vecd& a, vecd& o) const {
    const double invh2 = 1.0 / (hs * hs);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const int r = int(k / nt);
        o[k] = (r == 0 || r == R - 1) ? 0.0
                                      : (a[k + nt] - 2.0 * a[k] + a[k - nt]) * invh2;
      }
    });
  }

  // Transposes with zero extension (inputs vanish off the physical rows, so
  // the edge-row truncation of ds/dss never shows up here).
  void dsT(const vecd& a, vecd& o) const {
    const double inv2h = 1.0 / (2.0 * hs);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const int r = int(k / nt);
        const double up = (r + 1 <= R - 1) ? a[k + nt] : 0.0;
        const double dn = (r - 1 >= 0) ? a[k - nt] : 0.0;
        o[k] = (dn - up) * inv2h;
      }
    });
  }

  void dssT(const vecd& a, vecd& o) const {
    const double invh2 = 1.0 / (hs * hs);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const int r = int(k / nt);
        const double up = (r + 1 <= R - 1) ? a[k + nt] : 0.0;
        const double dn = (r - 1 >= 0) ? a[k - nt] : 0.0;
        o[k] = (up - 2.0 * a[k] + dn) * invh2;
      }
    });
  }

  // Populates ux, uz, uxx (valid on rows [1, R-2]; consumed on physical rows).
  void differentiate(const vecd& v) {
    ds(v, dsv);
    dt(v, dtv);
    dss(v, dssv);
    dtt(v, dttv);
    ds(dtv, dstv);
    const double n1 = nu1, n2 = nu2, q1 = tau1, q2 = tau2, ct = c_tau;
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const double du_t = dtv[k] + ct;
        ux[k] = n1 * dsv[k] + q1 * du_t;
        uz[k] = n2 * dsv[k] + q2 * du_t;
        uxx[k] = n1 * n1 * dssv[k] + 2.0 * n1 * q1 * dstv[k] + q1 * q1 * dttv[k];
      }
    });
  }

  double energy(const vecd& v) {
    differentiate(v);
    const double eps = cp.eps;
    return chunked_sum(N, [&](std::size_t k) {
      const double w = weight[k];
      if (w == 0.0) return 0.0;
      const double C = uz[k] - 0.5 * ux[k] * ux[k];
      const double B = uxx[k];
      return w * (0.5 / eps * C * C + 0.5 * eps * B * B);
    });
  }

  // Exact adjoint; fills g (zero on pinned rows). Assumes differentiate(v)
  // state is current.
  void gradient(vecd& g) {
    const double eps = cp.eps;
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const double w = weight[k];
        const double C = uz[k] - 0.5 * ux[k] * ux[k];
        rC[k] = w / eps * C;
        rB[k] = w * eps * uxx[k];
        mrC[k] = ux[k] * rC[k];
      }
    });
    g.assign(N, 0.0);
    const double n1 = nu1, n2 = nu2, q1 = tau1, q2 = tau2;
    // d/dv of C-terms: D_z^T rC - D_x^T (ux rC)
    dsT(rC, t1);
    dt(rC, t2);  // D_t^T = -D_t
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) g[k] += n2 * t1[k] - q2 * t2[k];
    });
    dsT(mrC, t1);
    dt(mrC, t2);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) g[k] -= n1 * t1[k] - q1 * t2[k];
    });
    // d/dv of the bending term: D_xx^T rB with
    // D_xx^T = nu1^2 D_ss^T + 2 nu1 tau1 D_t^T D_s^T + tau1^2 D_tt^T.
    dssT(rB, t1);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) g[k] += n1 * n1 * t1[k];
    });
    dsT(rB, t1);
    dt(t1, t2);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) g[k] -= 2.0 * n1 * q1 * t2[k];
    });
    dtt(rB, t1);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) g[k] += q1 * q1 * t1[k];
    });
    for (int r : {0, 1, R - 2, R - 1})
      for (int j = 0; j < nt; ++j) g[idx(r, j)] = 0.0;
  }

  EnergyBreakdown breakdown(const vecd& v) {
    differentiate(v);
    const double eps = cp.eps;
    EnergyBreakdown b;
    b.epsilon = eps;
    b.compression = chunked_sum(N, [&](std::size_t k) {
      const double C = uz[k] - 0.5 * ux[k] * ux[k];
      return weight[k] * 0.5 / eps * C * C;
    });
    b.bending = chunked_sum(N, [&](std::size_t k) {
      return weight[k] * 0.5 * eps * uxx[k] * uxx[k];
    });
    b.total = b.compression + b.bending;
    b.bps_square = chunked_sum(N, [&](std::size_t k) {
      const double C = uz[k] - 0.5 * ux[k] * ux[k];
      const double res = C - eps * uxx[k];
      return weight[k] * 0.5 / eps * res * res;
    });
    // Flux of Sigma(grad u): Sigma exists on rows [1, R-2], its divergence on
    // the physical rows.
    parallel_for(N, [&](std::size_t b2, std::size_t e2) {
      for (std::size_t k = b2; k < e2; ++k) {
        const double m1 = ux[k], m2 = uz[k];
        t1[k] = m1 * m2 - m1 * m1 * m1 / 6.0;  // Sigma_1
        t2[k] = -0.5 * m1 * m1;                // Sigma_2
      }
    });
    ds(t1, dsv);
    dt(t1, dtv);
    ds(t2, dssv);
    dt(t2, dttv);
    b.bps_flux = chunked_sum(N, [&](std::size_t k) {
      if (weight[k] == 0.0) return 0.0;
      const double div1 = nu1 * dsv[k] + tau1 * dtv[k];   // d/dx Sigma_1
      const double div2 = nu2 * dssv[k] + tau2 * dttv[k]; // d/dz Sigma_2
      return weight[k] * (div1 + div2);
    });
    b.residual = b.total - (b.bps_square + b.bps_flux);
    return b;
  }

  void fill_initial(vecd& v) const {
    v.assign(N, 0.0);
    const double v_lo = shape.v_part(-0.5), v_hi = shape.v_part(0.5);
    std::mt19937_64 rng(cp.seed);
    auto unif = [&]() { return double(rng() >> 11) * 0x1.0p-53; };
    for (int r = 0; r < R; ++r) {
      double val;
      if (pinned(r)) {
        val = pin_row[r];
      } else if (cp.init == CellProblem::Init::ansatz) {
        val = shape.v_part(s_of(r));
      } else {
        const double s = s_of(r);
        val = v_lo + (s + 0.5) * (v_hi - v_lo);
      }
      for (int j = 0; j < nt; ++j) v[idx(r, j)] = val;
    }
    if (cp.init == CellProblem::Init::random) {
      for (int r = 2; r <= R - 3; ++r)
        for (int j = 0; j < nt; ++j) v[idx(r, j)] += 0.02 * (unif() - 0.5);
    }
  }

  double grad_norm(const vecd& g) const {
    // Weighted L2 norm of the functional derivative: g = weight * dE/du on
    // free nodes, so the norm is sqrt(sum g^2 / weight).
    const double val = chunked_sum(N, [&](std::size_t k) {
      return weight[k] > 0.0 ? g[k] * g[k] / weight[k] : 0.0;
    });
    return std::sqrt(val);
  }
};

using detail::fft_inplace;

// Hermitian positive-definite banded matrix, lower storage:
// band[o][i] = A[i+o][i], o = 0..bw. Cholesky LL^H in place.
struct HermBand {
  int n = 0, bw = 0;
  std::vector<cplx> band;  // (bw+1) rows of length n

  cplx& at(int off, int i) { return band[std::size_t(off) * n + i]; }
  const cplx& at(int off, int i) const { return band[std::size_t(off) * n + i]; }

  bool factor() {
    for (int j = 0; j < n; ++j) {
      double diag = at(0, j).real();
      for (int k = std::max(0, j - bw); k < j; ++k) {
        const cplx l = at(j - k, k);
        diag -= std::norm(l);
      }
      if (!(diag > 0.0)) return false;
      const double dj = std::sqrt(diag);
      at(0, j) = dj;
      for (int i = j + 1; i <= std::min(n - 1, j + bw); ++i) {
        cplx sum = at(i - j, j);
        for (int k = std::max({0, i - bw, j - bw}); k < j; ++k)
          sum -= at(i - k, k) * std::conj(at(j - k, k));
        at(i - j, j) = sum / dj;
      }
    }
    return true;
  }

  void solve(std::vector<cplx>& x) const {
    for (int i = 0; i < n; ++i) {
      cplx sum = x[i];
      for (int k = std::max(0, i - bw); k < i; ++k) sum -= at(i - k, k) * x[k];
      x[i] = sum / at(0, i).real();
    }
    for (int i = n - 1; i >= 0; --i) {
      cplx sum = x[i];
      for (int k = i + 1; k <= std::min(n - 1, i + bw); ++k)
        sum -= std::conj(at(k - i, i)) * x[k];
      x[i] = sum / at(0, i).real();
    }
  }
};

// Simple complex banded operator A[i][i+o], o = -1..1, stored per offset.
struct TriOp {
  int n = 0;
  std::vector<cplx> sub, diag, sup;  // A[i][i-1], A[i][i], A[i][i+1]

  explicit TriOp(int n_) : n(n_), sub(n_, cplx{}), diag(n_, cplx{}), sup(n_, cplx{}) {}

  cplx entry(int r, int c) const {
    if (c == r - 1) return sub[r];
    if (c == r) return diag[r];
    if (c == r + 1) return sup[r];
    return cplx{};
  }
};

// acc += w * A^H A (lower band of a Hermitian bw-2 matrix).
void accumulate_normal(const TriOp& A, double w, HermBand& acc) {
  const int n = A.n;
  for (int r = 0; r < n; ++r) {
    for (int o1 = -1; o1 <= 1; ++o1) {
      const int i = r + o1;
      if (i < 0 || i >= n) continue;
      const cplx ari = A.entry(r, i);
      if (ari == cplx{}) continue;
      for (int o2 = -1; o2 <= 1; ++o2) {
        const int j = r + o2;
        if (j < 0 || j >= n || j > i) continue;  // lower triangle only
        const cplx arj = A.entry(r, j);
        if (arj == cplx{}) continue;
        acc.at(i - j, j) += w * std::conj(ari) * arj;
      }
    }
  }
}

// Constant-coefficient surrogate Hessian, diagonalized in t by the FFT and
// factored per mode as a banded complex Cholesky:
//   P = (1/eps) Gz^H Gz + (cx^2/eps) Gx^H Gx + eps H^H H + alpha I,
// with Gz = nu2 Ds + tau2 Dt, Gx = nu1 Ds + tau1 Dt,
// H = nu1^2 Dss + 2 nu1 tau1 Ds Dt + tau1^2 Dtt on zero-Dirichlet free rows.
struct Preconditioner {
  int F = 0, nt = 0;
  std::vector<HermBand> factors;  // modes 0..nt/2
  std::vector<cplx> fft_row;
  std::vector<std::vector<cplx>> spectrum;  // [mode][row]

  bool build(const Workspace& w) {
    nt = w.nt;
    if (nt < 2 || (nt & (nt - 1)) != 0) return false;  // radix-2 only
    F = w.R - 4;
    const double eps = w.cp.eps;
    const double hs = w.hs, ht = w.ht;
    const double cx2 = std::max({w.cp.jump.minus.a * w.cp.jump.minus.a,
                                 w.cp.jump.plus.a * w.cp.jump.plus.a, 1e-12});
    const double ref = (1.0 / eps) * (1.0 / (hs * hs) + 1.0 / (ht * ht)) * std::max(1.0, cx2) +
                       eps * std::pow(1.0 / (hs * hs) + 1.0 / (ht * ht), 2.0);
    double alpha = 1e-10 * ref;
    for (int attempt = 0; attempt < 6; ++attempt) {
      factors.assign(nt / 2 + 1, HermBand{});
      bool ok = true;
      for (int k = 0; k <= nt / 2 && ok; ++k) {
        const double phase = 2.0 * std::numbers::pi * k / nt;
        const cplx imu{0.0, std::sin(phase) / ht};
        const double lam = -(2.0 - 2.0 * std::cos(phase)) / (ht * ht);
        TriOp Gz(F), Gx(F), H(F);
        for (int i = 0; i < F; ++i) {
          const cplx d1p{1.0 / (2.0 * hs), 0.0};
          // First derivative: sub = -1/(2h), sup = +1/(2h).
          Gz.sub[i] = -w.nu2 * d1p;
          Gz.sup[i] = w.nu2 * d1p;
          Gz.diag[i] = w.tau2 * imu;
          Gx.sub[i] = -w.nu1 * d1p;
          Gx.sup[i] = w.nu1 * d1p;
          Gx.diag[i] = w.tau1 * imu;
          const double s2 = 1.0 / (hs * hs);
          H.sub[i] = w.nu1 * w.nu1 * s2 - 2.0 * w.nu1 * w.tau1 * imu * d1p;
          H.sup[i] = w.nu1 * w.nu1 * s2 + 2.0 * w.nu1 * w.tau1 * imu * d1p;
          H.diag[i] = -2.0 * w.nu1 * w.nu1 * s2 + w.tau1 * w.tau1 * lam;
        }
        HermBand& P = factors[k];
        P.n = F;
        P.bw = 2;
        P.band.assign(std::size_t(P.bw + 1) * F, cplx{});
        accumulate_normal(Gz, 1.0 / eps, P);
        accumulate_normal(Gx, cx2 / eps, P);
        accumulate_normal(H, eps, P);
        for (int i = 0; i < F; ++i) P.at(0, i) += alpha;
        ok = P.factor();
      }
      if (ok) return true;
      alpha *= 100.0;
    }
    return false;
  }

  // z = P^{-1} g. Both live on the extended lattice; pinned rows are zero.
  void apply(const Workspace& w, const vecd& g, vecd& z) {
    if (spectrum.empty()) {
      spectrum.assign(nt, std::vector<cplx>(F));
      fft_row.assign(nt, cplx{});
    }
    // FFT each free row, gathering into per-mode columns.
    for (int f = 0; f < F; ++f) {
      for (int j = 0; j < nt; ++j) fft_row[j] = g[w.idx(f + 2, j)];
      fft_inplace(fft_row, false);
      for (int k = 0; k < nt; ++k) spectrum[k][f] = fft_row[k];
    }
    // Per-mode banded solves; modes above nt/2 reuse the conjugate factor.
    for (int k = 0; k <= nt / 2; ++k) factors[k].solve(spectrum[k]);
    for (int k = nt / 2 + 1; k < nt; ++k) {
      auto& col = spectrum[k];
      for (auto& c : col) c = std::conj(c);
      factors[nt - k].solve(col);
      for (auto& c : col) c = std::conj(c);
    }
    z.assign(g.size(), 0.0);
    for (int f = 0; f < F; ++f) {
      for (int k = 0; k < nt; ++k) fft_row[k] = spectrum[k][f];
      fft_inplace(fft_row, true);
      for (int j = 0; j < nt; ++j) z[w.idx(f + 2, j)] = fft_row[j].real();
    }
  }
};

double dot(const vecd& a, const vecd& b) {
  return chunked_sum(a.size(), [&](std::size_t k) { return a[k] * b[k]; });
}

void axpy_into(double c, const vecd& x, vecd& y) {
  parallel_for(y.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) y[k] += c * x[k];
  });
}

void check_pins(const Workspace& w, const vecd& v) {
  if (v.size() != w.N) throw std::invalid_argument("cell state: wrong size");
  for (int r : {0, 1, w.R - 2, w.R - 1}) {
    const double pin = w.pin_row[r];
    for (int j = 0; j < w.nt; ++j) {
      const double val = v[w.idx(r, j)];
      if (std::abs(val - pin) > 1e-12 * std::max(1.0, std::abs(pin)))
        throw std::invalid_argument("cell state: constraint row violated");
    }
  }
}

void fd_probe(Workspace& w, const vecd& v, const vecd& g, unsigned long long salt) {
  std::mt19937_64 rng(w.cp.seed * 0x9e3779b97f4a7c15ULL + salt + 1);
  auto unif = [&]() { return double(rng() >> 11) * 0x1.0p-53; };
  vecd dir(w.N, 0.0);
  double norm2 = 0.0;
  for (int r = 2; r <= w.R - 3; ++r)
    for (int j = 0; j < w.nt; ++j) {
      const double x = 2.0 * unif() - 1.0;
      dir[w.idx(r, j)] = x;
      norm2 += x * x;
    }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& d : dir) d *= inv;
  const double h = 1e-6;
  vecd vp = v, vm = v;
  axpy_into(h, dir, vp);
  axpy_into(-h, dir, vm);
  const double fd = (w.energy(vp) - w.energy(vm)) / (2.0 * h);
  w.differentiate(v);  // restore state
  const double an = dot(g, dir);
  const double scale = std::max({1.0, std::abs(fd), std::abs(an)});
  if (std::abs(fd - an) > 1e-4 * scale)
    throw std::runtime_error("cell gradient: finite-difference probe failed");
}

}  // namespace

Grid2D CellProblem::physical_grid() const {
  return Grid2D::cell(n_s, n_t, jump.nu1, jump.nu2);
}

std::vector<double> cell_initial(const CellProblem& cp) {
  Workspace w(cp);
  vecd v;
  w.fill_initial(v);
  return v;
}

double cell_energy(const CellProblem& cp, const std::vector<double>& v) {
  Workspace w(cp);
  check_pins(w, v);
  return w.energy(v);
}

std::vector<double> cell_gradient(const CellProblem& cp, const std::vector<double>& v) {
  Workspace w(cp);
  check_pins(w, v);
  w.energy(v);
  vecd g;
  w.gradient(g);
  return g;
}

EnergyBreakdown cell_breakdown(const CellProblem& cp, const std::vector<double>& v) {
  Workspace w(cp);
  check_pins(w, v);
  return w.breakdown(v);
}

double cell_gradient_norm(const CellProblem& cp, const std::vector<double>& g) {
  Workspace w(cp);
  return w.grad_norm(g);
}

ScalarField unwind_cell_field(const ScalarField& v, double c_tau) {
  Grid2D g = v.grid;
  g.periodic_t = false;
  g.validate();
  ScalarField u(g);
  for (int i = 0; i < g.n_s; ++i)
    for (int j = 0; j < g.n_t; ++j) u(i, j) = v(i, j) + c_tau * g.t(j);
  return u;
}

MinimizeResult minimize_energy(const CellProblem& cp) {
  Workspace w(cp);

  // Both initializers share the same pinned rows, so the transition-profile
  // competitor is always a feasible point of the same constrained problem.
  vecd v_comp;
  {
    CellProblem comp = cp;
    comp.init = CellProblem::Init::ansatz;
    Workspace wc(comp);
    wc.fill_initial(v_comp);
  }
  const double competitor = w.energy(v_comp);

  vecd v;
  w.fill_initial(v);

  Preconditioner precond;
  const bool have_precond = cp.use_preconditioner && precond.build(w);

  double E = w.energy(v);
  vecd g;
  w.gradient(g);

  MinimizeResult res;
  res.c_tau = w.c_tau;
  res.initial_energy = E;
  res.competitor_energy = competitor;
  res.energy_history.push_back(E);

  const int m = std::max(1, cp.lbfgs_memory);
  std::vector<vecd> s_hist, y_hist;
  std::vector<double> rho_hist;
  double gamma = 1.0;
  {
    const double hs = w.hs, ht = w.ht, eps = cp.eps;
    const double ref = (1.0 / eps) * (1.0 / (hs * hs) + 1.0 / (ht * ht)) +
                       eps * std::pow(1.0 / (hs * hs) + 1.0 / (ht * ht), 2.0);
    gamma = 1.0 / ref;  // pre-pair fallback scaling
  }

  vecd q(w.N), z(w.N), d(w.N), v_trial(w.N), g_new(w.N);
  int iter = 0;
  bool converged = false;
  int no_progress = 0;
  double gnorm = w.grad_norm(g);

  auto apply_h0 = [&](const vecd& in, vecd& out) {
    if (have_precond) {
      precond.apply(w, in, out);
    } else {
      out = in;
      for (double& x : out) x *= gamma;
    }
  };

  for (iter = 0; iter < cp.max_iters; ++iter) {
    if (gnorm <= cp.grad_tol) {
      converged = true;
      break;
    }

    // Two-loop recursion.
    q = g;
    const int npairs = int(s_hist.size());
    std::vector<double> alpha(npairs);
    for (int i = npairs - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * dot(s_hist[i], q);
      axpy_into(-alpha[i], y_hist[i], q);
    }
    apply_h0(q, z);
    for (int i = 0; i < npairs; ++i) {
      const double beta = rho_hist[i] * dot(y_hist[i], z);
      axpy_into(alpha[i] - beta, s_hist[i], z);
    }
    d = z;
    for (double& x : d) x = -x;

    double gd = dot(g, d);
    if (!(gd < 0.0)) {
      // Not a descent direction: drop the curvature pairs and restart from
      // the preconditioned steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      apply_h0(g, d);
      for (double& x : d) x = -x;
      gd = dot(g, d);
      if (!(gd < 0.0)) break;
    }

    // Armijo backtracking from the quasi-Newton step.
    const double e_floor =
        8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(E));
    double step = 1.0;
    double E_new = 0.0;
    bool accepted = false;
    bool have_gnew = false;
    for (int bt = 0; bt < 60; ++bt) {
      v_trial = v;
      axpy_into(step, d, v_trial);
      E_new = w.energy(v_trial);
      if (std::isfinite(E_new) && E_new <= E + cp.armijo_c * step * gd) {
        accepted = true;
        break;
      }
      step *= cp.backtrack;
    }
    if (!accepted) {
      // Energy differences are below round-off resolution: polish on the
      // stationarity residual instead. Accept a step that leaves the energy
      // unchanged up to round-off while contracting the gradient norm.
      for (double trial_step : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
        v_trial = v;
        axpy_into(trial_step, d, v_trial);
        E_new = w.energy(v_trial);
        if (!std::isfinite(E_new) || E_new > E + e_floor) continue;
        w.gradient(g_new);
        if (w.grad_norm(g_new) <= 0.999 * gnorm) {
          step = trial_step;
          accepted = true;
          have_gnew = true;
          break;
        }
      }
    }
    if (!accepted) break;

    if (!have_gnew) {
      w.energy(v_trial);  // refresh derivative state for the gradient
      w.gradient(g_new);
    }
    const double gnorm_new = w.grad_norm(g_new);
    // A step that neither resolves an energy decrease nor contracts the
    // gradient is numerical noise; a short run of those means the iteration
    // has hit the double-precision floor of this discretization.
    const bool made_progress = E - E_new > e_floor || gnorm_new < (1.0 - 1e-4) * gnorm;
    no_progress = made_progress ? 0 : no_progress + 1;

    // Curvature pair.
    vecd s_vec = d;
    for (double& x : s_vec) x *= step;
    vecd y_vec = g_new;
    for (std::size_t k = 0; k < y_vec.size(); ++k) y_vec[k] -= g[k];
    const double sy = dot(s_vec, y_vec);
    // Strict relative curvature bound: pairs assembled from sub-round-off
    // steps carry noise curvature and poison the two-loop directions.
    if (sy > 1e-10 * std::sqrt(dot(s_vec, s_vec)) * std::sqrt(dot(y_vec, y_vec))) {
      if (int(s_hist.size()) == m) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
      gamma = sy / dot(y_vec, y_vec);
      s_hist.push_back(std::move(s_vec));
      y_hist.push_back(std::move(y_vec));
      rho_hist.push_back(1.0 / sy);
    }

    v = v_trial;
    E = E_new;
    g = g_new;
    gnorm = gnorm_new;
    res.energy_history.push_back(E);
    if (cp.verbosity > 0 && iter % 25 == 0)
      std::fprintf(stderr, "iter %5d  E = %.12f  |g| = %.3e\n", iter, E, gnorm);
    if (cp.fd_check_every > 0 && (iter + 1) % cp.fd_check_every == 0)
      fd_probe(w, v, g, (unsigned long long)iter);
    if (no_progress >= 8) {
      ++iter;
      break;
    }
  }

  res.iterations = iter;
  res.final_gradient_norm = w.grad_norm(g);
  res.converged = converged;
  res.breakdown = w.breakdown(v);

  // Physical part of the state.
  Grid2D pg = cp.physical_grid();
  res.u_star = ScalarField(pg);
  for (int i = 0; i < cp.n_s; ++i)
    for (int j = 0; j < cp.n_t; ++j) res.u_star(i, j) = v[w.idx(i + 2, j)];
  return res;
}

}  // namespace smectic
