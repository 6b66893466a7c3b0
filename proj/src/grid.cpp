#include "smectic/grid.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace smectic {

namespace {

std::atomic<int> g_threads{0};  // 0 = not yet resolved from the environment

constexpr std::size_t kChunk = 4096;

int resolve_threads() {
  int cached = g_threads.load(std::memory_order_relaxed);
  if (cached > 0) return cached;
  int n = 1;
  if (const char* env = std::getenv("SMECTIC_THREADS")) {
    n = std::atoi(env);
    if (n < 1) n = 1;
  }
  g_threads.store(n, std::memory_order_relaxed);
  return n;
}

}  // namespace

int thread_count() { return resolve_threads(); }

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const int nthreads = thread_count();
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  if (nthreads <= 1 || nchunks <= 1) {
    fn(0, n);
    return;
  }
  // Chunks are assigned round-robin by index; every chunk computes the same
  // values no matter which thread runs it, and writes are disjoint.
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int w = 0; w < nthreads; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t c = std::size_t(w); c < nchunks; c += std::size_t(nthreads)) {
        const std::size_t b = c * kChunk;
        const std::size_t e = std::min(n, b + kChunk);
        fn(b, e);
      }
    });
  }
  for (auto& th : pool) th.join();
}

double chunked_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
  if (n == 0) return 0.0;
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(nchunks, 0.0);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    // b is chunk-aligned by construction; sum chunk by chunk even when the
    // serial path hands over one large range, so the bits never depend on
    // the thread count.
    for (std::size_t cb = b; cb < e; cb += kChunk) {
      const std::size_t ce = std::min(e, cb + kChunk);
      double sum = 0.0, comp = 0.0;
      for (std::size_t k = cb; k < ce; ++k) {
        const double y = term(k) - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
      }
      partial[cb / kChunk] = sum;
    }
  });
  double sum = 0.0, comp = 0.0;
  for (double p : partial) {
    const double y = p - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

Grid2D Grid2D::axis_aligned(int nx, int nz, double x0, double x1, double z0, double z1,
                            bool periodic_z) {
  Grid2D g;
  g.n_s = nx;
  g.n_t = nz;
  if (nx < 2 || nz < 2) throw std::invalid_argument("axis_aligned: need at least 2 samples per direction");
  g.h_s = (x1 - x0) / (nx - 1);
  g.h_t = periodic_z ? (z1 - z0) / nz : (z1 - z0) / (nz - 1);
  g.nu1 = 1.0; g.nu2 = 0.0;
  g.tau1 = 0.0; g.tau2 = 1.0;
  g.s0 = x0; g.t0 = z0;
  g.periodic_t = periodic_z;
  g.validate();
  return g;
}

Grid2D Grid2D::cell(int n_s, int n_t, double nu1, double nu2) {
  const double norm = std::hypot(nu1, nu2);
  if (!(norm > 0.0)) throw std::invalid_argument("cell: zero frame vector");
  Grid2D g;
  g.n_s = n_s;
  g.n_t = n_t;
  if (n_s < 2 || n_t < 2) throw std::invalid_argument("cell: need at least 2 samples per direction");
  g.h_s = 1.0 / (n_s - 1);
  g.h_t = 1.0 / n_t;
  g.nu1 = nu1 / norm; g.nu2 = nu2 / norm;
  g.tau1 = -g.nu2; g.tau2 = g.nu1;
  g.s0 = -0.5; g.t0 = -0.5;
  g.periodic_t = true;
  g.validate();
  return g;
}

Grid2D Grid2D::square(int n_s, int n_t, double nu1, double nu2) {
  Grid2D g = cell(n_s, std::max(n_t, 2), nu1, nu2);
  g.n_t = n_t;
  if (n_t < 2) throw std::invalid_argument("square: need at least 2 samples per direction");
  g.h_t = 1.0 / (n_t - 1);
  g.periodic_t = false;
  g.validate();
  return g;
}

void Grid2D::validate() const {
  if (n_s < 2 || n_t < 2) throw std::invalid_argument("Grid2D: need at least 2 samples per direction");
  if (!(h_s > 0.0) || !(h_t > 0.0)) throw std::invalid_argument("Grid2D: spacings must be positive");
  const double dot = nu1 * tau1 + nu2 * tau2;
  const double lnu = std::hypot(nu1, nu2);
  const double ltau = std::hypot(tau1, tau2);
  if (std::abs(dot) > 1e-14 || std::abs(lnu - 1.0) > 1e-14 || std::abs(ltau - 1.0) > 1e-14)
    throw std::invalid_argument("Grid2D: frame must be orthonormal");
}

ScalarField::ScalarField(const Grid2D& g, double fill) : grid(g), v(g.size(), fill) {
  grid.validate();
}

VectorField2::VectorField2(const Grid2D& g) : grid(g), c1(g.size(), 0.0), c2(g.size(), 0.0) {
  grid.validate();
}

namespace {

void check_shape(const ScalarField& f) {
  if (f.v.size() != f.grid.size()) throw std::invalid_argument("ScalarField: shape mismatch");
}

// First derivative along s (row index). Central interior, one-sided
// second-order at the two edge rows.
void d1_s(const ScalarField& f, ScalarField& out) {
  const int ns = f.grid.n_s, nt = f.grid.n_t;
  if (ns < 3) throw std::invalid_argument("deriv_s: need at least 3 samples along s");
  const double inv2h = 1.0 / (2.0 * f.grid.h_s);
  const auto& a = f.v;
  auto& o = out.v;
  parallel_for(f.grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const int i = int(k / std::size_t(nt));
      if (i == 0) {
        o[k] = (-3.0 * a[k] + 4.0 * a[k + nt] - a[k + 2 * std::size_t(nt)]) * inv2h;
      } else if (i == ns - 1) {
        o[k] = (3.0 * a[k] - 4.0 * a[k - nt] + a[k - 2 * std::size_t(nt)]) * inv2h;
      } else {
        o[k] = (a[k + nt] - a[k - nt]) * inv2h;
      }
    }
  });
}

// Second derivative along s. Central interior, one-sided second-order edges.
void d2_s(const ScalarField& f, ScalarField& out) {
  const int ns = f.grid.n_s, nt = f.grid.n_t;
  if (ns < 4) throw std::invalid_argument("deriv_ss: need at least 4 samples along s");
  const double invh2 = 1.0 / (f.grid.h_s * f.grid.h_s);
  const std::size_t snt = std::size_t(nt);
  const auto& a = f.v;
  auto& o = out.v;
  parallel_for(f.grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const int i = int(k / snt);
      if (i == 0) {
        o[k] = (2.0 * a[k] - 5.0 * a[k + snt] + 4.0 * a[k + 2 * snt] - a[k + 3 * snt]) * invh2;
      } else if (i == ns - 1) {
        o[k] = (2.0 * a[k] - 5.0 * a[k - snt] + 4.0 * a[k - 2 * snt] - a[k - 3 * snt]) * invh2;
      } else {
        o[k] = (a[k + snt] - 2.0 * a[k] + a[k - snt]) * invh2;
      }
    }
  });
}

// First derivative along t; wrap-around stencil when periodic.
void d1_t(const ScalarField& f, ScalarField& out) {
  const int nt = f.grid.n_t;
  if (nt < 3) throw std::invalid_argument("deriv_t: need at least 3 samples along t");
  const double inv2h = 1.0 / (2.0 * f.grid.h_t);
  const bool per = f.grid.periodic_t;
  const auto& a = f.v;
  auto& o = out.v;
  parallel_for(f.grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const int j = int(k % std::size_t(nt));
      const std::size_t row = k - std::size_t(j);
      if (per) {
        const int jp = (j + 1 == nt) ? 0 : j + 1;
        const int jm = (j == 0) ? nt - 1 : j - 1;
        o[k] = (a[row + jp] - a[row + jm]) * inv2h;
      } else if (j == 0) {
        o[k] = (-3.0 * a[k] + 4.0 * a[k + 1] - a[k + 2]) * inv2h;
      } else if (j == nt - 1) {
        o[k] = (3.0 * a[k] - 4.0 * a[k - 1] + a[k - 2]) * inv2h;
      } else {
        o[k] = (a[k + 1] - a[k - 1]) * inv2h;
      }
    }
  });
}

void d2_t(const ScalarField& f, ScalarField& out) {
  const int nt = f.grid.n_t;
  const bool per = f.grid.periodic_t;
  if (nt < (per ? 3 : 4)) throw std::invalid_argument("deriv_tt: too few samples along t");
  const double invh2 = 1.0 / (f.grid.h_t * f.grid.h_t);
  const auto& a = f.v;
  auto& o = out.v;
  parallel_for(f.grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const int j = int(k % std::size_t(nt));
      const std::size_t row = k - std::size_t(j);
      if (per) {
        const int jp = (j + 1 == nt) ? 0 : j + 1;
        const int jm = (j == 0) ? nt - 1 : j - 1;
        o[k] = (a[row + jp] - 2.0 * a[k] + a[row + jm]) * invh2;
      } else if (j == 0) {
        o[k] = (2.0 * a[k] - 5.0 * a[k + 1] + 4.0 * a[k + 2] - a[k + 3]) * invh2;
      } else if (j == nt - 1) {
        o[k] = (2.0 * a[k] - 5.0 * a[k - 1] + 4.0 * a[k - 2] - a[k - 3]) * invh2;
      } else {
        o[k] = (a[k + 1] - 2.0 * a[k] + a[k - 1]) * invh2;
      }
    }
  });
}

// out += c * g, elementwise.
void axpy(double c, const ScalarField& g, ScalarField& out) {
  auto& o = out.v;
  const auto& a = g.v;
  parallel_for(o.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) o[k] += c * a[k];
  });
}

}  // namespace

ScalarField deriv_s(const ScalarField& f) {
  check_shape(f);
  ScalarField out(f.grid);
  d1_s(f, out);
  return out;
}

ScalarField deriv_t(const ScalarField& f) {
  check_shape(f);
  ScalarField out(f.grid);
  d1_t(f, out);
  return out;
}

ScalarField deriv_ss(const ScalarField& f) {
  check_shape(f);
  ScalarField out(f.grid);
  d2_s(f, out);
  return out;
}

ScalarField deriv_tt(const ScalarField& f) {
  check_shape(f);
  ScalarField out(f.grid);
  d2_t(f, out);
  return out;
}

ScalarField deriv_st(const ScalarField& f) {
  // Tensor-product composition D_s(D_t f); the two passes commute exactly.
  check_shape(f);
  ScalarField tmp(f.grid), out(f.grid);
  d1_t(f, tmp);
  d1_s(tmp, out);
  return out;
}

ScalarField deriv_x(const ScalarField& f) {
  check_shape(f);
  ScalarField out(f.grid), tmp(f.grid);
  if (f.grid.nu1 != 0.0) {
    d1_s(f, tmp);
    axpy(f.grid.nu1, tmp, out);
  }
  if (f.grid.tau1 != 0.0) {
    d1_t(f, tmp);
    axpy(f.grid.tau1, tmp, out);
  }
  return out;
}

ScalarField deriv_z(const ScalarField& f) {
  check_shape(f);
  ScalarField out(f.grid), tmp(f.grid);
  if (f.grid.nu2 != 0.0) {
    d1_s(f, tmp);
    axpy(f.grid.nu2, tmp, out);
  }
  if (f.grid.tau2 != 0.0) {
    d1_t(f, tmp);
    axpy(f.grid.tau2, tmp, out);
  }
  return out;
}

ScalarField deriv_xx(const ScalarField& f) {
  check_shape(f);
  const double c_ss = f.grid.nu1 * f.grid.nu1;
  const double c_st = 2.0 * f.grid.nu1 * f.grid.tau1;
  const double c_tt = f.grid.tau1 * f.grid.tau1;
  ScalarField out(f.grid), tmp(f.grid);
  if (c_ss != 0.0) {
    d2_s(f, tmp);
    axpy(c_ss, tmp, out);
  }
  if (c_st != 0.0) {
    ScalarField t1(f.grid);
    d1_t(f, t1);
    d1_s(t1, tmp);
    axpy(c_st, tmp, out);
  }
  if (c_tt != 0.0) {
    d2_t(f, tmp);
    axpy(c_tt, tmp, out);
  }
  return out;
}

ScalarField quadrature_weights(const Grid2D& g) {
  g.validate();
  ScalarField w(g);
  std::vector<double> ws(g.n_s, g.h_s), wt(g.n_t, g.h_t);
  ws.front() = ws.back() = 0.5 * g.h_s;
  if (!g.periodic_t) {
    wt.front() = wt.back() = 0.5 * g.h_t;
  }
  for (int i = 0; i < g.n_s; ++i)
    for (int j = 0; j < g.n_t; ++j) w(i, j) = ws[i] * wt[j];
  return w;
}

double integrate(const ScalarField& f) {
  check_shape(f);
  const ScalarField w = quadrature_weights(f.grid);
  const auto& a = f.v;
  const auto& b = w.v;
  return chunked_sum(a.size(), [&](std::size_t k) { return a[k] * b[k]; });
}

void save_field(const ScalarField& f, const std::string& path) {
  check_shape(f);
  FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("save_field: cannot open " + path);
  std::fprintf(fp, "# %d %d %.17g %.17g %.17g %.17g %d\n", f.grid.n_s, f.grid.n_t, f.grid.h_s,
               f.grid.h_t, f.grid.nu1, f.grid.nu2, f.grid.periodic_t ? 1 : 0);
  for (int i = 0; i < f.grid.n_s; ++i) {
    for (int j = 0; j < f.grid.n_t; ++j)
      std::fprintf(fp, "%.17g%c", f(i, j), j + 1 == f.grid.n_t ? '\n' : ' ');
  }
  std::fclose(fp);
}

ScalarField load_field(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "r");
  if (!fp) throw std::runtime_error("load_field: cannot open " + path);
  Grid2D g;
  int per = 0;
  if (std::fscanf(fp, "# %d %d %lg %lg %lg %lg %d\n", &g.n_s, &g.n_t, &g.h_s, &g.h_t, &g.nu1,
                  &g.nu2, &per) != 7) {
    std::fclose(fp);
    throw std::runtime_error("load_field: bad header in " + path);
  }
  g.periodic_t = per != 0;
  g.tau1 = -g.nu2;
  g.tau2 = g.nu1;
  // Snapshots carry no origin; recenter on the origin.
  g.s0 = -0.5 * (g.n_s - 1) * g.h_s;
  g.t0 = g.periodic_t ? -0.5 * g.n_t * g.h_t : -0.5 * (g.n_t - 1) * g.h_t;
  g.validate();
  ScalarField f(g);
  for (std::size_t k = 0; k < f.v.size(); ++k) {
    if (std::fscanf(fp, "%lg", &f.v[k]) != 1) {
      std::fclose(fp);
      throw std::runtime_error("load_field: truncated data in " + path);
    }
  }
  std::fclose(fp);
  return f;
}

}  // namespace smectic
