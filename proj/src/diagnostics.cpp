#include "smectic/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "smectic/detail/fft.hpp"
#include "smectic/profile.hpp"

namespace smectic {

namespace {

ScalarField wrap_component(const Grid2D& g, const std::vector<double>& data) {
  ScalarField f(g);
  f.v = data;
  return f;
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

double compression_defect(const ScalarField& u) {
  const ScalarField ux = deriv_x(u);
  const ScalarField uz = deriv_z(u);
  ScalarField c2(u.grid);
  parallel_for(u.v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const double C = uz.v[k] - 0.5 * ux.v[k] * ux.v[k];
      c2.v[k] = C * C;
    }
  });
  return std::sqrt(integrate(c2));
}

EntropyProduction entropy_production(const ScalarField& u) {
  const ScalarField v = deriv_x(u);
  const ScalarField uz = deriv_z(u);
  ScalarField fv(u.grid), Fv(u.grid), C(u.grid);
  parallel_for(u.v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const double w = v.v[k];
      fv.v[k] = -0.5 * w * w;
      Fv.v[k] = w * w * w / 3.0;
      C.v[k] = uz.v[k] + fv.v[k];
    }
  });
  EntropyProduction out;
  const ScalarField dz_fv = deriv_z(fv);
  const ScalarField dx_Fv = deriv_x(Fv);
  out.field = ScalarField(u.grid);
  ScalarField absfield(u.grid);
  parallel_for(u.v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      out.field.v[k] = dz_fv.v[k] + dx_Fv.v[k];
      absfield.v[k] = std::abs(out.field.v[k]);
    }
  });
  out.l1_mass = integrate(absfield);
  // v solves the conservation law D_z v + D_x f(v) = D_x C; the discrete
  // residual is pure round-off because mixed partial stencils commute.
  const ScalarField dz_v = deriv_z(v);
  const ScalarField dx_fv = deriv_x(fv);
  const ScalarField dx_C = deriv_x(C);
  double worst = 0.0;
  for (std::size_t k = 0; k < u.v.size(); ++k)
    worst = std::max(worst, std::abs(dz_v.v[k] + dx_fv.v[k] - dx_C.v[k]));
  out.rewrite_residual = worst;
  return out;
}

double concentration_radius(const ScalarField& production, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("concentration_radius: fraction must lie in (0, 1]");
  const Grid2D& g = production.grid;
  const ScalarField w = quadrature_weights(g);
  std::vector<std::pair<double, double>> rows(g.n_s);  // (|s|, mass)
  for (int i = 0; i < g.n_s; ++i) {
    double mass = 0.0;
    for (int j = 0; j < g.n_t; ++j) mass += w(i, j) * std::abs(production(i, j));
    rows[i] = {std::abs(g.s(i)), mass};
  }
  double total = 0.0;
  for (const auto& r : rows) total += r.second;
  if (total <= 0.0) return 0.0;
  std::sort(rows.begin(), rows.end());
  double cum = 0.0;
  for (std::size_t i = 0; i < rows.size();) {
    // rows at the same distance from the defect line enter together
    std::size_t j = i;
    while (j < rows.size() && rows[j].first == rows[i].first) cum += rows[j++].second;
    if (cum >= fraction * total) return rows[i].first;
    i = j;
  }
  return rows.back().first;
}

VectorField2 rotated_field(const ScalarField& u) {
  const ScalarField ux = deriv_x(u);
  const ScalarField uz = deriv_z(u);
  VectorField2 m(u.grid);
  parallel_for(u.v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      m.c1[k] = ux.v[k];
      m.c2[k] = -uz.v[k];
    }
  });
  return m;
}

double div_check(const VectorField2& m) {
  const ScalarField dz_m1 = deriv_z(wrap_component(m.grid, m.c1));
  const ScalarField dx_m2 = deriv_x(wrap_component(m.grid, m.c2));
  ScalarField d2(m.grid);
  parallel_for(d2.v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const double d = dz_m1.v[k] + dx_m2.v[k];
      d2.v[k] = d * d;
    }
  });
  return std::sqrt(integrate(d2));
}

double lp_norm(const ScalarField& f, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be >= 1");
  ScalarField powed(f.grid);
  parallel_for(f.v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) powed.v[k] = std::pow(std::abs(f.v[k]), p);
  });
  return std::pow(integrate(powed), 1.0 / p);
}

RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("rate_fit: mismatched series");
  const std::size_t n = xs.size();
  if (n < 3) throw std::invalid_argument("rate_fit: need at least 3 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("rate_fit: degenerate abscissa");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.correlation = (syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
  return fit;
}

double hminus1_indicative(const ScalarField& f) {
  const Grid2D& g = f.grid;
  if (!g.periodic_t || !detail::is_pow2(g.n_t))
    throw std::invalid_argument("hminus1_indicative: needs periodic t with power-of-two n_t");
  const double Lt = g.n_t * g.h_t;
  std::vector<std::complex<double>> row(g.n_t);
  double acc = 0.0;
  for (int i = 0; i < g.n_s; ++i) {
    for (int j = 0; j < g.n_t; ++j) row[j] = f(i, j);
    detail::fft_inplace(row, false);
    const double ws = (i == 0 || i == g.n_s - 1) ? 0.5 * g.h_s : g.h_s;
    for (int k = 0; k < g.n_t; ++k) {
      const int folded = std::min(k, g.n_t - k);
      const double xi = 2.0 * std::numbers::pi * folded / Lt;
      const double amp2 = std::norm(row[k] / double(g.n_t));
      acc += ws * Lt * amp2 / (1.0 + xi * xi);
    }
  }
  return std::sqrt(acc);
}

SequenceReport run_sweep(const SweepConfig& cfg) {
  if (cfg.jump.degenerate) throw std::invalid_argument("run_sweep: degenerate jump");
  if (cfg.eps_list.empty()) throw std::invalid_argument("run_sweep: empty eps list");
  for (double e : cfg.eps_list)
    if (!(e > 0.0)) throw std::invalid_argument("run_sweep: eps must be positive");
  for (double p : cfg.p_list)
    if (!(p >= 1.0)) throw std::invalid_argument("run_sweep: p must be >= 1");
  if (cfg.samples_per_layer < 2) throw std::invalid_argument("run_sweep: samples_per_layer < 2");

  std::vector<double> eps = cfg.eps_list;
  std::sort(eps.begin(), eps.end(), std::greater<>());

  SequenceReport rep;
  rep.a_minus = cfg.jump.minus.a;
  rep.a_plus = cfg.jump.plus.a;
  rep.theta = cfg.theta;
  rep.p_list = cfg.p_list;
  rep.limit_cost = jump_cost(cfg.jump);
  rep.records.resize(eps.size());

  auto work = [&](std::size_t i) {
    const double e = eps[i];
    int n_s = int(std::ceil(cfg.samples_per_layer / e)) + 1;
    n_s = std::clamp(n_s, 65, cfg.max_n_s);
    const Grid2D grid = Grid2D::square(n_s, cfg.n_t, cfg.jump.nu1, cfg.jump.nu2);
    const Ansatz az = build_ansatz(cfg.jump, e, grid, cfg.theta);
    SequenceRecord& r = rep.records[i];
    r.eps = e;
    r.breakdown = energy_eps(az.u, e);
    r.defect = compression_defect(az.u);
    const EntropyProduction ep = entropy_production(az.u);
    r.entropy_mass = ep.l1_mass;
    r.rewrite_residual = ep.rewrite_residual;
    r.entropy_radius = concentration_radius(ep.field);
    r.div_residual = div_check(rotated_field(az.u));
    r.oned_rate = oned_energy(cfg.jump, e, 4096, cfg.theta);
    r.oned_excess = oned_excess(cfg.jump, e, cfg.theta);
    const ScalarField vx = wrap_component(grid, az.grad.c1);
    for (double p : cfg.p_list) r.lp.push_back(lp_norm(vx, p));
  };

  const std::size_t n = eps.size();
  const int nth = std::min<int>(thread_count(), int(n));
  if (nth <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::exception_ptr> errs(nth);
    std::vector<std::thread> pool;
    for (int t = 0; t < nth; ++t)
      pool.emplace_back([&, t]() {
        try {
          for (std::size_t i = std::size_t(t); i < n; i += std::size_t(nth)) work(i);
        } catch (...) {
          errs[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& err : errs)
      if (err) std::rethrow_exception(err);
  }

  // Rate fits over the usable (positive) entries.
  std::vector<double> xs, ys;
  for (const auto& r : rep.records)
    if (r.oned_excess > 0.0) {
      xs.push_back(1.0 / r.eps);
      ys.push_back(std::log(r.oned_excess));
    }
  if (xs.size() >= 3) rep.excess_fit = rate_fit(xs, ys);
  xs.clear();
  ys.clear();
  for (const auto& r : rep.records)
    if (r.defect > 0.0) {
      xs.push_back(std::log(r.eps));
      ys.push_back(std::log(r.defect));
    }
  if (xs.size() >= 3) rep.defect_fit = rate_fit(xs, ys);
  return rep;
}

void save_sequence_csv(const SequenceReport& rep, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("save_sequence_csv: cannot open " + path);
  std::string header =
      "eps,total,compression,bending,bps_square,bps_flux,residual,defect,"
      "entropy_mass,entropy_radius,rewrite_residual,div_residual,oned_rate,oned_excess";
  for (double p : rep.p_list) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",lp_%g", p);
    header += buf;
  }
  std::fprintf(fp, "%s\n", header.c_str());
  for (const auto& r : rep.records) {
    std::string line = fmt17(r.eps);
    for (double val : {r.breakdown.total, r.breakdown.compression, r.breakdown.bending,
                       r.breakdown.bps_square, r.breakdown.bps_flux, r.breakdown.residual,
                       r.defect, r.entropy_mass, r.entropy_radius, r.rewrite_residual,
                       r.div_residual, r.oned_rate, r.oned_excess})
      line += "," + fmt17(val);
    for (double val : r.lp) line += "," + fmt17(val);
    std::fprintf(fp, "%s\n", line.c_str());
  }
  if (std::fclose(fp) != 0) throw std::runtime_error("save_sequence_csv: write failed");
}

std::string sequence_json(const SequenceReport& rep) {
  nlohmann::json j;
  j["a_minus"] = rep.a_minus;
  j["a_plus"] = rep.a_plus;
  j["theta"] = rep.theta;
  j["limit_cost"] = rep.limit_cost;
  j["p_list"] = rep.p_list;
  auto fit_json = [](const RateFit& f) {
    return nlohmann::json{
        {"slope", f.slope}, {"intercept", f.intercept}, {"correlation", f.correlation}};
  };
  j["excess_fit"] = fit_json(rep.excess_fit);
  j["defect_fit"] = fit_json(rep.defect_fit);
  j["records"] = nlohmann::json::array();
  for (const auto& r : rep.records) {
    nlohmann::json rec;
    rec["eps"] = r.eps;
    rec["total"] = r.breakdown.total;
    rec["compression"] = r.breakdown.compression;
    rec["bending"] = r.breakdown.bending;
    rec["bps_square"] = r.breakdown.bps_square;
    rec["bps_flux"] = r.breakdown.bps_flux;
    rec["residual"] = r.breakdown.residual;
    rec["defect"] = r.defect;
    rec["entropy_mass"] = r.entropy_mass;
    rec["entropy_radius"] = r.entropy_radius;
    rec["rewrite_residual"] = r.rewrite_residual;
    rec["div_residual"] = r.div_residual;
    rec["oned_rate"] = r.oned_rate;
    rec["oned_excess"] = r.oned_excess;
    rec["lp"] = r.lp;
    j["records"].push_back(std::move(rec));
  }
  return j.dump(2);
}

}  // namespace smectic
