// smectic: transition-layer toolkit driver.
//
// Subcommands: jumpcost, profile, minimize, sweep, check. Flat key = value
// config files seed any flag not given on the command line. Exit codes:
// 0 success, 2 bad arguments, 3 numerical failure, 4 failed checks
// (non-convergence escalates to 4 only under --strict).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smectic/diagnostics.hpp"
#include "smectic/energy.hpp"
#include "smectic/grid.hpp"
#include "smectic/jump.hpp"
#include "smectic/minimize.hpp"
#include "smectic/profile.hpp"
#include "smectic/report.hpp"

namespace {

using namespace smectic;

constexpr const char* kVersion = "1.0.0";
constexpr int kOk = 0;
constexpr int kBadArgs = 2;
constexpr int kNumerical = 3;
constexpr int kChecksFailed = 4;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != token.size()) throw std::invalid_argument("not a number list: " + text);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty number list");
  return out;
}

// Config file fills in flags the command line left unset.
void merge(const Config& c, const CLI::Option* o, const char* key, double& v) {
  if (o->count() == 0 && c.has(key)) v = c.get_double(key, v);
}
void merge(const Config& c, const CLI::Option* o, const char* key, int& v) {
  if (o->count() == 0 && c.has(key)) v = c.get_int(key, v);
}
void merge(const Config& c, const CLI::Option* o, const char* key, std::string& v) {
  if (o->count() == 0 && c.has(key)) v = c.get_string(key, v);
}
void merge(const Config& c, const CLI::Option* o, const char* key, bool& v) {
  if (o->count() == 0 && c.has(key)) v = c.get_bool(key, v);
}

void write_text(const std::string& path, const std::string& text) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path);
  const bool ok = std::fwrite(text.data(), 1, text.size(), fp) == text.size();
  if (std::fclose(fp) != 0 || !ok) throw std::runtime_error("write failed: " + path);
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::invalid_argument("cannot create output directory " + dir + ": " + ec.message());
}

RunManifest make_manifest(const std::string& command) {
  RunManifest m;
  m.version = kVersion;
  m.command = command;
  m.created_at = iso_utc_now();
  return m;
}

// ---------------------------------------------------------------------------
struct JumpcostArgs {
  double aminus = std::nan("");
  double aplus = std::nan("");
  std::string out;
};

int cmd_jumpcost(const JumpcostArgs& a) {
  if (!std::isfinite(a.aminus) || !std::isfinite(a.aplus)) {
    std::fprintf(stderr, "jumpcost: --aminus and --aplus are required\n");
    return kBadArgs;
  }
  const JumpSpec j = make_jump(a.aminus, a.aplus);
  const JumpCostForms f = jump_cost_forms(j);
  nlohmann::json out;
  out["a_minus"] = a.aminus;
  out["a_plus"] = a.aplus;
  out["cost"] = f.cost;
  out["divergence_form"] = f.divergence_form;
  out["closed_form"] = f.closed_form;
  out["degenerate"] = j.degenerate;
  out["normal"] = {j.n1, j.n2};
  const std::string text = out.dump(2);
  std::printf("%s\n", text.c_str());
  if (!a.out.empty()) {
    ensure_out_dir(a.out);
    write_text(a.out + "/jumpcost.json", text + "\n");
    RunManifest m = make_manifest("jumpcost");
    m.add_config("aminus", fmt17(a.aminus));
    m.add_config("aplus", fmt17(a.aplus));
    m.outputs.push_back("jumpcost.json");
    m.add_result("cost", f.cost);
    m.add_result("degenerate", j.degenerate ? "true" : "false");
    write_manifest(m, a.out);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
struct ProfileArgs {
  double aminus = std::nan("");
  double aplus = std::nan("");
  std::string eps_list = "0.05";
  double T = 10.0;
  double step = 1e-3;
  double theta = 0.25;
  std::string out;
};

const char* kProfilePlot = R"(#!/usr/bin/env python3
# Plots the transition profile and the 1-D rate table emitted next to it.
import csv, sys
import matplotlib.pyplot as plt

t, g = [], []
with open("profile.csv") as fh:
    for row in csv.DictReader(fh):
        t.append(float(row["t"]))
        g.append(float(row["g"]))
fig, ax = plt.subplots()
ax.plot(t, g)
ax.set_xlabel("t")
ax.set_ylabel("g")
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "profile.png", dpi=150)
)";

int cmd_profile(const ProfileArgs& a) {
  if (!std::isfinite(a.aminus) || !std::isfinite(a.aplus)) {
    std::fprintf(stderr, "profile: --aminus and --aplus are required\n");
    return kBadArgs;
  }
  const std::vector<double> eps = parse_list(a.eps_list);
  for (double e : eps)
    if (!(e > 0.0)) throw std::invalid_argument("profile: eps must be positive");
  const JumpSpec j = make_jump(a.aminus, a.aplus);
  const Profile1D prof = solve_profile(j, a.T, a.step);  // throws on degenerate specs
  const double cost = jump_cost(j);

  nlohmann::json summary;
  summary["a_minus"] = a.aminus;
  summary["a_plus"] = a.aplus;
  summary["cost"] = cost;
  summary["tail_c2"] = prof.tail_c2;
  summary["logistic_rate"] = 0.5 * std::hypot(j.p1, j.p2);
  summary["entries"] = nlohmann::json::array();
  for (double e : eps) {
    const double r = oned_energy(j, e, 4096, a.theta);
    const double excess = oned_excess(j, e, a.theta);
    summary["entries"].push_back({{"eps", e}, {"r_one_d", r}, {"excess", excess}});
  }
  const std::string text = summary.dump(2);
  std::printf("%s\n", text.c_str());

  if (!a.out.empty()) {
    ensure_out_dir(a.out);
    save_profile_csv(prof, a.out + "/profile.csv");
    write_text(a.out + "/profile.json", profile_sidecar_json(prof) + "\n");
    std::string rates = "eps,r_one_d,excess\n";
    for (const auto& e : summary["entries"])
      rates += fmt17(e["eps"].get<double>()) + "," + fmt17(e["r_one_d"].get<double>()) + "," +
               fmt17(e["excess"].get<double>()) + "\n";
    write_text(a.out + "/rates.csv", rates);
    write_text(a.out + "/plot_profile.py", kProfilePlot);
    RunManifest m = make_manifest("profile");
    m.add_config("aminus", fmt17(a.aminus));
    m.add_config("aplus", fmt17(a.aplus));
    m.add_config("eps_list", a.eps_list);
    m.add_config("T", fmt17(a.T));
    m.add_config("step", fmt17(a.step));
    m.add_config("theta", fmt17(a.theta));
    m.outputs = {"profile.csv", "profile.json", "rates.csv", "plot_profile.py"};
    m.add_result("cost", cost);
    m.add_result("tail_c2", prof.tail_c2);
    write_manifest(m, a.out);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
struct MinimizeArgs {
  double aminus = std::nan("");
  double aplus = std::nan("");
  double eps = 0.05;
  int ns = 129;
  int nt = 128;
  double theta = 0.25;
  std::string init = "ansatz";
  int seed = 1;
  int max_iters = 2000;
  double grad_tol = 1e-8;
  int fd_check_every = 0;
  bool no_precond = false;
  bool strict = false;
  int verbosity = 0;
  std::string out;
};

int cmd_minimize(const MinimizeArgs& a) {
  if (!std::isfinite(a.aminus) || !std::isfinite(a.aplus)) {
    std::fprintf(stderr, "minimize: --aminus and --aplus are required\n");
    return kBadArgs;
  }
  CellProblem cp;
  cp.jump = make_jump(a.aminus, a.aplus);
  cp.eps = a.eps;
  cp.n_s = a.ns;
  cp.n_t = a.nt;
  cp.theta = a.theta;
  cp.seed = (unsigned long long)a.seed;
  cp.max_iters = a.max_iters;
  cp.grad_tol = a.grad_tol;
  cp.fd_check_every = a.fd_check_every;
  cp.use_preconditioner = !a.no_precond;
  cp.verbosity = a.verbosity;
  if (a.init == "ansatz")
    cp.init = CellProblem::Init::ansatz;
  else if (a.init == "linear")
    cp.init = CellProblem::Init::linear;
  else if (a.init == "random")
    cp.init = CellProblem::Init::random;
  else
    throw std::invalid_argument("minimize: unknown init " + a.init);

  const MinimizeResult res = minimize_energy(cp);
  const double cost = jump_cost(cp.jump);
  const double r1d = cost + oned_excess(cp.jump, cp.eps, cp.theta);
  const bool lower_ok = res.breakdown.total >= cost * (1.0 - 0.02);
  const bool upper_ok = res.breakdown.total <= res.competitor_energy + 1e-12;

  nlohmann::json out;
  out["total"] = res.breakdown.total;
  out["compression"] = res.breakdown.compression;
  out["bending"] = res.breakdown.bending;
  out["bps_square"] = res.breakdown.bps_square;
  out["bps_flux"] = res.breakdown.bps_flux;
  out["competitor_energy"] = res.competitor_energy;
  out["oned_rate"] = r1d;
  out["cost"] = cost;
  out["iterations"] = res.iterations;
  out["converged"] = res.converged;
  out["final_gradient_norm"] = res.final_gradient_norm;
  out["sandwich_lower_ok"] = lower_ok;
  out["sandwich_upper_ok"] = upper_ok;
  const std::string text = out.dump(2);
  std::printf("%s\n", text.c_str());

  if (!a.out.empty()) {
    ensure_out_dir(a.out);
    save_field(res.u_star, a.out + "/u_star.dat");
    write_text(a.out + "/breakdown.json", to_json(res.breakdown) + "\n");
    std::string hist = "iter,energy\n";
    for (std::size_t i = 0; i < res.energy_history.size(); ++i)
      hist += std::to_string(i) + "," + fmt17(res.energy_history[i]) + "\n";
    write_text(a.out + "/history.csv", hist);
    RunManifest m = make_manifest("minimize");
    m.add_config("aminus", fmt17(a.aminus));
    m.add_config("aplus", fmt17(a.aplus));
    m.add_config("eps", fmt17(a.eps));
    m.add_config("ns", std::to_string(a.ns));
    m.add_config("nt", std::to_string(a.nt));
    m.add_config("init", a.init);
    m.add_config("seed", std::to_string(a.seed));
    m.outputs = {"u_star.dat", "breakdown.json", "history.csv"};
    m.add_result("total", res.breakdown.total);
    m.add_result("competitor_energy", res.competitor_energy);
    m.add_result("cost", cost);
    m.add_result("converged", res.converged ? "true" : "false");
    m.checks.emplace_back("sandwich_lower", lower_ok);
    m.checks.emplace_back("sandwich_upper", upper_ok);
    write_manifest(m, a.out);
  }
  if (!lower_ok || !upper_ok) return kChecksFailed;
  if (a.strict && !res.converged) return kChecksFailed;
  return kOk;
}

// ---------------------------------------------------------------------------
struct SweepArgs {
  double aminus = std::nan("");
  double aplus = std::nan("");
  std::string eps_list = "0.1,0.05,0.025";
  std::string p_list = "2,4,8";
  double theta = 0.25;
  int samples_per_layer = 8;
  int max_ns = 4097;
  int nt = 9;
  std::string out;
};

const char* kSweepPlot = R"(#!/usr/bin/env python3
# Plots the 1-D excess rate from the sweep table on a log scale vs 1/eps.
import csv, math, sys
import matplotlib.pyplot as plt

inv_eps, excess, defect = [], [], []
with open("sweep.csv") as fh:
    for row in csv.DictReader(fh):
        inv_eps.append(1.0 / float(row["eps"]))
        excess.append(float(row["oned_excess"]))
        defect.append(float(row["defect"]))
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
ax1.semilogy(inv_eps, excess, "o-")
ax1.set_xlabel("1/eps")
ax1.set_ylabel("excess over jump cost")
ax2.loglog([1.0 / x for x in inv_eps], defect, "s-")
ax2.set_xlabel("eps")
ax2.set_ylabel("compression defect")
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "sweep.png", dpi=150)
)";

int cmd_sweep(const SweepArgs& a) {
  if (!std::isfinite(a.aminus) || !std::isfinite(a.aplus)) {
    std::fprintf(stderr, "sweep: --aminus and --aplus are required\n");
    return kBadArgs;
  }
  SweepConfig cfg;
  cfg.jump = make_jump(a.aminus, a.aplus);
  cfg.eps_list = parse_list(a.eps_list);
  cfg.p_list = parse_list(a.p_list);
  cfg.theta = a.theta;
  cfg.samples_per_layer = a.samples_per_layer;
  cfg.max_n_s = a.max_ns;
  cfg.n_t = a.nt;
  const SequenceReport rep = run_sweep(cfg);

  nlohmann::json out;
  out["limit_cost"] = rep.limit_cost;
  out["excess_fit"] = {{"slope", rep.excess_fit.slope},
                       {"correlation", rep.excess_fit.correlation}};
  out["defect_fit"] = {{"slope", rep.defect_fit.slope},
                       {"correlation", rep.defect_fit.correlation}};
  out["records"] = rep.records.size();
  std::printf("%s\n", out.dump(2).c_str());

  if (!a.out.empty()) {
    ensure_out_dir(a.out);
    save_sequence_csv(rep, a.out + "/sweep.csv");
    write_text(a.out + "/sweep.json", sequence_json(rep) + "\n");
    write_text(a.out + "/plot_sweep.py", kSweepPlot);
    RunManifest m = make_manifest("sweep");
    m.add_config("aminus", fmt17(a.aminus));
    m.add_config("aplus", fmt17(a.aplus));
    m.add_config("eps_list", a.eps_list);
    m.add_config("p_list", a.p_list);
    m.add_config("theta", fmt17(a.theta));
    m.add_config("samples_per_layer", std::to_string(a.samples_per_layer));
    m.outputs = {"sweep.csv", "sweep.json", "plot_sweep.py"};
    m.add_result("limit_cost", rep.limit_cost);
    m.add_result("excess_slope", rep.excess_fit.slope);
    m.add_result("excess_correlation", rep.excess_fit.correlation);
    write_manifest(m, a.out);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
struct CheckArgs {
  std::string suite = "all";
  bool strict = false;
  int seed = 1;
  std::string out;
};

struct CheckItem {
  std::string name;
  bool pass = false;
  bool convergence_related = false;
};

void add_check(std::vector<CheckItem>& items, const std::string& name, bool pass,
               bool convergence_related = false) {
  items.push_back({name, pass, convergence_related});
  std::printf("%s %s\n", pass ? "PASS" : "FAIL", name.c_str());
}

void suite_formulas(std::vector<CheckItem>& items, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  auto unif = [&](double lo, double hi) {
    return lo + (hi - lo) * (double(rng() >> 11) * 0x1.0p-53);
  };
  bool dual_ok = true;
  for (int i = 0; i < 2000 && dual_ok; ++i) {
    const double am = unif(-3.0, 3.0);
    double ap = unif(-3.0, 3.0);
    if (std::abs(ap - am) < 1e-6) ap = am + 1e-3;
    const JumpCostForms f = jump_cost_forms(make_jump(am, ap));
    if (std::abs(f.divergence_form - f.cost) > 1e-12 * std::max(1.0, std::abs(f.cost)))
      dual_ok = false;
  }
  add_check(items, "formulas.dual_agreement", dual_ok);
  add_check(items, "formulas.symmetric_pair",
            std::abs(jump_cost(make_jump(-1.0, 1.0)) - 2.0 / 3.0) < 1e-15);
  add_check(items, "formulas.asymmetric_pair",
            std::abs(jump_cost(make_jump(0.0, 2.0)) - 0.4714045207910317) < 1e-15);
  bool well_ok = true;
  for (int i = 0; i < 200 && well_ok; ++i) {
    const double am = unif(-3.0, 3.0);
    double ap = unif(-3.0, 3.0);
    if (std::abs(ap - am) < 1e-3) ap = am + 0.5;
    const JumpSpec j = make_jump(am, ap);
    const double g = unif(-0.5, 1.5);
    const double expect = 0.5 * std::hypot(j.p1, j.p2) * std::abs(g * (1.0 - g));
    if (std::abs(well_potential(g, j) - expect) > 1e-12 * std::max(1.0, expect)) well_ok = false;
  }
  add_check(items, "formulas.well_collapse", well_ok);
  bool cond_ok = true;
  for (int i = 0; i < 200 && cond_ok; ++i) {
    const double am = unif(-3.0, 3.0);
    double ap = unif(-3.0, 3.0);
    if (std::abs(ap - am) < 1e-3) ap = am + 0.5;
    if (!check_jump_condition(make_jump(am, ap), 1e-12)) cond_ok = false;
  }
  add_check(items, "formulas.jump_condition", cond_ok);
  DefectPath path;
  path.vertices = {{0.0, 0.0}, {0.0, 2.0}};
  path.states = {{-1.0, 1.0}};
  add_check(items, "formulas.path_energy",
            std::abs(limit_energy(path) - 2.0 * (2.0 / 3.0)) < 1e-12);
}

void suite_profile(std::vector<CheckItem>& items) {
  const JumpSpec j = make_jump(-1.0, 1.0);
  const Profile1D p = solve_profile(j, 10.0, 1e-3);
  double worst = 0.0;
  for (std::size_t i = 0; i < p.t_grid.size(); ++i)
    worst = std::max(worst, std::abs(p.g[i] - logistic_profile(j, p.t_grid[i])));
  add_check(items, "profile.logistic_match", worst < 1e-8);
  add_check(items, "profile.tail_rate", std::abs(p.tail_c2 - 1.0) < 0.1);
  const std::vector<double> eps{0.1, 0.05, 0.025, 0.0125};
  std::vector<double> xs, ys;
  bool positive = true, decreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double e : eps) {
    const double ex = oned_excess(j, e);
    positive = positive && ex > 0.0;
    decreasing = decreasing && ex < prev;
    prev = ex;
    xs.push_back(1.0 / e);
    ys.push_back(std::log(ex));
  }
  add_check(items, "profile.excess_positive_decreasing", positive && decreasing);
  const RateFit fit = rate_fit(xs, ys);
  add_check(items, "profile.excess_rate_fit", fit.slope < 0.0 && fit.correlation <= -0.99);
  const double quad = oned_energy(j, 0.05, 4096);
  const double closed = jump_cost(j) + oned_excess(j, 0.05);
  add_check(items, "profile.quadrature_consistency",
            std::abs(quad - closed) < 1e-9 * std::max(1.0, std::abs(closed)));
}

void suite_energy(std::vector<CheckItem>& items) {
  const Grid2D g = Grid2D::axis_aligned(65, 65, 0.0, 1.0, 0.0, 1.0);
  ScalarField well(g), linear(g);
  for (int i = 0; i < g.n_s; ++i)
    for (int jx = 0; jx < g.n_t; ++jx) {
      const double x = g.x(i, jx), z = g.z(i, jx);
      well(i, jx) = 0.7 * x + 0.5 * 0.7 * 0.7 * z;
      linear(i, jx) = z;
    }
  const EnergyBreakdown bw = energy_eps(well, 0.1);
  add_check(items, "energy.well_state_zero", std::abs(bw.total) < 1e-18);
  const EnergyBreakdown bl = energy_eps(linear, 0.1);
  add_check(items, "energy.unit_gradient_value", std::abs(bl.total - 5.0) < 1e-12);

  // Order-2 match of the two divergence-identity forms under h-halving. The
  // norm excludes a fixed edge strip: next to the boundary the stencil type
  // changes between columns, which costs one order pointwise there and would
  // mask the interior rate.
  auto div_err = [](int n) {
    const Grid2D gg = Grid2D::axis_aligned(n, n, 0.0, 1.0, 0.0, 1.0);
    ScalarField u(gg);
    for (int i = 0; i < n; ++i)
      for (int jx = 0; jx < n; ++jx) {
        const double x = gg.x(i, jx), z = gg.z(i, jx);
        u(i, jx) = std::sin(2.0 * x + 1.0) * std::cos(z) + 0.3 * std::cos(2.0 * z + x);
      }
    const DivSigma d = div_sigma(u);
    ScalarField diff(gg);
    for (int i = 3; i < n - 3; ++i)
      for (int jx = 3; jx < n - 3; ++jx) {
        const double e = d.divergence(i, jx) - d.product(i, jx);
        diff(i, jx) = e * e;
      }
    return std::sqrt(integrate(diff));
  };
  const double ratio = div_err(129) / div_err(257);
  add_check(items, "energy.divergence_identity_order2", ratio > 3.5 && ratio < 4.5);

  // The breakdown residual (product-form flux minus divergence-form flux) is
  // an O(h^2) object; verify the decay rate, not an absolute size.
  const JumpSpec j = make_jump(-1.0, 1.0);
  auto bps_residual = [&](int ns) {
    const Grid2D sq = Grid2D::square(ns, 9, j.nu1, j.nu2);
    const Ansatz az = build_ansatz(j, 0.05, sq);
    return energy_eps(az.u, 0.05).residual;
  };
  const double r_ratio = bps_residual(241) / bps_residual(481);
  add_check(items, "energy.bps_residual_order2", r_ratio > 3.5 && r_ratio < 4.5);
}

void suite_minimize(std::vector<CheckItem>& items, bool strict) {
  (void)strict;
  const JumpSpec j = make_jump(-1.0, 1.0);
  CellProblem cp;
  cp.jump = j;
  cp.eps = 0.1;
  cp.n_s = 33;
  cp.n_t = 32;
  cp.max_iters = 150;
  // Above the double-precision energy floor for this grid/eps (measured
  // weighted-norm plateau ~1.4e-6 once per-step decreases drop below ulp(E)).
  cp.grad_tol = 1e-5;

  const std::vector<double> v0 = cell_initial(cp);
  const std::vector<double> g0 = cell_gradient(cp, v0);
  std::mt19937_64 rng(7);
  auto unif = [&]() { return double(rng() >> 11) * 0x1.0p-53; };
  std::vector<double> dir(v0.size(), 0.0);
  const int R = cp.rows();
  for (int r = 2; r <= R - 3; ++r)
    for (int t = 0; t < cp.n_t; ++t) dir[std::size_t(r) * cp.n_t + t] = 2.0 * unif() - 1.0;
  const double h = 1e-6;
  std::vector<double> vp = v0, vm = v0;
  for (std::size_t k = 0; k < v0.size(); ++k) {
    vp[k] += h * dir[k];
    vm[k] -= h * dir[k];
  }
  const double fd = (cell_energy(cp, vp) - cell_energy(cp, vm)) / (2.0 * h);
  double an = 0.0;
  for (std::size_t k = 0; k < v0.size(); ++k) an += g0[k] * dir[k];
  add_check(items, "minimize.gradient_fd",
            std::abs(fd - an) < 1e-6 * std::max({1.0, std::abs(fd), std::abs(an)}));

  const MinimizeResult res = minimize_energy(cp);
  bool monotone = true;
  for (std::size_t i = 1; i < res.energy_history.size(); ++i)
    if (res.energy_history[i] > res.energy_history[i - 1] + 1e-12) monotone = false;
  add_check(items, "minimize.descent_monotone", monotone);
  add_check(items, "minimize.upper_bound",
            res.breakdown.total <= res.competitor_energy + 1e-12);
  add_check(items, "minimize.small_problem_converged", res.converged, true);
}

void suite_diagnostics(std::vector<CheckItem>& items) {
  const JumpSpec j = make_jump(-1.0, 1.0);
  const double eps = 0.02;
  const Grid2D sq = Grid2D::square(601, 9, j.nu1, j.nu2);
  const Ansatz az = build_ansatz(j, eps, sq);
  const EnergyBreakdown b = energy_eps(az.u, eps);
  const double defect = compression_defect(az.u);
  add_check(items, "diagnostics.defect_identity",
            std::abs(defect * defect - 2.0 * eps * b.compression) <
                1e-12 * std::max(1.0, defect * defect));
  add_check(items, "diagnostics.defect_energy_bound",
            defect * defect <= 2.0 * eps * b.total * (1.0 + 1e-12));
  const EntropyProduction ep = entropy_production(az.u);
  const double radius = concentration_radius(ep.field);
  add_check(items, "diagnostics.entropy_concentration", radius <= 10.0 * eps);
  add_check(items, "diagnostics.rewrite_residual", ep.rewrite_residual < 1e-9);
  add_check(items, "diagnostics.div_check", div_check(rotated_field(az.u)) < 1e-9);
  ScalarField vx(sq);
  vx.v = az.grad.c1;
  bool lp_ok = true;
  for (double p : {2.0, 4.0, 8.0})
    if (lp_norm(vx, p) > 1.0 + 1e-9) lp_ok = false;
  add_check(items, "diagnostics.chord_lp_bounded", lp_ok);
}

int cmd_check(const CheckArgs& a) {
  const bool all = a.suite == "all";
  if (!all && a.suite != "formulas" && a.suite != "profile" && a.suite != "energy" &&
      a.suite != "minimize" && a.suite != "diagnostics")
    throw std::invalid_argument("check: unknown suite " + a.suite);
  std::vector<CheckItem> items;
  if (all || a.suite == "formulas") suite_formulas(items, (unsigned long long)a.seed);
  if (all || a.suite == "profile") suite_profile(items);
  if (all || a.suite == "energy") suite_energy(items);
  if (all || a.suite == "minimize") suite_minimize(items, a.strict);
  if (all || a.suite == "diagnostics") suite_diagnostics(items);

  int hard_failures = 0, soft_failures = 0;
  for (const auto& it : items) {
    if (it.pass) continue;
    if (it.convergence_related && !a.strict)
      ++soft_failures;
    else
      ++hard_failures;
  }
  std::printf("checks: %zu run, %d failed%s\n", items.size(), hard_failures,
              soft_failures ? " (non-convergence ignored without --strict)" : "");
  if (!a.out.empty()) {
    ensure_out_dir(a.out);
    RunManifest m = make_manifest("check");
    m.add_config("suite", a.suite);
    m.add_config("strict", a.strict ? "true" : "false");
    m.add_config("seed", std::to_string(a.seed));
    for (const auto& it : items) m.checks.emplace_back(it.name, it.pass);
    m.add_result("failures", std::to_string(hard_failures));
    write_manifest(m, a.out);
  }
  return hard_failures == 0 ? kOk : kChecksFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smectic transition-layer toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "flat key = value config file; flags override");
  int threads = 0;
  auto* othreads = app.add_option("--threads", threads, "worker threads (default: SMECTIC_THREADS or 1)");

  JumpcostArgs ja;
  auto* jc = app.add_subcommand("jumpcost", "evaluate the defect line cost, both formulas");
  auto* jc_am = jc->add_option("--aminus", ja.aminus, "slope on the minus side");
  auto* jc_ap = jc->add_option("--aplus", ja.aplus, "slope on the plus side");
  auto* jc_out = jc->add_option("--out", ja.out, "output directory");

  ProfileArgs pa;
  auto* pr = app.add_subcommand("profile", "solve the transition profile ODE and rate table");
  auto* pr_am = pr->add_option("--aminus", pa.aminus, "slope on the minus side");
  auto* pr_ap = pr->add_option("--aplus", pa.aplus, "slope on the plus side");
  auto* pr_el = pr->add_option("--eps-list", pa.eps_list, "comma-separated eps values");
  auto* pr_T = pr->add_option("--T", pa.T, "ODE half-window");
  auto* pr_st = pr->add_option("--step", pa.step, "RK4 step");
  auto* pr_th = pr->add_option("--theta", pa.theta, "interpolation threshold");
  auto* pr_out = pr->add_option("--out", pa.out, "output directory");

  MinimizeArgs ma;
  auto* mi = app.add_subcommand("minimize", "minimize the cell energy");
  auto* mi_am = mi->add_option("--aminus", ma.aminus, "slope on the minus side");
  auto* mi_ap = mi->add_option("--aplus", ma.aplus, "slope on the plus side");
  auto* mi_eps = mi->add_option("--eps", ma.eps, "layer width parameter");
  auto* mi_ns = mi->add_option("--ns", ma.ns, "samples across the cell");
  auto* mi_nt = mi->add_option("--nt", ma.nt, "samples along the defect (power of two enables the preconditioner)");
  auto* mi_th = mi->add_option("--theta", ma.theta, "interpolation threshold");
  auto* mi_in = mi->add_option("--init", ma.init, "initializer: ansatz | linear | random");
  auto* mi_se = mi->add_option("--seed", ma.seed, "random-initializer seed");
  auto* mi_it = mi->add_option("--max-iters", ma.max_iters, "iteration budget");
  auto* mi_gt = mi->add_option("--grad-tol", ma.grad_tol, "gradient-norm stop");
  auto* mi_fd = mi->add_option("--fd-check-every", ma.fd_check_every, "gradient probe period (0 = off)");
  mi->add_flag("--no-precond", ma.no_precond, "disable the spectral preconditioner");
  mi->add_flag("--strict", ma.strict, "non-convergence fails the run");
  auto* mi_vb = mi->add_option("--verbosity", ma.verbosity, "progress printing level");
  auto* mi_out = mi->add_option("--out", ma.out, "output directory");

  SweepArgs sa;
  auto* sw = app.add_subcommand("sweep", "diagnostics across an eps sequence");
  auto* sw_am = sw->add_option("--aminus", sa.aminus, "slope on the minus side");
  auto* sw_ap = sw->add_option("--aplus", sa.aplus, "slope on the plus side");
  auto* sw_el = sw->add_option("--eps-list", sa.eps_list, "comma-separated eps values");
  auto* sw_pl = sw->add_option("--p-list", sa.p_list, "comma-separated Lp exponents");
  auto* sw_th = sw->add_option("--theta", sa.theta, "interpolation threshold");
  auto* sw_sp = sw->add_option("--samples-per-layer", sa.samples_per_layer, "grid resolution rule");
  auto* sw_mx = sw->add_option("--max-ns", sa.max_ns, "resolution cap");
  auto* sw_nt = sw->add_option("--nt", sa.nt, "samples along the defect");
  auto* sw_out = sw->add_option("--out", sa.out, "output directory");

  CheckArgs ca;
  auto* ck = app.add_subcommand("check", "run the property battery");
  auto* ck_su = ck->add_option("--suite", ca.suite, "formulas | profile | energy | minimize | diagnostics | all");
  ck->add_flag("--strict", ca.strict, "non-convergence counts as failure");
  auto* ck_se = ck->add_option("--seed", ca.seed, "randomized-check seed");
  auto* ck_out = ck->add_option("--out", ca.out, "output directory for the manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadArgs;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    merge(cfg, othreads, "threads", threads);
    if (threads > 0) set_thread_count(threads);

    if (jc->parsed()) {
      merge(cfg, jc_am, "aminus", ja.aminus);
      merge(cfg, jc_ap, "aplus", ja.aplus);
      merge(cfg, jc_out, "out", ja.out);
      return cmd_jumpcost(ja);
    }
    if (pr->parsed()) {
      merge(cfg, pr_am, "aminus", pa.aminus);
      merge(cfg, pr_ap, "aplus", pa.aplus);
      merge(cfg, pr_el, "eps_list", pa.eps_list);
      merge(cfg, pr_T, "T", pa.T);
      merge(cfg, pr_st, "step", pa.step);
      merge(cfg, pr_th, "theta", pa.theta);
      merge(cfg, pr_out, "out", pa.out);
      return cmd_profile(pa);
    }
    if (mi->parsed()) {
      merge(cfg, mi_am, "aminus", ma.aminus);
      merge(cfg, mi_ap, "aplus", ma.aplus);
      merge(cfg, mi_eps, "eps", ma.eps);
      merge(cfg, mi_ns, "ns", ma.ns);
      merge(cfg, mi_nt, "nt", ma.nt);
      merge(cfg, mi_th, "theta", ma.theta);
      merge(cfg, mi_in, "init", ma.init);
      merge(cfg, mi_se, "seed", ma.seed);
      merge(cfg, mi_it, "max_iters", ma.max_iters);
      merge(cfg, mi_gt, "grad_tol", ma.grad_tol);
      merge(cfg, mi_fd, "fd_check_every", ma.fd_check_every);
      merge(cfg, mi_vb, "verbosity", ma.verbosity);
      merge(cfg, mi_out, "out", ma.out);
      return cmd_minimize(ma);
    }
    if (sw->parsed()) {
      merge(cfg, sw_am, "aminus", sa.aminus);
      merge(cfg, sw_ap, "aplus", sa.aplus);
      merge(cfg, sw_el, "eps_list", sa.eps_list);
      merge(cfg, sw_pl, "p_list", sa.p_list);
      merge(cfg, sw_th, "theta", sa.theta);
      merge(cfg, sw_sp, "samples_per_layer", sa.samples_per_layer);
      merge(cfg, sw_mx, "max_ns", sa.max_ns);
      merge(cfg, sw_nt, "nt", sa.nt);
      merge(cfg, sw_out, "out", sa.out);
      return cmd_sweep(sa);
    }
    if (ck->parsed()) {
      merge(cfg, ck_su, "suite", ca.suite);
      merge(cfg, ck_se, "seed", ca.seed);
      merge(cfg, ck_out, "out", ca.out);
      return cmd_check(ca);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBadArgs;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
  return kBadArgs;
}
