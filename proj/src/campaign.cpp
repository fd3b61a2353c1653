#include "bethe/campaign.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "bethe/dos.hpp"
#include "bethe/errors.hpp"
#include "bethe/greens.hpp"
#include "bethe/moments.hpp"
#include "bethe/stats.hpp"
#include "bethe/tree.hpp"

namespace bethe {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

struct Output {
  std::string name;
  std::string content;
};

struct Computed {
  std::vector<Output> files;
  json results;
};

std::string iso_utc(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    q += ch;
    if (ch == '"') q += '"';
  }
  return q + "\"";
}

void append_row(std::string& csv, const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) csv += ',';
    csv += cells[i];
  }
  csv += '\n';
}

std::string fd(double v) { return format_double(v); }

std::vector<double> draw_values(const SmoothDensity& d, double lambda,
                                std::uint64_t seed, std::uint64_t stream,
                                std::int64_t count) {
  if (lambda == 0.0) return std::vector<double>(count, 0.0);
  return sample(d, seed, stream, count).values;
}

double trapezoid_mass(const std::vector<double>& y, double h) {
  double m = 0;
  for (size_t i = 0; i + 1 < y.size(); ++i) m += 0.5 * (y[i] + y[i + 1]) * h;
  return m;
}

// ---- validation suite ----

ValidationCheck check_greens_oracle() {
  ValidationCheck v{"greens-recursion-vs-direct", false, ""};
  const TreeTopology t = build_tree(2, 4);
  const SmoothDensity d = make_polynomial_bump(4, 1.0);
  double worst = 0;
  for (int i = 0; i < 3; ++i) {
    HamiltonianSample h = assemble(t, 1.0, sample(d, 4242, i, t.N));
    for (double eps : {1e-2, 1e-1, 1.0}) {
      const SpectralPoint z{0.3, eps};
      const std::vector<Complex> rec = greens_offdiagonal_root(h, z);
      const std::vector<Complex> dir = greens_direct_column(h, z, 0);
      for (std::int64_t n = 0; n < t.N; ++n)
        worst = std::max(worst,
                         std::abs(rec[n] - dir[n]) / std::abs(dir[n]));
    }
  }
  v.pass = worst <= 1e-10;
  v.detail = "max rel err " + fd(worst) + " over 9 (sample, eps) root rows";
  return v;
}

ValidationCheck check_resolvent_identity() {
  ValidationCheck v{"resolvent-identity", false, ""};
  const TreeTopology outer = build_tree(2, 4);
  const SmoothDensity d = make_polynomial_bump(4, 1.0);
  const SpectralPoint z{0.2, 0.1};
  double worst = 0;
  for (int i = 0; i < 3; ++i) {
    HamiltonianSample h = assemble(outer, 1.0, sample(d, 171, i, outer.N));
    const ResolventDifference rd = resolvent_difference(h, z);
    worst = std::max(worst, std::abs(rd.direct_diff - rd.boundary_sum) /
                                std::max(1.0, std::abs(rd.direct_diff)));
  }
  v.pass = worst <= 1e-10;
  v.detail = "max residual " + fd(worst) + " over 3 samples";
  return v;
}

ValidationCheck check_free_closed_form() {
  ValidationCheck v{"free-closed-form", false, ""};
  const Complex rec = free_greens_recursive(2, 30, SpectralPoint{0.0, 1.0});
  const Complex closed = free_greens_closed_form(2, SpectralPoint{0.0, 1.0});
  const double drift = std::abs(rec - Complex(0.0, 0.4));
  const double algebra = std::abs(closed - Complex(0.0, 0.4));
  v.pass = drift <= 1e-6 && algebra <= 1e-12;
  v.detail = "recursion at L=30 off by " + fd(drift) + ", closed form by " +
             fd(algebra);
  return v;
}

ValidationCheck check_kesten_mckay() {
  ValidationCheck v{"kesten-mckay-extrapolation", false, ""};
  const std::vector<double> ladder{0.2, 0.1, 0.05};
  const std::vector<double> w = ladder_weights(ladder);
  double extrap = 0;
  for (size_t a = 0; a < ladder.size(); ++a)
    extrap += w[a] *
              free_greens_closed_form(2, SpectralPoint{0.0, ladder[a]}).imag() /
              kPi;
  const double target = std::sqrt(2.0) / (3.0 * kPi);
  const double err = std::abs(extrap - target);
  v.pass = err <= 1e-3;
  v.detail = "rho0(0) off by " + fd(err);
  return v;
}

ValidationCheck check_lloyd_closed_form() {
  ValidationCheck v{"lloyd-closed-form", false, ""};
  const double exact = std::abs(lloyd_oracle(2, 1.0, 1.0, 0.0, 0.0) -
                                Complex(0.0, 0.4));
  const double trunc = std::abs(lloyd_oracle_finite(2, 12, 1.0, 1.0, 0.5, 0.2) -
                                lloyd_oracle(2, 1.0, 1.0, 0.5, 0.2));
  v.pass = exact <= 1e-10 && trunc < 1e-3;
  v.detail = "closed form off by " + fd(exact) + ", L=12 truncation " +
             fd(trunc);
  return v;
}

ValidationCheck check_determinism() {
  ValidationCheck v{"worker-determinism", false, ""};
  MomentConfig c;
  c.K = 2;
  c.L = 2;
  c.lambda = 2.0;
  c.density = {DensityKind::bump, 4, 1.0, -1, 1, 1.0};
  c.e_min = -6.0;
  c.e_max = 6.0;
  c.e_step = 0.5;
  c.sample_count = 40;
  c.seed = 5;
  c.blocks = 8;
  c.workers = 1;
  const DOSCurve one = ids_eigen(c);
  const DOSCurve again = ids_eigen(c);
  c.workers = 2;
  const DOSCurve two = ids_eigen(c);
  const bool same = one.rho == again.rho && one.rho == two.rho &&
                    one.se == two.se && one.ids == two.ids &&
                    one.ids_se == two.ids_se &&
                    one.ids_smooth == two.ids_smooth;
  v.pass = same;
  v.detail = same ? "workers 1 vs 2 bit-identical over 40 samples"
                  : "aggregates depend on worker count";
  return v;
}

// ---- per-kind campaigns ----

Computed run_greens(const ExperimentConfig& c) {
  const MomentConfig& m = c.moments;
  const TreeTopology t = build_tree(m.K, m.L);
  const SmoothDensity d = make_density(m.density);
  const std::vector<double> omega =
      draw_values(d, m.lambda, m.seed, 0, t.N);
  const std::vector<double> grid = energy_grid(m);
  std::string csv = "n1,n2,E,epsilon,re,im\n";
  std::int64_t rows = 0;
  for (double eps : m.epsilon_ladder)
    for (double E : grid) {
      const std::vector<Complex> row =
          greens_offdiagonal_root(t, m.lambda, omega, SpectralPoint{E, eps});
      for (std::int64_t n = 0; n < t.N; ++n) {
        append_row(csv, {"0", std::to_string(n), fd(E), fd(eps),
                         fd(row[n].real()), fd(row[n].imag())});
        ++rows;
      }
    }
  json res{{"rows", rows}, {"vertex_count", t.N},
           {"grid_points", grid.size()}, {"ladder", m.epsilon_ladder}};
  return {{{"entries.csv", csv}}, res};
}

Computed run_decay(const ExperimentConfig& c) {
  const MomentConfig& m = c.moments;
  const SpectralPoint z{0.5 * (m.e_min + m.e_max), m.epsilon_ladder.front()};
  const FractionalMomentCurve curve = fractional_moment_curve(m, z);
  const DecayFit fit = fit_decay_rate(curve);
  const ThresholdReport thr = threshold_check(fit, m.K, m.p);
  std::string csv = "d,estimate,se,shell_size,sample_count\n";
  for (const ShellMoment& s : curve.shells)
    append_row(csv, {std::to_string(s.d), fd(s.mean), fd(s.se),
                     std::to_string(s.shell_size),
                     std::to_string(m.sample_count)});
  json res{{"z_E", z.E},
           {"z_epsilon", z.epsilon},
           {"s", m.s},
           {"xi_hat", fit.xi},
           {"xi_se", fit.xi_se},
           {"intercept", fit.intercept},
           {"intercept_se", fit.intercept_se},
           {"r_squared", fit.r_squared},
           {"fitted_d", fit.fitted_d},
           {"threshold", thr.threshold},
           {"margin", thr.margin},
           {"margin_se", thr.margin_se},
           {"in_hypothesis", thr.in_hypothesis}};
  return {{{"shells.csv", csv}}, res};
}

Computed run_resolvent_diff(const ExperimentConfig& c) {
  const MomentConfig& m = c.moments;
  const SpectralPoint z{0.5 * (m.e_min + m.e_max), m.epsilon_ladder.front()};
  const DiffMomentReport rep =
      resolvent_diff_moment(m, c.l_min, m.L, z, c.xi_ref);
  std::string csv = "L,estimate,se,bound,sample_count\n";
  for (size_t i = 0; i < rep.moments.size(); ++i) {
    const DiffMoment& dm = rep.moments[i];
    const std::string bound =
        rep.bound_curve.empty() ? "nan" : fd(rep.bound_curve[i]);
    append_row(csv, {std::to_string(dm.L), fd(dm.mean), fd(dm.se), bound,
                     std::to_string(m.sample_count)});
  }
  // log-linear decay fit over levels clearing the 10-sigma cut
  std::vector<double> x, y, sig;
  for (const DiffMoment& dm : rep.moments)
    if (dm.mean > 10.0 * dm.se && dm.mean > 0) {
      x.push_back(dm.L);
      y.push_back(std::log(dm.mean));
      sig.push_back(dm.se / dm.mean);
    }
  double slope = 0, slope_se = 0;
  if (x.size() >= 2) {
    const WlsFit f = wls_line(x, y, sig);
    slope = f.slope;
    slope_se = f.slope_se;
  }
  json res{{"z_E", z.E},          {"z_epsilon", z.epsilon},
           {"power", rep.power},  {"slope", slope},
           {"slope_se", slope_se}, {"fitted_levels", x.size()},
           {"fitted_B", rep.fitted_B}, {"xi_used", rep.xi_used},
           {"levels", rep.moments.size()}};
  return {{{"diffs.csv", csv}}, res};
}

Computed run_derivatives(const ExperimentConfig& c) {
  const DerivativeEstimate sc = derivative_estimator_score(c.moments, c.ell);
  const DerivativeEstimate fde = derivative_estimator_fd(c.moments, c.ell);
  std::string csv =
      "E,score_re,score_im,score_se,fd_re,fd_im,fd_se,sigma_gap\n";
  double max_gap = 0;
  for (size_t i = 0; i < sc.e_grid.size(); ++i) {
    const double diff = std::abs(sc.values[i] - fde.values[i]);
    const double comb = std::hypot(sc.se[i], fde.se[i]);
    const double gap = comb > 0 ? diff / comb : (diff > 0 ? INFINITY : 0.0);
    max_gap = std::max(max_gap, gap);
    append_row(csv, {fd(sc.e_grid[i]), fd(sc.values[i].real()),
                     fd(sc.values[i].imag()), fd(sc.se[i]),
                     fd(fde.values[i].real()), fd(fde.values[i].imag()),
                     fd(fde.se[i]), fd(gap)});
  }
  json res{{"ell", c.ell},
           {"epsilon", sc.epsilon},
           {"fd_step", fde.h},
           {"variance_explosion", sc.variance_explosion},
           {"max_sigma_gap", max_gap},
           {"grid_points", sc.e_grid.size()}};
  return {{{"derivatives.csv", csv}}, res};
}

Computed run_bounds(const ExperimentConfig& c) {
  const MomentConfig& m = c.moments;
  const TreeTopology t = build_tree(m.K, m.L);
  const SmoothDensity d = make_density(m.density);
  const int k_max = std::min(4, m.density.m);
  std::mt19937_64 rng(m.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> e_draw(m.e_min, m.e_max);
  std::uniform_int_distribution<int> k_draw(0, k_max);
  std::string csv =
      "draw,E,k,lhs,rhs_lambda_sq,rhs_lambda,lorentz_mass,lorentz_exact,"
      "lambda_sq_holds,lambda_holds\n";
  std::int64_t sq_bad = 0, lin_bad = 0;
  double max_lorentz_err = 0;
  for (std::int64_t i = 0; i < m.sample_count; ++i) {
    const double E = e_draw(rng);
    const int k = k_draw(rng);
    const std::vector<double> frozen =
        draw_values(d, m.lambda, m.seed, std::uint64_t(1000003 + i), t.N);
    const SpectralPoint z{E, m.epsilon_ladder.front()};
    const OneSiteBoundResult r = one_site_bound_check(t, d, k, m.lambda, frozen, z);
    sq_bad += r.lambda_sq_holds ? 0 : 1;
    lin_bad += r.lambda_holds ? 0 : 1;
    max_lorentz_err = std::max(max_lorentz_err,
                               std::abs(r.lorentz_mass - r.lorentz_exact));
    append_row(csv, {std::to_string(i), fd(E), std::to_string(k), fd(r.lhs),
                     fd(r.rhs_lambda_sq), fd(r.rhs_lambda), fd(r.lorentz_mass),
                     fd(r.lorentz_exact), r.lambda_sq_holds ? "1" : "0",
                     r.lambda_holds ? "1" : "0"});
  }
  json res{{"draws", m.sample_count},
           {"k_max", k_max},
           {"lambda", m.lambda},
           {"lambda_sq_violations", sq_bad},
           {"lambda_violations", lin_bad},
           {"max_lorentz_err", max_lorentz_err}};
  return {{{"draws.csv", csv}}, res};
}

std::string gnuplot_curve(const DOSCurve& curve) {
  std::string dat;
  for (size_t g = 0; g < curve.e_grid.size(); ++g)
    dat += fd(curve.e_grid[g]) + " " + fd(curve.rho[g]) + "\n";
  return dat;
}

Computed run_dos_eigen(const ExperimentConfig& c, const RunOptions& opt) {
  const DOSCurve curve = ids_eigen(c.moments);
  std::string csv = "E,rho,se,ids,ids_se,ids_smooth\n";
  double max_se = 0;
  for (size_t g = 0; g < curve.e_grid.size(); ++g) {
    max_se = std::max(max_se, curve.se[g]);
    append_row(csv, {fd(curve.e_grid[g]), fd(curve.rho[g]), fd(curve.se[g]),
                     fd(curve.ids[g]), fd(curve.ids_se[g]),
                     fd(curve.ids_smooth[g])});
  }
  Computed out;
  out.files.push_back({"curve.csv", csv});
  if (opt.gnuplot) out.files.push_back({"curve.dat", gnuplot_curve(curve)});
  out.results = json{{"method", curve.method},
                     {"bandwidth", curve.bandwidth},
                     {"bandwidth_sensitivity", curve.bandwidth_sensitivity},
                     {"mass", trapezoid_mass(curve.rho, curve.h)},
                     {"max_se", max_se},
                     {"band_lo", curve.band_lo},
                     {"band_hi", curve.band_hi}};
  return out;
}

Computed run_dos_stieltjes(const ExperimentConfig& c, const RunOptions& opt) {
  const DOSCurve curve = dos_stieltjes(c.moments);
  std::string csv = "E,rho,se\n";
  double max_se = 0;
  for (size_t g = 0; g < curve.e_grid.size(); ++g) {
    max_se = std::max(max_se, curve.se[g]);
    append_row(csv, {fd(curve.e_grid[g]), fd(curve.rho[g]), fd(curve.se[g])});
  }
  std::string rungs = "epsilon,E,rho,se\n";
  for (size_t a = 0; a < curve.ladder.size(); ++a)
    for (size_t g = 0; g < curve.e_grid.size(); ++g)
      append_row(rungs, {fd(curve.ladder[a]), fd(curve.e_grid[g]),
                         fd(curve.rung_rho[a][g]), fd(curve.rung_se[a][g])});
  Computed out;
  out.files.push_back({"curve.csv", csv});
  out.files.push_back({"rungs.csv", rungs});
  if (opt.gnuplot) out.files.push_back({"curve.dat", gnuplot_curve(curve)});
  out.results = json{{"method", curve.method},
                     {"epsilon", curve.epsilon},
                     {"ladder", curve.ladder},
                     {"weights", ladder_weights(curve.ladder)},
                     {"mass", trapezoid_mass(curve.rho, curve.h)},
                     {"max_se", max_se}};
  return out;
}

Computed run_dos_smoothness(const ExperimentConfig& c, const RunOptions& opt) {
  DOSCurve curve = c.source == "stieltjes" ? dos_stieltjes(c.moments)
                                           : ids_eigen(c.moments);
  const SmoothnessReport rep = smoothness_diagnostic(curve, c.moments.p);
  const size_t n = curve.e_grid.size();
  // report grid is the interior; re-align each order onto the full grid
  for (int ell = 1; ell <= rep.p; ++ell) {
    std::vector<double> full(n, std::nan(""));
    size_t j = 0;
    for (size_t i = 0; i < rep.e_grid.size(); ++i) {
      while (j < n && curve.e_grid[j] != rep.e_grid[i]) ++j;
      if (j < n) full[j] = rep.deriv_fine.at(ell)[i];
    }
    curve.derivatives[ell] = std::move(full);
  }
  std::string header = "E,rho,se";
  for (int ell = 1; ell <= rep.p; ++ell)
    header += ",d" + std::to_string(ell);
  std::string csv = header + "\n";
  for (size_t g = 0; g < n; ++g) {
    std::vector<std::string> cells{fd(curve.e_grid[g]), fd(curve.rho[g]),
                                   fd(curve.se[g])};
    for (int ell = 1; ell <= rep.p; ++ell)
      cells.push_back(fd(curve.derivatives[ell][g]));
    append_row(csv, cells);
  }
  std::string diag = "E";
  for (int ell = 1; ell <= rep.p; ++ell) {
    const std::string l = std::to_string(ell);
    diag += ",d" + l + "_fine,d" + l + "_coarse,d" + l + "_ratio,d" + l +
            "_se";
  }
  diag += "\n";
  for (size_t i = 0; i < rep.e_grid.size(); ++i) {
    std::vector<std::string> cells{fd(rep.e_grid[i])};
    for (int ell = 1; ell <= rep.p; ++ell) {
      cells.push_back(fd(rep.deriv_fine.at(ell)[i]));
      cells.push_back(fd(rep.deriv_coarse.at(ell)[i]));
      cells.push_back(fd(rep.ratio.at(ell)[i]));
      cells.push_back(fd(rep.deriv_se.at(ell)[i]));
    }
    append_row(diag, cells);
  }
  json orders = json::array();
  for (int ell = 1; ell <= rep.p; ++ell)
    orders.push_back(json{{"ell", ell},
                          {"signal", rep.signal_points.at(ell)},
                          {"support", rep.support_points.at(ell)},
                          {"breaks", rep.break_points.at(ell)},
                          {"ok", rep.order_ok.at(ell)}});
  Computed out;
  out.files.push_back({"curve.csv", csv});
  out.files.push_back({"diagnostics.csv", diag});
  if (opt.gnuplot) out.files.push_back({"curve.dat", gnuplot_curve(curve)});
  out.results = json{{"source", c.source},
                     {"target", c.source == "stieltjes" ? "rho" : "ids"},
                     {"verdict", rep.verdict},
                     {"smooth_to_p", rep.smooth_to_p},
                     {"p", rep.p},
                     {"h", rep.h},
                     {"orders", orders}};
  return out;
}

Computed run_dos_lloyd(const ExperimentConfig& c) {
  const MomentConfig& m = c.moments;
  const TreeTopology t = build_tree(m.K, m.L);
  const SmoothDensity d = make_density(m.density);
  const std::vector<double> grid = energy_grid(m);
  const int n = int(grid.size());
  const double eps = m.epsilon_ladder.front();
  BlockTally tally = run_blocks(
      m.sample_count, 2 * n, m.blocks, m.workers,
      [&](std::int64_t i, double* row) {
        const std::vector<double> omega =
            draw_values(d, m.lambda, m.seed, std::uint64_t(i), t.N);
        for (int g = 0; g < n; ++g) {
          const ForwardPass fp = forward_factors(
              t, m.lambda, omega, SpectralPoint{grid[g], eps});
          row[2 * g] = fp.root.real();
          row[2 * g + 1] = fp.root.imag();
        }
      });
  const std::vector<double> mean = tally.mean();
  const std::vector<double> se = tally.jackknife_se();
  std::string csv =
      "E,epsilon,mc_re,mc_im,se_re,se_im,oracle_re,oracle_im,infinite_re,"
      "infinite_im,sigma_gap\n";
  double sup_sigma = 0, sup_abs = 0, sup_trunc = 0;
  for (int g = 0; g < n; ++g) {
    const Complex mc{mean[2 * g], mean[2 * g + 1]};
    const Complex fin = lloyd_oracle_finite(m.K, m.L, m.lambda,
                                            m.density.gamma, grid[g], eps);
    const Complex inf =
        lloyd_oracle(m.K, m.lambda, m.density.gamma, grid[g], eps);
    auto gap = [](double diff, double sd) {
      return sd > 0 ? std::abs(diff) / sd
                    : (diff == 0 ? 0.0 : INFINITY);
    };
    const double sigma_gap =
        std::max(gap(mc.real() - fin.real(), se[2 * g]),
                 gap(mc.imag() - fin.imag(), se[2 * g + 1]));
    sup_sigma = std::max(sup_sigma, sigma_gap);
    sup_abs = std::max(sup_abs, std::abs(mc - fin));
    sup_trunc = std::max(sup_trunc, std::abs(fin - inf));
    append_row(csv, {fd(grid[g]), fd(eps), fd(mc.real()), fd(mc.imag()),
                     fd(se[2 * g]), fd(se[2 * g + 1]), fd(fin.real()),
                     fd(fin.imag()), fd(inf.real()), fd(inf.imag()),
                     fd(sigma_gap)});
  }
  json res{{"epsilon", eps},
           {"sup_sigma_gap", sup_sigma},
           {"sup_abs_gap_finite", sup_abs},
           {"sup_finite_vs_infinite", sup_trunc},
           {"within_3se", sup_sigma <= 3.0},
           {"grid_points", n}};
  return {{{"lloyd.csv", csv}}, res};
}

Computed run_validate_kind(const std::vector<ValidationCheck>& checks) {
  std::string csv = "name,pass,detail\n";
  int failed = 0;
  json names = json::array();
  for (const ValidationCheck& v : checks) {
    if (!v.pass) {
      ++failed;
      names.push_back(v.name);
    }
    append_row(csv, {csv_field(v.name), v.pass ? "1" : "0",
                     csv_field(v.detail)});
  }
  json res{{"all_pass", failed == 0},
           {"checks", checks.size()},
           {"failed", names}};
  return {{{"checks.csv", csv}}, res};
}

Computed dispatch(const ExperimentConfig& c, const RunOptions& opt) {
  switch (c.kind) {
    case ExperimentKind::greens: return run_greens(c);
    case ExperimentKind::decay: return run_decay(c);
    case ExperimentKind::resolvent_diff: return run_resolvent_diff(c);
    case ExperimentKind::derivatives: return run_derivatives(c);
    case ExperimentKind::bounds: return run_bounds(c);
    case ExperimentKind::dos:
      if (c.mode == "eigen") return run_dos_eigen(c, opt);
      if (c.mode == "stieltjes") return run_dos_stieltjes(c, opt);
      if (c.mode == "smoothness") return run_dos_smoothness(c, opt);
      return run_dos_lloyd(c);
    case ExperimentKind::validate: break;
  }
  fail(ErrorKind::invalid_parameter, "unreachable experiment kind");
}

// ---- validation cache, keyed to the build ----

std::optional<std::vector<ValidationCheck>> load_validation_cache(
    const fs::path& root) {
  std::ifstream in(root / "validation-cache.json", std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const json j = json::parse(ss.str());
    if (j.at("build").get<std::string>() != tool_version() ||
        !j.at("all_pass").get<bool>())
      return std::nullopt;
    std::vector<ValidationCheck> checks;
    for (const json& v : j.at("checks"))
      checks.push_back({v.at("name").get<std::string>(),
                        v.at("pass").get<bool>(),
                        v.at("detail").get<std::string>()});
    return checks;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void store_validation_cache(const fs::path& root,
                            const std::vector<ValidationCheck>& checks) {
  json arr = json::array();
  for (const ValidationCheck& v : checks)
    arr.push_back(
        json{{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  const json j{{"build", tool_version()},
               {"all_pass", true},
               {"at", iso_utc(std::chrono::system_clock::now())},
               {"checks", arr}};
  write_file_atomic((root / "validation-cache.json").string(), j.dump(2) + "\n");
}

}  // namespace

std::vector<ValidationCheck> validation_suite() {
  return {check_greens_oracle(),     check_resolvent_identity(),
          check_free_closed_form(),  check_kesten_mckay(),
          check_lloyd_closed_form(), check_determinism()};
}

std::string default_output_root() {
  const char* env = std::getenv("BETHE_LAB_OUT");
  return env && *env ? env : "runs";
}

RunOutcome run_experiment(const ExperimentConfig& c, const RunOptions& opt) {
  try {
    validate_experiment(c);
  } catch (const Error& e) {
    return {2, "", std::string("config error: ") + e.what()};
  }

  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = iso_utc(std::chrono::system_clock::now());
  const fs::path root =
      c.out_dir.empty() ? fs::path(default_output_root()) : fs::path(c.out_dir);
  const std::string hash = config_hash(c);
  const fs::path dir =
      root / (std::string(to_string(c.kind)) +
              (c.mode.empty() ? "" : "-" + c.mode) + "-" + hash);

  try {
    fs::create_directories(root);

    // every run carries a validation record; non-validate kinds may reuse a
    // passing cache from this exact build
    std::vector<ValidationCheck> checks;
    bool cached = false;
    if (c.kind != ExperimentKind::validate) {
      if (auto hit = load_validation_cache(root)) {
        checks = std::move(*hit);
        cached = true;
      }
    }
    if (checks.empty()) checks = validation_suite();
    bool all_pass = true;
    for (const ValidationCheck& v : checks) all_pass = all_pass && v.pass;
    if (all_pass && !cached) store_validation_cache(root, checks);

    Computed comp;
    if (c.kind == ExperimentKind::validate) {
      comp = run_validate_kind(checks);
    } else if (all_pass) {
      try {
        comp = dispatch(c, opt);
      } catch (const Error& e) {
        return {1, "", std::string("run failed: ") + e.what()};
      }
    }

    ResultManifest man;
    man.config_hash = hash;
    man.seed = c.moments.seed;
    man.started_at = started;
    man.finished_at = iso_utc(std::chrono::system_clock::now());
    man.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    man.tool_version = tool_version();
    man.validation_cached = cached;
    man.validation = checks;
    man.validation_passed = all_pass;
    man.config_json = canonical_config_json(c);
    man.results_json = comp.results.is_null() ? "" : comp.results.dump();

    fs::create_directories(dir);
    char buf[17];
    for (const Output& f : comp.files) {
      write_file_atomic((dir / f.name).string(), f.content);
      std::snprintf(buf, sizeof buf, "%016llx",
                    (unsigned long long)fnv1a64(f.content));
      man.files.push_back({f.name, buf});
    }
    write_file_atomic((dir / "manifest.json").string(),
                      manifest_to_json(man));

    if (!all_pass)
      return {1, dir.string(),
              c.kind == ExperimentKind::validate
                  ? "validation suite failed"
                  : "validation suite failed; no results emitted"};
    return {0, dir.string(), ""};
  } catch (const Error& e) {
    return {1, "", std::string("run failed: ") + e.what()};
  } catch (const fs::filesystem_error& e) {
    return {1, "", std::string("run failed: ") + e.what()};
  }
}

int report_directory(const std::string& dir) {
  const fs::path mf = fs::path(dir) / "manifest.json";
  std::ifstream in(mf, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "error: no manifest.json under %s\n", dir.c_str());
    return 2;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  ResultManifest m;
  try {
    m = manifest_from_json(ss.str());
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  const json cfg = json::parse(m.config_json);
  const json res =
      m.results_json.empty() ? json(nullptr) : json::parse(m.results_json);
  const std::string kind = cfg.at("kind").get<std::string>();
  const std::string mode = cfg.at("mode").get<std::string>();

  std::printf("experiment  %s%s%s\n", kind.c_str(), mode.empty() ? "" : " / ",
              mode.c_str());
  std::printf("config hash %s   seed %llu\n", m.config_hash.c_str(),
              (unsigned long long)m.seed);
  std::printf("build       %s\n", m.tool_version.c_str());
  std::printf("started     %s   wall %.3f s\n", m.started_at.c_str(),
              m.wall_seconds);
  std::printf("validation  %s (%zu checks%s)\n",
              m.validation_passed ? "PASS" : "FAIL -- RUN UNTRUSTED",
              m.validation.size(), m.validation_cached ? ", cached" : "");
  for (const ValidationCheck& v : m.validation)
    if (!v.pass)
      std::printf("  FAIL %s: %s\n", v.name.c_str(), v.detail.c_str());
  for (const ManifestFile& f : m.files)
    std::printf("file        %s  fnv1a64 %s\n", f.name.c_str(),
                f.checksum.c_str());

  std::printf("config (all defaults explicit)\n");
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    if (it.value().is_object()) {
      std::printf("  [%s]\n", it.key().c_str());
      for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
        if (jt.value().is_object()) {
          std::printf("    [%s]\n", jt.key().c_str());
          for (auto kt = jt.value().begin(); kt != jt.value().end(); ++kt)
            std::printf("      %s = %s\n", kt.key().c_str(),
                        kt.value().dump().c_str());
        } else {
          std::printf("    %s = %s\n", jt.key().c_str(),
                      jt.value().dump().c_str());
        }
      }
    } else {
      std::printf("  %s = %s\n", it.key().c_str(), it.value().dump().c_str());
    }
  }

  if (res.is_null()) {
    std::printf("results     none (run untrusted or not completed)\n");
    return 0;
  }
  std::printf("results\n");
  if (kind == "decay") {
    std::printf("  xi_hat = %.6g +- %.2g   (r^2 %.4f, %zu distances)\n",
                res.at("xi_hat").get<double>(), res.at("xi_se").get<double>(),
                res.at("r_squared").get<double>(),
                res.at("fitted_d").size());
    std::printf("  threshold 2 ln(K+1)(3+p) = %.6g   margin %.6g +- %.2g   %s\n",
                res.at("threshold").get<double>(),
                res.at("margin").get<double>(),
                res.at("margin_se").get<double>(),
                res.at("in_hypothesis").get<bool>() ? "in-hypothesis"
                                                    : "below-threshold");
  } else if (kind == "resolvent-diff") {
    std::printf("  log-decay slope = %.6g +- %.2g over %llu levels\n",
                res.at("slope").get<double>(),
                res.at("slope_se").get<double>(),
                (unsigned long long)res.at("fitted_levels").get<std::int64_t>());
  } else if (kind == "derivatives") {
    std::printf("  ell %d: score vs fd max gap %.3g sigma%s\n",
                int(res.at("ell").get<int>()),
                res.at("max_sigma_gap").get<double>(),
                res.at("variance_explosion").get<bool>()
                    ? "  [score variance explosion]"
                    : "");
  } else if (kind == "bounds") {
    std::printf("  %llu draws: pi/lambda^2 violations %llu, pi/lambda "
                "violations %llu, lorentz mass err %.2g\n",
                (unsigned long long)res.at("draws").get<std::int64_t>(),
                (unsigned long long)
                    res.at("lambda_sq_violations").get<std::int64_t>(),
                (unsigned long long)
                    res.at("lambda_violations").get<std::int64_t>(),
                res.at("max_lorentz_err").get<double>());
  } else if (kind == "dos" && mode == "smoothness") {
    std::printf("  verdict: %s (target %s, p = %d)\n",
                res.at("verdict").get<std::string>().c_str(),
                res.at("target").get<std::string>().c_str(),
                int(res.at("p").get<int>()));
    for (const json& o : res.at("orders"))
      std::printf("    order %d: %d signal, %d support, %d breaks -> %s\n",
                  int(o.at("ell").get<int>()), int(o.at("signal").get<int>()),
                  int(o.at("support").get<int>()),
                  int(o.at("breaks").get<int>()),
                  o.at("ok").get<bool>() ? "ok" : "not-established");
  } else if (kind == "dos" && mode == "lloyd") {
    std::printf("  sup |MC - oracle| = %.3g (%.2f sigma)%s; truncation gap "
                "%.3g\n",
                res.at("sup_abs_gap_finite").get<double>(),
                res.at("sup_sigma_gap").get<double>(),
                res.at("within_3se").get<bool>() ? "" : "  [OUTSIDE 3 SE]",
                res.at("sup_finite_vs_infinite").get<double>());
  } else if (kind == "dos") {
    std::printf("  mass %.6f, max se %.3g\n", res.at("mass").get<double>(),
                res.at("max_se").get<double>());
  } else if (kind == "validate") {
    std::printf("  %s (%llu checks)\n",
                res.at("all_pass").get<bool>() ? "all checks passed"
                                               : "CHECKS FAILED",
                (unsigned long long)res.at("checks").get<std::int64_t>());
  } else {
    for (auto it = res.begin(); it != res.end(); ++it)
      std::printf("  %s = %s\n", it.key().c_str(), it.value().dump().c_str());
  }
  return 0;
}

}  // namespace bethe
