#include "bethe/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bethe/errors.hpp"
#include "bethe/quad.hpp"

namespace bethe {

namespace {

constexpr double kPi = std::numbers::pi;

// 7-point order-6 central stencils for d/dE and d^2/dE^2
constexpr double kD1[7] = {-1.0 / 60, 3.0 / 20,  -3.0 / 4, 0.0,
                           3.0 / 4,   -3.0 / 20, 1.0 / 60};
constexpr double kD2[7] = {1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18,
                           3.0 / 2,  -3.0 / 20, 1.0 / 90};

void check_work_budget(std::int64_t samples, std::int64_t vertices) {
  if (samples * vertices > kSampleWorkBudget)
    fail(ErrorKind::budget_exceeded,
         "sample budget: " + std::to_string(samples) + " x " +
             std::to_string(vertices) + " vertices");
}

Complex root_child_sum(const TreeTopology& t, const ForwardPass& fp) {
  Complex s{0, 0};
  for (std::int64_t j = 0; j < t.num_children(0); ++j)
    s += fp.gamma[t.children(0)[j]];
  return s;
}

std::vector<double> draw_or_zero(const SmoothDensity& d, double lambda,
                                 std::uint64_t seed, std::uint64_t stream,
                                 std::int64_t count) {
  if (lambda == 0) return std::vector<double>(count, 0.0);
  return sample(d, seed, stream, count).values;
}

}  // namespace

SmoothDensity make_density(const DensitySpec& spec) {
  switch (spec.kind) {
    case DensityKind::bump: return make_polynomial_bump(spec.m, spec.width);
    case DensityKind::uniform: return make_uniform(spec.a, spec.b);
    case DensityKind::cauchy: return make_cauchy(spec.gamma);
  }
  fail(ErrorKind::invalid_parameter, "unknown density kind");
}

void validate(const MomentConfig& c) {
  if (c.K < 1 || c.L < 0)
    fail(ErrorKind::invalid_parameter, "need K >= 1, L >= 0");
  if (!(c.lambda >= 0) || !std::isfinite(c.lambda))
    fail(ErrorKind::invalid_parameter, "lambda must be finite and >= 0");
  // the decay ops tighten this to (0,1); the comparison sweep runs s up to 2
  if (!(c.s > 0) || !(c.s < 2))
    fail(ErrorKind::invalid_parameter, "s must lie in (0, 2)");
  if (!(c.e_step > 0) || !(c.e_min <= c.e_max))
    fail(ErrorKind::invalid_parameter, "bad energy window");
  if (c.epsilon_ladder.empty())
    fail(ErrorKind::invalid_parameter, "epsilon ladder empty");
  for (size_t i = 0; i < c.epsilon_ladder.size(); ++i) {
    if (!(c.epsilon_ladder[i] > 0))
      fail(ErrorKind::invalid_parameter, "epsilon must be positive");
    if (i > 0 && !(c.epsilon_ladder[i] < c.epsilon_ladder[i - 1]))
      fail(ErrorKind::invalid_parameter, "epsilon ladder must decrease");
  }
  if (c.sample_count < 1)
    fail(ErrorKind::invalid_parameter, "need at least one sample");
  if (c.p < 1) fail(ErrorKind::invalid_parameter, "smoothness target p < 1");
  if (c.density.kind == DensityKind::bump && c.p > c.density.m)
    fail(ErrorKind::invalid_parameter, "p exceeds density smoothness m");
  if (c.workers < 1 || c.blocks < 1)
    fail(ErrorKind::invalid_parameter, "workers and blocks must be >= 1");
}

std::vector<double> energy_grid(const MomentConfig& c) {
  std::vector<double> e;
  const double tol = 1e-9 * std::max(1.0, std::abs(c.e_max));
  for (int j = 0;; ++j) {
    const double x = c.e_min + j * c.e_step;
    if (x > c.e_max + tol) break;
    e.push_back(x);
  }
  return e;
}

FractionalMomentCurve fractional_moment_curve(const MomentConfig& c,
                                              const SpectralPoint& z) {
  validate(c);
  if (!(c.s < 1))
    fail(ErrorKind::invalid_parameter, "fractional moments need s in (0,1)");
  if (c.density.kind == DensityKind::cauchy && !c.oracle_mode)
    fail(ErrorKind::invalid_parameter,
         "cauchy potential needs oracle_mode (no compact support)");
  const TreeTopology t = build_tree(c.K, c.L);
  check_work_budget(c.sample_count, t.N);
  const SmoothDensity d = make_density(c.density);
  const int width = c.L + 1;
  const double s = c.s;

  auto fill = [&](std::int64_t i, double* row) {
    const auto omega =
        draw_or_zero(d, c.lambda, c.seed, static_cast<std::uint64_t>(i), t.N);
    const auto g_row = greens_offdiagonal_root(t, c.lambda, omega, z);
    for (int dd = 0; dd <= c.L; ++dd) {
      double acc = 0;
      for (std::int64_t v = t.shell_begin[dd]; v < t.shell_begin[dd + 1]; ++v)
        acc += std::pow(std::abs(g_row[v]), s);
      row[dd] = acc / static_cast<double>(t.shell_size(dd));
    }
  };

  FractionalMomentCurve out;
  out.z = z;
  out.s = s;
  out.tally = run_blocks(c.sample_count, width, c.blocks, c.workers, fill);
  const auto mean = out.tally.mean();
  const auto se = out.tally.jackknife_se();
  for (int dd = 0; dd <= c.L; ++dd)
    out.shells.push_back({dd, mean[dd], se[dd], t.shell_size(dd)});
  return out;
}

namespace {

struct FitSelection {
  std::vector<int> d;
  std::vector<double> x, y, sigma;
};

FitSelection select_for_fit(const std::vector<ShellMoment>& shells) {
  FitSelection sel;
  for (const auto& sm : shells) {
    if (!(sm.mean > 0))
      fail(ErrorKind::nonpositive_mean,
           "shell mean <= 0 at d=" + std::to_string(sm.d));
    if (!(sm.mean > 10.0 * sm.se)) continue;
    sel.d.push_back(sm.d);
    sel.x.push_back(sm.d);
    sel.y.push_back(std::log(sm.mean));
    sel.sigma.push_back(std::max(sm.se / sm.mean, 1e-12));
  }
  if (sel.d.size() < 3)
    fail(ErrorKind::insufficient_points,
         "decay fit needs >= 3 shells above the 10x-SE cut");
  return sel;
}

}  // namespace

DecayFit fit_decay_rate(const std::vector<ShellMoment>& shells) {
  const FitSelection sel = select_for_fit(shells);
  const WlsFit w = wls_line(sel.x, sel.y, sel.sigma);
  DecayFit f;
  f.shells = shells;
  f.fitted_d = sel.d;
  f.xi = -w.slope;
  f.xi_se = w.slope_se;
  f.intercept = w.intercept;
  f.intercept_se = w.intercept_se;
  f.r_squared = w.r_squared;
  f.residuals = w.residuals;
  return f;
}

DecayFit fit_decay_rate(const FractionalMomentCurve& curve) {
  DecayFit f = fit_decay_rate(curve.shells);
  // shells share samples, so replace the regression errors with a
  // delete-block jackknife of the whole fit (selection and weights frozen)
  const FitSelection sel = select_for_fit(curve.shells);
  auto refit = [&sel](const std::vector<double>& mu, bool slope) {
    std::vector<double> y;
    for (int dd : sel.d) y.push_back(std::log(std::max(mu[dd], 1e-300)));
    const WlsFit w = wls_line(sel.x, y, sel.sigma);
    return slope ? -w.slope : w.intercept;
  };
  f.xi_se = jackknife_se_of(
      curve.tally, [&](const std::vector<double>& mu) { return refit(mu, true); });
  f.intercept_se = jackknife_se_of(
      curve.tally, [&](const std::vector<double>& mu) { return refit(mu, false); });
  return f;
}

ThresholdReport threshold_check(const DecayFit& fit, int K, int p) {
  ThresholdReport r;
  r.threshold = 2.0 * std::log(K + 1.0) * (3.0 + p);
  r.margin = fit.xi - r.threshold;
  r.margin_se = fit.xi_se;
  r.in_hypothesis = r.margin > 0;
  return r;
}

DiffMomentReport resolvent_diff_moment(const MomentConfig& c, int L_min,
                                       int L_max, const SpectralPoint& z,
                                       double xi) {
  validate(c);
  if (!(c.s < 1))
    fail(ErrorKind::invalid_parameter, "difference moments need s in (0,1)");
  if (c.density.kind == DensityKind::cauchy && !c.oracle_mode)
    fail(ErrorKind::invalid_parameter,
         "cauchy potential needs oracle_mode (no compact support)");
  if (L_min < 0 || L_max < L_min)
    fail(ErrorKind::invalid_parameter, "bad L range");
  std::vector<TreeTopology> trees;
  for (int l = L_min; l <= L_max + 1; ++l) trees.push_back(build_tree(c.K, l));
  const std::int64_t n_big = trees.back().N;
  check_work_budget(c.sample_count, 2 * n_big);
  const SmoothDensity d = make_density(c.density);
  const int width = L_max - L_min + 1;
  const double power = c.s / 2.0;

  auto fill = [&](std::int64_t i, double* row) {
    // one stream over the largest tree; nested prefixes share it
    const auto omega =
        draw_or_zero(d, c.lambda, c.seed, static_cast<std::uint64_t>(i), n_big);
    std::vector<Complex> roots(trees.size());
    for (size_t k = 0; k < trees.size(); ++k)
      roots[k] = forward_factors(trees[k], c.lambda, omega, z).root;
    for (int k = 0; k < width; ++k)
      row[k] = std::pow(std::abs(roots[k + 1] - roots[k]), power);
  };

  DiffMomentReport out;
  out.power = power;
  const BlockTally tally =
      run_blocks(c.sample_count, width, c.blocks, c.workers, fill);
  const auto mean = tally.mean();
  const auto se = tally.jackknife_se();
  for (int k = 0; k < width; ++k)
    out.moments.push_back({L_min + k, mean[k], se[k]});

  if (xi > 0) {
    out.xi_used = xi;
    const double lk = std::log(c.K + 1.0);
    std::vector<double> shape(width);
    for (int k = 0; k < width; ++k) {
      const double l = L_min + k;
      shape[k] = std::exp(-(l + 1) * (xi / 2.0 - (2 * l + 3) / (l + 1) * lk));
    }
    // one-parameter weighted least-squares scale
    double num = 0, den = 0;
    for (int k = 0; k < width; ++k) {
      const double w = se[k] > 0 ? 1.0 / (se[k] * se[k]) : 1.0;
      num += w * mean[k] * shape[k];
      den += w * shape[k] * shape[k];
    }
    out.fitted_B = den > 0 ? num / den : 0.0;
    for (int k = 0; k < width; ++k)
      out.bound_curve.push_back(out.fitted_B * shape[k]);
  }
  return out;
}

DerivativeEstimate derivative_estimator_score(const MomentConfig& c, int ell) {
  validate(c);
  if (ell < 0) fail(ErrorKind::invalid_parameter, "ell must be >= 0");
  if (ell > c.p)
    fail(ErrorKind::invalid_parameter, "ell exceeds smoothness target p");
  if (ell >= 1 && c.density.kind != DensityKind::bump)
    fail(ErrorKind::invalid_parameter,
         "score weights need a compact smooth density");
  if (ell >= 1 && c.lambda == 0)
    fail(ErrorKind::invalid_parameter, "score estimator needs lambda > 0");
  const TreeTopology t = build_tree(c.K, c.L);
  const auto grid = energy_grid(c);
  const int n = static_cast<int>(grid.size());
  check_work_budget(c.sample_count, t.N * n);
  const SmoothDensity d = make_density(c.density);
  const double eps = c.epsilon_ladder.front();

  auto fill = [&](std::int64_t i, double* row) {
    const auto pot = sample(d, c.seed, static_cast<std::uint64_t>(i), t.N);
    const double w = ell == 0 ? 1.0 : score_weight(d, pot, ell);
    for (int j = 0; j < n; ++j) {
      const Complex g =
          forward_factors(t, c.lambda, pot.values, {grid[j], eps}).root;
      row[2 * j] = g.real() * w;
      row[2 * j + 1] = g.imag() * w;
    }
  };

  const BlockTally tally =
      run_blocks(c.sample_count, 2 * n, c.blocks, c.workers, fill);
  const auto mean = tally.mean();
  const auto se = tally.jackknife_se();
  const double scale = std::pow(c.lambda, -ell);

  DerivativeEstimate out;
  out.ell = ell;
  out.e_grid = grid;
  out.method = "score-weight";
  out.epsilon = eps;
  bool exploded = true;
  for (int j = 0; j < n; ++j) {
    const Complex v{scale * mean[2 * j], scale * mean[2 * j + 1]};
    const double s =
        scale * std::hypot(se[2 * j], se[2 * j + 1]);
    out.values.push_back(v);
    out.se.push_back(s);
    if (s <= std::abs(v)) exploded = false;
  }
  out.variance_explosion = exploded;
  return out;
}

DerivativeEstimate derivative_estimator_fd(const MomentConfig& c, int ell,
                                           bool crn) {
  validate(c);
  if (ell < 0 || ell > 2)
    fail(ErrorKind::derivative_order_exceeded,
         "finite-difference stencils cover ell <= 2");
  if (ell > c.p)
    fail(ErrorKind::invalid_parameter, "ell exceeds smoothness target p");
  const double h = c.e_step;
  const double eps = c.epsilon_ladder.front();
  if (h > eps * (1 + 1e-12))
    fail(ErrorKind::grid_too_coarse,
         "stencil step exceeds epsilon; the curve is unresolved");
  const TreeTopology t = build_tree(c.K, c.L);
  const auto grid = energy_grid(c);
  const int n_out = static_cast<int>(grid.size());
  const int n_fine = 2 * n_out + 11;  // margin of 3h each side, spacing h/2
  const double hf = h / 2.0;
  check_work_budget(c.sample_count, t.N * n_fine);
  const SmoothDensity d = make_density(c.density);

  auto fill = [&](std::int64_t i, double* row) {
    std::vector<double> omega;
    if (crn)
      omega = draw_or_zero(d, c.lambda, c.seed, static_cast<std::uint64_t>(i),
                           t.N);
    for (int k = 0; k < n_fine; ++k) {
      if (!crn)
        omega = draw_or_zero(
            d, c.lambda, c.seed,
            static_cast<std::uint64_t>(i) * n_fine + k, t.N);
      const double e = c.e_min - 3 * h + k * hf;
      const Complex g = forward_factors(t, c.lambda, omega, {e, eps}).root;
      row[2 * k] = g.real();
      row[2 * k + 1] = g.imag();
    }
  };

  const BlockTally tally =
      run_blocks(c.sample_count, 2 * n_fine, c.blocks, c.workers, fill);
  const auto mean = tally.mean();

  // stencil on the mean curve: stride 2 = step h, stride 1 = step h/2
  auto stencil = [&](const std::vector<double>& mu, int cfine, int stride,
                     int comp) {
    if (ell == 0) return mu[2 * cfine + comp];
    const double* coef = ell == 1 ? kD1 : kD2;
    double s = 0;
    for (int u = 0; u < 7; ++u)
      s += coef[u] * mu[2 * (cfine + stride * (u - 3)) + comp];
    return s / std::pow(stride * hf, ell);
  };

  DerivativeEstimate out;
  out.ell = ell;
  out.e_grid = grid;
  out.method = "finite-difference";
  out.epsilon = eps;
  out.h = h;
  for (int j = 0; j < n_out; ++j) {
    const int cf = 6 + 2 * j;
    const Complex fine{stencil(mean, cf, 1, 0), stencil(mean, cf, 1, 1)};
    const Complex coarse{stencil(mean, cf, 2, 0), stencil(mean, cf, 2, 1)};
    out.values.push_back(fine);
    out.coarse.push_back(coarse);
    out.richardson.push_back(ell == 0 ? fine
                                      : (64.0 * fine - coarse) / 63.0);
    const double se_re = jackknife_se_of(
        tally,
        [&](const std::vector<double>& mu) { return stencil(mu, cf, 1, 0); });
    const double se_im = jackknife_se_of(
        tally,
        [&](const std::vector<double>& mu) { return stencil(mu, cf, 1, 1); });
    out.se.push_back(std::hypot(se_re, se_im));
  }
  return out;
}

OneSiteBoundResult one_site_bound_check(const TreeTopology& t,
                                        const SmoothDensity& d, int k,
                                        double lambda,
                                        const std::vector<double>& frozen,
                                        const SpectralPoint& z) {
  if (!(lambda > 0) || !std::isfinite(lambda))
    fail(ErrorKind::invalid_parameter, "lambda must be positive");
  const ForwardPass fp = forward_factors(t, lambda, frozen, z);
  const Complex s = root_child_sum(t, fp);
  // lambda w - z - s = lambda w + A - iB
  const double A = -z.E - s.real();
  const double B = z.epsilon + s.imag();
  if (!(B > 0))
    fail(ErrorKind::nonpositive_b, "site-removed imaginary part not positive");

  auto kernel = [&](double w) {
    const double u = lambda * w + A;
    return B / (u * u + B * B);
  };
  auto integrand = [&](double w) { return d.derivative(k, w + z.E) * kernel(w); };

  OneSiteBoundResult r;
  if (d.kind == DensityKind::cauchy) {
    r.lhs = std::abs(integrate_line(integrand).value);
  } else {
    r.lhs = std::abs(integrate(integrand, d.a - z.E, d.b - z.E).value);
  }
  const double sup = d.sup_norm(k);
  r.rhs_lambda_sq = sup * kPi / (lambda * lambda);
  r.rhs_lambda = sup * kPi / lambda;
  r.lorentz_mass = integrate_line(kernel).value;
  r.lorentz_exact = kPi / lambda;
  r.lambda_sq_holds = r.lhs <= r.rhs_lambda_sq + 1e-9 * (1 + r.rhs_lambda_sq);
  r.lambda_holds = r.lhs <= r.rhs_lambda + 1e-9 * (1 + r.rhs_lambda);
  return r;
}

ComparisonReport comparison_inequality_check(
    const MomentConfig& c, const std::vector<SpectralPoint>& z_grid,
    double R) {
  validate(c);
  if (c.density.kind == DensityKind::cauchy)
    fail(ErrorKind::invalid_parameter,
         "comparison check needs a compactly supported density");
  if (!(R > 0)) fail(ErrorKind::invalid_parameter, "R must be positive");
  if (c.lambda == 0)
    fail(ErrorKind::invalid_parameter, "comparison check needs lambda > 0");
  const TreeTopology inner = build_tree(c.K, c.L);
  const TreeTopology outer = build_tree(c.K, c.L + 1);
  check_work_budget(c.sample_count, outer.N);
  const SmoothDensity d = make_density(c.density);
  const double center = 0.5 * (d.a + d.b);
  const double power = c.s / 2.0;

  ComparisonReport rep;
  rep.s = c.s;
  rep.R = R;
  for (std::int64_t i = 0; i < c.sample_count; ++i) {
    const auto pot = sample(d, c.seed, static_cast<std::uint64_t>(i), outer.N);
    for (const SpectralPoint& zp : z_grid) {
      const Complex z = zp.z();
      const Complex sum_in = root_child_sum(
          inner, forward_factors(inner, c.lambda, pot.values, zp));
      const Complex sum_out = root_child_sum(
          outer, forward_factors(outer, c.lambda, pot.values, zp));
      auto f = [&](double w) {
        return 1.0 / (c.lambda * w - z - sum_out) -
               1.0 / (c.lambda * w - z - sum_in);
      };
      const Complex num = integrate(
          [&](double w) { return f(w) * d(w); }, d.a, d.b).value;
      const double den =
          integrate(
              [&](double w) {
                return std::pow(std::abs(f(w)), power) *
                       plateau(w, center - R, center + R);
              },
              center - R - 1, center + R + 1)
              .value;
      ComparisonPoint p;
      p.E = zp.E;
      p.epsilon = zp.epsilon;
      p.sample = i;
      p.lhs = std::abs(num);
      p.rhs = den;
      if (den < 1e-250) {
        p.skipped = true;
        ++rep.skipped;
      } else {
        p.ratio = p.lhs / p.rhs;
        rep.xi_hat = std::max(rep.xi_hat, p.ratio);
      }
      rep.points.push_back(p);
    }
  }
  return rep;
}

}  // namespace bethe
