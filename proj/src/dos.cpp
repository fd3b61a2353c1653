#include "bethe/dos.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bethe/quad.hpp"
#include "bethe/stats.hpp"
#include "bethe/tree.hpp"

namespace bethe {

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

void check_dos_budget(std::int64_t samples, std::int64_t per_sample) {
  if (samples * per_sample > kSampleWorkBudget)
    fail(ErrorKind::budget_exceeded,
         "campaign work " + std::to_string(samples * per_sample) +
             " exceeds budget " + std::to_string(kSampleWorkBudget));
}

// lambda == 0 needs no potential draw; the curve is the free model's.
std::vector<double> draw_or_zero(const SmoothDensity& d, double lambda,
                                 std::uint64_t seed, std::uint64_t stream,
                                 std::int64_t count) {
  if (lambda == 0.0) return std::vector<double>(count, 0.0);
  return sample(d, seed, stream, count).values;
}

double band_half_width(const MomentConfig& c, const SmoothDensity& d) {
  if (c.lambda == 0.0) return 2.0 * std::sqrt(double(c.K));
  if (d.kind == DensityKind::cauchy)
    return std::numeric_limits<double>::infinity();
  const double b = std::max(std::abs(d.a), std::abs(d.b));
  return 2.0 * std::sqrt(double(c.K)) + c.lambda * b;
}

void gate_oracle_only(const SmoothDensity& d, const MomentConfig& c) {
  if (d.oracle_only && !c.oracle_mode)
    fail(ErrorKind::invalid_parameter,
         "heavy-tailed density needs oracle_mode");
}

double gauss_kernel(double u) {
  return std::exp(-0.5 * u * u) / std::sqrt(2.0 * kPi);
}

double gauss_cdf(double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); }

// deterministic runs (single block) have exact means; report zero SE
std::vector<double> safe_jackknife(const BlockTally& t) {
  if (t.blocks >= 2) return t.jackknife_se();
  return std::vector<double>(t.width, 0.0);
}

double safe_jackknife_of(
    const BlockTally& t,
    const std::function<double(const std::vector<double>&)>& f) {
  return t.blocks >= 2 ? jackknife_se_of(t, f) : 0.0;
}

// central stencils; kD1/kD2 are order 6, kD3 order 4
constexpr double kD1[7] = {-1.0 / 60, 3.0 / 20, -3.0 / 4, 0.0,
                           3.0 / 4,   -3.0 / 20, 1.0 / 60};
constexpr double kD2[7] = {1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18,
                           3.0 / 2,  -3.0 / 20, 1.0 / 90};
constexpr double kD3[7] = {1.0 / 8, -1.0, 13.0 / 8, 0.0,
                           -13.0 / 8, 1.0, -1.0 / 8};

const double* stencil(int ell) {
  switch (ell) {
    case 1: return kD1;
    case 2: return kD2;
    default: return kD3;
  }
}

// CRN-aware jackknife SEs for the smoothness stencils: the fine estimate and
// the coarse-minus-fine defect are linear functionals of the tally mean, so
// the delete-block jackknife sees the cancellation that per-point SE
// propagation cannot.  col(m, j) reads the target column out of a mean row.
void attach_stencil_ses(
    DOSCurve& out, const BlockTally& tally, int n, double h,
    const std::function<double(const std::vector<double>&, int)>& col) {
  if (tally.blocks < 2 || n < 13) return;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int ell = 1; ell <= 3; ++ell) {
    out.stencil_se_fine[ell].assign(n, nan);
    out.stencil_se_defect[ell].assign(n, nan);
    const double* st = stencil(ell);
    const double hf = std::pow(h, ell), hc = std::pow(2.0 * h, ell);
    for (int j = 6; j + 6 < n; ++j) {
      out.stencil_se_fine[ell][j] = jackknife_se_of(
          tally, [&](const std::vector<double>& m) {
            double s = 0;
            for (int i = -3; i <= 3; ++i) s += st[i + 3] * col(m, j + i);
            return s / hf;
          });
      out.stencil_se_defect[ell][j] = jackknife_se_of(
          tally, [&](const std::vector<double>& m) {
            double c = 0, f = 0;
            for (int i = -3; i <= 3; ++i) {
              f += st[i + 3] * col(m, j + i);
              c += st[i + 3] * col(m, j + 2 * i);
            }
            return c / hc - f / hf;
          });
    }
  }
}

}  // namespace

DOSCurve ids_eigen(const MomentConfig& c) {
  validate(c);
  const TreeTopology t = build_tree(c.K, c.L);
  if (t.N > kEigenBudget)
    fail(ErrorKind::budget_exceeded,
         "N = " + std::to_string(t.N) + " beyond dense-eigensolve budget " +
             std::to_string(kEigenBudget));
  const SmoothDensity d = make_density(c.density);
  gate_oracle_only(d, c);
  check_dos_budget(c.sample_count, std::int64_t(t.N) * t.N);

  const std::vector<double> grid = energy_grid(c);
  const int n = int(grid.size());
  const double bw = 4.0 * c.e_step, bw_half = 2.0 * c.e_step;

  // row: [N raw | N smoothed | rho at 4h | rho at 2h]
  const int width = 4 * n;
  BlockTally tally = run_blocks(
      c.sample_count, width, c.blocks, c.workers,
      [&](std::int64_t i, double* row) {
        const std::vector<double> omega =
            draw_or_zero(d, c.lambda, c.seed, std::uint64_t(i), t.N);
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(t.N, t.N);
        for (std::int32_t v = 1; v < t.N; ++v)
          H(v, t.parent[v]) = H(t.parent[v], v) = 1.0;
        for (std::int32_t v = 0; v < t.N; ++v) H(v, v) = c.lambda * omega[v];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        const auto& ev = es.eigenvalues();    // ascending
        const auto& vec = es.eigenvectors();

        // raw step CDF by a single merge over the sorted spectrum
        int j = 0;
        double acc = 0;
        for (int g = 0; g < n; ++g) {
          while (j < t.N && ev[j] <= grid[g]) {
            acc += vec(0, j) * vec(0, j);
            ++j;
          }
          row[g] = acc;
        }
        // kernel-smoothed CDF and the two-bandwidth densities
        for (int g = 0; g < n; ++g) {
          double ns = 0, r4 = 0, r2 = 0;
          for (int k = 0; k < t.N; ++k) {
            const double w = vec(0, k) * vec(0, k);
            const double u = grid[g] - ev[k];
            if (std::abs(u) < 8.0 * bw) {
              ns += w * gauss_cdf(u / bw);
              r4 += w * gauss_kernel(u / bw) / bw;
              if (std::abs(u) < 8.0 * bw_half)
                r2 += w * gauss_kernel(u / bw_half) / bw_half;
            } else if (u > 0) {
              ns += w;
            }
          }
          row[n + g] = ns;
          row[2 * n + g] = r4;
          row[3 * n + g] = r2;
        }
      });

  const std::vector<double> mean = tally.mean();
  const std::vector<double> se = safe_jackknife(tally);
  DOSCurve out;
  out.e_grid = grid;
  out.h = c.e_step;
  out.method = "eigen";
  out.bandwidth = bw;
  out.ids.assign(mean.begin(), mean.begin() + n);
  out.ids_se.assign(se.begin(), se.begin() + n);
  out.ids_smooth.assign(mean.begin() + n, mean.begin() + 2 * n);
  out.rho.assign(mean.begin() + 2 * n, mean.begin() + 3 * n);
  out.se.assign(se.begin() + 2 * n, se.begin() + 3 * n);
  for (int g = 0; g < n; ++g)
    out.bandwidth_sensitivity = std::max(
        out.bandwidth_sensitivity, std::abs(mean[2 * n + g] - mean[3 * n + g]));
  attach_stencil_ses(out, tally, n, c.e_step,
                     [](const std::vector<double>& m, int j) { return m[j]; });
  const double hw = band_half_width(c, d);
  if (std::isfinite(hw)) {
    out.band_lo = -hw;
    out.band_hi = hw;
  }
  return out;
}

std::vector<double> ladder_weights(const std::vector<double>& ladder) {
  const int r = int(ladder.size());
  if (r < 1) fail(ErrorKind::insufficient_points, "empty ladder");
  std::vector<double> c(r, 1.0);
  for (int i = 0; i < r; ++i)
    for (int q = 0; q < r; ++q) {
      if (q == i) continue;
      const double den = ladder[q] - ladder[i];
      if (den == 0.0)
        fail(ErrorKind::invalid_parameter, "repeated ladder rung");
      c[i] *= ladder[q] / den;
    }
  return c;
}

DOSCurve dos_stieltjes(const MomentConfig& c) {
  validate(c);
  if (c.epsilon_ladder.size() < 3)
    fail(ErrorKind::insufficient_points,
         "epsilon ladder needs >= 3 rungs for extrapolation");
  const TreeTopology t = build_tree(c.K, c.L);
  const SmoothDensity d = make_density(c.density);
  gate_oracle_only(d, c);
  const std::vector<double> grid = energy_grid(c);
  const int n = int(grid.size());
  const int r = int(c.epsilon_ladder.size());
  check_dos_budget(c.sample_count, std::int64_t(t.N) * n * r);

  const int width = r * n;
  BlockTally tally = run_blocks(
      c.sample_count, width, c.blocks, c.workers,
      [&](std::int64_t i, double* row) {
        const std::vector<double> omega =
            draw_or_zero(d, c.lambda, c.seed, std::uint64_t(i), t.N);
        for (int a = 0; a < r; ++a)
          for (int g = 0; g < n; ++g) {
            const SpectralPoint zp{grid[g], c.epsilon_ladder[a]};
            const ForwardPass fp = forward_factors(t, c.lambda, omega, zp);
            row[a * n + g] = fp.root.imag() / kPi;
          }
      });

  const std::vector<double> mean = tally.mean();
  const std::vector<double> se = safe_jackknife(tally);
  const std::vector<double> w = ladder_weights(c.epsilon_ladder);

  DOSCurve out;
  out.e_grid = grid;
  out.h = c.e_step;
  out.epsilon = c.epsilon_ladder.back();
  out.method = "stieltjes";
  out.ladder = c.epsilon_ladder;
  out.rung_rho.assign(r, std::vector<double>(n));
  out.rung_se.assign(r, std::vector<double>(n));
  for (int a = 0; a < r; ++a)
    for (int g = 0; g < n; ++g) {
      out.rung_rho[a][g] = mean[a * n + g];
      out.rung_se[a][g] = se[a * n + g];
    }

  // significantly non-monotone rung differences poison the extrapolation
  for (int g = 0; g < n; ++g) {
    int sign_seen = 0;
    for (int a = 0; a + 1 < r; ++a) {
      const double diff = mean[(a + 1) * n + g] - mean[a * n + g];
      const double dse = safe_jackknife_of(
          tally, [a, g, n](const std::vector<double>& m) {
            return m[(a + 1) * n + g] - m[a * n + g];
          });
      if (std::abs(diff) <= 5.0 * dse) continue;
      const int s = diff > 0 ? 1 : -1;
      if (sign_seen != 0 && s != sign_seen)
        fail(ErrorKind::extrapolation_unstable,
             "rung differences flip sign at E = " + std::to_string(grid[g]));
      sign_seen = s;
    }
  }

  out.rho.resize(n);
  out.se.resize(n);
  for (int g = 0; g < n; ++g) {
    double v = 0;
    for (int a = 0; a < r; ++a) v += w[a] * mean[a * n + g];
    out.rho[g] = v;
    out.se[g] = safe_jackknife_of(tally, [&w, g, n, r](
                                           const std::vector<double>& m) {
      double s = 0;
      for (int a = 0; a < r; ++a) s += w[a] * m[a * n + g];
      return s;
    });
  }
  attach_stencil_ses(out, tally, n, c.e_step,
                     [&w, n, r](const std::vector<double>& m, int j) {
                       double s = 0;
                       for (int a = 0; a < r; ++a) s += w[a] * m[a * n + j];
                       return s;
                     });
  const double hw = band_half_width(c, d);
  if (std::isfinite(hw)) {
    out.band_lo = -hw;
    out.band_hi = hw;
  }
  return out;
}

Complex lloyd_oracle(int K, double lambda, double gamma, double E,
                     double epsilon) {
  if (!(lambda >= 0) || !(gamma >= 0) || !(epsilon >= 0) ||
      !std::isfinite(lambda * gamma + epsilon))
    fail(ErrorKind::invalid_parameter, "lloyd needs lambda, gamma, eps >= 0");
  const double shift = epsilon + lambda * gamma;
  if (!(shift > 0))
    fail(ErrorKind::invalid_parameter,
         "lloyd needs eps + lambda * gamma > 0");
  return free_greens_closed_form(K, SpectralPoint{E, shift});
}

Complex lloyd_oracle_finite(int K, int L, double lambda, double gamma,
                            double E, double epsilon) {
  if (!(lambda >= 0) || !(gamma >= 0) || !(epsilon >= 0) ||
      !std::isfinite(lambda * gamma + epsilon))
    fail(ErrorKind::invalid_parameter, "lloyd needs lambda, gamma, eps >= 0");
  const double shift = epsilon + lambda * gamma;
  if (!(shift > 0))
    fail(ErrorKind::invalid_parameter,
         "lloyd needs eps + lambda * gamma > 0");
  return free_greens_recursive(K, L, SpectralPoint{E, shift});
}

Complex borel_transform(const std::function<double(double)>& f, double a,
                        double b, const SpectralPoint& z) {
  if (!(z.epsilon > 0))
    fail(ErrorKind::invalid_parameter, "borel transform needs Im z > 0");
  const Complex zz = z.z();
  auto g = [&f, zz](double x) { return f(x) / (x - zz); };
  QuadOptions opt;
  QuadResult<Complex> res;
  if (std::isinf(a) && std::isinf(b)) {
    res = integrate_line(g, opt);
  } else if (std::isfinite(a) && std::isfinite(b) && a < b) {
    res = integrate(g, a, b, opt);
  } else {
    fail(ErrorKind::invalid_parameter, "borel support must be finite or R");
  }
  if (res.error > 1e-8 * std::max(1.0, std::abs(res.value)))
    fail(ErrorKind::quadrature_nonconvergence,
         "borel transform error estimate above 1e-8");
  return res.value;
}

Complex borel_transform(const SmoothDensity& f, const SpectralPoint& z) {
  return borel_transform([&f](double x) { return f(x); }, f.a, f.b, z);
}

BorelGrowthReport borel_growth_check(const SmoothDensity& f, int order,
                                     double i_lo, double i_hi,
                                     std::vector<double> ladder, double step) {
  if (!(i_lo < i_hi) || !std::isfinite(i_lo) || !std::isfinite(i_hi))
    fail(ErrorKind::invalid_parameter, "interval must be finite, lo < hi");
  if (order < 0) fail(ErrorKind::invalid_parameter, "order must be >= 0");
  if (!(step > 0)) fail(ErrorKind::invalid_parameter, "step must be > 0");
  if (ladder.empty())
    fail(ErrorKind::insufficient_points, "empty epsilon ladder");
  for (size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0))
      fail(ErrorKind::invalid_parameter, "ladder rungs must be > 0");
    if (i > 0 && !(ladder[i] < ladder[i - 1]))
      fail(ErrorKind::invalid_parameter, "ladder must decrease");
  }
  // the pre "order <= m" binds the smooth kinds; a jump density past its
  // class is exactly the unbounded branch of the dichotomy, so it runs with
  // sup_f = +inf instead of being refused
  if (order > f.m && f.kind != DensityKind::uniform)
    fail(ErrorKind::derivative_order_exceeded,
         "order beyond the density's smoothness class");

  BorelGrowthReport rep;
  rep.order = order;
  rep.ladder = ladder;
  rep.sup_f = order <= f.m ? f.sup_norm(order)
                           : std::numeric_limits<double>::infinity();

  std::vector<double> grid;
  for (double e = i_lo; e < i_hi - 1e-12; e += step) grid.push_back(e);
  grid.push_back(i_hi);
  for (double endpoint : {f.a, f.b})
    if (std::isfinite(endpoint) && endpoint > i_lo && endpoint < i_hi)
      grid.push_back(endpoint);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double x, double y) {
                           return std::abs(x - y) < 1e-12;
                         }),
             grid.end());
  rep.e_grid = grid;

  double factorial = 1;
  for (int k = 2; k <= order; ++k) factorial *= k;
  QuadOptions opt;
  opt.abs_tol = 1e-12;
  opt.rel_tol = 1e-9;
  for (double eps : ladder) {
    double sup = 0;
    for (double e : grid) {
      const Complex zz = Complex(e, eps);
      auto g = [&f, zz, order](double x) {
        return f(x) / std::pow(x - zz, order + 1);
      };
      Complex val;
      if (std::isinf(f.a))
        val = integrate_line(g, opt).value;
      else
        val = integrate(g, f.a, f.b, opt).value;
      sup = std::max(sup, std::abs(factorial * val.imag()));
    }
    rep.sup_im.push_back(sup);
  }
  const auto [lo_it, hi_it] =
      std::minmax_element(rep.sup_im.begin(), rep.sup_im.end());
  rep.bounded = *hi_it < 2.0 * *lo_it;
  for (size_t i = 0; i + 1 < rep.sup_im.size(); ++i)
    rep.step_ratio.push_back(rep.sup_im[i + 1] / rep.sup_im[i]);
  return rep;
}

SmoothnessReport smoothness_diagnostic(const DOSCurve& curve, int p) {
  if (p < 1) fail(ErrorKind::invalid_parameter, "p must be >= 1");
  if (p > 3)
    fail(ErrorKind::derivative_order_exceeded,
         "stencils are tabulated up to order 3");
  const bool use_ids = !curve.ids.empty();
  const std::vector<double>& target = use_ids ? curve.ids : curve.rho;
  const std::vector<double>& se_in = use_ids ? curve.ids_se : curve.se;
  const int n = int(target.size());
  if (n < 13 || int(curve.e_grid.size()) != n)
    fail(ErrorKind::grid_too_coarse,
         "need >= 13 tabulated points for the stride-2 stencil");
  if (!(curve.h > 0))
    fail(ErrorKind::invalid_parameter, "curve step must be > 0");
  std::vector<double> se(n, 0.0);
  if (!se_in.empty()) se = se_in;

  double scale = 0;
  for (double v : target) scale = std::max(scale, std::abs(v));

  SmoothnessReport rep;
  rep.p = p;
  rep.h = 2.0 * curve.h;
  const bool band_known = curve.band_lo < curve.band_hi;
  for (int ell = 1; ell <= p; ++ell) {
    rep.signal_points[ell] = 0;
    rep.support_points[ell] = 0;
    rep.break_points[ell] = 0;
  }
  for (int j = 6; j + 6 < n; ++j) {
    const double e = curve.e_grid[j];
    if (band_known &&
        (e < curve.band_lo + 0.1 || e > curve.band_hi - 0.1))
      continue;
    rep.e_grid.push_back(e);
    for (int ell = 1; ell <= p; ++ell) {
      const double* st = stencil(ell);
      const double hf = std::pow(curve.h, ell);
      const double hc = std::pow(2.0 * curve.h, ell);
      double fine = 0, coarse = 0, var = 0;
      for (int i = -3; i <= 3; ++i) {
        fine += st[i + 3] * target[j + i];
        coarse += st[i + 3] * target[j + 2 * i];
        var += st[i + 3] * st[i + 3] * se[j + i] * se[j + i];
      }
      fine /= hf;
      coarse /= hc;
      const double floor = 1e-9 * scale / hf;

      double fine_se = std::sqrt(var) / hf;
      double defect_se = 2.0 * fine_se;  // conservative fallback
      auto it = curve.stencil_se_fine.find(ell);
      if (it != curve.stencil_se_fine.end() &&
          std::isfinite(it->second[j])) {
        fine_se = it->second[j];
        defect_se = curve.stencil_se_defect.at(ell)[j];
      }

      const bool signal = std::abs(fine) >= std::max(5.0 * fine_se, floor);
      rep.deriv_fine[ell].push_back(fine);
      rep.deriv_coarse[ell].push_back(coarse);
      rep.deriv_se[ell].push_back(fine_se);
      if (!signal) {
        rep.ratio[ell].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      rep.signal_points[ell] += 1;
      const double ratio = coarse / fine;
      rep.ratio[ell].push_back(ratio);
      if (ratio >= 0.8 && ratio <= 1.2) {
        rep.support_points[ell] += 1;
      } else if (std::abs(coarse - fine) >=
                 std::max(5.0 * defect_se, floor)) {
        rep.break_points[ell] += 1;
      }  // else: too noisy to call either way
    }
  }
  if (rep.e_grid.empty())
    fail(ErrorKind::grid_too_coarse,
         "no interior points survive the band-edge exclusion");

  bool any_break = false, any_starved = false;
  for (int ell = 1; ell <= p; ++ell) {
    rep.order_ok[ell] =
        rep.support_points[ell] > 0 && rep.break_points[ell] == 0;
    if (rep.break_points[ell] > 0) any_break = true;
    if (!rep.order_ok[ell]) any_starved = true;
  }
  rep.verdict =
      any_break ? "fail" : (any_starved ? "withheld" : "smooth-to-p");
  rep.smooth_to_p = rep.verdict == "smooth-to-p";
  return rep;
}

}  // namespace bethe
