#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "bethe/errors.hpp"
#include "bethe/moments.hpp"
#include "bethe/quad.hpp"

using namespace bethe;
using doctest::Approx;

namespace {

MomentConfig base_config() {
  MomentConfig c;
  c.K = 2;
  c.L = 3;
  c.lambda = 10;
  c.s = 0.5;
  c.density = {DensityKind::bump, 4, 1.0, -1, 1, 1.0};
  c.sample_count = 500;
  c.seed = 42;
  c.blocks = 50;
  return c;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a bethe::Error");
  return ErrorKind::invalid_parameter;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = base_config();
  validate(c);  // good config passes

  auto bad = c;
  bad.K = 0;
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::invalid_parameter);
  bad = c;
  bad.s = 2.0;
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::invalid_parameter);
  bad = c;
  bad.epsilon_ladder = {0.1, 0.1};
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::invalid_parameter);
  bad = c;
  bad.epsilon_ladder.clear();
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::invalid_parameter);
  bad = c;
  bad.p = 5;  // bump has m = 4
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::invalid_parameter);
  bad = c;
  bad.sample_count = 0;
  CHECK(kind_of([&] { validate(bad); }) == ErrorKind::invalid_parameter);

  // s in (1,2) is allowed at config level (comparison sweep) but refused by
  // the fractional-moment ops
  auto wide = c;
  wide.s = 1.5;
  validate(wide);
  CHECK(kind_of([&] {
          fractional_moment_curve(wide, {0.0, 0.1});
        }) == ErrorKind::invalid_parameter);

  auto cau = c;
  cau.density.kind = DensityKind::cauchy;
  CHECK(kind_of([&] {
          fractional_moment_curve(cau, {0.0, 0.1});
        }) == ErrorKind::invalid_parameter);

  auto huge = c;
  huge.sample_count = kSampleWorkBudget;
  CHECK(kind_of([&] {
          fractional_moment_curve(huge, {0.0, 0.1});
        }) == ErrorKind::budget_exceeded);

  const auto grid = energy_grid(c);
  CHECK(grid.size() == 21);
  CHECK(grid.front() == Approx(-1.0));
  CHECK(grid.back() == Approx(1.0));
}

TEST_CASE("free curve equals the scalar path product") {
  auto c = base_config();
  c.lambda = 0;  // free model; omega irrelevant
  c.L = 5;
  c.sample_count = 3;
  c.blocks = 3;
  const SpectralPoint z{0.3, 0.7};
  const auto curve = fractional_moment_curve(c, z);

  // depth factors from the scalar radial recursion: a vertex at depth dd
  // roots a subtree of height L-dd
  const Complex zz = z.z();
  std::vector<Complex> gam(c.L);  // gam[h] for heights 0..L-1
  gam[0] = 1.0 / (-zz);
  for (int h = 1; h < c.L; ++h) gam[h] = 1.0 / (-zz - 2.0 * gam[h - 1]);
  const Complex root = 1.0 / (-zz - 3.0 * gam[c.L - 1]);

  Complex path = root;
  for (int dd = 0; dd <= c.L; ++dd) {
    if (dd > 0) path *= -gam[c.L - dd];
    CHECK(curve.shells[dd].mean ==
          Approx(std::pow(std::abs(path), c.s)).epsilon(1e-12));
    CHECK(curve.shells[dd].se <= 1e-15);  // identical samples, rounding only
  }
}

TEST_CASE("diagonal entry and high-disorder monotone decay") {
  auto c = base_config();
  c.L = 8;
  c.lambda = 20;
  c.sample_count = 1500;
  const SpectralPoint z{0.1, 0.1};
  const auto curve = fractional_moment_curve(c, z);
  CHECK(curve.shells[0].mean > 0);
  CHECK(curve.shells[0].shell_size == 1);
  // observed Monte Carlo property at high disorder (fixed seed)
  for (int dd = 1; dd < 8; ++dd)
    CHECK(curve.shells[dd + 1].mean < curve.shells[dd].mean);
}

TEST_CASE("worker count never changes a campaign") {
  auto c = base_config();
  c.sample_count = 300;
  const SpectralPoint z{0.2, 0.5};
  auto c4 = c;
  c4.workers = 4;
  const auto a = fractional_moment_curve(c, z);
  const auto b = fractional_moment_curve(c4, z);
  for (int dd = 0; dd <= c.L; ++dd) {
    CHECK(a.shells[dd].mean == b.shells[dd].mean);
    CHECK(a.shells[dd].se == b.shells[dd].se);
  }
}

TEST_CASE("decay fit on synthetic curves") {
  std::vector<ShellMoment> exact;
  for (int dd = 0; dd <= 8; ++dd)
    exact.push_back({dd, std::exp(-0.9 * dd), 0.0, 1});
  const auto f = fit_decay_rate(exact);
  CHECK(f.xi == Approx(0.9).epsilon(1e-6));
  CHECK(f.r_squared == Approx(1.0).epsilon(1e-9));
  CHECK(f.fitted_d.size() == 9);

  Rng rng(7);
  std::vector<ShellMoment> noisy;
  for (int dd = 0; dd <= 8; ++dd) {
    const double m = std::exp(-0.9 * dd);
    noisy.push_back({dd, m * (1 + 0.01 * rng.normal()), 0.01 * m, 1});
  }
  const auto g = fit_decay_rate(noisy);
  CHECK(std::abs(g.xi - 0.9) <= 3 * g.xi_se);

  // shells failing the 10x-SE cut drop out
  auto cut = exact;
  cut[8].se = cut[8].mean;  // 1x only
  CHECK(fit_decay_rate(cut).fitted_d.size() == 8);

  CHECK(kind_of([&] {
          fit_decay_rate({{0, 1.0, 0.0, 1}, {1, 0.5, 0.0, 1}});
        }) == ErrorKind::insufficient_points);
  CHECK(kind_of([&] {
          fit_decay_rate({{0, 1.0, 0.0, 1}, {1, -0.5, 0.0, 1}, {2, 1.0, 0.0, 1}, {3, 1.0, 0.0, 1}});
        }) == ErrorKind::nonpositive_mean);
}

TEST_CASE("jackknife-of-fit error on a sampled curve") {
  auto c = base_config();
  c.L = 5;
  c.sample_count = 1200;
  const auto curve = fractional_moment_curve(c, {0.0, 0.2});
  const auto plain = fit_decay_rate(curve.shells);
  const auto jk = fit_decay_rate(curve);
  CHECK(jk.xi == Approx(plain.xi));  // same center
  CHECK(jk.xi_se > 0);
  CHECK(std::isfinite(jk.xi_se));
  CHECK(jk.xi > 0);  // localized regime decays
}

TEST_CASE("threshold arithmetic") {
  DecayFit f;
  f.xi = 9.0;
  f.xi_se = 0.1;
  const auto r = threshold_check(f, 2, 1);
  CHECK(r.threshold == Approx(8.0 * std::log(3.0)).epsilon(1e-12));
  CHECK(r.margin == Approx(9.0 - 8.0 * std::log(3.0)).epsilon(1e-9));
  CHECK(r.margin == Approx(0.211).epsilon(1e-2));
  CHECK(r.in_hypothesis);

  const auto r2 = threshold_check(f, 1, 2);
  CHECK(r2.threshold == Approx(10.0 * std::log(2.0)).epsilon(1e-12));
  CHECK_FALSE(threshold_check(f, 2, 3).in_hypothesis);  // 16 ln 3 > 9
}

TEST_CASE("resolvent difference campaign") {
  auto c = base_config();
  c.lambda = 12;
  c.sample_count = 600;

  // the forward-pass difference used by the campaign matches the dual-route
  // oracle sample by sample
  const TreeTopology inner = build_tree(c.K, 2), outer = build_tree(c.K, 3);
  const SmoothDensity d = make_density(c.density);
  const SpectralPoint z{0.1, 0.2};
  for (int i = 0; i < 5; ++i) {
    auto pot = sample(d, c.seed, i, outer.N);
    const Complex g_in = forward_factors(inner, c.lambda, pot.values, z).root;
    const Complex g_out = forward_factors(outer, c.lambda, pot.values, z).root;
    const auto h = assemble(outer, c.lambda, pot);
    const auto rd = resolvent_difference(h, z);
    CHECK(std::abs((g_out - g_in) - rd.direct_diff) < 1e-10);
  }

  const auto rep = resolvent_diff_moment(c, 1, 4, z, 5.5);
  CHECK(rep.power == Approx(0.25));
  REQUIRE(rep.moments.size() == 4);
  for (int k = 0; k + 1 < 4; ++k)  // geometric decrease at high disorder
    CHECK(rep.moments[k + 1].mean < rep.moments[k].mean);
  REQUIRE(rep.bound_curve.size() == 4);
  CHECK(rep.fitted_B > 0);
  CHECK(rep.xi_used == 5.5);

  // 1-D control: decay already visible at lambda = 5
  auto c1 = c;
  c1.K = 1;
  c1.lambda = 5;
  c1.sample_count = 800;
  const auto rep1 = resolvent_diff_moment(c1, 1, 5, z);
  CHECK(rep1.bound_curve.empty());
  CHECK(rep1.moments.back().mean < rep1.moments.front().mean);
}

TEST_CASE("score estimator at ell=0 is the plain mean") {
  auto c = base_config();
  c.L = 2;
  c.sample_count = 400;
  c.e_min = -0.4;
  c.e_max = 0.4;
  c.e_step = 0.4;
  c.epsilon_ladder = {0.3};
  const auto est = derivative_estimator_score(c, 0);
  REQUIRE(est.e_grid.size() == 3);
  CHECK(est.method == "score-weight");

  const TreeTopology t = build_tree(c.K, c.L);
  const SmoothDensity d = make_density(c.density);
  for (size_t j = 0; j < est.e_grid.size(); ++j) {
    Complex acc{0, 0};
    for (std::int64_t i = 0; i < c.sample_count; ++i) {
      const auto pot = sample(d, c.seed, i, t.N);
      acc += forward_factors(t, c.lambda, pot.values,
                             {est.e_grid[j], 0.3})
                 .root;
    }
    acc /= static_cast<double>(c.sample_count);
    CHECK(std::abs(est.values[j] - acc) < 1e-12);
  }
}

TEST_CASE("single-site score estimator vs quadrature oracle") {
  auto c = base_config();
  c.L = 0;  // one vertex
  c.lambda = 2;
  c.sample_count = 40000;
  c.e_min = -0.3;
  c.e_max = 0.3;
  c.e_step = 0.3;
  c.epsilon_ladder = {0.3};
  const auto est = derivative_estimator_score(c, 1);
  const SmoothDensity d = make_density(c.density);
  for (size_t j = 0; j < est.e_grid.size(); ++j) {
    const Complex z{est.e_grid[j], 0.3};
    const Complex oracle =
        integrate(
            [&](double v) {
              const Complex den = c.lambda * v - z;
              return d(v) / (den * den);
            },
            d.a, d.b)
            .value;
    CHECK(std::abs(est.values[j] - oracle) <= 3 * est.se[j]);
    CHECK(est.se[j] > 0);
  }
}

TEST_CASE("score vs finite difference at K=2, L=1") {
  auto c = base_config();
  c.L = 1;
  c.lambda = 4;
  c.sample_count = 20000;
  c.e_min = -0.4;
  c.e_max = 0.4;
  c.e_step = 0.1;
  c.epsilon_ladder = {0.5};
  const auto sc = derivative_estimator_score(c, 1);
  const auto fd = derivative_estimator_fd(c, 1);
  REQUIRE(sc.values.size() == fd.values.size());
  for (size_t j = 0; j < sc.values.size(); ++j) {
    const double combined = std::hypot(sc.se[j], fd.se[j]);
    CHECK(std::abs(sc.values[j] - fd.values[j]) <= 3 * combined);
  }
  CHECK_FALSE(sc.variance_explosion);
}

TEST_CASE("fd estimator nails the free closed form") {
  auto c = base_config();
  c.lambda = 0;
  c.L = 15;
  c.sample_count = 2;
  c.blocks = 2;
  c.e_min = -0.05;
  c.e_max = 0.05;
  c.e_step = 0.01;
  c.epsilon_ladder = {2.0};
  c.p = 2;
  for (int ell : {1, 2}) {
    const auto fd = derivative_estimator_fd(c, ell);
    const double tol = ell == 1 ? 1e-6 : 1e-4;
    for (size_t j = 0; j < fd.e_grid.size(); ++j) {
      const Complex oracle =
          free_greens_derivative(c.K, {fd.e_grid[j], 2.0}, ell);
      CHECK(std::abs(fd.richardson[j] - oracle) < tol);
      CHECK(std::abs(fd.values[j] - oracle) < 10 * tol);
      CHECK(fd.se[j] == 0.0);  // identical samples
    }
  }
}

TEST_CASE("common random numbers cut the fd variance") {
  auto c = base_config();
  c.L = 2;
  c.lambda = 8;
  c.sample_count = 3000;
  c.e_min = -0.2;
  c.e_max = 0.2;
  c.e_step = 0.1;
  c.epsilon_ladder = {0.5};
  const auto crn = derivative_estimator_fd(c, 1, true);
  const auto ind = derivative_estimator_fd(c, 1, false);
  double se_crn = 0, se_ind = 0;
  for (size_t j = 0; j < crn.se.size(); ++j) {
    se_crn += crn.se[j];
    se_ind += ind.se[j];
  }
  CHECK(se_ind >= 5 * se_crn);
}

TEST_CASE("fd guard rails") {
  auto c = base_config();
  c.e_step = 0.2;
  c.epsilon_ladder = {0.1};
  CHECK(kind_of([&] { derivative_estimator_fd(c, 1); }) ==
        ErrorKind::grid_too_coarse);
  c.epsilon_ladder = {0.5};
  c.p = 4;
  CHECK(kind_of([&] { derivative_estimator_fd(c, 3); }) ==
        ErrorKind::derivative_order_exceeded);
  c.p = 1;
  CHECK(kind_of([&] { derivative_estimator_score(c, 2); }) ==
        ErrorKind::invalid_parameter);
  auto u = c;
  u.density.kind = DensityKind::uniform;
  CHECK(kind_of([&] { derivative_estimator_score(u, 1); }) ==
        ErrorKind::invalid_parameter);
}

TEST_CASE("variance explosion flag on a large tree") {
  // the weight sums |Lambda_8| log-derivatives, so the estimate is pure
  // noise at this budget; the all-points flag is a seed-level event (the
  // ratio SE/|estimate| hovers near 1), frozen here for wiring coverage
  auto c = base_config();
  c.L = 8;
  c.lambda = 10;
  c.sample_count = 300;
  c.seed = 5;
  c.e_min = -0.2;
  c.e_max = 0.2;
  c.e_step = 0.2;
  c.epsilon_ladder = {0.1};
  c.p = 2;
  const auto est = derivative_estimator_score(c, 2);
  CHECK(est.variance_explosion);
  for (size_t j = 0; j < est.values.size(); ++j)
    CHECK(est.se[j] > std::abs(est.values[j]));
}

TEST_CASE("one-site bound: lorentzian mass and both bounds") {
  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const double A = rng.uniform(-5, 5);
    const double B = rng.uniform(0.1, 10);
    const double lam = std::vector<double>{5, 10, 20}[rep % 3];
    const double mass =
        integrate_line([&](double w) {
          const double u = lam * w + A;
          return B / (u * u + B * B);
        }).value;
    CHECK(mass == Approx(std::numbers::pi / lam).epsilon(1e-10));
  }

  const TreeTopology t = build_tree(2, 3);
  const SmoothDensity d = make_polynomial_bump(4, 1.0);
  int lambda_sq_violations = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto pot = sample(d, 1234, rep, t.N);
    const SpectralPoint z{rng.uniform(-0.5, 0.5), 0.01};
    const int k = rep % 5;
    const auto r = one_site_bound_check(t, d, k, 10.0, pot.values, z);
    CHECK(r.lambda_holds);
    CHECK(r.lorentz_mass == Approx(r.lorentz_exact).epsilon(1e-10));
    if (!r.lambda_sq_holds) ++lambda_sq_violations;
  }
  // the lambda^-2 form undershoots the observed value at high disorder
  CHECK(lambda_sq_violations > 0);

  // huge epsilon flattens the kernel: lhs ~ 1/B -> 0
  const auto pot = sample(d, 1234, 0, t.N);
  const auto far = one_site_bound_check(t, d, 0, 10.0, pot.values, {0.0, 1e6});
  CHECK(far.lhs < 2e-6);
}

TEST_CASE("comparison inequality ratios") {
  auto c = base_config();
  c.sample_count = 20;
  const double R = 2.0;  // (b-a)/2 + 1 for the unit bump

  auto run = [&](double s, double eps) {
    auto cc = c;
    cc.s = s;
    std::vector<SpectralPoint> grid;
    for (double e : {-0.5, 0.0, 0.5}) grid.push_back({e, eps});
    return comparison_inequality_check(cc, grid, R);
  };

  const auto r1 = run(0.5, 0.1);
  CHECK(r1.skipped == 0);
  CHECK(r1.xi_hat > 0);
  CHECK(std::isfinite(r1.xi_hat));
  for (const auto& p : r1.points) {
    CHECK(std::isfinite(p.ratio));
    CHECK(p.rhs > 0);
  }

  // bounded along the epsilon ladder (within 2x of each other)
  const double x1 = r1.xi_hat;
  const double x2 = run(0.5, 0.01).xi_hat;
  const double x3 = run(0.5, 0.001).xi_hat;
  const double lo = std::min({x1, x2, x3}), hi = std::max({x1, x2, x3});
  CHECK(hi < 2 * lo);

  // s -> 2^- visibly degrades the ratio
  CHECK(run(1.9, 0.1).xi_hat > 3 * run(0.5, 0.1).xi_hat);

  auto cau = c;
  cau.density.kind = DensityKind::cauchy;
  cau.oracle_mode = true;
  CHECK(kind_of([&] {
          comparison_inequality_check(cau, {{0.0, 0.1}}, R);
        }) == ErrorKind::invalid_parameter);
}

TEST_CASE("diagonal fractional moment stays bounded down the ladder") {
  auto c = base_config();
  c.L = 4;
  c.sample_count = 2000;
  double lo = 1e300, hi = 0;
  for (double eps : {0.1, 0.01, 0.001}) {
    const auto curve = fractional_moment_curve(c, {0.1, eps});
    lo = std::min(lo, curve.shells[0].mean);
    hi = std::max(hi, curve.shells[0].mean);
  }
  CHECK(hi < 3 * lo);
}
