#pragma once
#include <cmath>
#include <complex>
#include <numbers>
#include <utility>
#include <vector>

#include "bethe/errors.hpp"

namespace bethe {

// Gauss-Legendre rule on [-1, 1].  Nodes come from Newton iteration on the
// Legendre recurrence at first use; nothing is transcribed from tables.
struct GaussRule {
  std::vector<double> x, w;
};
const GaussRule& gauss_legendre(int n);

struct QuadOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_intervals = 4000;
};

template <class T>
struct QuadResult {
  T value{};
  double error = 0;
  int intervals = 0;
};

namespace detail {

inline double norm_of(double v) { return std::abs(v); }
inline double norm_of(std::complex<double> v) { return std::abs(v); }

template <class F, class T = std::decay_t<decltype(std::declval<F&>()(0.0))>>
std::pair<T, double> pair_rule(F& f, double a, double b) {
  const GaussRule& lo = gauss_legendre(15);
  const GaussRule& hi = gauss_legendre(31);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  T s_lo{}, s_hi{};
  for (size_t i = 0; i < lo.x.size(); ++i)
    s_lo += lo.w[i] * f(mid + half * lo.x[i]);
  for (size_t i = 0; i < hi.x.size(); ++i)
    s_hi += hi.w[i] * f(mid + half * hi.x[i]);
  s_lo *= half;
  s_hi *= half;
  return {s_hi, norm_of(s_hi - s_lo)};
}

}  // namespace detail

// Adaptive bisection on a (15, 31)-point Gauss pair.  Totals are re-summed
// over all pieces each round — the incremental-update shortcut loses digits
// badly when an early estimate is enormous (e.g. a near-singular node).
// Throws quadrature-nonconvergence when the interval budget runs out first.
template <class F, class T = std::decay_t<decltype(std::declval<F&>()(0.0))>>
QuadResult<T> integrate(F&& f, double a, double b, QuadOptions opt = {}) {
  struct Piece {
    double a, b, error;
    T value;
  };
  std::vector<Piece> ps;
  auto [v0, e0] = detail::pair_rule(f, a, b);
  ps.push_back({a, b, e0, v0});
  for (;;) {
    T total{};
    double err = 0;
    size_t worst = 0;
    for (size_t i = 0; i < ps.size(); ++i) {
      total += ps[i].value;
      err += ps[i].error;
      if (ps[i].error > ps[worst].error) worst = i;
    }
    if (err <= std::max(opt.abs_tol, opt.rel_tol * detail::norm_of(total)))
      return {total, err, static_cast<int>(ps.size())};
    if (static_cast<int>(ps.size()) >= opt.max_intervals)
      fail(ErrorKind::quadrature_nonconvergence,
           "interval budget exhausted with error estimate " +
               std::to_string(err));
    const Piece p = ps[worst];
    const double m = 0.5 * (p.a + p.b);
    auto [vl, el] = detail::pair_rule(f, p.a, m);
    auto [vr, er] = detail::pair_rule(f, m, p.b);
    ps[worst] = {p.a, m, el, vl};
    ps.push_back({m, p.b, er, vr});
  }
}

// Integral over the whole real line via x = tan(theta).
template <class F>
auto integrate_line(F&& f, QuadOptions opt = {}) {
  auto g = [&f](double th) {
    const double c = std::cos(th);
    const double x = std::tan(th);
    return f(x) / (c * c);
  };
  constexpr double h = std::numbers::pi_v<double> / 2;
  return integrate(g, -h + 1e-15, h - 1e-15, opt);
}

}  // namespace bethe
