#include "bethe/density.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "bethe/errors.hpp"

namespace bethe {

namespace {

constexpr double pi = std::numbers::pi_v<double>;

double poly_eval(const std::vector<double>& c, double u) {
  double v = 0;
  for (size_t j = c.size(); j-- > 0;) v = v * u + c[j];
  return v;
}

std::vector<double> poly_diff(const std::vector<double>& c) {
  std::vector<double> d;
  for (size_t j = 1; j < c.size(); ++j) d.push_back(j * c[j]);
  if (d.empty()) d.push_back(0);
  return d;
}

// sign-change roots of a polynomial on (lo, hi), scan plus bisection
std::vector<double> poly_roots(const std::vector<double>& c, double lo,
                               double hi) {
  std::vector<double> roots;
  const int n = 4096;
  double prev = poly_eval(c, lo);
  for (int i = 1; i <= n; ++i) {
    const double u = lo + (hi - lo) * i / n;
    const double cur = poly_eval(c, u);
    if (prev == 0.0) roots.push_back(lo + (hi - lo) * (i - 1) / n);
    if (prev * cur < 0) {
      double x0 = lo + (hi - lo) * (i - 1) / n, x1 = u, f0 = prev;
      for (int it = 0; it < 100; ++it) {
        const double xm = 0.5 * (x0 + x1), fm = poly_eval(c, xm);
        if (f0 * fm <= 0)
          x1 = xm;
        else
          x0 = xm, f0 = fm;
      }
      roots.push_back(0.5 * (x0 + x1));
    }
    prev = cur;
  }
  return roots;
}

// Im[(x - i*gamma)^-(k+1)] by repeated complex multiplication
double cauchy_deriv(int k, double gamma, double x) {
  const std::complex<double> w = 1.0 / std::complex<double>(x, -gamma);
  std::complex<double> p = w;
  for (int j = 0; j < k; ++j) p *= w;
  double fact = 1;
  for (int j = 2; j <= k; ++j) fact *= j;
  const double parity = (k % 2 == 0) ? 1.0 : -1.0;
  return parity * fact / pi * p.imag();
}

// interior critical set of the cauchy g^(k): zeros of Im[(x-i*gamma)^(k+1)]
std::vector<double> cauchy_deriv_roots(int k, double gamma) {
  std::vector<double> r;
  for (int j = 1; j <= k; ++j)
    r.push_back(gamma / std::tan(j * pi / (k + 1)));
  std::sort(r.begin(), r.end());
  return r;
}

void build_inverse_table(SmoothDensity& d) {
  const int n = 1 << 14;  // Chebyshev-spaced in x, clustered at the endpoints
  const double c = 0.5 * (d.a + d.b), h = 0.5 * (d.b - d.a);
  std::vector<double> u, x;
  for (int i = 0; i < n; ++i) {
    const double xi = c - h * std::cos(pi * i / (n - 1));
    const double ui = d.cdf(xi);
    if (!u.empty() && ui <= u.back()) continue;  // flat-tail nodes collapse
    u.push_back(ui);
    x.push_back(xi);
  }
  u.front() = 0;
  u.back() = 1;
  x.front() = d.a;
  x.back() = d.b;

  // Fritsch-Carlson monotone slopes for x(u)
  const size_t np = u.size();
  std::vector<double> hh(np - 1), dd(np - 1), s(np);
  for (size_t i = 0; i + 1 < np; ++i) {
    hh[i] = u[i + 1] - u[i];
    dd[i] = (x[i + 1] - x[i]) / hh[i];
  }
  auto clamp_end = [](double slope, double secant) {
    if (slope * secant <= 0) return 0.0;
    if (std::abs(slope) > 3 * std::abs(secant)) return 3 * secant;
    return slope;
  };
  s[0] = clamp_end(((2 * hh[0] + hh[1]) * dd[0] - hh[0] * dd[1]) /
                       (hh[0] + hh[1]),
                   dd[0]);
  s[np - 1] = clamp_end(((2 * hh[np - 2] + hh[np - 3]) * dd[np - 2] -
                         hh[np - 2] * dd[np - 3]) /
                            (hh[np - 2] + hh[np - 3]),
                        dd[np - 2]);
  for (size_t i = 1; i + 1 < np; ++i) {
    const double w1 = 2 * hh[i] + hh[i - 1], w2 = hh[i] + 2 * hh[i - 1];
    s[i] = (w1 + w2) / (w1 / dd[i - 1] + w2 / dd[i]);
  }
  d.inv_u = std::move(u);
  d.inv_x = std::move(x);
  d.inv_s = std::move(s);
}

double inverse_interp(const SmoothDensity& d, double u) {
  const auto& U = d.inv_u;
  const auto& X = d.inv_x;
  const auto& S = d.inv_s;
  size_t i =
      std::upper_bound(U.begin(), U.end(), u) - U.begin();
  i = std::clamp<size_t>(i, 1, U.size() - 1) - 1;
  const double h = U[i + 1] - U[i], t = (u - U[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * X[i] + (t3 - 2 * t2 + t) * h * S[i] +
         (-2 * t3 + 3 * t2) * X[i + 1] + (t3 - t2) * h * S[i + 1];
}

// total variation of g^(k-1) between consecutive extrema = ||g^(k)||_1,
// exact because g^(k-1) is the antiderivative in closed form
double tv_from_crit(const SmoothDensity& d, int k,
                    const std::vector<double>& crit, double boundary_value) {
  double tv = 0, prev = boundary_value;
  for (double x : crit) {
    const double v = d.derivative(k - 1, x);
    tv += std::abs(v - prev);
    prev = v;
  }
  tv += std::abs(boundary_value - prev);
  return tv;
}

void fill_norms(SmoothDensity& d) {
  d.sup_norms.assign(d.m + 1, 0);
  d.l1_norms.assign(d.m + 1, 0);
  for (int k = 0; k <= d.m; ++k) {
    std::vector<double> cand;
    if (d.kind == DensityKind::bump) {
      for (double u : poly_roots(d.poly[k + 1], -1, 1))
        cand.push_back(u * d.width);
      cand.push_back(d.a);
      cand.push_back(d.b);
    } else if (d.kind == DensityKind::cauchy) {
      cand = cauchy_deriv_roots(k + 1, d.width);
      cand.push_back(0);
    } else {
      cand = {0.5 * (d.a + d.b)};
    }
    double sup = 0;
    for (double x : cand) sup = std::max(sup, std::abs(d.derivative(k, x)));
    d.sup_norms[k] = sup;

    if (k == 0) {
      d.l1_norms[0] = 1;  // normalized nonnegative density
    } else if (d.kind == DensityKind::bump) {
      std::vector<double> crit;
      for (double u : poly_roots(d.poly[k], -1, 1)) crit.push_back(u * d.width);
      d.l1_norms[k] = tv_from_crit(d, k, crit, 0.0);
    } else {
      d.l1_norms[k] = tv_from_crit(d, k, cauchy_deriv_roots(k, d.width), 0.0);
    }
  }
}

}  // namespace

double SmoothDensity::derivative(int k, double x) const {
  if (k < 0 || k > m)
    fail(ErrorKind::derivative_order_exceeded,
         "derivative order " + std::to_string(k) + " exceeds smoothness " +
             std::to_string(m));
  switch (kind) {
    case DensityKind::uniform:
      return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0;
    case DensityKind::cauchy:
      return cauchy_deriv(k, width, x);
    case DensityKind::bump: {
      if (x <= a || x >= b) return 0.0;
      double scale = norm_c;
      for (int j = 0; j < k; ++j) scale /= width;
      return scale * poly_eval(poly[k], x / width);
    }
  }
  return 0;
}

double SmoothDensity::cdf(double x) const {
  switch (kind) {
    case DensityKind::uniform:
      return std::clamp((x - a) / (b - a), 0.0, 1.0);
    case DensityKind::cauchy:
      return 0.5 + std::atan(x / width) / pi;
    case DensityKind::bump: {
      if (x <= a) return 0;
      if (x >= b) return 1;
      // antiderivative of the normalized polynomial
      const auto& p = poly[0];
      double q = 0, qa = 0;
      const double u = x / width;
      for (size_t j = p.size(); j-- > 0;) {
        q = q * u + p[j] / (j + 1);
        qa = qa * (-1.0) + p[j] / (j + 1);
      }
      q *= u;
      qa *= -1.0;
      return std::clamp(norm_c * width * (q - qa), 0.0, 1.0);
    }
  }
  return 0;
}

double SmoothDensity::sup_norm(int k) const {
  if (k < 0 || k >= static_cast<int>(sup_norms.size()))
    fail(ErrorKind::derivative_order_exceeded, "sup_norm order out of range");
  return sup_norms[k];
}

double SmoothDensity::l1_norm(int k) const {
  if (k < 0 || k >= static_cast<int>(l1_norms.size()))
    fail(ErrorKind::derivative_order_exceeded, "l1_norm order out of range");
  return l1_norms[k];
}

double SmoothDensity::draw(Rng& rng, std::int64_t* attempts) const {
  for (int tries = 0; tries < 1000; ++tries) {
    const double u = rng.next_double();
    if (attempts) ++*attempts;
    double x = 0;
    switch (kind) {
      case DensityKind::uniform:
        x = a + (b - a) * u;
        break;
      case DensityKind::cauchy:
        x = width * std::tan(pi * (u - 0.5));
        break;
      case DensityKind::bump:
        x = inverse_interp(*this, u);
        break;
    }
    if (derivative(0, x) >= kFloor) return x;
  }
  fail(ErrorKind::degenerate_density,
       "density floor rejected 1000 consecutive draws");
}

SmoothDensity make_polynomial_bump(int m, double half_width) {
  if (m < 0 || m > 20 || !(half_width > 0) || !std::isfinite(half_width))
    fail(ErrorKind::invalid_parameter, "bump needs 0 <= m <= 20, width > 0");
  SmoothDensity d;
  d.kind = DensityKind::bump;
  d.m = m;
  d.width = half_width;
  d.a = -half_width;
  d.b = half_width;

  // P(u) = (1 - u^2)^(m+1), expanded; derivative tables up to order m+2
  std::vector<double> p(2 * m + 3, 0.0);
  double binom = 1;
  for (int j = 0; j <= m + 1; ++j) {
    p[2 * j] = (j % 2 == 0 ? 1.0 : -1.0) * binom;
    binom = binom * (m + 1 - j) / (j + 1);
  }
  d.poly.push_back(p);
  for (int k = 0; k < m + 2; ++k) d.poly.push_back(poly_diff(d.poly.back()));

  // int_{-1}^{1} (1-u^2)^n du by the ratio recurrence I_n = I_{n-1} 2n/(2n+1)
  double I = 2;
  for (int n = 1; n <= m + 1; ++n) I = I * (2.0 * n) / (2.0 * n + 1.0);
  d.norm_c = 1.0 / (half_width * I);

  fill_norms(d);
  build_inverse_table(d);
  return d;
}

SmoothDensity make_uniform(double a, double b) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b))
    fail(ErrorKind::invalid_parameter, "uniform needs a < b, both finite");
  SmoothDensity d;
  d.kind = DensityKind::uniform;
  d.m = 0;
  d.a = a;
  d.b = b;
  fill_norms(d);
  return d;
}

SmoothDensity make_cauchy(double gamma) {
  if (!(gamma > 0) || !std::isfinite(gamma))
    fail(ErrorKind::invalid_parameter, "cauchy needs gamma > 0");
  SmoothDensity d;
  d.kind = DensityKind::cauchy;
  d.m = 8;  // api cap; analytically smooth to all orders
  d.width = gamma;
  d.a = -std::numeric_limits<double>::infinity();
  d.b = std::numeric_limits<double>::infinity();
  d.oracle_only = true;
  fill_norms(d);
  return d;
}

PotentialSample sample(const SmoothDensity& d, std::uint64_t seed,
                       std::uint64_t stream, std::int64_t count) {
  if (count < 1) fail(ErrorKind::invalid_parameter, "count must be >= 1");
  PotentialSample s;
  s.seed = seed;
  s.stream = stream;
  s.values.reserve(count);
  Rng rng(seed, stream);
  for (std::int64_t i = 0; i < count; ++i)
    s.values.push_back(d.draw(rng, &s.attempts));
  return s;
}

double score_weight(const SmoothDensity& d, const PotentialSample& s,
                    int ell) {
  if (ell < 1) fail(ErrorKind::invalid_parameter, "score order must be >= 1");
  if (ell > d.m)
    fail(ErrorKind::derivative_order_exceeded,
         "score order " + std::to_string(ell) + " exceeds smoothness " +
             std::to_string(d.m));

  // power sums of the log-derivatives over the sample
  std::vector<double> S(ell + 1, 0);
  std::vector<double> r(ell + 1, 0), L(ell + 1, 0);
  for (double w : s.values) {
    const double g = d.derivative(0, w);
    if (g < SmoothDensity::kFloor)
      fail(ErrorKind::degenerate_density, "sample value grazes the support");
    r[0] = 1;
    for (int k = 1; k <= ell; ++k) r[k] = d.derivative(k, w) / g;
    // invert g^(n+1)/g = sum_i C(n,i) r_{n-i} L_{i+1} for the L_j
    for (int n = 0; n < ell; ++n) {
      double acc = r[n + 1], c = 1;
      for (int i = 0; i <= n - 1; ++i) {
        acc -= c * r[n - i] * L[i + 1];
        c = c * (n - i) / (i + 1);
      }
      L[n + 1] = acc;
    }
    for (int j = 1; j <= ell; ++j) S[j] += L[j];
  }

  // complete Bell polynomial by its binomial recurrence
  std::vector<double> B(ell + 1, 0);
  B[0] = 1;
  for (int n = 0; n < ell; ++n) {
    double acc = 0, c = 1;
    for (int i = 0; i <= n; ++i) {
      acc += c * B[n - i] * S[i + 1];
      c = c * (n - i) / (i + 1);
    }
    B[n + 1] = acc;
  }
  return B[ell];
}

double smooth_step(double x) {
  auto psi = [](double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; };
  const double p = psi(x), q = psi(1 - x);
  return p / (p + q);
}

double plateau(double x, double a, double b, double width) {
  return smooth_step((x - (a - width)) / width) *
         smooth_step(((b + width) - x) / width);
}

}  // namespace bethe
