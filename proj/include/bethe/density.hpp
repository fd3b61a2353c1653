#pragma once
#include <cstdint>
#include <vector>

#include "bethe/rng.hpp"

namespace bethe {

enum class DensityKind { bump, uniform, cauchy };

struct PotentialSample {
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::int64_t attempts = 0;  // rng draws consumed, incl. floor rejections
};

// Single-site density with closed-form derivatives up to order m, exact
// normalization, and a deterministic inverse-CDF sampler.  Immutable after
// construction; safe to share across workers.
struct SmoothDensity {
  static constexpr double kFloor = 1e-12;

  DensityKind kind = DensityKind::uniform;
  int m = 0;          // guaranteed global smoothness order (api cap for cauchy)
  double a = 0, b = 1;  // support; +-inf for cauchy
  double width = 1;     // bump half-width or cauchy scale
  bool oracle_only = false;

  // g^(k)(x) in closed form, 0 <= k <= m
  double derivative(int k, double x) const;
  double operator()(double x) const { return derivative(0, x); }
  double cdf(double x) const;
  double sup_norm(int k) const;  // ||g^(k)||_inf, precomputed
  double l1_norm(int k) const;   // ||g^(k)||_1, precomputed

  // one floor-resampled draw; bumps *attempts once per rng use
  double draw(Rng& rng, std::int64_t* attempts = nullptr) const;

  // internal tables (filled by the factories)
  std::vector<std::vector<double>> poly;  // bump: coeffs of P^(k)(u), u=x/width
  double norm_c = 1;                      // bump normalization constant
  std::vector<double> sup_norms, l1_norms;
  std::vector<double> inv_u, inv_x, inv_s;  // monotone inverse-CDF table
};

SmoothDensity make_polynomial_bump(int m, double half_width);
SmoothDensity make_uniform(double a, double b);
SmoothDensity make_cauchy(double gamma);  // oracle-only, infinite support

PotentialSample sample(const SmoothDensity& d, std::uint64_t seed,
                       std::uint64_t stream, std::int64_t count);

// Complete Bell polynomial B_ell in the power sums of (log g)^(j) over the
// sample: the weight W_ell with E[G W_ell] = d^ell/dE^ell E[G] up to the
// lambda^-ell factor applied by the moment layer.
double score_weight(const SmoothDensity& d, const PotentialSample& s, int ell);

// C-infinity step: 0 for x <= 0, 1 for x >= 1.
double smooth_step(double x);
// C-infinity plateau: 1 on [a, b], 0 outside [a - width, b + width].
double plateau(double x, double a, double b, double width = 1.0);

}  // namespace bethe
