#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "bethe/density.hpp"
#include "bethe/greens.hpp"
#include "bethe/stats.hpp"
#include "bethe/tree.hpp"

namespace bethe {

struct DensitySpec {
  DensityKind kind = DensityKind::bump;
  int m = 4;            // bump smoothness index
  double width = 1.0;   // bump half-width
  double a = -1;        // uniform support
  double b = 1;
  double gamma = 1.0;   // cauchy scale
};

SmoothDensity make_density(const DensitySpec& spec);

// One config object drives every campaign in this module; J = [e_min, e_max]
// with a uniform grid of step e_step, epsilon_ladder strictly decreasing.
struct MomentConfig {
  int K = 2;
  int L = 4;
  double lambda = 10.0;   // 0 allowed (free model, omega irrelevant)
  double s = 0.5;         // fractional power, in (0,1)
  double e_min = -1.0;
  double e_max = 1.0;
  double e_step = 0.1;
  std::vector<double> epsilon_ladder{0.1};
  DensitySpec density;
  std::int64_t sample_count = 1000;
  std::uint64_t seed = 1;
  int p = 1;              // smoothness target, 1 <= p <= m for bumps
  int workers = 1;
  int blocks = 100;
  bool oracle_mode = false;  // lifts the compact-support requirement (cauchy)
};

void validate(const MomentConfig& c);

std::vector<double> energy_grid(const MomentConfig& c);

// samples * vertices cap for a single campaign
constexpr std::int64_t kSampleWorkBudget = 4'000'000'000;

// ---- fractional-moment decay ----

struct ShellMoment {
  int d = 0;
  double mean = 0;
  double se = 0;
  std::int64_t shell_size = 0;
};

struct FractionalMomentCurve {
  SpectralPoint z;
  double s = 0;
  std::vector<ShellMoment> shells;  // d = 0..L
  BlockTally tally;                 // per-shell block sums (width L+1)
};

// Shell-averaged E|G(z;0,n)|^s per distance d, one off-diagonal root row per
// sample.
FractionalMomentCurve fractional_moment_curve(const MomentConfig& c,
                                              const SpectralPoint& z);

struct DecayFit {
  std::vector<ShellMoment> shells;
  std::vector<int> fitted_d;        // distances passing the 10x-SE cut
  double xi = 0;                    // -slope of log mean vs d
  double xi_se = 0;
  double intercept = 0;             // log C_s
  double intercept_se = 0;
  double r_squared = 0;
  std::vector<double> residuals;    // per fitted distance
};

// WLS of log(mean) on d over shells with mean > 10*SE (d >= 1); sigma from
// the delta method.  The curve overload replaces the regression slope error
// with a delete-block jackknife of the whole fit (shells share samples).
DecayFit fit_decay_rate(const std::vector<ShellMoment>& shells);
DecayFit fit_decay_rate(const FractionalMomentCurve& curve);

struct ThresholdReport {
  double threshold = 0;      // 2 ln(K+1) (3+p)
  double margin = 0;         // xi - threshold
  double margin_se = 0;
  bool in_hypothesis = false;
};

ThresholdReport threshold_check(const DecayFit& fit, int K, int p);

// ---- resolvent-difference moments ----

struct DiffMoment {
  int L = 0;
  double mean = 0;  // E|G_{L+1}(0,0) - G_L(0,0)|^{s/2}
  double se = 0;
};

struct DiffMomentReport {
  std::vector<DiffMoment> moments;   // L = L_min..L_max
  double power = 0;                  // s/2 actually used
  // bound shape exp(-(L+1)[xi/2 - ((2L+3)/(L+1)) ln(K+1)]) scaled by a
  // least-squares B_s; empty when no xi was supplied
  std::vector<double> bound_curve;
  double fitted_B = 0;
  double xi_used = 0;
};

// One potential stream per sample over the largest tree; every nested prefix
// reuses it, so the per-L differences are common-random-number paired.
DiffMomentReport resolvent_diff_moment(const MomentConfig& c, int L_min,
                                       int L_max, const SpectralPoint& z,
                                       double xi = 0);

// ---- derivative estimators ----

struct DerivativeEstimate {
  int ell = 0;
  std::vector<double> e_grid;
  std::vector<Complex> values;      // score mean, or fd stencil at step h/2
  std::vector<double> se;           // sqrt(se_re^2 + se_im^2) per grid point
  std::string method;               // "score-weight" | "finite-difference"
  double epsilon = 0;
  std::vector<Complex> coarse;      // fd: stencil at step h
  std::vector<Complex> richardson;  // fd: (64 fine - coarse)/63
  double h = 0;                     // fd stencil base step
  bool variance_explosion = false;  // score: SE > |value| at every point
};

// lambda^{-ell} E[G(E+i eps;0,0) W_ell(omega)] on the E-grid, identical
// streams across E (the weight is E-independent).  ell = 0 is the plain mean.
DerivativeEstimate derivative_estimator_score(const MomentConfig& c, int ell);

// Order-6 central stencils on the CRN curve at steps h = e_step and h/2,
// plus their Richardson pair; crn=false switches to independent streams per
// grid point (for variance comparisons).
DerivativeEstimate derivative_estimator_fd(const MomentConfig& c, int ell,
                                           bool crn = true);

// ---- one-site bounds ----

struct OneSiteBoundResult {
  double lhs = 0;            // |Im int g^(k)(w+E) G(z;0,0)(w) dw|
  double rhs_lambda_sq = 0;  // ||g^(k)||_inf pi / lambda^2 (stated form)
  double rhs_lambda = 0;     // ||g^(k)||_inf pi / lambda (derived form)
  double lorentz_mass = 0;   // quadrature of the kernel mass
  double lorentz_exact = 0;  // pi / lambda
  bool lambda_sq_holds = false;
  bool lambda_holds = false;
};

// Environment frozen (sites != 0), the root potential integrated out against
// g^(k); the site-removed denominator lambda*w + A - iB comes from the
// forward pass on the frozen sample.
OneSiteBoundResult one_site_bound_check(const TreeTopology& t,
                                        const SmoothDensity& d, int k,
                                        double lambda,
                                        const std::vector<double>& frozen,
                                        const SpectralPoint& z);

// ---- comparison inequality ----

struct ComparisonPoint {
  double E = 0;
  double epsilon = 0;
  std::int64_t sample = 0;
  double lhs = 0;    // |int f(w) g(w) dw|, f = rank-one resolvent difference
  double rhs = 0;    // int |f(w)|^{s/2} phi_R(w) dw
  double ratio = 0;
  bool skipped = false;  // both sides vanished
};

struct ComparisonReport {
  std::vector<ComparisonPoint> points;
  double xi_hat = 0;  // sup ratio over valid (z, sample) points
  int skipped = 0;
  double s = 0;
  double R = 0;
};

ComparisonReport comparison_inequality_check(
    const MomentConfig& c, const std::vector<SpectralPoint>& z_grid, double R);

}  // namespace bethe
