#pragma once
#include <cstdint>
#include <functional>
#include <vector>

namespace bethe {

// Fixed-block Monte Carlo tally.  Sample i belongs to block i mod blocks;
// each block is summed by exactly one worker in increasing sample order and
// block sums are merged pairwise in block order, so every aggregate is a pure
// function of (n_samples, width, blocks, fill) — worker count never shows.
struct BlockTally {
  std::int64_t n_samples = 0;
  int width = 0;
  int blocks = 0;
  std::vector<double> block_sums;  // blocks x width, row-major
  std::vector<std::int64_t> block_counts;
  std::vector<double> total;

  std::vector<double> mean() const;
  std::vector<double> loo_mean(int skip_block) const;
  std::vector<double> jackknife_se() const;  // delete-block, per component
};

BlockTally run_blocks(std::int64_t n_samples, int width, int blocks,
                      int workers,
                      const std::function<void(std::int64_t, double*)>& fill);

// delete-block jackknife SE of an arbitrary functional of the mean vector
double jackknife_se_of(
    const BlockTally& t,
    const std::function<double(const std::vector<double>&)>& f);

double pairwise_sum(const double* v, std::int64_t n);

struct WlsFit {
  double slope = 0, intercept = 0;
  double slope_se = 0, intercept_se = 0;
  double r_squared = 0;
  std::vector<double> residuals;
};

// weighted least squares for y = intercept + slope * x, weights 1/sigma^2
WlsFit wls_line(const std::vector<double>& x, const std::vector<double>& y,
                const std::vector<double>& sigma);

}  // namespace bethe
