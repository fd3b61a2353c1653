#include "bethe/stats.hpp"

#include <cmath>
#include <thread>

#include "bethe/errors.hpp"

namespace bethe {

double pairwise_sum(const double* v, std::int64_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::int64_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::int64_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

std::vector<double> BlockTally::mean() const {
  std::vector<double> m(total);
  for (double& v : m) v /= static_cast<double>(n_samples);
  return m;
}

std::vector<double> BlockTally::loo_mean(int skip_block) const {
  std::vector<double> m(width);
  const double denom =
      static_cast<double>(n_samples - block_counts[skip_block]);
  for (int j = 0; j < width; ++j)
    m[j] = (total[j] - block_sums[skip_block * width + j]) / denom;
  return m;
}

std::vector<double> BlockTally::jackknife_se() const {
  std::vector<double> se(width, 0.0);
  for (int j = 0; j < width; ++j) {
    std::vector<double> theta(blocks);
    double bar = 0;
    for (int b = 0; b < blocks; ++b) {
      theta[b] = (total[j] - block_sums[b * width + j]) /
                 static_cast<double>(n_samples - block_counts[b]);
      bar += theta[b];
    }
    bar /= blocks;
    double ss = 0;
    for (int b = 0; b < blocks; ++b)
      ss += (theta[b] - bar) * (theta[b] - bar);
    se[j] = std::sqrt((blocks - 1.0) / blocks * ss);
  }
  return se;
}

double jackknife_se_of(
    const BlockTally& t,
    const std::function<double(const std::vector<double>&)>& f) {
  std::vector<double> theta(t.blocks);
  double bar = 0;
  for (int b = 0; b < t.blocks; ++b) {
    theta[b] = f(t.loo_mean(b));
    bar += theta[b];
  }
  bar /= t.blocks;
  double ss = 0;
  for (int b = 0; b < t.blocks; ++b) ss += (theta[b] - bar) * (theta[b] - bar);
  return std::sqrt((t.blocks - 1.0) / t.blocks * ss);
}

BlockTally run_blocks(std::int64_t n_samples, int width, int blocks,
                      int workers,
                      const std::function<void(std::int64_t, double*)>& fill) {
  if (n_samples < 1 || width < 1 || blocks < 1 || workers < 1)
    fail(ErrorKind::invalid_parameter, "run_blocks sizes must be positive");
  blocks = static_cast<int>(std::min<std::int64_t>(blocks, n_samples));

  BlockTally t;
  t.n_samples = n_samples;
  t.width = width;
  t.blocks = blocks;
  t.block_sums.assign(static_cast<size_t>(blocks) * width, 0.0);
  t.block_counts.assign(blocks, 0);

  auto work = [&](int w) {
    std::vector<double> row(width);
    for (int b = w; b < blocks; b += workers) {
      double* sums = &t.block_sums[static_cast<size_t>(b) * width];
      for (std::int64_t i = b; i < n_samples; i += blocks) {
        std::fill(row.begin(), row.end(), 0.0);
        fill(i, row.data());
        for (int j = 0; j < width; ++j) sums[j] += row[j];
        ++t.block_counts[b];
      }
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }

  // pairwise merge in block order, one column at a time
  t.total.assign(width, 0.0);
  std::vector<double> col(blocks);
  for (int j = 0; j < width; ++j) {
    for (int b = 0; b < blocks; ++b) col[b] = t.block_sums[b * width + j];
    t.total[j] = pairwise_sum(col.data(), blocks);
  }
  return t;
}

WlsFit wls_line(const std::vector<double>& x, const std::vector<double>& y,
                const std::vector<double>& sigma) {
  if (x.size() != y.size() || x.size() != sigma.size() || x.size() < 3)
    fail(ErrorKind::insufficient_points, "wls_line needs >= 3 matched points");
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(sigma[i] > 0))
      fail(ErrorKind::invalid_parameter, "weights need sigma > 0");
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    swx += w * x[i];
    swy += w * y[i];
    swxx += w * x[i] * x[i];
    swxy += w * x[i] * y[i];
  }
  const double det = sw * swxx - swx * swx;
  if (!(std::abs(det) > 0))
    fail(ErrorKind::insufficient_points, "degenerate abscissae");

  WlsFit f;
  f.slope = (sw * swxy - swx * swy) / det;
  f.intercept = (swxx * swy - swx * swxy) / det;
  f.slope_se = std::sqrt(sw / det);
  f.intercept_se = std::sqrt(swxx / det);

  double ss_res = 0, ss_tot = 0;
  const double ybar = swy / sw;
  f.residuals.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    const double fit = f.intercept + f.slope * x[i];
    f.residuals[i] = y[i] - fit;
    ss_res += w * (y[i] - fit) * (y[i] - fit);
    ss_tot += w * (y[i] - ybar) * (y[i] - ybar);
  }
  f.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

}  // namespace bethe
