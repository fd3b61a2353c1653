#include "bethe/greens.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <string>

#include "bethe/errors.hpp"

namespace bethe {

namespace {

void require_spectral(const SpectralPoint& z) {
  if (!(z.epsilon > 0) || !std::isfinite(z.epsilon) || !std::isfinite(z.E))
    fail(ErrorKind::invalid_parameter, "need finite z with epsilon > 0");
}

Eigen::SparseMatrix<Complex> shifted_matrix(const HamiltonianSample& h,
                                            Complex z) {
  const auto n = h.H.rows();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(h.H.nonZeros());
  for (int k = 0; k < h.H.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(h.H, k); it; ++it) {
      Complex v = it.value();
      if (it.row() == it.col()) v -= z;
      trip.emplace_back(it.row(), it.col(), v);
    }
  Eigen::SparseMatrix<Complex> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

}  // namespace

HamiltonianSample assemble(const TreeTopology& t, double lambda,
                           PotentialSample potential) {
  if (!(lambda > 0) || !std::isfinite(lambda))
    fail(ErrorKind::invalid_parameter, "lambda must be positive and finite");
  if (static_cast<std::int64_t>(potential.values.size()) != t.N)
    fail(ErrorKind::invalid_parameter,
         "potential length != vertex count");
  for (double w : potential.values)
    if (!std::isfinite(w))
      fail(ErrorKind::invalid_parameter, "non-finite potential entry");

  HamiltonianSample h;
  h.topology = &t;
  h.lambda = lambda;
  h.potential = std::move(potential);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(3 * t.N);
  for (std::int32_t v = 0; v < t.N; ++v) {
    trip.emplace_back(v, v, lambda * h.potential.values[v]);
    if (v > 0) {
      trip.emplace_back(v, t.parent[v], 1.0);
      trip.emplace_back(t.parent[v], v, 1.0);
    }
  }
  h.H.resize(t.N, t.N);
  h.H.setFromTriplets(trip.begin(), trip.end());
  h.H.makeCompressed();
  return h;
}

ForwardPass forward_factors(const TreeTopology& t, double lambda,
                            const std::vector<double>& omega,
                            const SpectralPoint& sp) {
  require_spectral(sp);
  if (!(lambda >= 0) || !std::isfinite(lambda))
    fail(ErrorKind::invalid_parameter, "lambda must be finite and >= 0");
  if (static_cast<std::int64_t>(omega.size()) < t.N)
    fail(ErrorKind::invalid_parameter, "potential shorter than vertex count");
  const Complex z = sp.z();
  ForwardPass fp;
  fp.gamma.assign(t.N, Complex{0, 0});
  std::vector<Complex> child_sum(t.N, Complex{0, 0});
  for (std::int32_t v = static_cast<std::int32_t>(t.N) - 1; v >= 1; --v) {
    const Complex g = 1.0 / (lambda * omega[v] - z - child_sum[v]);
    fp.gamma[v] = g;
    child_sum[t.parent[v]] += g;
  }
  fp.root = 1.0 / (lambda * omega[0] - z - child_sum[0]);
  fp.gamma[0] = fp.root;
  return fp;
}

ForwardPass forward_factors(const HamiltonianSample& h,
                            const SpectralPoint& sp) {
  return forward_factors(*h.topology, h.lambda, h.potential.values, sp);
}

GreensResult greens_recursive(const HamiltonianSample& h,
                              const SpectralPoint& z) {
  auto fp = forward_factors(h, z);
  GreensResult r;
  r.z = z;
  r.entries[{0, 0}] = fp.root;
  r.forward_factors = std::move(fp.gamma);
  return r;
}

std::vector<Complex> greens_offdiagonal_root(const TreeTopology& t,
                                             double lambda,
                                             const std::vector<double>& omega,
                                             const SpectralPoint& z) {
  auto fp = forward_factors(t, lambda, omega, z);
  std::vector<Complex> row(t.N);
  row[0] = fp.root;
  // breadth-first order guarantees the parent entry exists already
  for (std::int32_t v = 1; v < t.N; ++v)
    row[v] = row[t.parent[v]] * (-fp.gamma[v]);
  return row;
}

std::vector<Complex> greens_offdiagonal_root(const HamiltonianSample& h,
                                             const SpectralPoint& z) {
  return greens_offdiagonal_root(*h.topology, h.lambda, h.potential.values, z);
}

std::vector<Complex> greens_direct_column(const HamiltonianSample& h,
                                          const SpectralPoint& sp,
                                          std::int32_t n2,
                                          std::int64_t dense_budget) {
  require_spectral(sp);
  const auto n = h.H.rows();
  if (n > dense_budget)
    fail(ErrorKind::budget_exceeded,
         "direct solve limited to " + std::to_string(dense_budget) +
             " vertices");
  if (n2 < 0 || n2 >= n) fail(ErrorKind::invalid_vertex, "column out of range");

  auto a = shifted_matrix(h, sp.z());
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success)
    fail(ErrorKind::ill_conditioned_solve, "factorization failed");

  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs[n2] = 1;
  Eigen::VectorXcd x = lu.solve(rhs);
  bool converged = false;
  for (int it = 0; it < 6 && !converged; ++it) {
    Eigen::VectorXcd resid = rhs - a * x;
    if (resid.norm() <= 1e-12 * x.norm())
      converged = true;
    else
      x += lu.solve(resid);
  }
  if (!converged && (rhs - a * x).norm() > 1e-12 * x.norm())
    fail(ErrorKind::ill_conditioned_solve,
         "refinement stalled above residual tolerance");
  return {x.data(), x.data() + n};
}

GreensResult greens_direct(
    const HamiltonianSample& h, const SpectralPoint& sp,
    const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs,
    std::int64_t dense_budget) {
  GreensResult r;
  r.z = sp;
  std::map<std::int32_t, std::vector<Complex>> columns;
  for (auto [n1, n2] : pairs) {
    auto it = columns.find(n2);
    if (it == columns.end())
      it = columns
               .emplace(n2, greens_direct_column(h, sp, n2, dense_budget))
               .first;
    r.entries[{n1, n2}] = it->second[n1];
  }
  return r;
}

Complex rank_one_diagonal(Complex gamma_sum, double lambda_omega_0,
                          const SpectralPoint& sp) {
  require_spectral(sp);
  const Complex denom = lambda_omega_0 - sp.z() - gamma_sum;
  // denom = lambda*w_0 + (A - iB); Herglotz forward factors force B > 0
  if (!(-denom.imag() > 0))
    fail(ErrorKind::nonpositive_b,
         "site-removed inverse lost its positive imaginary part");
  return 1.0 / denom;
}

ResolventDifference resolvent_difference(const HamiltonianSample& h_outer,
                                         const SpectralPoint& sp) {
  require_spectral(sp);
  const TreeTopology& outer_t = *h_outer.topology;
  if (outer_t.L < 1)
    fail(ErrorKind::invalid_parameter, "outer radius must be >= 1");
  TreeTopology inner_t = build_tree(outer_t.K, outer_t.L - 1);

  PotentialSample inner_pot;
  inner_pot.seed = h_outer.potential.seed;
  inner_pot.stream = h_outer.potential.stream;
  inner_pot.values.assign(h_outer.potential.values.begin(),
                          h_outer.potential.values.begin() + inner_t.N);
  HamiltonianSample h_inner =
      assemble(inner_t, h_outer.lambda, std::move(inner_pot));

  ResolventDifference out;
  // one side by two direct solves
  const Complex g_outer = greens_direct_column(h_outer, sp, 0)[0];
  const Complex g_inner = greens_direct_column(h_inner, sp, 0)[0];
  out.direct_diff = g_outer - g_inner;

  // the other side by recursion path products over the boundary pairs
  auto row_inner = greens_offdiagonal_root(h_inner, sp);
  auto row_outer = greens_offdiagonal_root(h_outer, sp);
  Complex s{0, 0};
  for (auto [m, k] : boundary_pairs(inner_t, outer_t))
    s += row_inner[m] * row_outer[k];
  out.boundary_sum = -s;
  return out;
}

Complex free_forward_factor(int K, const SpectralPoint& sp) {
  require_spectral(sp);
  if (K < 1) fail(ErrorKind::invalid_parameter, "K must be >= 1");
  const Complex z = sp.z();
  const Complex w = std::sqrt(z * z - 4.0 * K);
  const Complex g1 = (-z + w) / (2.0 * K);
  const Complex g2 = (-z - w) / (2.0 * K);
  return g1.imag() > 0 ? g1 : g2;
}

Complex free_greens_closed_form(int K, const SpectralPoint& sp) {
  const Complex gamma = free_forward_factor(K, sp);
  return 1.0 / (-sp.z() - (K + 1.0) * gamma);
}

Complex free_greens_derivative(int K, const SpectralPoint& sp, int ell) {
  if (ell < 0 || ell > 2)
    fail(ErrorKind::derivative_order_exceeded, "free derivative has ell <= 2");
  const Complex z = sp.z();
  const Complex gamma = free_forward_factor(K, sp);
  const Complex g0 = 1.0 / (-z - (K + 1.0) * gamma);
  if (ell == 0) return g0;
  // w = sqrt(z^2-4K) on the branch already picked by gamma
  const Complex w = 2.0 * K * gamma + z;
  const Complex dg = (-1.0 + z / w) / (2.0 * K);
  const Complex u1 = -1.0 - (K + 1.0) * dg;
  if (ell == 1) return -g0 * g0 * u1;
  const Complex ddg = -2.0 / (w * w * w);
  const Complex u2 = -(K + 1.0) * ddg;
  return 2.0 * g0 * g0 * g0 * u1 * u1 - g0 * g0 * u2;
}

Complex free_greens_recursive(int K, int L, const SpectralPoint& sp) {
  require_spectral(sp);
  if (K < 1 || L < 0) fail(ErrorKind::invalid_parameter, "need K >= 1, L >= 0");
  const Complex z = sp.z();
  if (L == 0) return 1.0 / (-z);
  Complex gamma = 1.0 / (-z);  // leaf shell
  for (int d = L - 1; d >= 1; --d) gamma = 1.0 / (-z - double(K) * gamma);
  return 1.0 / (-z - double(K + 1) * gamma);
}

}  // namespace bethe
