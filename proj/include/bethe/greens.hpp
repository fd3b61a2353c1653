#pragma once
#include <Eigen/SparseCore>
#include <complex>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "bethe/density.hpp"
#include "bethe/tree.hpp"

namespace bethe {

using Complex = std::complex<double>;

struct SpectralPoint {
  double E = 0;
  double epsilon = 1e-2;  // strictly positive for every resolvent operation
  Complex z() const { return {E, epsilon}; }
};

// H = Delta + lambda V on a finite subtree; adjacency off-diagonals are 1,
// diagonal is lambda*omega_n.  The topology outlives the sample.
struct HamiltonianSample {
  const TreeTopology* topology = nullptr;
  double lambda = 1;
  PotentialSample potential;
  Eigen::SparseMatrix<double> H;
};

HamiltonianSample assemble(const TreeTopology& t, double lambda,
                           PotentialSample potential);

struct GreensResult {
  SpectralPoint z;
  std::map<std::pair<std::int32_t, std::int32_t>, Complex> entries;
  // Gamma_v for v >= 1 (forward factor of the subtree hanging at v);
  // slot 0 carries G(z;0,0) itself.
  std::vector<Complex> forward_factors;
};

// Leaf-to-root pass over the breadth-first layout (explicit iteration, no
// call stack): Gamma_v = 1/(lambda*w_v - z - sum over children of Gamma).
struct ForwardPass {
  std::vector<Complex> gamma;
  Complex root;
};
ForwardPass forward_factors(const HamiltonianSample& h, const SpectralPoint& z);

// Matrix-free variants for sampling campaigns: no sparse H, lambda >= 0
// allowed (0 = free model), and omega may be longer than t.N — the
// breadth-first prefix is used, so one draw over a large tree serves every
// nested subtree.
ForwardPass forward_factors(const TreeTopology& t, double lambda,
                            const std::vector<double>& omega,
                            const SpectralPoint& z);
std::vector<Complex> greens_offdiagonal_root(const TreeTopology& t,
                                             double lambda,
                                             const std::vector<double>& omega,
                                             const SpectralPoint& z);

GreensResult greens_recursive(const HamiltonianSample& h,
                              const SpectralPoint& z);

// Root row G(z;0,n) for all n via the path product G(0,0) prod(-Gamma_v).
std::vector<Complex> greens_offdiagonal_root(const HamiltonianSample& h,
                                             const SpectralPoint& z);

constexpr std::int64_t kDirectSolveBudget = 20000;

// Sparse-LU oracle with iterative refinement to residual <= 1e-12 * ||col||.
GreensResult greens_direct(
    const HamiltonianSample& h, const SpectralPoint& z,
    const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs,
    std::int64_t dense_budget = kDirectSolveBudget);

std::vector<Complex> greens_direct_column(const HamiltonianSample& h,
                                          const SpectralPoint& z,
                                          std::int32_t n2,
                                          std::int64_t dense_budget =
                                              kDirectSolveBudget);

// Last recursion step with the root site explicit: 1/(lambda*w_0 - z - S)
// where S is the children's forward-factor sum; the site-removed inverse
// -z - S = -(A - iB) must have B > 0.
Complex rank_one_diagonal(Complex gamma_sum, double lambda_omega_0,
                          const SpectralPoint& z);

// G_{L+1}(0,0) - G_L(0,0) against the boundary-pair sum
// -sum over (m,k) of G_L(z;m,0) G_{L+1}(z;0,k); the two sides come from
// independent engines (direct solve vs recursion products).
struct ResolventDifference {
  Complex direct_diff;
  Complex boundary_sum;
};
ResolventDifference resolvent_difference(const HamiltonianSample& h_outer,
                                         const SpectralPoint& z);

// Free lattice: Gamma solves K Gamma^2 + z Gamma + 1 = 0 with Im Gamma > 0;
// G0 = 1/(-z - (K+1) Gamma).
Complex free_forward_factor(int K, const SpectralPoint& z);
Complex free_greens_closed_form(int K, const SpectralPoint& z);
// d^ell/dz^ell of the closed form, ell <= 2 (oracle for derivative
// estimators; note d/dE = d/dz at fixed epsilon).
Complex free_greens_derivative(int K, const SpectralPoint& z, int ell);
// Depth-L truncation of the free recursion (scalar radial iteration; equals
// the tree engine with omega = 0 but runs at any L).
Complex free_greens_recursive(int K, int L, const SpectralPoint& z);

}  // namespace bethe
