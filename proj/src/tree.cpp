#include "bethe/tree.hpp"

#include <algorithm>
#include <string>

#include "bethe/errors.hpp"

namespace bethe {

TreeTopology build_tree(int K, int L, std::int64_t vertex_budget) {
  if (K < 1) fail(ErrorKind::invalid_parameter, "connectivity K must be >= 1");
  if (L < 0) fail(ErrorKind::invalid_parameter, "radius L must be >= 0");

  // Shell sizes: 1, K+1, (K+1)K, ..., (K+1)K^{L-1}.  Accumulate with the
  // budget check inline so huge (K, L) bail out before allocating anything.
  std::vector<std::int64_t> shell_begin(static_cast<size_t>(L) + 2, 0);
  std::int64_t n = 1;
  std::int64_t sz = 1;
  shell_begin[1] = 1;
  for (int d = 1; d <= L; ++d) {
    sz *= (d == 1) ? (K + 1) : K;
    n += sz;
    if (n > vertex_budget)
      fail(ErrorKind::budget_exceeded,
           "tree K=" + std::to_string(K) + " L=" + std::to_string(L) +
               " needs more than " + std::to_string(vertex_budget) +
               " vertices");
    shell_begin[d + 1] = n;
  }

  TreeTopology t;
  t.K = K;
  t.L = L;
  t.N = n;
  t.shell_begin = std::move(shell_begin);
  t.parent.assign(n, -1);
  t.depth.assign(n, 0);
  t.child_begin.assign(n + 1, 0);
  t.child_ids.assign(n - 1, 0);

  // Breadth-first: children of shell d are laid out consecutively in shell
  // d+1, in parent order.  This is what makes smaller-L trees prefixes.
  std::int64_t next = 1;
  std::int64_t edge = 0;
  for (std::int32_t v = 0; v < n; ++v) {
    t.child_begin[v] = edge;
    const int nc = (t.depth[v] == L) ? 0 : (v == 0 ? K + 1 : K);
    for (int c = 0; c < nc; ++c) {
      const auto child = static_cast<std::int32_t>(next++);
      t.parent[child] = v;
      t.depth[child] = t.depth[v] + 1;
      t.child_ids[edge++] = child;
    }
  }
  t.child_begin[n] = edge;
  return t;
}

int distance(const TreeTopology& t, std::int32_t a, std::int32_t b) {
  if (a < 0 || a >= t.N || b < 0 || b >= t.N)
    fail(ErrorKind::invalid_vertex, "vertex index out of range");
  int d = 0;
  while (t.depth[a] > t.depth[b]) a = t.parent[a], ++d;
  while (t.depth[b] > t.depth[a]) b = t.parent[b], ++d;
  while (a != b) a = t.parent[a], b = t.parent[b], d += 2;
  return d;
}

std::vector<std::int32_t> shell(const TreeTopology& t, int d) {
  if (d < 0 || d > t.L)
    fail(ErrorKind::invalid_parameter,
         "shell depth " + std::to_string(d) + " outside [0, L]");
  std::vector<std::int32_t> out;
  out.reserve(static_cast<size_t>(t.shell_size(d)));
  for (std::int64_t v = t.shell_begin[d]; v < t.shell_begin[d + 1]; ++v)
    out.push_back(static_cast<std::int32_t>(v));
  return out;
}

std::vector<std::pair<std::int32_t, std::int32_t>> boundary_pairs(
    const TreeTopology& t_inner, const TreeTopology& t_outer) {
  if (t_inner.K != t_outer.K)
    fail(ErrorKind::invalid_parameter, "boundary_pairs: mismatched K");
  if (t_outer.L != t_inner.L + 1)
    fail(ErrorKind::invalid_parameter,
         "boundary_pairs: outer radius must be inner radius + 1");
  // Prefix embedding check on the shared vertices.
  if (t_outer.N < t_inner.N ||
      !std::equal(t_inner.parent.begin(), t_inner.parent.end(),
                  t_outer.parent.begin()))
    fail(ErrorKind::invalid_parameter, "boundary_pairs: non-nested topologies");

  std::vector<std::pair<std::int32_t, std::int32_t>> out;
  const int L = t_inner.L;
  for (std::int64_t m = t_inner.shell_begin[L]; m < t_inner.shell_begin[L + 1];
       ++m) {
    const auto mv = static_cast<std::int32_t>(m);
    const auto nc = t_outer.num_children(mv);
    const std::int32_t* kids = t_outer.children(mv);
    for (std::int64_t c = 0; c < nc; ++c) out.emplace_back(mv, kids[c]);
  }
  return out;
}

}  // namespace bethe
