#pragma once
#include <cstdint>
#include <utility>
#include <vector>

namespace bethe {

// Finite radius-L subtree of the Bethe lattice with connectivity K
// (coordination number K+1).  Vertices are indexed breadth-first, so every
// depth shell is one contiguous index range and the radius-L tree is a prefix
// of the radius-(L+1) tree built with the same K.
struct TreeTopology {
  int K = 0;
  int L = 0;
  std::int64_t N = 0;
  std::vector<std::int32_t> parent;  // parent[0] = -1
  std::vector<std::int32_t> depth;
  // shell d occupies indices [shell_begin[d], shell_begin[d+1])
  std::vector<std::int64_t> shell_begin;
  // CSR layout: children of v are child_ids[child_begin[v] .. child_begin[v+1])
  std::vector<std::int64_t> child_begin;
  std::vector<std::int32_t> child_ids;

  std::int64_t shell_size(int d) const {
    return shell_begin[d + 1] - shell_begin[d];
  }
  std::int64_t num_children(std::int32_t v) const {
    return child_begin[v + 1] - child_begin[v];
  }
  const std::int32_t* children(std::int32_t v) const {
    return child_ids.data() + child_begin[v];
  }
};

constexpr std::int64_t kDefaultVertexBudget = 2'000'000;

TreeTopology build_tree(int K, int L,
                        std::int64_t vertex_budget = kDefaultVertexBudget);

int distance(const TreeTopology& t, std::int32_t a, std::int32_t b);

std::vector<std::int32_t> shell(const TreeTopology& t, int d);

// All (m, k) with m a depth-L vertex of the inner tree and k a child of m in
// the outer (radius L+1) tree.  Relies on the shared prefix indexing.
std::vector<std::pair<std::int32_t, std::int32_t>> boundary_pairs(
    const TreeTopology& t_inner, const TreeTopology& t_outer);

}  // namespace bethe
