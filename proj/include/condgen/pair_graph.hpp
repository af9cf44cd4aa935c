#pragma once

#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace condgen {

struct UndirectedEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};

// Oriented spanning-tree edge set over training-group indices. Every edge is
// (tail = child, head = parent) of the tree rooted at `root`, so each index
// is tail of at most one edge and the root of none.
struct DirectedPairSet {
  int node_count = 0;
  int root = 0;
  bool approximate = false;  // built from a k-NN candidate graph, not all pairs
  std::vector<std::pair<int, int>> edges;  // (tail, head), sorted by tail

  // parent lookup; -1 for the root (and for indices with no outgoing edge)
  std::vector<int> parent_of() const;
};

struct MstOptions {
  int exact_threshold = 5000;  // all-pairs edges up to this many points
  int knn_candidates = 16;     // candidate edges per node above the threshold
};

// Minimum spanning tree under Euclidean distance, Kruskal over the candidate
// edge list with ties broken by (weight, min index, max index). Exact for
// n <= exact_threshold; larger inputs use a k-NN candidate graph and the
// result is flagged approximate by build_pair_set.
std::vector<UndirectedEdge> build_mst(const std::vector<std::vector<double>>& points,
                                      const MstOptions& options = {});

// Roots the tree and orients every edge child -> parent.
DirectedPairSet orient(const std::vector<UndirectedEdge>& tree, int node_count, int root);

// True iff the underlying undirected edges form a spanning tree and each
// index appears as tail at most once.
bool validate(const DirectedPairSet& pairs);

// Root choice for training: the group with the largest response count,
// lowest index on ties.
int choose_root(std::span<const int> group_counts);

// Convenience: MST + orient, with the approximate flag carried through.
DirectedPairSet build_pair_set(const std::vector<std::vector<double>>& points, int root,
                               const MstOptions& options = {});

nlohmann::json pair_set_to_json(const DirectedPairSet& pairs);

}  // namespace condgen
