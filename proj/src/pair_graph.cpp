#include "condgen/pair_graph.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

#include "condgen/vecops.hpp"

namespace condgen {

namespace {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)), size_(static_cast<std::size_t>(n), 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int i) {
    while (parent_[static_cast<std::size_t>(i)] != i) {
      parent_[static_cast<std::size_t>(i)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(i)])];
      i = parent_[static_cast<std::size_t>(i)];
    }
    return i;
  }

  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[static_cast<std::size_t>(a)] < size_[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent_[static_cast<std::size_t>(b)] = a;
    size_[static_cast<std::size_t>(a)] += size_[static_cast<std::size_t>(b)];
    return true;
  }

 private:
  std::vector<int> parent_;
  std::vector<std::size_t> size_;
};

bool edge_less(const UndirectedEdge& x, const UndirectedEdge& y) {
  if (x.weight != y.weight) return x.weight < y.weight;
  const int xlo = std::min(x.a, x.b), xhi = std::max(x.a, x.b);
  const int ylo = std::min(y.a, y.b), yhi = std::max(y.a, y.b);
  if (xlo != ylo) return xlo < ylo;
  return xhi < yhi;
}

std::vector<UndirectedEdge> all_pairs_edges(const std::vector<std::vector<double>>& points) {
  const int n = static_cast<int>(points.size());
  std::vector<UndirectedEdge> edges;
  edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      edges.push_back({i, j,
                       euclidean_distance(points[static_cast<std::size_t>(i)],
                                          points[static_cast<std::size_t>(j)])});
    }
  }
  return edges;
}

// Candidate edges: union over nodes of the k nearest neighbours.
std::vector<UndirectedEdge> knn_edges(const std::vector<std::vector<double>>& points, int k) {
  const int n = static_cast<int>(points.size());
  std::vector<UndirectedEdge> edges;
  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      dist[static_cast<std::size_t>(j)] = {
          j == i ? std::numeric_limits<double>::infinity()
                 : euclidean_distance(points[static_cast<std::size_t>(i)],
                                      points[static_cast<std::size_t>(j)]),
          j};
    }
    const int take = std::min(k, n - 1);
    std::partial_sort(dist.begin(), dist.begin() + take, dist.end());
    for (int t = 0; t < take; ++t) {
      const int j = dist[static_cast<std::size_t>(t)].second;
      if (i < j) {
        edges.push_back({i, j, dist[static_cast<std::size_t>(t)].first});
      } else {
        edges.push_back({j, i, dist[static_cast<std::size_t>(t)].first});
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](const UndirectedEdge& x, const UndirectedEdge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const UndirectedEdge& x, const UndirectedEdge& y) {
                            return x.a == y.a && x.b == y.b;
                          }),
              edges.end());
  return edges;
}

std::vector<UndirectedEdge> kruskal(std::vector<UndirectedEdge> edges, int n) {
  std::sort(edges.begin(), edges.end(), edge_less);
  UnionFind uf(n);
  std::vector<UndirectedEdge> tree;
  tree.reserve(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
  for (const auto& e : edges) {
    if (uf.unite(e.a, e.b)) {
      tree.push_back(e);
      if (static_cast<int>(tree.size()) == n - 1) break;
    }
  }
  return tree;
}

// Connects leftover forest components with exact minimum cross edges; only
// reachable on the k-NN path when the candidate graph is disconnected.
void connect_components(std::vector<UndirectedEdge>& tree,
                        const std::vector<std::vector<double>>& points) {
  const int n = static_cast<int>(points.size());
  while (static_cast<int>(tree.size()) < n - 1) {
    UnionFind uf(n);
    for (const auto& e : tree) uf.unite(e.a, e.b);
    UndirectedEdge best{-1, -1, std::numeric_limits<double>::infinity()};
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (uf.find(i) == uf.find(j)) continue;
        const double w = euclidean_distance(points[static_cast<std::size_t>(i)],
                                            points[static_cast<std::size_t>(j)]);
        const UndirectedEdge cand{i, j, w};
        if (best.a < 0 || edge_less(cand, best)) best = cand;
      }
    }
    tree.push_back(best);
  }
}

}  // namespace

std::vector<UndirectedEdge> build_mst(const std::vector<std::vector<double>>& points,
                                      const MstOptions& options) {
  const int n = static_cast<int>(points.size());
  if (n == 0) throw std::invalid_argument("build_mst: need at least one point");
  if (n == 1) return {};
  const bool exact = n <= options.exact_threshold;
  std::vector<UndirectedEdge> tree =
      kruskal(exact ? all_pairs_edges(points) : knn_edges(points, options.knn_candidates), n);
  if (static_cast<int>(tree.size()) < n - 1) connect_components(tree, points);
  return tree;
}

DirectedPairSet orient(const std::vector<UndirectedEdge>& tree, int node_count, int root) {
  if (node_count < 1) throw std::invalid_argument("orient: need at least one node");
  if (root < 0 || root >= node_count) throw std::invalid_argument("orient: root out of range");
  if (static_cast<int>(tree.size()) != node_count - 1) {
    throw std::invalid_argument("orient: edge count " + std::to_string(tree.size()) +
                                " is not n-1");
  }
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(node_count));
  for (const auto& e : tree) {
    if (e.a < 0 || e.a >= node_count || e.b < 0 || e.b >= node_count || e.a == e.b) {
      throw std::invalid_argument("orient: edge endpoint out of range");
    }
    adjacency[static_cast<std::size_t>(e.a)].push_back(e.b);
    adjacency[static_cast<std::size_t>(e.b)].push_back(e.a);
  }

  DirectedPairSet out;
  out.node_count = node_count;
  out.root = root;
  std::vector<int> parent(static_cast<std::size_t>(node_count), -2);
  std::queue<int> frontier;
  parent[static_cast<std::size_t>(root)] = -1;
  frontier.push(root);
  int visited = 0;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    ++visited;
    for (int v : adjacency[static_cast<std::size_t>(u)]) {
      if (parent[static_cast<std::size_t>(v)] == -2) {
        parent[static_cast<std::size_t>(v)] = u;
        frontier.push(v);
      }
    }
  }
  if (visited != node_count) {
    throw std::invalid_argument("orient: input edges do not span all nodes");
  }
  for (int v = 0; v < node_count; ++v) {
    if (v != root) out.edges.emplace_back(v, parent[static_cast<std::size_t>(v)]);
  }
  // construction order is already sorted by tail
  return out;
}

std::vector<int> DirectedPairSet::parent_of() const {
  std::vector<int> parent(static_cast<std::size_t>(node_count), -1);
  for (const auto& [tail, head] : edges) parent[static_cast<std::size_t>(tail)] = head;
  return parent;
}

bool validate(const DirectedPairSet& pairs) {
  const int n = pairs.node_count;
  if (n < 1) return false;
  if (static_cast<int>(pairs.edges.size()) != n - 1) return false;
  if (pairs.root < 0 || pairs.root >= n) return false;
  std::vector<int> tail_count(static_cast<std::size_t>(n), 0);
  UnionFind uf(n);
  for (const auto& [tail, head] : pairs.edges) {
    if (tail < 0 || tail >= n || head < 0 || head >= n || tail == head) return false;
    if (++tail_count[static_cast<std::size_t>(tail)] > 1) return false;  // tail-uniqueness
    if (!uf.unite(tail, head)) return false;                             // cycle
  }
  if (tail_count[static_cast<std::size_t>(pairs.root)] != 0) return false;
  // n-1 acyclic edges over n nodes are necessarily connected
  return true;
}

int choose_root(std::span<const int> group_counts) {
  if (group_counts.empty()) throw std::invalid_argument("choose_root: empty counts");
  int best = 0;
  for (int i = 1; i < static_cast<int>(group_counts.size()); ++i) {
    if (group_counts[static_cast<std::size_t>(i)] > group_counts[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  return best;
}

DirectedPairSet build_pair_set(const std::vector<std::vector<double>>& points, int root,
                               const MstOptions& options) {
  DirectedPairSet out =
      orient(build_mst(points, options), static_cast<int>(points.size()), root);
  out.approximate = static_cast<int>(points.size()) > options.exact_threshold;
  return out;
}

nlohmann::json pair_set_to_json(const DirectedPairSet& pairs) {
  nlohmann::json j;
  j["node_count"] = pairs.node_count;
  j["root"] = pairs.root;
  j["approximate"] = pairs.approximate;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [tail, head] : pairs.edges) {
    edges.push_back({{"tail", tail}, {"head", head}});
  }
  j["edges"] = std::move(edges);
  return j;
}

}  // namespace condgen
