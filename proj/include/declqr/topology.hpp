#pragma once

// Delay-labelled interconnection graphs, delay matrices and the information
// graph whose nodes are reachable sets s_j(k) = {i : D_ij <= k}.
//
// All ids are 0-based internally; the JSON layer converts to and from the
// 1-based ids used in files.

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace declqr {

// Ascending list of 0-based subsystem ids.
using NodeSet = std::vector<int>;

struct DelayEdge {
  int from = 0;
  int to = 0;
  int delay = 0;  // 0 or 1

  bool operator==(const DelayEdge&) const = default;
};

class DirectedDelayGraph {
 public:
  DirectedDelayGraph() = default;
  // Throws ValidationError on self loops, duplicate edges, out-of-range ids
  // or delays outside {0, 1}.
  DirectedDelayGraph(int p, std::vector<DelayEdge> edges);

  int size() const { return p_; }
  const std::vector<DelayEdge>& edges() const { return edges_; }

  // Sources of edges pointing at i.
  std::vector<int> in_neighbors(int i) const;

 private:
  int p_ = 0;
  std::vector<DelayEdge> edges_;
};

inline constexpr int kUnreachable = std::numeric_limits<int>::max();

// D(i, j) is the minimum accumulated delay over all paths j -> ... -> i, or
// kUnreachable. Rows are destinations, columns are sources.
class DelayMatrix {
 public:
  DelayMatrix() = default;
  explicit DelayMatrix(int p) : p_(p), d_(static_cast<std::size_t>(p) * p, kUnreachable) {}

  int size() const { return p_; }
  int operator()(int i, int j) const { return d_[index(i, j)]; }
  int& operator()(int i, int j) { return d_[index(i, j)]; }
  bool reachable(int i, int j) const { return (*this)(i, j) != kUnreachable; }

  bool operator==(const DelayMatrix&) const = default;

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * p_ + j; }

  int p_ = 0;
  std::vector<int> d_;
};

// p single-source 0-1 BFS runs.
DelayMatrix compute_delay_matrix(const DirectedDelayGraph& g);

// Returns a strongly connected component of the zero-delay subgraph that
// contains a cycle, if any.
std::optional<std::vector<int>> find_zero_delay_cycle(const DirectedDelayGraph& g);

// Throws ZeroDelayCycleError naming the offending component.
void reject_zero_delay_cycles(const DirectedDelayGraph& g);

NodeSet reach_set(const DelayMatrix& d, int j, int k);

// Largest finite D_ij over ordered pairs with j reaching i.
int max_delay(const DelayMatrix& d);

// Canonical order on node sets: (min element, size, lexicographic).
bool canonical_less(const NodeSet& a, const NodeSet& b);

class InfoGraph {
 public:
  // Requires a delay matrix of a graph without zero-delay cycles.
  static InfoGraph build(const DelayMatrix& d);

  std::size_t size() const { return nodes_.size(); }
  int num_subsystems() const { return p_; }
  const NodeSet& node(int r) const { return nodes_[r]; }
  const std::vector<NodeSet>& nodes() const { return nodes_; }

  // Unique successor; equals r for self-loop (root) nodes.
  int parent(int r) const { return parent_[r]; }
  bool is_root(int r) const { return parent_[r] == r; }
  bool is_leaf(int r) const { return leaf_source_[r] >= 0; }
  // Root with no incoming edge other than its self loop, which is also a leaf.
  bool is_isolated(int r) const { return is_root(r) && is_leaf(r) && children_[r].empty(); }

  // Node s_i(0).
  int origin(int i) const { return origin_[i]; }
  // j with s_j(0) = r, or -1 when r is not a leaf.
  int leaf_source(int r) const { return leaf_source_[r]; }
  // Nodes v != r with v -> r, in canonical order.
  const std::vector<int>& children(int r) const { return children_[r]; }
  int root_of(int r) const { return root_[r]; }
  // Distance from r to its root.
  int depth(int r) const { return depth_[r]; }

  // l_vs, the length of the directed path v ~> s; nullopt if s is not on
  // the path from v to its root.
  std::optional<int> path_length(int v, int s) const;

  std::optional<int> find(const NodeSet& s) const;
  // Nodes containing subsystem i, in canonical order.
  const std::vector<int>& containing(int i) const { return containing_[i]; }

  std::vector<int> roots() const;
  std::vector<int> leaves() const;

  // Roots first, then by increasing depth; canonical order within a level.
  const std::vector<int>& top_down_order() const { return top_down_; }

 private:
  int p_ = 0;
  std::vector<NodeSet> nodes_;
  std::vector<int> parent_;
  std::vector<int> leaf_source_;
  std::vector<int> origin_;
  std::vector<std::vector<int>> children_;
  std::vector<int> root_;
  std::vector<int> depth_;
  std::vector<std::vector<int>> containing_;
  std::vector<int> top_down_;
};

struct AgentView {
  int agent = 0;
  // Nodes of all trees whose root contains the agent, canonical order.
  std::vector<int> tree_nodes;
  // Leaves of those trees, sorted by descending D(agent, source).
  std::vector<int> ordered_leaves;
  // Roots of those trees, excluding isolated nodes (kept as leaves only).
  std::vector<int> roots;
  // V_i = {j : D(agent, j) finite}.
  std::vector<int> visible_sources;
  int d_max = 0;

  bool in_tree(int r) const;
  bool has_leaf(int r) const;
  bool has_root(int r) const;
};

AgentView agent_view(const InfoGraph& ig, const DelayMatrix& d, int i);

}  // namespace declqr
