#include "declqr/topology.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "declqr/errors.hpp"

namespace declqr {

namespace {

std::string describe_component(const std::vector<int>& component) {
  std::ostringstream out;
  out << "zero-delay cycle through nodes {";
  for (std::size_t k = 0; k < component.size(); ++k) {
    out << (k ? "," : "") << component[k] + 1;
  }
  out << "}";
  return out.str();
}

}  // namespace

ZeroDelayCycleError::ZeroDelayCycleError(std::vector<int> component)
    : ValidationError(describe_component(component)), component_(std::move(component)) {}

DirectedDelayGraph::DirectedDelayGraph(int p, std::vector<DelayEdge> edges)
    : p_(p), edges_(std::move(edges)) {
  if (p_ < 1) throw ValidationError("graph must have at least one node");
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges_) {
    if (e.from < 0 || e.from >= p_ || e.to < 0 || e.to >= p_) {
      throw ValidationError("edge endpoint out of range");
    }
    if (e.from == e.to) {
      throw ValidationError("self loop on node " + std::to_string(e.from + 1));
    }
    if (e.delay != 0 && e.delay != 1) {
      throw ValidationError("edge delay must be 0 or 1");
    }
    if (!seen.emplace(e.from, e.to).second) {
      throw ValidationError("duplicate edge " + std::to_string(e.from + 1) + "->" +
                            std::to_string(e.to + 1));
    }
  }
}

std::vector<int> DirectedDelayGraph::in_neighbors(int i) const {
  std::vector<int> out;
  for (const auto& e : edges_) {
    if (e.to == i) out.push_back(e.from);
  }
  std::sort(out.begin(), out.end());
  return out;
}

DelayMatrix compute_delay_matrix(const DirectedDelayGraph& g) {
  const int p = g.size();
  std::vector<std::vector<std::pair<int, int>>> out(p);
  for (const auto& e : g.edges()) out[e.from].emplace_back(e.to, e.delay);

  DelayMatrix d(p);
  std::vector<int> dist(p);
  for (int src = 0; src < p; ++src) {
    std::fill(dist.begin(), dist.end(), kUnreachable);
    std::deque<int> queue;
    dist[src] = 0;
    queue.push_back(src);
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (const auto& [to, w] : out[v]) {
        if (dist[v] + w < dist[to]) {
          dist[to] = dist[v] + w;
          if (w == 0) {
            queue.push_front(to);
          } else {
            queue.push_back(to);
          }
        }
      }
    }
    for (int i = 0; i < p; ++i) d(i, src) = dist[i];
  }
  return d;
}

std::optional<std::vector<int>> find_zero_delay_cycle(const DirectedDelayGraph& g) {
  const int p = g.size();
  std::vector<std::vector<int>> adj(p);
  for (const auto& e : g.edges()) {
    if (e.delay == 0) adj[e.from].push_back(e.to);
  }

  // Tarjan's strongly connected components.
  std::vector<int> index(p, -1), low(p, 0);
  std::vector<bool> on_stack(p, false);
  std::vector<int> stack;
  int counter = 0;
  std::optional<std::vector<int>> found;

  std::function<void(int)> visit = [&](int v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (int w : adj[v]) {
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<int> component;
      int w = -1;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        component.push_back(w);
      } while (w != v);
      if (component.size() > 1 && !found) {
        std::sort(component.begin(), component.end());
        found = std::move(component);
      }
    }
  };
  for (int v = 0; v < p; ++v) {
    if (index[v] < 0) visit(v);
  }
  return found;
}

void reject_zero_delay_cycles(const DirectedDelayGraph& g) {
  if (auto component = find_zero_delay_cycle(g)) throw ZeroDelayCycleError(*component);
}

NodeSet reach_set(const DelayMatrix& d, int j, int k) {
  if (j < 0 || j >= d.size()) throw IndexOutOfRange("reach_set: source out of range");
  if (k < 0) throw ValidationError("reach_set: k must be nonnegative");
  NodeSet out;
  for (int i = 0; i < d.size(); ++i) {
    if (d.reachable(i, j) && d(i, j) <= k) out.push_back(i);
  }
  return out;
}

int max_delay(const DelayMatrix& d) {
  int best = 0;
  for (int i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.size(); ++j) {
      if (d.reachable(i, j)) best = std::max(best, d(i, j));
    }
  }
  return best;
}

bool canonical_less(const NodeSet& a, const NodeSet& b) {
  if (a.empty() || b.empty()) return a.size() < b.size();
  if (a.front() != b.front()) return a.front() < b.front();
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

InfoGraph InfoGraph::build(const DelayMatrix& d) {
  const int p = d.size();
  std::set<NodeSet, decltype(&canonical_less)> found(&canonical_less);
  std::map<NodeSet, NodeSet> successor;

  for (int j = 0; j < p; ++j) {
    for (int k = 0;; ++k) {
      NodeSet cur = reach_set(d, j, k);
      NodeSet next = reach_set(d, j, k + 1);
      found.insert(cur);
      auto [it, inserted] = successor.emplace(cur, next);
      if (!inserted && it->second != next) {
        throw ValidationError("information graph successor is not unique; "
                              "the delay matrix has a zero-delay cycle");
      }
      if (next == cur) break;
    }
  }

  InfoGraph ig;
  ig.p_ = p;
  ig.nodes_.assign(found.begin(), found.end());
  const std::size_t q = ig.nodes_.size();
  std::map<NodeSet, int> index_of;
  for (std::size_t r = 0; r < q; ++r) index_of[ig.nodes_[r]] = static_cast<int>(r);

  ig.parent_.resize(q);
  for (std::size_t r = 0; r < q; ++r) ig.parent_[r] = index_of.at(successor.at(ig.nodes_[r]));

  ig.leaf_source_.assign(q, -1);
  ig.origin_.resize(p);
  for (int i = 0; i < p; ++i) {
    const int r = index_of.at(reach_set(d, i, 0));
    if (ig.leaf_source_[r] >= 0) {
      throw ValidationError("two subsystems share a leaf; the graph has a zero-delay cycle");
    }
    ig.leaf_source_[r] = i;
    ig.origin_[i] = r;
  }

  ig.children_.assign(q, {});
  for (std::size_t r = 0; r < q; ++r) {
    if (ig.parent_[r] != static_cast<int>(r)) ig.children_[ig.parent_[r]].push_back(static_cast<int>(r));
  }

  ig.root_.resize(q);
  ig.depth_.resize(q);
  for (std::size_t r = 0; r < q; ++r) {
    int cur = static_cast<int>(r);
    int depth = 0;
    while (ig.parent_[cur] != cur) {
      cur = ig.parent_[cur];
      ++depth;
      if (depth > static_cast<int>(q)) throw ValidationError("information graph has a cycle");
    }
    ig.root_[r] = cur;
    ig.depth_[r] = depth;
  }

  ig.containing_.assign(p, {});
  for (std::size_t r = 0; r < q; ++r) {
    for (int i : ig.nodes_[r]) ig.containing_[i].push_back(static_cast<int>(r));
  }

  ig.top_down_.resize(q);
  for (std::size_t r = 0; r < q; ++r) ig.top_down_[r] = static_cast<int>(r);
  std::stable_sort(ig.top_down_.begin(), ig.top_down_.end(),
                   [&](int a, int b) { return ig.depth_[a] < ig.depth_[b]; });
  return ig;
}

std::optional<int> InfoGraph::path_length(int v, int s) const {
  int cur = v;
  for (int len = 0; len <= static_cast<int>(size()); ++len) {
    if (cur == s) return len;
    if (parent_[cur] == cur) return std::nullopt;
    cur = parent_[cur];
  }
  return std::nullopt;
}

std::optional<int> InfoGraph::find(const NodeSet& s) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), s, &canonical_less);
  if (it != nodes_.end() && *it == s) return static_cast<int>(it - nodes_.begin());
  return std::nullopt;
}

std::vector<int> InfoGraph::roots() const {
  std::vector<int> out;
  for (std::size_t r = 0; r < size(); ++r) {
    if (is_root(static_cast<int>(r))) out.push_back(static_cast<int>(r));
  }
  return out;
}

std::vector<int> InfoGraph::leaves() const {
  std::vector<int> out;
  for (std::size_t r = 0; r < size(); ++r) {
    if (is_leaf(static_cast<int>(r))) out.push_back(static_cast<int>(r));
  }
  return out;
}

bool AgentView::in_tree(int r) const {
  return std::binary_search(tree_nodes.begin(), tree_nodes.end(), r);
}

bool AgentView::has_leaf(int r) const {
  return std::find(ordered_leaves.begin(), ordered_leaves.end(), r) != ordered_leaves.end();
}

bool AgentView::has_root(int r) const {
  return std::find(roots.begin(), roots.end(), r) != roots.end();
}

AgentView agent_view(const InfoGraph& ig, const DelayMatrix& d, int i) {
  if (i < 0 || i >= d.size()) throw IndexOutOfRange("agent_view: agent out of range");
  AgentView view;
  view.agent = i;
  view.d_max = max_delay(d);
  for (std::size_t r = 0; r < ig.size(); ++r) {
    const NodeSet& root = ig.node(ig.root_of(static_cast<int>(r)));
    if (std::binary_search(root.begin(), root.end(), i)) view.tree_nodes.push_back(static_cast<int>(r));
  }
  for (int r : view.tree_nodes) {
    if (ig.is_leaf(r)) {
      view.ordered_leaves.push_back(r);
    } else if (ig.is_root(r)) {
      view.roots.push_back(r);
    }
    // A root that is also a leaf but has children keeps both roles.
    if (ig.is_root(r) && ig.is_leaf(r) && !ig.is_isolated(r)) view.roots.push_back(r);
  }
  std::sort(view.roots.begin(), view.roots.end());
  // Node indices are already canonical, so a stable sort on delay keeps
  // canonical order among ties.
  std::stable_sort(view.ordered_leaves.begin(), view.ordered_leaves.end(), [&](int a, int b) {
    return d(i, ig.leaf_source(a)) > d(i, ig.leaf_source(b));
  });
  for (int j = 0; j < d.size(); ++j) {
    if (d.reachable(i, j)) view.visible_sources.push_back(j);
  }
  return view;
}

}  // namespace declqr
