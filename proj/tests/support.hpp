#pragma once

// Shared fixtures for the test binaries.

#include <algorithm>
#include <random>
#include <vector>

#include "declqr/errors.hpp"
#include "declqr/experiments.hpp"

namespace declqr::testing {

// 2 -> 1 (delay 0), 2 -> 3 (delay 1), 3 -> 2 (delay 1), 0-based.
inline DirectedDelayGraph three_node_graph() {
  return DirectedDelayGraph(3, {{1, 0, 0}, {1, 2, 1}, {2, 1, 1}});
}

// Random graph on p nodes with 0/1 delays, retried until the zero-delay
// subgraph is acyclic.
inline DirectedDelayGraph random_graph(int p, std::mt19937_64& rng, double edge_prob = 0.4) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    std::vector<DelayEdge> edges;
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < p; ++b) {
        if (a != b && unif(rng) < edge_prob) edges.push_back({a, b, unif(rng) < 0.5 ? 0 : 1});
      }
    }
    DirectedDelayGraph g(p, edges);
    if (!find_zero_delay_cycle(g)) return g;
  }
}

inline Partition unit_partition(int p) {
  return Partition(std::vector<int>(static_cast<std::size_t>(p), 1), std::vector<int>(static_cast<std::size_t>(p), 1));
}

// A random plant with the default generator (Q = 2I, R = 5I, rho <= 0.8).
inline Plant random_plant(const DirectedDelayGraph& g, const Partition& part, std::uint64_t seed,
                          GeneratorOptions opts = {}) {
  const Network net(g);
  return Plant(generate_random_system(net, part, opts, seed), g);
}

// Mixed block sizes n_i in {1, 2}, m_i in {1, n_i}.
inline Partition random_partition(int p, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(1, 2);
  std::vector<int> n, m;
  for (int i = 0; i < p; ++i) {
    n.push_back(coin(rng));
    m.push_back(std::min(n.back(), coin(rng)));
  }
  return Partition(n, m);
}

}  // namespace declqr::testing
