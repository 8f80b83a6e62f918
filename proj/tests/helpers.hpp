#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "doshap/bitset.hpp"
#include "doshap/causal_graph.hpp"

namespace doshap::testutil {

// Bitset of the given width with exactly these indices set.
inline Bitset bits(std::size_t width, std::initializer_list<std::size_t> idx) {
  Bitset b(width);
  for (const std::size_t i : idx) b.set(i);
  return b;
}

// Bitset of the given width whose low bits mirror `mask`.
inline Bitset bits_of_mask(std::size_t width, std::uint64_t mask) {
  Bitset b(width);
  for (std::size_t i = 0; i < width && i < 64; ++i)
    if (mask >> i & 1u) b.set(i);
  return b;
}

// Seven-node pipeline fixture with layered fan-in/fan-out, small enough to
// check reachability questions by hand: ids A=0 B=1 C=2 D=3 E=4 F=5 Y=6.
inline CausalGraph pipeline_graph() {
  GraphSpec spec;
  spec.nodes = {"A", "B", "C", "D", "E", "F", "Y"};
  spec.edges = {{"A", "B"}, {"A", "C"}, {"A", "E"}, {"B", "F"}, {"C", "D"},
                {"D", "E"}, {"E", "F"}, {"D", "Y"}, {"F", "Y"}};
  spec.target = "Y";
  return CausalGraph::build(spec);
}

// Directed path u -> ... -> v that touches no node of `blocked` (the start
// node is allowed to be anything; `v` counts even if blocked is malformed).
inline bool has_path_avoiding(const CausalGraph& g, NodeId u, NodeId v, const Bitset& blocked) {
  if (u == v) return true;
  std::vector<char> seen(static_cast<std::size_t>(g.node_count()), 0);
  std::vector<NodeId> stack{u};
  seen[static_cast<std::size_t>(u)] = 1;
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    bool found = false;
    g.children(cur).for_each([&](std::size_t c) {
      if (static_cast<NodeId>(c) == v) {
        found = true;
        return;
      }
      if (!seen[c] && !blocked.test(c)) {
        seen[c] = 1;
        stack.push_back(static_cast<NodeId>(c));
      }
    });
    if (found) return true;
  }
  return false;
}

}  // namespace doshap::testutil
