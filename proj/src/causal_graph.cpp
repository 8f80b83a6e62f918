#include "doshap/causal_graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "doshap/errors.hpp"
#include "doshap/rng.hpp"

namespace doshap {

CausalGraph CausalGraph::build(const GraphSpec& spec) {
  CausalGraph g;
  const std::size_t n = spec.nodes.size();
  if (n == 0) throw UnknownNode("graph has no nodes");

  std::unordered_map<std::string, NodeId> index;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& label = spec.nodes[i];
    if (label.empty()) throw UnknownNode("empty node label");
    if (!index.emplace(label, static_cast<NodeId>(i)).second)
      throw DuplicateLabel(label);
  }
  g.labels_ = spec.nodes;

  auto lookup = [&index](const std::string& label) -> NodeId {
    auto it = index.find(label);
    if (it == index.end()) throw UnknownNode(label);
    return it->second;
  };

  g.target_ = lookup(spec.target);

  g.parents_.assign(n, Bitset(n));
  g.children_.assign(n, Bitset(n));
  for (const auto& [from, to] : spec.edges) {
    const NodeId u = lookup(from);
    const NodeId v = lookup(to);
    if (u == v) throw CycleError("self edge on " + from);
    g.children_[static_cast<std::size_t>(u)].set(static_cast<std::size_t>(v));
    g.parents_[static_cast<std::size_t>(v)].set(static_cast<std::size_t>(u));
  }

  std::set<std::pair<NodeId, NodeId>> conf;
  for (const auto& [a, b] : spec.confounders) {
    const NodeId x = lookup(a);
    const NodeId y = lookup(b);
    if (x == y) throw UnknownNode("confounder pair repeats node " + a);
    conf.emplace(std::min(x, y), std::max(x, y));
  }
  g.confounders_.assign(conf.begin(), conf.end());

  // Kahn's algorithm with a min-index heap: deterministic order and cycle
  // detection in one pass.
  std::vector<int> indegree(n, 0);
  for (std::size_t v = 0; v < n; ++v)
    indegree[v] = static_cast<int>(g.parents_[v].count());
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push(static_cast<NodeId>(v));
  g.topo_.reserve(n);
  while (!ready.empty()) {
    const NodeId u = ready.top();
    ready.pop();
    g.topo_.push_back(u);
    g.children_[static_cast<std::size_t>(u)].for_each([&](std::size_t v) {
      if (--indegree[v] == 0) ready.push(static_cast<NodeId>(v));
    });
  }
  if (g.topo_.size() != n) throw CycleError("directed edges contain a cycle");

  // Inclusive ancestor/descendant closures via topological sweeps.
  g.ancestors_.assign(n, Bitset(n));
  g.descendants_.assign(n, Bitset(n));
  for (const NodeId v : g.topo_) {
    auto& an = g.ancestors_[static_cast<std::size_t>(v)];
    an.set(static_cast<std::size_t>(v));
    g.parents_[static_cast<std::size_t>(v)].for_each(
        [&](std::size_t p) { an |= g.ancestors_[p]; });
  }
  for (auto it = g.topo_.rbegin(); it != g.topo_.rend(); ++it) {
    auto& de = g.descendants_[static_cast<std::size_t>(*it)];
    de.set(static_cast<std::size_t>(*it));
    g.children_[static_cast<std::size_t>(*it)].for_each(
        [&](std::size_t c) { de |= g.descendants_[c]; });
  }

  bool ascending = true;
  for (std::size_t u = 0; u < n && ascending; ++u)
    g.children_[u].for_each([&](std::size_t v) {
      if (v < u) ascending = false;
    });
  g.target_projected_ = ascending && g.target_ == static_cast<NodeId>(n - 1) &&
                        g.ancestors_[static_cast<std::size_t>(g.target_)].count() == n;
  return g;
}

NodeId CausalGraph::node(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<NodeId>(i);
  throw UnknownNode(label);
}

bool CausalGraph::confounder_between(NodeId a, NodeId b) const {
  const auto key = std::make_pair(std::min(a, b), std::max(a, b));
  return std::binary_search(confounders_.begin(), confounders_.end(), key);
}

Bitset CausalGraph::feature_set() const {
  Bitset all(static_cast<std::size_t>(node_count()));
  for (int v = 0; v < node_count(); ++v)
    if (v != target_) all.set(static_cast<std::size_t>(v));
  return all;
}

std::vector<NodeId> CausalGraph::feature_list() const {
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(node_count() - 1));
  for (int v = 0; v < node_count(); ++v)
    if (v != target_) out.push_back(v);
  return out;
}

bool CausalGraph::is_frontier(NodeId x, const Bitset& s) const {
  if (x == target_) throw Error("is_frontier: x must not be the target");
  if (s.test(static_cast<std::size_t>(x))) throw Error("is_frontier: s must not contain x");
  if (s.test(static_cast<std::size_t>(target_))) throw Error("is_frontier: s must not contain the target");
  const std::size_t n = static_cast<std::size_t>(node_count());
  Bitset visited = s;
  Bitset layer = Bitset::single(n, static_cast<std::size_t>(x));
  while (layer.any() && !layer.test(static_cast<std::size_t>(target_))) {
    visited |= layer;
    Bitset next(n);
    layer.for_each([&](std::size_t u) { next |= children_[u]; });
    next.and_not(visited);
    layer = next;
  }
  return layer.none();
}

std::size_t CausalGraph::edge_count() const {
  std::size_t c = 0;
  for (const auto& ch : children_) c += ch.count();
  return c;
}

nlohmann::json CausalGraph::to_json() const {
  nlohmann::json j;
  j["nodes"] = labels_;
  auto edges = nlohmann::json::array();
  for (int u = 0; u < node_count(); ++u)
    children_[static_cast<std::size_t>(u)].for_each([&](std::size_t v) {
      edges.push_back({labels_[static_cast<std::size_t>(u)], labels_[v]});
    });
  j["edges"] = std::move(edges);
  auto conf = nlohmann::json::array();
  for (const auto& [a, b] : confounders_)
    conf.push_back({labels_[static_cast<std::size_t>(a)], labels_[static_cast<std::size_t>(b)]});
  j["confounders"] = std::move(conf);
  j["target"] = labels_[static_cast<std::size_t>(target_)];
  return j;
}

CausalGraph CausalGraph::from_json(const nlohmann::json& j) {
  GraphSpec spec;
  spec.nodes = j.at("nodes").get<std::vector<std::string>>();
  for (const auto& e : j.at("edges"))
    spec.edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  if (j.contains("confounders"))
    for (const auto& c : j.at("confounders"))
      spec.confounders.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
  spec.target = j.at("target").get<std::string>();
  return build(spec);
}

std::uint64_t CausalGraph::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix_byte = [&h](unsigned char b) {
    h ^= b;
    h *= 1099511628211ull;
  };
  auto mix_str = [&](const std::string& s) {
    for (char c : s) mix_byte(static_cast<unsigned char>(c));
    mix_byte(0);
  };
  auto mix_int = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(v >> (i * 8)));
  };
  for (const auto& l : labels_) mix_str(l);
  mix_int(static_cast<std::uint64_t>(target_));
  for (int u = 0; u < node_count(); ++u)
    children_[static_cast<std::size_t>(u)].for_each([&](std::size_t v) {
      mix_int(static_cast<std::uint64_t>(u));
      mix_int(v);
    });
  for (const auto& [a, b] : confounders_) {
    mix_int(static_cast<std::uint64_t>(a));
    mix_int(static_cast<std::uint64_t>(b));
  }
  return h;
}

namespace {

// Kept nodes reachable from each child of `start` through dropped-only
// paths.  When include_direct_children is true, kept direct children count
// as reached (used both for edge projection and confounder endpoints).
Bitset reach_through_dropped(const CausalGraph& g, NodeId start, const Bitset& keep) {
  const std::size_t n = static_cast<std::size_t>(g.node_count());
  Bitset reached(n);
  Bitset expanded(n);
  std::vector<NodeId> stack{start};
  expanded.set(static_cast<std::size_t>(start));
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    g.children(u).for_each([&](std::size_t c) {
      if (keep.test(c)) {
        reached.set(c);
      } else if (!expanded.test(c)) {
        expanded.set(c);
        stack.push_back(static_cast<NodeId>(c));
      }
    });
  }
  return reached;
}

}  // namespace

Projection project(const CausalGraph& g, const Bitset& keep) {
  const std::size_t n = static_cast<std::size_t>(g.node_count());
  if (keep.size() != n) throw Error("project: keep-set width mismatch");
  if (!keep.test(static_cast<std::size_t>(g.target()))) throw Error("project: target must be kept");

  Projection out;
  out.from_original.assign(n, -1);
  for (const NodeId v : g.topo_order()) {
    if (keep.test(static_cast<std::size_t>(v))) {
      out.from_original[static_cast<std::size_t>(v)] = static_cast<NodeId>(out.to_original.size());
      out.to_original.push_back(v);
    }
  }

  GraphSpec spec;
  for (const NodeId v : out.to_original) spec.nodes.push_back(g.label(v));
  spec.target = g.label(g.target());

  for (const NodeId u : out.to_original) {
    const Bitset targets = reach_through_dropped(g, u, keep);
    targets.for_each([&](std::size_t v) {
      spec.edges.emplace_back(g.label(u), g.label(static_cast<NodeId>(v)));
    });
  }

  // Divergent-path confounders.  Endpoint sets: a kept node stands for
  // itself; a dropped node stands for every kept node its dropped-only
  // directed paths can reach.
  std::set<std::pair<NodeId, NodeId>> conf;
  auto add_pairs = [&](const Bitset& left, const Bitset& right) {
    left.for_each([&](std::size_t a) {
      right.for_each([&](std::size_t b) {
        if (a != b) conf.emplace(std::min(a, b), std::max(a, b));
      });
    });
  };
  for (int w = 0; w < g.node_count(); ++w) {
    if (keep.test(static_cast<std::size_t>(w))) continue;
    const Bitset r = reach_through_dropped(g, w, keep);
    add_pairs(r, r);  // dropped common cause
  }
  for (const auto& [a, b] : g.confounders()) {
    const Bitset ra = keep.test(static_cast<std::size_t>(a))
                          ? Bitset::single(n, static_cast<std::size_t>(a))
                          : reach_through_dropped(g, a, keep);
    const Bitset rb = keep.test(static_cast<std::size_t>(b))
                          ? Bitset::single(n, static_cast<std::size_t>(b))
                          : reach_through_dropped(g, b, keep);
    add_pairs(ra, rb);
  }
  for (const auto& [a, b] : conf)
    spec.confounders.emplace_back(g.label(a), g.label(b));

  out.graph = CausalGraph::build(spec);
  return out;
}

Projection project_to_target(const CausalGraph& g) {
  return project(g, g.ancestors(g.target()));
}

RandomGraphResult sample_random_graph(int k, double p, std::uint64_t seed, int max_tries) {
  if (k < 1) throw Error("sample_random_graph: need at least one feature node");
  if (p < 0.0 || p > 1.0) throw Error("sample_random_graph: p outside [0,1]");

  GraphSpec spec;
  for (int i = 0; i < k; ++i) spec.nodes.push_back("V" + std::to_string(i));
  spec.nodes.push_back("Y");
  spec.target = "Y";

  // Sparse densities accept with tiny probability (every feature must reach
  // the target), so each draw and its admissibility test run on plain
  // adjacency flags; the full validated graph is only built on acceptance.
  const std::size_t n = static_cast<std::size_t>(k) + 1;
  std::vector<char> adj(n * n, 0);
  std::vector<char> reaches(n, 0);

  RngStream rng(derive_seed(seed, {0x6772617068u}));
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    std::fill(adj.begin(), adj.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform01() < p) adj[i * n + j] = 1;

    // reaches[i]: a directed path i -> ... -> Y exists.
    std::fill(reaches.begin(), reaches.end(), 0);
    reaches[n - 1] = 1;
    for (std::size_t i = n - 1; i-- > 0;)
      for (std::size_t j = i + 1; j < n && !reaches[i]; ++j)
        if (adj[i * n + j] && reaches[j]) reaches[i] = 1;
    bool all_ancestors = true;
    for (std::size_t i = 0; i + 1 < n; ++i) all_ancestors = all_ancestors && reaches[i];
    if (!all_ancestors) continue;
    std::size_t y_parents = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) y_parents += adj[i * n + (n - 1)] ? 1u : 0u;
    if (y_parents >= static_cast<std::size_t>(k)) continue;

    spec.edges.clear();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (adj[i * n + j]) spec.edges.emplace_back(spec.nodes[i], spec.nodes[j]);
    return {CausalGraph::build(spec), attempt};
  }
  throw RejectionBudgetExceeded("no admissible graph with k=" + std::to_string(k) +
                                " p=" + std::to_string(p) + " after " +
                                std::to_string(max_tries) + " draws");
}

}  // namespace doshap
