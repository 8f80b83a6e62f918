#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "doshap/bitset.hpp"

namespace doshap {

// Dense node index within one graph.  Ids are assigned from the node list
// order at construction and stay stable for the lifetime of that graph;
// labels are carried as metadata for I/O and reports.
using NodeId = int;

// Builder input for CausalGraph.  Edges and confounders refer to labels.
struct GraphSpec {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::pair<std::string, std::string>> confounders;
  std::string target;
};

// An acyclic directed graph over measured nodes with a distinguished target
// (outcome) node, plus unordered "confounder" pairs marking nodes that share
// an unobserved common cause.  Parent/child queries are exclusive of the
// node itself; ancestor/descendant queries are inclusive.
class CausalGraph {
 public:
  // Empty placeholder; only assignment is meaningful on it.  Real graphs
  // come from build() and its callers.
  CausalGraph() = default;

  static CausalGraph build(const GraphSpec& spec);

  int node_count() const { return static_cast<int>(labels_.size()); }
  NodeId target() const { return target_; }
  const std::string& label(NodeId v) const { return labels_[static_cast<std::size_t>(v)]; }
  const std::vector<std::string>& labels() const { return labels_; }
  NodeId node(const std::string& label) const;  // throws UnknownNode

  bool has_edge(NodeId u, NodeId v) const { return children_[static_cast<std::size_t>(u)].test(static_cast<std::size_t>(v)); }
  const Bitset& parents(NodeId v) const { return parents_[static_cast<std::size_t>(v)]; }
  const Bitset& children(NodeId v) const { return children_[static_cast<std::size_t>(v)]; }
  const Bitset& ancestors(NodeId v) const { return ancestors_[static_cast<std::size_t>(v)]; }
  const Bitset& descendants(NodeId v) const { return descendants_[static_cast<std::size_t>(v)]; }

  // Deterministic topological order: among ready nodes the smallest index
  // is emitted first, so equal graphs always produce equal orders.
  const std::vector<NodeId>& topo_order() const { return topo_; }

  const std::vector<std::pair<NodeId, NodeId>>& confounders() const { return confounders_; }
  bool confounded() const { return !confounders_.empty(); }
  bool confounder_between(NodeId a, NodeId b) const;

  // All nodes except the target, as a bitset / ascending id list.
  Bitset feature_set() const;
  std::vector<NodeId> feature_list() const;

  // True iff every directed path from x to the target passes through a node
  // of s.  Implemented as a layered child expansion from {x} that stops
  // at nodes of s; the expansion either empties out (frontier) or reaches
  // the target (not a frontier).  Requires x != target and !s.test(x).
  bool is_frontier(NodeId x, const Bitset& s) const;

  // True when the graph equals the ancestor set of its target, node indices
  // are themselves a topological order, and the target is the last index.
  // This is the normal form produced by project_to_target and the premise
  // of the integer coalition-reduction path.
  bool is_target_projected() const { return target_projected_; }

  nlohmann::json to_json() const;
  static CausalGraph from_json(const nlohmann::json& j);

  // Stable structural hash (labels, edges, confounders, target); used to
  // guard persisted caches against being replayed on a different graph.
  std::uint64_t content_hash() const;

  std::size_t edge_count() const;

 private:
  std::vector<std::string> labels_;
  NodeId target_ = 0;
  std::vector<Bitset> parents_, children_, ancestors_, descendants_;
  std::vector<std::pair<NodeId, NodeId>> confounders_;
  std::vector<NodeId> topo_;
  bool target_projected_ = false;
};

// Result of restricting a graph to a subset of its nodes.  New ids follow
// the original topological order of the kept nodes; the mappings relate the
// two id spaces (from_original is -1 for dropped nodes).
struct Projection {
  CausalGraph graph;
  std::vector<NodeId> to_original;
  std::vector<NodeId> from_original;
};

// Latent-projection of g onto the kept node set: a directed edge u -> v is
// created when some directed path u -> ... -> v runs entirely through
// dropped nodes, and a confounder u <-> v when a divergent pair of directed
// paths meets u and v from a dropped common cause or from an existing
// confounder pair, again with every inner node dropped.  The target must be
// kept.
Projection project(const CausalGraph& g, const Bitset& keep);

// Projection onto the inclusive ancestor set of the target.  The result is
// in target-projected normal form (see is_target_projected).
Projection project_to_target(const CausalGraph& g);

struct RandomGraphResult {
  CausalGraph graph;
  int rejections = 0;
};

// Random upper-triangular DAG over k feature nodes V0..V{k-1} plus target Y:
// each forward pair gets an edge with probability p.  Draws are rejected
// until every feature is an ancestor of Y and the parents of Y are a proper
// subset of the features; throws RejectionBudgetExceeded after max_tries.
RandomGraphResult sample_random_graph(int k, double p, std::uint64_t seed, int max_tries = 10000);

}  // namespace doshap
