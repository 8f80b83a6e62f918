#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <utility>
#include <vector>

#include "doshap/bitset.hpp"
#include "doshap/causal_graph.hpp"

namespace doshap {

// Memo of frontier decisions keyed by an encoded node set.  The key bundles
// a candidate node x (its lowest bit) with the blocking set that was tested
// against it; the stored bool says whether that set is a frontier between x
// and the target.  Entries are only ever appended and are valid for exactly
// one graph, so the cache can be shared across explanations and persisted
// alongside the graph's content hash.
class FrontierCache {
 public:
  explicit FrontierCache(bool thread_safe = false) : thread_safe_(thread_safe) {}

  // Moving transfers the entries with a fresh mutex; the source must not be
  // in concurrent use (it never is: moves only occur at construction time).
  FrontierCache(FrontierCache&& other) noexcept
      : thread_safe_(other.thread_safe_), map_(std::move(other.map_)) {}

  std::optional<bool> lookup(const Bitset& key) const;
  // Concurrent inserts are last-writer-wins; for a fixed graph every writer
  // computes the same value, so races are benign.
  void insert(const Bitset& key, bool value);

  std::size_t size() const;
  std::vector<std::pair<Bitset, bool>> entries() const;  // sorted by key hex

  void save(std::ostream& os, std::uint64_t graph_hash) const;
  // Throws Error when the stream's graph hash does not match expected_hash.
  static FrontierCache load(std::istream& is, std::uint64_t expected_hash, bool thread_safe = false);

 private:
  bool thread_safe_;
  mutable std::shared_mutex mu_;
  std::unordered_map<Bitset, bool, BitsetHash> map_;
};

// Precomputed per-node bit tables for the word-level reduction path.
// Construction validates that the graph is in target-projected normal form
// (every node an ancestor of the target, indices topologically ordered,
// target last); reductions are only sound on such graphs.
struct FraContext {
  explicit FraContext(const CausalGraph& g);

  const CausalGraph& graph() const { return *g_; }
  int target_bit() const { return y_; }

  const CausalGraph* g_;
  int y_;
  Bitset pa_y_;
};

// Removes from coalition s every member whose strictly-later members (in
// topological order) already block all of its directed paths to the target;
// the interventional value of the coalition is unchanged by construction.
// Parents of the target are never removable.  Both implementations produce
// identical results and identical FrontierCache contents.
//
// reduce_set is the direct, container-based reference; reduce_bits is the
// production path operating on machine words with leading-zero-count bit
// extraction.
Bitset reduce_set(const Bitset& s, FrontierCache& cache, const CausalGraph& g);
Bitset reduce_bits(const Bitset& s, FrontierCache& cache, const FraContext& ctx);

// Independent characterization used as a test oracle: the irreducible core
// of s is s intersected with the ancestors of the target in the graph with
// all edges into s removed.  Quadratic-ish and cache-free by design.
Bitset irreducible_oracle(const Bitset& s, const CausalGraph& g);

}  // namespace doshap
