#include "doshap/fra.hpp"

#include <algorithm>
#include <mutex>
#include <ostream>
#include <set>

#include <json.hpp>

#include "doshap/errors.hpp"

namespace doshap {

std::optional<bool> FrontierCache::lookup(const Bitset& key) const {
  if (thread_safe_) {
    std::shared_lock lock(mu_);
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }
  auto it = map_.find(key);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void FrontierCache::insert(const Bitset& key, bool value) {
  if (thread_safe_) {
    std::unique_lock lock(mu_);
    map_[key] = value;
    return;
  }
  map_[key] = value;
}

std::size_t FrontierCache::size() const {
  if (thread_safe_) {
    std::shared_lock lock(mu_);
    return map_.size();
  }
  return map_.size();
}

std::vector<std::pair<Bitset, bool>> FrontierCache::entries() const {
  std::vector<std::pair<Bitset, bool>> out;
  {
    std::shared_lock lock(mu_);
    out.assign(map_.begin(), map_.end());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.first.to_hex() < b.first.to_hex();
  });
  return out;
}

void FrontierCache::save(std::ostream& os, std::uint64_t graph_hash) const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["graph_hash"] = graph_hash;
  std::size_t width = 0;
  auto items = nlohmann::json::array();
  for (const auto& [key, value] : entries()) {
    width = key.size();
    items.push_back({key.to_hex(), value});
  }
  j["width"] = width;
  j["entries"] = std::move(items);
  os << j.dump(2) << "\n";
}

FrontierCache FrontierCache::load(std::istream& is, std::uint64_t expected_hash, bool thread_safe) {
  nlohmann::json j = nlohmann::json::parse(is);
  if (j.at("graph_hash").get<std::uint64_t>() != expected_hash)
    throw Error("FrontierCache::load: snapshot belongs to a different graph");
  FrontierCache cache(thread_safe);
  const std::size_t width = j.at("width").get<std::size_t>();
  for (const auto& e : j.at("entries"))
    cache.map_.emplace(Bitset::from_hex(width, e.at(0).get<std::string>()), e.at(1).get<bool>());
  return cache;
}

namespace {

void check_coalition(const Bitset& s, const CausalGraph& g) {
  if (s.size() != static_cast<std::size_t>(g.node_count()))
    throw Error("coalition width does not match graph");
  if (s.test(static_cast<std::size_t>(g.target())))
    throw Error("coalition must not contain the target");
}

void check_projected(const CausalGraph& g) {
  if (!g.is_target_projected())
    throw Error("coalition reduction requires a target-projected graph");
}

}  // namespace

Bitset reduce_set(const Bitset& s, FrontierCache& cache, const CausalGraph& g) {
  check_projected(g);
  check_coalition(s, g);
  const std::size_t n = static_cast<std::size_t>(g.node_count());
  const NodeId y = g.target();
  const Bitset& pa_y = g.parents(y);

  // Node indices are a topological order on projected graphs, so ascending
  // ids are the sort the algorithm asks for.
  const std::vector<std::size_t> members = s.to_indices();

  std::set<NodeId> processed;            // P: members handled so far (later in topo order)
  std::set<NodeId> removable;            // Z: members found to be removable
  for (auto it = members.rbegin(); it != members.rend(); ++it) {
    const NodeId x = static_cast<NodeId>(*it);
    if (!pa_y.test(static_cast<std::size_t>(x))) {
      // Blocking candidates: processed members that are descendants of x.
      // The frontier test may use the removable ones too (a larger blocking
      // set with equal verdict), but the cache key must not depend on them.
      std::set<NodeId> blockers;
      for (const NodeId v : processed)
        if (g.descendants(x).test(static_cast<std::size_t>(v))) blockers.insert(v);

      Bitset key(n);
      for (const NodeId v : blockers)
        if (!removable.count(v)) key.set(static_cast<std::size_t>(v));
      key.set(static_cast<std::size_t>(x));

      bool frontier;
      if (const auto hit = cache.lookup(key)) {
        frontier = *hit;
      } else {
        // Layered expansion of x's descendants, stopping at blockers.
        std::set<NodeId> visited = blockers;
        std::set<NodeId> layer{x};
        bool reached_target = false;
        while (!layer.empty()) {
          if (layer.count(y)) {
            reached_target = true;
            break;
          }
          visited.insert(layer.begin(), layer.end());
          std::set<NodeId> next;
          for (const NodeId u : layer)
            g.children(u).for_each([&](std::size_t c) {
              if (!visited.count(static_cast<NodeId>(c))) next.insert(static_cast<NodeId>(c));
            });
          layer = std::move(next);
        }
        frontier = !reached_target;
        cache.insert(key, frontier);
      }
      if (frontier) removable.insert(x);
    }
    processed.insert(x);
  }

  Bitset out = s;
  for (const NodeId z : removable) out.reset(static_cast<std::size_t>(z));
  return out;
}

FraContext::FraContext(const CausalGraph& g) : g_(&g) {
  check_projected(g);
  y_ = g.target();
  pa_y_ = g.parents(y_);
}

Bitset reduce_bits(const Bitset& s_in, FrontierCache& cache, const FraContext& ctx) {
  const CausalGraph& g = *ctx.g_;
  check_coalition(s_in, g);
  const std::size_t n = static_cast<std::size_t>(g.node_count());
  const std::size_t yb = static_cast<std::size_t>(ctx.y_);

  Bitset s = s_in;
  Bitset p(n);  // processed members
  Bitset z(n);  // removable members
  while (s.any()) {
    const int x = s.highest();
    const std::size_t xb = static_cast<std::size_t>(x);
    if (!ctx.pa_y_.test(xb)) {
      Bitset pp = p & g.descendants(x);
      Bitset key = pp.minus(z);
      key.set(xb);

      bool frontier;
      if (const auto hit = cache.lookup(key)) {
        frontier = *hit;
      } else {
        Bitset layer = Bitset::single(n, xb);
        while (layer.any() && !layer.test(yb)) {
          pp |= layer;
          Bitset scan = layer;
          while (scan.any()) {
            const int u = scan.highest();
            layer |= g.children(u);
            scan.reset(static_cast<std::size_t>(u));
          }
          layer.and_not(pp);
        }
        frontier = layer.none();
        cache.insert(key, frontier);
      }
      if (frontier) z.set(xb);
    }
    p.set(xb);
    s.reset(xb);
  }
  return p.minus(z);
}

Bitset irreducible_oracle(const Bitset& s, const CausalGraph& g) {
  check_projected(g);
  check_coalition(s, g);
  const std::size_t n = static_cast<std::size_t>(g.node_count());
  // Ancestors of the target once every edge into a member of s is deleted:
  // members may start such an ancestral path but never relay one.
  Bitset reached = Bitset::single(n, static_cast<std::size_t>(g.target()));
  std::vector<NodeId> stack{g.target()};
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    if (u != g.target() && s.test(static_cast<std::size_t>(u))) continue;
    g.parents(u).for_each([&](std::size_t pa) {
      if (!reached.test(pa)) {
        reached.set(pa);
        stack.push_back(static_cast<NodeId>(pa));
      }
    });
  }
  return s & reached;
}

}  // namespace doshap
