#include "doshap/shapley.hpp"

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <memory>
#include <numeric>
#include <thread>

#include "doshap/errors.hpp"
#include "doshap/rng.hpp"

namespace doshap {
namespace {

constexpr std::uint64_t kPermutationStreamTag = 0x7065726d75746174ull;

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

// Coalition-value cache with single-flight semantics: under contention a
// key is evaluated exactly once and every other caller waits for that
// result.  Entries are heap-allocated so waiting threads survive rehashes.
class ValueCache {
 public:
  explicit ValueCache(bool enabled) : enabled_(enabled) {}

  template <typename F>
  ValueEstimate get_or_compute(const Bitset& key, F&& compute) {
    if (!enabled_) {
      ++evaluations_;
      return compute();
    }
    std::shared_ptr<Entry> e;
    {
      std::unique_lock lk(mu_);
      auto [it, inserted] = map_.try_emplace(key);
      if (inserted) it->second = std::make_shared<Entry>();
      e = it->second;
      if (!inserted) {
        ++hits_;
        cv_.wait(lk, [&] { return e->ready; });
        return e->value;
      }
    }
    ValueEstimate v = compute();
    {
      std::lock_guard lk(mu_);
      e->value = v;
      e->ready = true;
      ++evaluations_;
    }
    cv_.notify_all();
    return v;
  }

  std::int64_t evaluations() const { return evaluations_.load(); }
  std::int64_t hits() const { return hits_.load(); }

 private:
  struct Entry {
    bool ready = false;
    ValueEstimate value;
  };

  bool enabled_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::unordered_map<Bitset, std::shared_ptr<Entry>, BitsetHash> map_;
  std::atomic<std::int64_t> evaluations_{0};
  std::atomic<std::int64_t> hits_{0};
};

Bitset from_mask(std::size_t nbits, std::uint64_t mask) {
  Bitset b(nbits);
  while (mask) {
    const int i = std::countr_zero(mask);
    b.set(static_cast<std::size_t>(i));
    mask &= mask - 1;
  }
  return b;
}

// Shared evaluation path of both engines: widen the feature coalition to
// node indices, reduce it when FRA is on, gate it, then serve it from the
// single-flight cache.
struct EvalPipeline {
  EvalPipeline(const ValueFunction& vf, const CausalGraph& g, std::span<const double> x,
               const EngineOptions& opts, FrontierCache* shared_frontier)
      : vf_(vf),
        g_(g),
        x_(x),
        mode_(opts.cache),
        gate_(opts.gate, opts.ground_truth),
        cache_(opts.cache != CacheMode::none),
        local_frontier_(/*thread_safe=*/opts.threads > 1) {
    gate_.check_graph(g_);
    if (mode_ == CacheMode::fra) {
      fra_ctx_.emplace(g_);  // validates target-projected normal form
      frontier_ = shared_frontier ? shared_frontier : &local_frontier_;
    }
  }

  Bitset widen(const Bitset& features) const {
    Bitset nodes(static_cast<std::size_t>(g_.node_count()));
    features.for_each([&](std::size_t i) {
      nodes.set(static_cast<std::size_t>(vf_.features().nodes[i]));
    });
    return nodes;
  }

  Bitset narrow(const Bitset& nodes) const {
    Bitset features(static_cast<std::size_t>(vf_.num_features()));
    nodes.for_each([&](std::size_t v) {
      features.set(static_cast<std::size_t>(vf_.features().of_node[v]));
    });
    return features;
  }

  ValueEstimate value_of(const Bitset& coalition) { return value_of_keyed(coalition, nullptr); }

  ValueEstimate value_of_keyed(const Bitset& coalition, Bitset* evaluated_key) {
    requests_.fetch_add(1, std::memory_order_relaxed);
    Bitset eval = coalition;
    if (mode_ == CacheMode::fra) {
      const Bitset nodes = widen(coalition);
      const Bitset reduced = reduce_bits(nodes, *frontier_, *fra_ctx_);
      if (reduced.count() != nodes.count()) reductions_.fetch_add(1, std::memory_order_relaxed);
      eval = narrow(reduced);
    }
    gate_.check_coalition(g_, widen(eval));
    if (evaluated_key) *evaluated_key = eval;
    return cache_.get_or_compute(eval, [&] {
      const auto t0 = Clock::now();
      ValueEstimate v = vf_.evaluate(eval, x_);
      value_ns_.fetch_add(
          std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count(),
          std::memory_order_relaxed);
      return v;
    });
  }

  void fill_stats(ShapleyReport& r) const {
    r.nu_requests = requests_.load();
    r.nu_evaluations = cache_.evaluations();
    r.cache_hits = cache_.hits();
    r.fra_reductions = reductions_.load();
    r.wall_ms_values = static_cast<double>(value_ns_.load()) / 1e6;
    r.value_function = vf_.name();
    r.cache_mode = mode_;
  }

  const ValueFunction& vf_;
  const CausalGraph& g_;
  std::span<const double> x_;
  CacheMode mode_;
  IdentifiabilityGate gate_;
  ValueCache cache_;
  FrontierCache local_frontier_;
  FrontierCache* frontier_ = nullptr;
  std::optional<FraContext> fra_ctx_;
  std::atomic<std::int64_t> requests_{0};
  std::atomic<std::int64_t> reductions_{0};
  std::atomic<std::int64_t> value_ns_{0};
};

std::vector<std::string> feature_labels(const ValueFunction& vf, const CausalGraph& g) {
  std::vector<std::string> out;
  out.reserve(vf.features().nodes.size());
  for (const NodeId v : vf.features().nodes) out.push_back(g.label(v));
  return out;
}

double log_binomial(int k, int s) {
  return std::lgamma(k + 1.0) - std::lgamma(s + 1.0) - std::lgamma(k - s + 1.0);
}

}  // namespace

std::string to_string(CacheMode m) {
  switch (m) {
    case CacheMode::none: return "none";
    case CacheMode::plain: return "plain";
    case CacheMode::fra: return "fra";
  }
  return "?";
}

IdentifiabilityGate::IdentifiabilityGate(Mode mode, bool ground_truth_model)
    : mode_(mode), ground_truth_(ground_truth_model) {}

void IdentifiabilityGate::check_graph(const CausalGraph& g) const {
  if (ground_truth_ || mode_ != Mode::markovian_trivial) return;
  if (g.confounded())
    throw IdentifiabilityError(
        "graph has latent confounders; coalition queries are not trivially identifiable "
        "(assert identifiability explicitly or evaluate against the ground-truth model)");
}

void IdentifiabilityGate::check_coalition(const CausalGraph& g, const Bitset& coalition_nodes) const {
  if (ground_truth_ || mode_ == Mode::user_asserted) return;
  if (mode_ == Mode::markovian_trivial) return;  // settled wholesale by check_graph
  bool verdict;
  {
    std::lock_guard lk(mu_);
    const auto it = verdicts_.find(coalition_nodes);
    if (it != verdicts_.end()) {
      verdict = it->second;
    } else {
      verdict = trivially_identifiable(g, coalition_nodes);
      verdicts_.emplace(coalition_nodes, verdict);
    }
  }
  if (!verdict) {
    std::string members;
    coalition_nodes.for_each([&](std::size_t v) {
      if (!members.empty()) members += ",";
      members += g.label(static_cast<NodeId>(v));
    });
    throw IdentifiabilityError("coalition {" + members +
                               "} is not known identifiable; halting before sampling");
  }
}

bool trivially_identifiable(const CausalGraph& g, const Bitset& coalition_nodes) {
  if (coalition_nodes.none()) return true;  // plain observational expectation
  const std::size_t n = static_cast<std::size_t>(g.node_count());
  const NodeId y = g.target();
  // Ancestors of the target once edges into the coalition are deleted.
  Bitset relevant = Bitset::single(n, static_cast<std::size_t>(y));
  std::vector<NodeId> stack{y};
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    if (u != y && coalition_nodes.test(static_cast<std::size_t>(u))) continue;
    g.parents(u).for_each([&](std::size_t p) {
      if (!relevant.test(p)) {
        relevant.set(p);
        stack.push_back(static_cast<NodeId>(p));
      }
    });
  }
  for (const auto& [a, b] : g.confounders()) {
    const std::size_t ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
    const bool severed = coalition_nodes.test(ia) || coalition_nodes.test(ib);
    if (!severed && relevant.test(ia) && relevant.test(ib)) return false;
  }
  return true;
}

double ShapleyReport::phi_sum() const { return std::accumulate(phi.begin(), phi.end(), 0.0); }

nlohmann::json ShapleyReport::to_json() const {
  nlohmann::json phi_obj = nlohmann::json::object();
  for (std::size_t i = 0; i < labels.size(); ++i)
    phi_obj[labels[i]] = {{"value", phi[i]}, {"stderr", phi_se[i]}};
  return nlohmann::json{
      {"schema_version", 1},
      {"phi", phi_obj},
      {"base_value", base_value},
      {"full_value", full_value},
      {"efficiency_residual", efficiency_residual},
      {"nu_requests", nu_requests},
      {"nu_evals", nu_evaluations},
      {"cache_hits", cache_hits},
      {"fra_reductions", fra_reductions},
      {"permutations", permutations},
      {"timings_ms", {{"total", wall_ms_total}, {"values", wall_ms_values}}},
      {"value_function", value_function},
      {"cache_mode", to_string(cache_mode)},
  };
}

ShapleyReport exact_shapley(const ValueFunction& vf, const CausalGraph& g,
                            std::span<const double> x, const EngineOptions& opts,
                            FrontierCache* frontier_cache) {
  const int k = vf.num_features();
  if (k < 1) throw Error("exact_shapley: value function has no features");
  const int cap = std::min(opts.feature_cap, 25);
  if (k > cap)
    throw TooManyFeatures("exact enumeration of " + std::to_string(k) +
                          " features exceeds the cap of " + std::to_string(cap));
  const auto t_start = Clock::now();
  EvalPipeline pipe(vf, g, x, opts, frontier_cache);

  const std::size_t m = std::size_t{1} << k;
  std::vector<ValueEstimate> val(m);
  std::vector<int> eval_id(m, -1);
  std::unordered_map<Bitset, int, BitsetHash> key_ids;
  std::vector<double> key_se;
  for (std::size_t mask = 0; mask < m; ++mask) {
    Bitset eval_key(static_cast<std::size_t>(k));
    val[mask] = pipe.value_of_keyed(from_mask(static_cast<std::size_t>(k), mask), &eval_key);
    auto [it, inserted] = key_ids.try_emplace(eval_key, static_cast<int>(key_se.size()));
    if (inserted) key_se.push_back(val[mask].se);
    eval_id[mask] = it->second;
  }

  // Exact rational coalition weights 1 / (K * C(K-1, |S|)) with integer
  // binomials (K <= 25 keeps them well inside 64 bits).
  std::vector<double> weight(static_cast<std::size_t>(k), 0.0);
  {
    std::vector<std::uint64_t> c(static_cast<std::size_t>(k), 0);  // C(K-1, s)
    c[0] = 1;
    for (int row = 1; row <= k - 1; ++row)
      for (int s = row; s >= 1; --s) c[static_cast<std::size_t>(s)] += c[static_cast<std::size_t>(s - 1)];
    for (int s = 0; s < k; ++s)
      weight[static_cast<std::size_t>(s)] =
          1.0 / (static_cast<double>(k) * static_cast<double>(c[static_cast<std::size_t>(s)]));
  }

  ShapleyReport rep;
  rep.labels = feature_labels(vf, g);
  rep.phi.assign(static_cast<std::size_t>(k), 0.0);
  rep.phi_se.assign(static_cast<std::size_t>(k), 0.0);
  bool any_se = false;
  for (const double se : key_se) any_se = any_se || se > 0.0;
  std::vector<double> coeff;
  for (int i = 0; i < k; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    double acc = 0.0;
    if (any_se) coeff.assign(key_se.size(), 0.0);
    for (std::size_t mask = 0; mask < m; ++mask) {
      if (mask & bit) continue;
      const double w = weight[static_cast<std::size_t>(std::popcount(mask))];
      acc += w * (val[mask | bit].value - val[mask].value);
      if (any_se) {
        coeff[static_cast<std::size_t>(eval_id[mask | bit])] += w;
        coeff[static_cast<std::size_t>(eval_id[mask])] -= w;
      }
    }
    rep.phi[static_cast<std::size_t>(i)] = acc;
    if (any_se) {
      double var = 0.0;
      for (std::size_t j = 0; j < coeff.size(); ++j) var += coeff[j] * coeff[j] * key_se[j] * key_se[j];
      rep.phi_se[static_cast<std::size_t>(i)] = std::sqrt(var);
    }
  }

  rep.base_value = val[0].value;
  rep.full_value = val[m - 1].value;
  rep.efficiency_residual = std::abs(rep.phi_sum() - (rep.full_value - rep.base_value));
  rep.permutations = 0;
  pipe.fill_stats(rep);
  rep.wall_ms_total = ms_between(t_start, Clock::now());
  return rep;
}

ShapleyReport approx_shapley(const ValueFunction& vf, const CausalGraph& g,
                             std::span<const double> x, std::int64_t n_perms,
                             const EngineOptions& opts, FrontierCache* frontier_cache) {
  const int k = vf.num_features();
  if (k < 1) throw Error("approx_shapley: value function has no features");
  if (n_perms < 1) throw Error("approx_shapley: need at least one permutation");
  const auto t_start = Clock::now();
  EvalPipeline pipe(vf, g, x, opts, frontier_cache);

  const std::size_t kk = static_cast<std::size_t>(k);
  const std::size_t nn = static_cast<std::size_t>(n_perms);
  std::vector<double> delta(nn * kk);  // marginal contributions, row per permutation

  std::atomic<std::int64_t> next_t{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mu;

  const auto run_one = [&](std::int64_t t) {
    RngStream rng(derive_seed(opts.seed, {kPermutationStreamTag, static_cast<std::uint64_t>(t)}));
    std::vector<int> perm(kk);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Bitset running(kk);
    double prev = pipe.value_of(running).value;
    for (int i : perm) {
      running.set(static_cast<std::size_t>(i));
      const double cur = pipe.value_of(running).value;
      delta[static_cast<std::size_t>(t) * kk + static_cast<std::size_t>(i)] = cur - prev;
      prev = cur;
    }
  };
  const auto worker = [&] {
    for (;;) {
      const std::int64_t t = next_t.fetch_add(1);
      if (t >= n_perms || failed.load()) return;
      try {
        run_one(t);
      } catch (...) {
        {
          std::lock_guard lk(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
        failed.store(true);
        return;
      }
    }
  };

  const int nthreads = std::max(1, opts.threads);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int spawn = static_cast<int>(std::min<std::int64_t>(nthreads, n_perms));
    pool.reserve(static_cast<std::size_t>(spawn));
    for (int i = 0; i < spawn; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ShapleyReport rep;
  rep.labels = feature_labels(vf, g);
  rep.phi.assign(kk, 0.0);
  rep.phi_se.assign(kk, 0.0);
  // Aggregate in permutation order so the result is independent of the
  // thread count.
  for (std::size_t t = 0; t < nn; ++t)
    for (std::size_t i = 0; i < kk; ++i) rep.phi[i] += delta[t * kk + i];
  for (std::size_t i = 0; i < kk; ++i) rep.phi[i] /= static_cast<double>(nn);
  if (nn > 1) {
    for (std::size_t i = 0; i < kk; ++i) {
      double ss = 0.0;
      for (std::size_t t = 0; t < nn; ++t) {
        const double d = delta[t * kk + i] - rep.phi[i];
        ss += d * d;
      }
      rep.phi_se[i] = std::sqrt(ss / static_cast<double>(nn - 1) / static_cast<double>(nn));
    }
  }

  rep.base_value = pipe.value_of(Bitset(kk)).value;
  Bitset grand(kk);
  for (std::size_t i = 0; i < kk; ++i) grand.set(i);
  rep.full_value = pipe.value_of(grand).value;
  rep.efficiency_residual = std::abs(rep.phi_sum() - (rep.full_value - rep.base_value));
  rep.permutations = n_perms;
  pipe.fill_stats(rep);
  rep.wall_ms_total = ms_between(t_start, Clock::now());
  return rep;
}

double expected_uncached_ratio(std::int64_t n, int k) {
  if (n < 1) throw Error("expected_uncached_ratio: permutation index must be >= 1");
  if (k < 1) throw Error("expected_uncached_ratio: feature count must be >= 1");
  if (n == 1) return 1.0;
  double acc = 0.0;
  for (int s = 1; s < k; ++s) {
    const double log_c = log_binomial(k, s);
    acc += std::exp(static_cast<double>(n - 1) * std::log1p(-std::exp(-log_c)));
  }
  return acc / static_cast<double>(k + 1);
}

double expected_coverage(std::int64_t n, int k) {
  if (n < 1) throw Error("expected_coverage: permutation count must be >= 1");
  if (k < 1) throw Error("expected_coverage: feature count must be >= 1");
  double missed = 0.0;
  const double log2k = static_cast<double>(k) * std::log(2.0);
  for (int s = 1; s < k; ++s) {
    const double log_c = log_binomial(k, s);
    missed += std::exp(log_c - log2k + static_cast<double>(n) * std::log1p(-std::exp(-log_c)));
  }
  return 1.0 - missed;
}

std::int64_t budget_for_coverage(double target, int k) {
  if (!(target > 0.0 && target < 1.0))
    throw Error("budget_for_coverage: target must lie strictly between 0 and 1");
  if (k < 1) throw Error("budget_for_coverage: feature count must be >= 1");
  std::int64_t hi = 1;
  while (expected_coverage(hi, k) < target) {
    if (hi > (std::int64_t{1} << 60)) throw Error("budget_for_coverage: search overflow");
    hi *= 2;
  }
  std::int64_t lo = hi / 2;  // coverage(lo) < target (or lo == 0)
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (expected_coverage(mid, k) >= target ? hi : lo) = mid;
  }
  return hi;
}

FeatureImportance feature_importance(const std::vector<std::vector<double>>& phi_rows) {
  if (phi_rows.empty()) throw Error("feature_importance: no attribution rows");
  const std::size_t k = phi_rows[0].size();
  FeatureImportance out;
  std::vector<double> acc(k, 0.0);
  std::int64_t used = 0;
  for (const auto& row : phi_rows) {
    if (row.size() != k) throw ShapeMismatch("attribution rows have differing lengths");
    double total = 0.0;
    for (const double p : row) total += std::abs(p);
    if (total == 0.0) {
      ++out.skipped;
      continue;
    }
    for (std::size_t i = 0; i < k; ++i) acc[i] += std::abs(row[i]) / total;
    ++used;
  }
  if (used == 0) throw AllZeroAttribution("every sample produced an all-zero attribution row");
  out.fi.resize(k);
  for (std::size_t i = 0; i < k; ++i) out.fi[i] = acc[i] / static_cast<double>(used);
  return out;
}

double shap_loss(const std::vector<std::vector<double>>& ground,
                 const std::vector<std::vector<double>>& estimate) {
  if (ground.size() != estimate.size())
    throw ShapeMismatch("attribution matrices have differing row counts");
  if (ground.empty()) throw Error("shap_loss: empty attribution matrices");
  double acc = 0.0;
  std::size_t cells = 0;
  for (std::size_t r = 0; r < ground.size(); ++r) {
    if (ground[r].size() != estimate[r].size())
      throw ShapeMismatch("attribution matrices have differing row lengths");
    for (std::size_t i = 0; i < ground[r].size(); ++i) {
      const double d = ground[r][i] - estimate[r][i];
      acc += d * d;
      ++cells;
    }
  }
  if (cells == 0) throw Error("shap_loss: empty attribution matrices");
  return acc / static_cast<double>(cells);
}

}  // namespace doshap
