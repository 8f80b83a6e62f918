#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "doshap/bitset.hpp"
#include "doshap/causal_graph.hpp"
#include "doshap/fra.hpp"
#include "doshap/value_function.hpp"

#include <json.hpp>

namespace doshap {

// Layering of the per-explanation coalition-value cache:
//   none  — every lookup evaluates the value function (naive baseline);
//   plain — repeated coalitions reuse the first evaluation;
//   fra   — coalitions are first reduced to their irreducible core, then
//           cached, so distinct coalitions can share one evaluation.
enum class CacheMode { none, plain, fra };

std::string to_string(CacheMode m);

// Decides whether the interventional queries behind each coalition value
// are known to be answerable before any sampling happens.  Only the
// trivial criterion is implemented: a query is passed when no latent
// confounder survives edge-deletion of the coalition among the target's
// remaining ancestors (in particular, confounder-free graphs pass
// wholesale).  Anything finer must be asserted by the caller.
class IdentifiabilityGate {
 public:
  enum class Mode {
    markovian_trivial,  // confounded graphs are rejected before the run
    user_asserted,      // caller vouches for identifiability; no checks
    halt_on_unknown,    // per-coalition trivial verdicts; halt on first unknown
  };

  IdentifiabilityGate(Mode mode, bool ground_truth_model);

  // Pre-run check; throws IdentifiabilityError for unasserted confounded
  // graphs in markovian_trivial mode.
  void check_graph(const CausalGraph& g) const;

  // Per-coalition verdict (cached), for the evaluated (irreducible)
  // coalition given as node indices; throws IdentifiabilityError on the
  // first unknown coalition in halt_on_unknown mode.
  void check_coalition(const CausalGraph& g, const Bitset& coalition_nodes) const;

 private:
  Mode mode_;
  bool ground_truth_;
  mutable std::mutex mu_;
  mutable std::unordered_map<Bitset, bool, BitsetHash> verdicts_;
};

// True when E[target | do(coalition)] needs no genuine causal-effect
// identification: every declared confounder pair either has an endpoint
// inside the coalition (severed by the intervention) or an endpoint that
// is irrelevant to the target once the coalition's incoming edges are cut.
bool trivially_identifiable(const CausalGraph& g, const Bitset& coalition_nodes);

struct EngineOptions {
  CacheMode cache = CacheMode::fra;
  IdentifiabilityGate::Mode gate = IdentifiabilityGate::Mode::markovian_trivial;
  // Direct access to the true structural model: interventional sampling is
  // well-defined by construction, so the gate is bypassed.
  bool ground_truth = false;
  int threads = 1;
  std::uint64_t seed = 0;   // root of the permutation stream (approximate mode)
  int feature_cap = 20;     // exact-mode enumeration bound
};

struct ShapleyReport {
  std::vector<std::string> labels;  // feature labels, feature-index order
  std::vector<double> phi;
  std::vector<double> phi_se;
  double base_value = 0.0;  // value of the empty coalition
  double full_value = 0.0;  // value of the grand coalition
  double efficiency_residual = 0.0;

  std::int64_t nu_requests = 0;     // coalition-value lookups issued
  std::int64_t nu_evaluations = 0;  // value-function calls actually made
  std::int64_t cache_hits = 0;
  std::int64_t fra_reductions = 0;  // lookups whose coalition strictly shrank
  std::int64_t permutations = 0;    // 0 in exact mode

  double wall_ms_total = 0.0;
  double wall_ms_values = 0.0;  // time inside value-function calls
  std::string value_function;
  CacheMode cache_mode = CacheMode::none;

  double phi_sum() const;
  nlohmann::json to_json() const;
};

// Exact Shapley attribution: the full weighted sum over all 2^K
// coalitions of vf, explaining instance x.  The graph drives coalition
// reduction (CacheMode::fra, which requires it in target-projected normal
// form) and the identifiability gate.  An optional shared FrontierCache
// carries frontier verdicts across calls.
ShapleyReport exact_shapley(const ValueFunction& vf, const CausalGraph& g,
                            std::span<const double> x, const EngineOptions& opts = {},
                            FrontierCache* frontier_cache = nullptr);

// Permutation-sampling approximation: n_perms independent uniform
// permutations, each scanned front to back so that consecutive coalition
// values yield one marginal contribution per feature (the diff-tuple
// update).  Reported errors are permutation-sampling standard errors.
// Deterministic for fixed options: permutation t is derived from
// (opts.seed, t) and results are aggregated in t order, so thread count
// does not affect the output.
ShapleyReport approx_shapley(const ValueFunction& vf, const CausalGraph& g,
                             std::span<const double> x, std::int64_t n_perms,
                             const EngineOptions& opts = {},
                             FrontierCache* frontier_cache = nullptr);

// Expected fraction of the n-th permutation's coalition values that miss a
// plain coalition cache warmed by the previous n-1 permutations.
double expected_uncached_ratio(std::int64_t n, int k);

// Expected fraction of all 2^K coalitions seen at least once after n
// permutations.
double expected_coverage(std::int64_t n, int k);

// Smallest permutation count whose expected coverage reaches `target`
// (0 < target < 1).
std::int64_t budget_for_coverage(double target, int k);

struct FeatureImportance {
  std::vector<double> fi;      // normalized; sums to 1
  std::int64_t skipped = 0;    // samples dropped for having all-zero phi
};

// Mean per-sample share of absolute attribution.  Samples whose phi row is
// all zeros are skipped and counted; throws AllZeroAttribution when every
// sample is skipped.
FeatureImportance feature_importance(const std::vector<std::vector<double>>& phi_rows);

// Mean squared entrywise difference between two attribution matrices.
double shap_loss(const std::vector<std::vector<double>>& ground,
                 const std::vector<std::vector<double>>& estimate);

}  // namespace doshap
