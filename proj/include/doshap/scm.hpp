#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "doshap/causal_graph.hpp"
#include "doshap/rational.hpp"
#include "doshap/rng.hpp"
#include "doshap/sample_table.hpp"

namespace doshap {

// Noise / latent prior.
struct Dist {
  enum class Kind { normal, beta, chi_squared, exponential, uniform01, uniform_int };
  Kind kind = Kind::uniform01;
  double a = 0.0;
  double b = 1.0;

  double draw(RngStream& rng) const;

  static Dist normal(double mean, double stddev) { return {Kind::normal, mean, stddev}; }
  static Dist beta(double a, double b) { return {Kind::beta, a, b}; }
  static Dist chi_squared(double dof) { return {Kind::chi_squared, dof, 0}; }
  static Dist exponential(double rate) { return {Kind::exponential, rate, 0}; }
  static Dist uniform01() { return {Kind::uniform01, 0, 1}; }
  static Dist uniform_int(std::int64_t lo, std::int64_t hi) {
    return {Kind::uniform_int, static_cast<double>(lo), static_cast<double>(hi)};
  }
};

// A latent input: exogenous noise when used by one mechanism, an unobserved
// confounder when shared by several (which must then be declared as
// confounder pairs on the graph).
struct LatentSpec {
  std::string name;
  Dist dist;
};

using MechanismFn = std::function<double(std::span<const double> parents, std::span<const double> noises)>;
using MeanFn = std::function<double(std::span<const double> parents)>;
using DiscreteProbFn = std::function<Rational(std::span<const int> parents)>;

// One structural equation.  `parents` fixes the argument order of the
// parent-value span (it must cover exactly the graph parents of the node);
// `latents` lists indices into the model's latent table in argument order.
struct Mechanism {
  std::vector<NodeId> parents;
  std::vector<int> latents;
  MechanismFn fn;
  MeanFn mean;              // E[node | parents]; may be empty
  DiscreteProbFn prob_one;  // P(node = 1 | parents) for binary nodes; may be empty
  bool additive_noise = false;  // node = mean(parents) + single latent

  static Mechanism continuous(std::vector<NodeId> parents, std::vector<int> latents,
                              MechanismFn fn, MeanFn mean = {}, bool additive = false);
  // Binary node sampled by thresholding one uniform latent at P(node=1|pa).
  static Mechanism bernoulli(std::vector<NodeId> parents, int uniform_latent, DiscreteProbFn p);
};

// do-style assignment of constants to measured nodes.
class Intervention {
 public:
  Intervention() = default;
  Intervention& set(NodeId node, double value);
  const std::vector<std::pair<NodeId, double>>& assignments() const { return assign_; }
  bool empty() const { return assign_.empty(); }

 private:
  std::vector<std::pair<NodeId, double>> assign_;  // kept sorted by node id
};

struct ValueEstimate {
  double value = 0.0;
  double se = 0.0;  // standard error of `value`
  std::int64_t samples = 0;
};

// Deterministic function of a full node-indexed value row; used as the
// quantity whose interventional mean a value function reports (by default
// the target's conditional mean given its sampled parents).
using TargetFn = std::function<double(std::span<const double> row)>;
using RationalPredictor = std::function<Rational(std::span<const int> config)>;

// Exact joint of the feature nodes of a finite-support model: one config
// row per support point (node-indexed ints, target slot -1) with its exact
// probability.
struct DiscreteJoint {
  std::vector<std::vector<int>> configs;
  std::vector<Rational> probs;
};

// A structural causal model: graph + latent priors + one mechanism per
// node.  Immutable after construction; all sampling entry points take a
// seed and derive their own streams, so a model can be shared freely
// across threads.
class Scm {
 public:
  Scm(CausalGraph graph, std::vector<LatentSpec> latents, std::vector<Mechanism> mechanisms);

  const CausalGraph& graph() const { return graph_; }
  const std::vector<LatentSpec>& latents() const { return latents_; }
  const Mechanism& mechanism(NodeId v) const { return mechs_[static_cast<std::size_t>(v)]; }

  // True when every node has an exact finite conditional distribution.
  bool finite_support() const { return discrete_; }
  bool target_additive_noise() const;
  bool target_confounded() const;

  // Draws n joint samples under the (possibly empty) intervention.  Latents
  // are drawn per sample in fixed declaration order regardless of the
  // intervention, so runs with equal seeds are coupled draw-for-draw: the
  // empty intervention reproduces plain observational sampling bit for bit
  // and non-descendants of intervened nodes keep identical values.
  SampleTable sample(std::size_t n, std::uint64_t seed, const Intervention& iv = {},
                     bool record_latents = false) const;

  // Monte-Carlo estimate of E[target_fn(row)] under do(iv); empty target_fn
  // means the target's conditional mean given its sampled parents.
  ValueEstimate do_value(const Intervention& iv, int mc_samples, std::uint64_t seed,
                         const TargetFn& target_fn = {}) const;

  // Exact interventional mean of the target by enumeration, restricted to
  // the target's ancestors in the mutilated graph (so assignments to
  // non-ancestors cannot perturb the result even at the bit level).
  // Requires finite support everywhere; throws UnsupportedContinuous.
  Rational exact_do_value(const std::vector<std::pair<NodeId, int>>& assign) const;

  // Exact feature joint for population-level value functions.
  DiscreteJoint enumerate_feature_joint() const;

  TargetFn target_conditional_mean() const;
  RationalPredictor target_prob_fn() const;

  // Restriction to the target's ancestor set (mechanisms and latents of
  // dropped nodes are discarded; the kept ones keep their argument order).
  Scm project_to_target(Projection* mapping = nullptr) const;

 private:
  void sample_row(std::vector<double>& row, std::vector<double>& latent_buf, RngStream& rng,
                  const std::vector<char>& fixed, const std::vector<double>& fixed_val) const;
  void expand_intervention(const Intervention& iv, std::vector<char>& fixed,
                           std::vector<double>& fixed_val) const;

  CausalGraph graph_;
  std::vector<LatentSpec> latents_;
  std::vector<Mechanism> mechs_;
  bool discrete_ = false;
};

// Attribution of the target's own noise for additive-noise targets with no
// confounder touching the target: the residual y - E[Y | pa_Y].  The
// feature attributions themselves are unchanged by this split, and it
// restores exact efficiency against the factual outcome y.
double noise_phi(const Scm& m, std::span<const double> row_with_target, const MeanFn& cond_mean = {});

}  // namespace doshap
