#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "doshap/bitset.hpp"
#include "doshap/causal_graph.hpp"
#include "doshap/sample_table.hpp"
#include "doshap/scm.hpp"

namespace doshap {

// Model prediction as a function of the feature vector, in feature-index
// order (see FeatureIndex).
using Predictor = std::function<double(std::span<const double> features)>;

// Dense mapping between feature indices (0..K-1, the coalition bit
// positions) and graph node ids (every measured node except the target,
// ascending).
struct FeatureIndex {
  std::vector<NodeId> nodes;  // feature index -> node id
  std::vector<int> of_node;   // node id -> feature index, -1 for the target

  static FeatureIndex of(const CausalGraph& g);
  int count() const { return static_cast<int>(nodes.size()); }
};

// Coalition characteristic function nu(S): the expected model output when
// the coalition's features are pinned to the explained instance and the
// rest follow the chosen reference regime (interventional, marginal, or
// conditional).  Implementations are immutable and safe for concurrent
// evaluate() calls; Monte-Carlo variants derive an independent stream per
// coalition from the coalition bits, so equal coalitions always reproduce
// identical values no matter the call order or caller.
class ValueFunction {
 public:
  virtual ~ValueFunction() = default;

  virtual const FeatureIndex& features() const = 0;
  int num_features() const { return features().count(); }
  virtual std::string name() const = 0;

  // Value of `coalition` (width K) for the instance `x` (feature-indexed,
  // length K).  Throws ShapeMismatch on wrong widths.
  virtual ValueEstimate evaluate(const Bitset& coalition, std::span<const double> x) const = 0;

 protected:
  void check_shapes(const Bitset& coalition, std::span<const double> x) const;
};

// Interventional value nu(S) = E[target | do(S = x_S)], evaluated on the
// structural model itself: exactly (finite-support models) or by
// Monte-Carlo interventional sampling.
class DoValueFunction final : public ValueFunction {
 public:
  // Exact enumeration; requires finite support and no latent confounders.
  static DoValueFunction exact(Scm m);
  // Monte-Carlo with `mc_samples` interventional draws per coalition; the
  // per-coalition stream is derived from `seed` and the coalition bits.
  // An empty target_fn means the target's conditional mean given its
  // sampled parents (a Rao-Blackwellised estimate of E[target | do(.)]).
  static DoValueFunction sampled(Scm m, int mc_samples, std::uint64_t seed, TargetFn target_fn = {});

  const FeatureIndex& features() const override { return feats_; }
  std::string name() const override { return exact_ ? "do[exact]" : "do[mc]"; }
  ValueEstimate evaluate(const Bitset& coalition, std::span<const double> x) const override;

  const Scm& model() const { return model_; }
  bool is_exact() const { return exact_; }

 private:
  DoValueFunction(Scm m, bool exact, int mc_samples, std::uint64_t seed, TargetFn fn);

  Scm model_;
  FeatureIndex feats_;
  bool exact_;
  int mc_samples_;
  std::uint64_t seed_;
  TargetFn target_fn_;
};

// Observational baselines sharing one evaluation core: coalition features
// are pinned to the instance while the remainder is drawn from a reference
// distribution that ignores the causal structure.
//   marginal:    references follow the background joint unchanged.
//   conditional: references are restricted to rows agreeing with the
//                instance on the coalition (rejection conditioning).
// Two backends:
//   population — exact rational expectation over a finite-support model's
//                feature joint with the model's own P(target=1 | pa) as
//                predictor (so mathematically equal values compare equal
//                to the last bit);
//   empirical  — averages a user predictor over a background sample table.
class ReferenceValueFunction final : public ValueFunction {
 public:
  enum class Kind { marginal, conditional };

  static ReferenceValueFunction population(Kind kind, const Scm& m);
  static ReferenceValueFunction empirical(Kind kind, const CausalGraph& g,
                                          const SampleTable& background, Predictor predictor);

  const FeatureIndex& features() const override { return feats_; }
  std::string name() const override;
  ValueEstimate evaluate(const Bitset& coalition, std::span<const double> x) const override;

 private:
  ReferenceValueFunction() = default;

  Kind kind_ = Kind::marginal;
  bool population_ = false;
  FeatureIndex feats_;
  // Population backend.
  DiscreteJoint joint_;
  RationalPredictor rational_f_;
  int node_count_ = 0;
  // Empirical backend: background feature matrix, row-major, stride K.
  std::vector<double> rows_;
  std::size_t nrows_ = 0;
  Predictor f_;
};

// Convenience: the model's own target conditional mean lifted to a
// feature-indexed predictor (for empirical baselines on ground-truth
// models).
Predictor scm_mean_predictor(const Scm& m);

}  // namespace doshap
