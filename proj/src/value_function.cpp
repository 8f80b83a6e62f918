#include "doshap/value_function.hpp"

#include <cmath>
#include <utility>

#include "doshap/errors.hpp"
#include "doshap/rng.hpp"

namespace doshap {
namespace {

constexpr std::uint64_t kCoalitionStreamTag = 0x76616c75655f6e75ull;

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

ValueEstimate mean_with_se(double sum, double sumsq, std::int64_t n) {
  ValueEstimate est;
  est.samples = n;
  est.value = sum / static_cast<double>(n);
  if (n > 1) {
    const double var = (sumsq - sum * est.value) / static_cast<double>(n - 1);
    est.se = std::sqrt(std::max(0.0, var) / static_cast<double>(n));
  }
  return est;
}

}  // namespace

FeatureIndex FeatureIndex::of(const CausalGraph& g) {
  FeatureIndex fi;
  fi.nodes = g.feature_list();
  fi.of_node.assign(static_cast<std::size_t>(g.node_count()), -1);
  for (std::size_t i = 0; i < fi.nodes.size(); ++i)
    fi.of_node[static_cast<std::size_t>(fi.nodes[i])] = static_cast<int>(i);
  return fi;
}

void ValueFunction::check_shapes(const Bitset& coalition, std::span<const double> x) const {
  const std::size_t k = static_cast<std::size_t>(num_features());
  if (coalition.size() != k)
    throw ShapeMismatch("coalition width " + std::to_string(coalition.size()) +
                        " does not match feature count " + std::to_string(k));
  if (x.size() != k)
    throw ShapeMismatch("instance length " + std::to_string(x.size()) +
                        " does not match feature count " + std::to_string(k));
}

DoValueFunction::DoValueFunction(Scm m, bool exact, int mc_samples, std::uint64_t seed, TargetFn fn)
    : model_(std::move(m)),
      feats_(FeatureIndex::of(model_.graph())),
      exact_(exact),
      mc_samples_(mc_samples),
      seed_(seed),
      target_fn_(std::move(fn)) {}

DoValueFunction DoValueFunction::exact(Scm m) {
  if (!m.finite_support())
    throw UnsupportedContinuous("exact interventional values require finite support");
  if (m.graph().confounded())
    throw UnsupportedContinuous("exact interventional values require a confounder-free model");
  return DoValueFunction(std::move(m), true, 0, 0, {});
}

DoValueFunction DoValueFunction::sampled(Scm m, int mc_samples, std::uint64_t seed, TargetFn target_fn) {
  if (mc_samples <= 0) throw Error("DoValueFunction: mc_samples must be positive");
  return DoValueFunction(std::move(m), false, mc_samples, seed, std::move(target_fn));
}

ValueEstimate DoValueFunction::evaluate(const Bitset& coalition, std::span<const double> x) const {
  check_shapes(coalition, x);
  if (exact_) {
    std::vector<std::pair<NodeId, int>> assign;
    coalition.for_each([&](std::size_t i) {
      const double v = x[i];
      if (!is_integral(v))
        throw InvalidIntervention("exact evaluation needs integral values, got " + std::to_string(v));
      assign.emplace_back(feats_.nodes[i], static_cast<int>(std::llround(v)));
    });
    const Rational r = model_.exact_do_value(assign);
    return {r.to_double(), 0.0, 0};
  }
  Intervention iv;
  coalition.for_each([&](std::size_t i) { iv.set(feats_.nodes[i], x[i]); });
  const std::uint64_t s = derive_seed(seed_, {kCoalitionStreamTag, coalition.hash()});
  return model_.do_value(iv, mc_samples_, s, target_fn_);
}

ReferenceValueFunction ReferenceValueFunction::population(Kind kind, const Scm& m) {
  ReferenceValueFunction vf;
  vf.kind_ = kind;
  vf.population_ = true;
  vf.feats_ = FeatureIndex::of(m.graph());
  vf.joint_ = m.enumerate_feature_joint();
  vf.rational_f_ = m.target_prob_fn();
  vf.node_count_ = m.graph().node_count();
  return vf;
}

ReferenceValueFunction ReferenceValueFunction::empirical(Kind kind, const CausalGraph& g,
                                                         const SampleTable& background,
                                                         Predictor predictor) {
  if (background.rows.empty()) throw EmptyBackground("background table has no rows");
  if (!predictor) throw Error("ReferenceValueFunction: predictor must be callable");
  ReferenceValueFunction vf;
  vf.kind_ = kind;
  vf.population_ = false;
  vf.feats_ = FeatureIndex::of(g);
  vf.f_ = std::move(predictor);
  const std::size_t k = vf.feats_.nodes.size();
  std::vector<std::size_t> col_of(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& lbl = g.label(vf.feats_.nodes[i]);
    if (!background.has_col(lbl))
      throw ShapeMismatch("background table lacks feature column '" + lbl + "'");
    col_of[i] = background.col(lbl);
  }
  vf.nrows_ = background.rows.size();
  vf.rows_.resize(vf.nrows_ * k);
  for (std::size_t r = 0; r < vf.nrows_; ++r)
    for (std::size_t i = 0; i < k; ++i) vf.rows_[r * k + i] = background.rows[r][col_of[i]];
  return vf;
}

std::string ReferenceValueFunction::name() const {
  std::string n = kind_ == Kind::marginal ? "marginal" : "conditional";
  n += population_ ? "[population]" : "[empirical]";
  return n;
}

ValueEstimate ReferenceValueFunction::evaluate(const Bitset& coalition,
                                               std::span<const double> x) const {
  check_shapes(coalition, x);
  const std::size_t k = static_cast<std::size_t>(num_features());

  if (population_) {
    bool ok = true;
    coalition.for_each([&](std::size_t i) { ok = ok && is_integral(x[i]); });
    if (!ok) {
      if (kind_ == Kind::conditional)
        throw ContinuousConditioning("population conditioning requires integral feature values");
      throw UnsupportedContinuous("population references require integral feature values");
    }
    if (kind_ == Kind::marginal) {
      Rational acc(0);
      std::vector<int> cfg(static_cast<std::size_t>(node_count_));
      for (std::size_t j = 0; j < joint_.configs.size(); ++j) {
        cfg = joint_.configs[j];
        coalition.for_each([&](std::size_t i) {
          cfg[static_cast<std::size_t>(feats_.nodes[i])] = static_cast<int>(std::llround(x[i]));
        });
        acc += joint_.probs[j] * rational_f_(cfg);
      }
      return {acc.to_double(), 0.0, 0};
    }
    Rational num(0), den(0);
    std::int64_t matches = 0;
    for (std::size_t j = 0; j < joint_.configs.size(); ++j) {
      const std::vector<int>& cfg = joint_.configs[j];
      bool match = true;
      coalition.for_each([&](std::size_t i) {
        match = match &&
                cfg[static_cast<std::size_t>(feats_.nodes[i])] == static_cast<int>(std::llround(x[i]));
      });
      if (!match) continue;
      num += joint_.probs[j] * rational_f_(cfg);
      den += joint_.probs[j];
      ++matches;
    }
    if (den == Rational(0))
      throw NoMatchingBackground("no population mass matches the conditioned features");
    return {(num / den).to_double(), 0.0, matches};
  }

  if (kind_ == Kind::marginal) {
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> z(k);
    for (std::size_t r = 0; r < nrows_; ++r) {
      for (std::size_t i = 0; i < k; ++i) z[i] = rows_[r * k + i];
      coalition.for_each([&](std::size_t i) { z[i] = x[i]; });
      const double v = f_(z);
      sum += v;
      sumsq += v * v;
    }
    return mean_with_se(sum, sumsq, static_cast<std::int64_t>(nrows_));
  }

  // Empirical conditioning: exact row matching is only well defined for
  // integral values, both on the instance and in the background columns.
  bool ok = true;
  coalition.for_each([&](std::size_t i) {
    ok = ok && is_integral(x[i]);
    for (std::size_t r = 0; ok && r < nrows_; ++r) ok = is_integral(rows_[r * k + i]);
  });
  if (!ok)
    throw ContinuousConditioning("conditioning on continuous values needs a smoothing model, "
                                 "which this estimator does not provide");
  double sum = 0.0, sumsq = 0.0;
  std::int64_t matches = 0;
  std::vector<double> z(k);
  for (std::size_t r = 0; r < nrows_; ++r) {
    bool match = true;
    coalition.for_each([&](std::size_t i) { match = match && rows_[r * k + i] == x[i]; });
    if (!match) continue;
    for (std::size_t i = 0; i < k; ++i) z[i] = rows_[r * k + i];
    const double v = f_(z);
    sum += v;
    sumsq += v * v;
    ++matches;
  }
  if (matches == 0)
    throw NoMatchingBackground("0 of " + std::to_string(nrows_) +
                               " background rows match the conditioned features");
  return mean_with_se(sum, sumsq, matches);
}

Predictor scm_mean_predictor(const Scm& m) {
  const TargetFn tf = m.target_conditional_mean();
  const FeatureIndex fi = FeatureIndex::of(m.graph());
  const std::size_t n = static_cast<std::size_t>(m.graph().node_count());
  return [tf, fi, n](std::span<const double> x) -> double {
    std::vector<double> row(n, 0.0);
    for (std::size_t i = 0; i < fi.nodes.size(); ++i)
      row[static_cast<std::size_t>(fi.nodes[i])] = x[i];
    return tf(row);
  };
}

}  // namespace doshap
