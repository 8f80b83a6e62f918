#include "doshap/scm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doshap/errors.hpp"

namespace doshap {

double Dist::draw(RngStream& rng) const {
  switch (kind) {
    case Kind::normal: return rng.normal(a, b);
    case Kind::beta: return rng.beta(a, b);
    case Kind::chi_squared: return rng.chi_squared(a);
    case Kind::exponential: return rng.exponential(a);
    case Kind::uniform01: return rng.uniform01();
    case Kind::uniform_int:
      return static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(a), static_cast<std::int64_t>(b)));
  }
  throw Error("Dist::draw: bad kind");
}

Mechanism Mechanism::continuous(std::vector<NodeId> parents, std::vector<int> latents,
                                MechanismFn fn, MeanFn mean, bool additive) {
  Mechanism m;
  m.parents = std::move(parents);
  m.latents = std::move(latents);
  m.fn = std::move(fn);
  m.mean = std::move(mean);
  m.additive_noise = additive;
  return m;
}

Mechanism Mechanism::bernoulli(std::vector<NodeId> parents, int uniform_latent, DiscreteProbFn p) {
  Mechanism m;
  m.parents = std::move(parents);
  m.latents = {uniform_latent};
  m.prob_one = std::move(p);
  auto prob = m.prob_one;
  m.fn = [prob](std::span<const double> pa, std::span<const double> eps) -> double {
    std::vector<int> ipa(pa.size());
    for (std::size_t i = 0; i < pa.size(); ++i) ipa[i] = static_cast<int>(pa[i]);
    return eps[0] < prob(ipa).to_double() ? 1.0 : 0.0;
  };
  m.mean = [prob](std::span<const double> pa) -> double {
    std::vector<int> ipa(pa.size());
    for (std::size_t i = 0; i < pa.size(); ++i) ipa[i] = static_cast<int>(pa[i]);
    return prob(ipa).to_double();
  };
  return m;
}

Intervention& Intervention::set(NodeId node, double value) {
  for (auto& [n, v] : assign_) {
    if (n == node) throw InvalidIntervention("node assigned twice");
  }
  assign_.emplace_back(node, value);
  std::sort(assign_.begin(), assign_.end());
  return *this;
}

Scm::Scm(CausalGraph graph, std::vector<LatentSpec> latents, std::vector<Mechanism> mechanisms)
    : graph_(std::move(graph)), latents_(std::move(latents)), mechs_(std::move(mechanisms)) {
  const std::size_t n = static_cast<std::size_t>(graph_.node_count());
  if (mechs_.size() != n) throw Error("Scm: one mechanism per node required");

  // Track which nodes consume each latent so shared latents can be checked
  // against the graph's declared confounder pairs.
  std::vector<std::vector<NodeId>> latent_users(latents_.size());

  for (std::size_t v = 0; v < n; ++v) {
    const Mechanism& m = mechs_[v];
    if (!m.fn) throw Error("Scm: node " + graph_.label(static_cast<NodeId>(v)) + " has no sampling function");

    std::set<NodeId> declared(m.parents.begin(), m.parents.end());
    if (declared.size() != m.parents.size())
      throw Error("Scm: duplicate parent in mechanism of " + graph_.label(static_cast<NodeId>(v)));
    std::set<NodeId> actual;
    graph_.parents(static_cast<NodeId>(v)).for_each([&](std::size_t p) { actual.insert(static_cast<NodeId>(p)); });
    if (declared != actual)
      throw Error("Scm: mechanism parents of " + graph_.label(static_cast<NodeId>(v)) +
                  " do not match the graph");

    for (int l : m.latents) {
      if (l < 0 || static_cast<std::size_t>(l) >= latents_.size())
        throw Error("Scm: latent index out of range");
      latent_users[static_cast<std::size_t>(l)].push_back(static_cast<NodeId>(v));
    }
    if (m.additive_noise && m.latents.size() != 1)
      throw Error("Scm: additive-noise mechanism must have exactly one latent");

    // Probabilities of binary nodes must be valid for every parent config.
    if (m.prob_one) {
      const std::size_t np = m.parents.size();
      if (np > 20) throw Error("Scm: too many parents for probability validation");
      for (std::size_t mask = 0; mask < (std::size_t{1} << np); ++mask) {
        std::vector<int> pa(np);
        for (std::size_t i = 0; i < np; ++i) pa[i] = (mask >> i) & 1;
        const Rational p = m.prob_one(pa);
        if (p < Rational(0) || Rational(1) < p)
          throw Error("Scm: P(" + graph_.label(static_cast<NodeId>(v)) + "=1|pa) outside [0,1]");
      }
    }
  }

  for (std::size_t l = 0; l < latent_users.size(); ++l) {
    auto& users = latent_users[l];
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    if (users.size() > 1) {
      for (std::size_t i = 0; i < users.size(); ++i)
        for (std::size_t j = i + 1; j < users.size(); ++j)
          if (!graph_.confounder_between(users[i], users[j]))
            throw Error("Scm: latent '" + latents_[l].name + "' shared by " +
                        graph_.label(users[i]) + " and " + graph_.label(users[j]) +
                        " without a declared confounder pair");
    }
  }

  discrete_ = true;
  for (const auto& m : mechs_)
    if (!m.prob_one) discrete_ = false;
}

bool Scm::target_additive_noise() const {
  return mechs_[static_cast<std::size_t>(graph_.target())].additive_noise;
}

bool Scm::target_confounded() const {
  for (const auto& [a, b] : graph_.confounders())
    if (a == graph_.target() || b == graph_.target()) return true;
  return false;
}

void Scm::expand_intervention(const Intervention& iv, std::vector<char>& fixed,
                              std::vector<double>& fixed_val) const {
  const std::size_t n = static_cast<std::size_t>(graph_.node_count());
  fixed.assign(n, 0);
  fixed_val.assign(n, 0.0);
  for (const auto& [node, value] : iv.assignments()) {
    if (node < 0 || node >= graph_.node_count()) throw InvalidIntervention("unknown node id");
    if (node == graph_.target()) throw InvalidIntervention("cannot intervene on the target");
    fixed[static_cast<std::size_t>(node)] = 1;
    fixed_val[static_cast<std::size_t>(node)] = value;
  }
}

void Scm::sample_row(std::vector<double>& row, std::vector<double>& latent_buf, RngStream& rng,
                     const std::vector<char>& fixed, const std::vector<double>& fixed_val) const {
  for (std::size_t l = 0; l < latents_.size(); ++l) latent_buf[l] = latents_[l].dist.draw(rng);
  thread_local std::vector<double> pa_buf, eps_buf;
  for (const NodeId v : graph_.topo_order()) {
    const std::size_t vi = static_cast<std::size_t>(v);
    if (fixed[vi]) {
      row[vi] = fixed_val[vi];
      continue;
    }
    const Mechanism& m = mechs_[vi];
    pa_buf.clear();
    for (const NodeId p : m.parents) pa_buf.push_back(row[static_cast<std::size_t>(p)]);
    eps_buf.clear();
    for (const int l : m.latents) eps_buf.push_back(latent_buf[static_cast<std::size_t>(l)]);
    row[vi] = m.fn(pa_buf, eps_buf);
  }
}

SampleTable Scm::sample(std::size_t n, std::uint64_t seed, const Intervention& iv,
                        bool record_latents) const {
  if (n == 0) throw Error("Scm::sample: need at least one sample");
  std::vector<char> fixed;
  std::vector<double> fixed_val;
  expand_intervention(iv, fixed, fixed_val);

  SampleTable t;
  t.columns = graph_.labels();
  if (record_latents)
    for (const auto& l : latents_) t.columns.push_back("latent:" + l.name);

  RngStream rng(derive_seed(seed, {0x73616d70u}));
  const std::size_t nn = static_cast<std::size_t>(graph_.node_count());
  std::vector<double> row(nn), latent_buf(latents_.size());
  t.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sample_row(row, latent_buf, rng, fixed, fixed_val);
    std::vector<double> out = row;
    if (record_latents) out.insert(out.end(), latent_buf.begin(), latent_buf.end());
    t.rows.push_back(std::move(out));
  }
  return t;
}

ValueEstimate Scm::do_value(const Intervention& iv, int mc_samples, std::uint64_t seed,
                            const TargetFn& target_fn) const {
  if (mc_samples < 1) throw Error("Scm::do_value: need at least one sample");
  std::vector<char> fixed;
  std::vector<double> fixed_val;
  expand_intervention(iv, fixed, fixed_val);

  const TargetFn& f = target_fn ? target_fn : target_conditional_mean();

  RngStream rng(derive_seed(seed, {0x646f76u}));
  const std::size_t nn = static_cast<std::size_t>(graph_.node_count());
  std::vector<double> row(nn), latent_buf(latents_.size());
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < mc_samples; ++i) {
    sample_row(row, latent_buf, rng, fixed, fixed_val);
    const double y = f(row);
    sum += y;
    sumsq += y * y;
  }
  ValueEstimate est;
  est.samples = mc_samples;
  est.value = sum / mc_samples;
  if (mc_samples > 1) {
    const double var = std::max(0.0, (sumsq - sum * sum / mc_samples) / (mc_samples - 1));
    est.se = std::sqrt(var / mc_samples);
  }
  return est;
}

Rational Scm::exact_do_value(const std::vector<std::pair<NodeId, int>>& assign) const {
  if (!discrete_)
    throw UnsupportedContinuous("exact enumeration requires finite-support mechanisms");
  if (graph_.confounded())
    throw UnsupportedContinuous("exact enumeration does not support latent confounders");

  const std::size_t n = static_cast<std::size_t>(graph_.node_count());
  const NodeId y = graph_.target();

  std::vector<int> value(n, -1);
  std::vector<char> is_assigned(n, 0);
  for (const auto& [node, v] : assign) {
    if (node < 0 || node >= graph_.node_count()) throw InvalidIntervention("unknown node id");
    if (node == y) throw InvalidIntervention("cannot intervene on the target");
    if (is_assigned[static_cast<std::size_t>(node)]) throw InvalidIntervention("node assigned twice");
    if (v != 0 && v != 1) throw InvalidIntervention("binary nodes take values 0/1");
    is_assigned[static_cast<std::size_t>(node)] = 1;
    value[static_cast<std::size_t>(node)] = v;
  }

  // Ancestors of the target in the mutilated graph (edges into assigned
  // nodes removed): only these can influence the target's mean.
  Bitset relevant = Bitset::single(n, static_cast<std::size_t>(y));
  {
    std::vector<NodeId> stack{y};
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      if (u != y && is_assigned[static_cast<std::size_t>(u)]) continue;
      graph_.parents(u).for_each([&](std::size_t p) {
        if (!relevant.test(p)) {
          relevant.set(p);
          stack.push_back(static_cast<NodeId>(p));
        }
      });
    }
  }

  std::vector<NodeId> free_nodes;
  for (const NodeId v : graph_.topo_order())
    if (v != y && relevant.test(static_cast<std::size_t>(v)) && !is_assigned[static_cast<std::size_t>(v)])
      free_nodes.push_back(v);
  if (free_nodes.size() > 24) throw Error("exact_do_value: enumeration too large");

  const Mechanism& target_mech = mechs_[static_cast<std::size_t>(y)];
  auto node_prob = [&](NodeId v, int val) -> Rational {
    const Mechanism& m = mechs_[static_cast<std::size_t>(v)];
    std::vector<int> pa;
    pa.reserve(m.parents.size());
    for (const NodeId p : m.parents) pa.push_back(value[static_cast<std::size_t>(p)]);
    const Rational p1 = m.prob_one(pa);
    return val ? p1 : Rational(1) - p1;
  };

  Rational total(0);
  const std::size_t nfree = free_nodes.size();
  // Odometer over the free-node configurations in topological order.
  for (std::size_t mask = 0; mask < (std::size_t{1} << nfree); ++mask) {
    Rational prob(1);
    for (std::size_t i = 0; i < nfree; ++i) {
      const int val = (mask >> i) & 1;
      value[static_cast<std::size_t>(free_nodes[i])] = val;
      prob *= node_prob(free_nodes[i], val);
      if (prob == Rational(0)) break;
    }
    if (prob == Rational(0)) continue;
    std::vector<int> pa;
    for (const NodeId p : target_mech.parents) pa.push_back(value[static_cast<std::size_t>(p)]);
    total += prob * target_mech.prob_one(pa);
  }
  return total;
}

DiscreteJoint Scm::enumerate_feature_joint() const {
  if (!discrete_)
    throw UnsupportedContinuous("population joint requires finite-support mechanisms");
  if (graph_.confounded())
    throw UnsupportedContinuous("population joint does not support latent confounders");

  const std::size_t n = static_cast<std::size_t>(graph_.node_count());
  const NodeId y = graph_.target();
  std::vector<NodeId> feats;
  for (const NodeId v : graph_.topo_order())
    if (v != y) feats.push_back(v);
  if (feats.size() > 20) throw Error("enumerate_feature_joint: enumeration too large");

  DiscreteJoint joint;
  std::vector<int> value(n, -1);
  for (std::size_t mask = 0; mask < (std::size_t{1} << feats.size()); ++mask) {
    Rational prob(1);
    for (std::size_t i = 0; i < feats.size(); ++i) {
      const int val = (mask >> i) & 1;
      const NodeId v = feats[i];
      value[static_cast<std::size_t>(v)] = val;
      const Mechanism& m = mechs_[static_cast<std::size_t>(v)];
      std::vector<int> pa;
      for (const NodeId p : m.parents) pa.push_back(value[static_cast<std::size_t>(p)]);
      const Rational p1 = m.prob_one(pa);
      prob *= val ? p1 : Rational(1) - p1;
    }
    if (prob == Rational(0)) continue;
    std::vector<int> cfg = value;
    cfg[static_cast<std::size_t>(y)] = -1;
    joint.configs.push_back(std::move(cfg));
    joint.probs.push_back(prob);
  }
  return joint;
}

TargetFn Scm::target_conditional_mean() const {
  const Mechanism& m = mechs_[static_cast<std::size_t>(graph_.target())];
  if (!m.mean)
    throw Error("Scm: target mechanism has no conditional mean");
  auto mean = m.mean;
  auto parents = m.parents;
  return [mean, parents](std::span<const double> row) -> double {
    std::vector<double> pa;
    pa.reserve(parents.size());
    for (const NodeId p : parents) pa.push_back(row[static_cast<std::size_t>(p)]);
    return mean(pa);
  };
}

RationalPredictor Scm::target_prob_fn() const {
  if (!discrete_) throw UnsupportedContinuous("rational predictor requires finite support");
  const Mechanism& m = mechs_[static_cast<std::size_t>(graph_.target())];
  auto prob = m.prob_one;
  auto parents = m.parents;
  return [prob, parents](std::span<const int> config) -> Rational {
    std::vector<int> pa;
    pa.reserve(parents.size());
    for (const NodeId p : parents) pa.push_back(config[static_cast<std::size_t>(p)]);
    return prob(pa);
  };
}

Scm Scm::project_to_target(Projection* mapping) const {
  Projection proj = doshap::project_to_target(graph_);
  const int nn = proj.graph.node_count();

  std::vector<int> latent_map(latents_.size(), -1);
  std::vector<LatentSpec> new_latents;
  std::vector<Mechanism> new_mechs(static_cast<std::size_t>(nn));
  for (NodeId nv = 0; nv < nn; ++nv) {
    const NodeId ov = proj.to_original[static_cast<std::size_t>(nv)];
    Mechanism m = mechs_[static_cast<std::size_t>(ov)];
    for (auto& p : m.parents) {
      const NodeId np = proj.from_original[static_cast<std::size_t>(p)];
      if (np < 0)
        throw Error("Scm::project_to_target: parent of a kept node was dropped");
      p = np;
    }
    for (auto& l : m.latents) {
      if (latent_map[static_cast<std::size_t>(l)] < 0) {
        latent_map[static_cast<std::size_t>(l)] = static_cast<int>(new_latents.size());
        new_latents.push_back(latents_[static_cast<std::size_t>(l)]);
      }
      l = latent_map[static_cast<std::size_t>(l)];
    }
    new_mechs[static_cast<std::size_t>(nv)] = std::move(m);
  }
  if (mapping) *mapping = proj;
  return Scm(std::move(proj.graph), std::move(new_latents), std::move(new_mechs));
}

double noise_phi(const Scm& m, std::span<const double> row_with_target, const MeanFn& cond_mean) {
  if (!m.target_additive_noise())
    throw NonAdditiveNoise("target mechanism is not additive in its noise");
  if (m.target_confounded())
    throw ConfoundedTarget("target shares a latent confounder with another node");
  const NodeId y = m.graph().target();
  const Mechanism& mech = m.mechanism(y);
  const MeanFn& mean = cond_mean ? cond_mean : mech.mean;
  if (!mean) throw Error("noise_phi: no conditional mean available for the target");
  std::vector<double> pa;
  pa.reserve(mech.parents.size());
  for (const NodeId p : mech.parents) pa.push_back(row_with_target[static_cast<std::size_t>(p)]);
  return row_with_target[static_cast<std::size_t>(y)] - mean(pa);
}

}  // namespace doshap
