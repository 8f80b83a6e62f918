#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "doshap/dgps.hpp"
#include "doshap/errors.hpp"
#include "doshap/shapley.hpp"
#include "helpers.hpp"

using namespace doshap;
using testutil::bits_of_mask;

namespace {

std::vector<double> config_x(int a, int e, int s) {
  return {static_cast<double>(a), static_cast<double>(e), static_cast<double>(s)};
}

// Characteristic function given directly as a set function over the low
// coalition bits; exact (zero standard error) by construction.
class MaskValueFunction final : public ValueFunction {
 public:
  MaskValueFunction(const CausalGraph& g, std::function<double(std::uint64_t)> f)
      : feats_(FeatureIndex::of(g)), f_(std::move(f)) {}

  const FeatureIndex& features() const override { return feats_; }
  std::string name() const override { return "mask[test]"; }
  ValueEstimate evaluate(const Bitset& coalition, std::span<const double>) const override {
    return {f_(coalition.low_word()), 0.0, 0};
  }

 private:
  FeatureIndex feats_;
  std::function<double(std::uint64_t)> f_;
};

// Star graph V0..V{k-1} -> Y; no coalition is reducible.
CausalGraph star_graph(int k) {
  GraphSpec spec;
  for (int i = 0; i < k; ++i) spec.nodes.push_back("V" + std::to_string(i));
  spec.nodes.push_back("Y");
  for (int i = 0; i < k; ++i) spec.edges.emplace_back("V" + std::to_string(i), "Y");
  spec.target = "Y";
  return CausalGraph::build(spec);
}

struct FrozenRow {
  int a, e, s;
  double phi_a, phi_e, phi_s;
};

// Interventional attributions of the salary model at every configuration,
// derived by independent enumeration; exact fractions.
const FrozenRow kDoPhi[] = {
    {0, 0, 0, -3.0 / 64, -29.0 / 160, -103.0 / 1600},
    {0, 0, 1, -3.0 / 64, -29.0 / 160, 377.0 / 1600},
    {0, 1, 0, -3.0 / 64, 63.0 / 160, -223.0 / 1600},
    {0, 1, 1, -3.0 / 64, 63.0 / 160, 257.0 / 1600},
    {1, 0, 0, 9.0 / 64, -51.0 / 160, -183.0 / 1600},
    {1, 0, 1, 9.0 / 64, -51.0 / 160, 297.0 / 1600},
    {1, 1, 0, 9.0 / 64, 41.0 / 160, -303.0 / 1600},
    {1, 1, 1, 9.0 / 64, 41.0 / 160, 177.0 / 1600},
};

}  // namespace

TEST_CASE("exact interventional attributions at every salary configuration") {
  const DoValueFunction vf = DoValueFunction::exact(make_salary_scm());
  const CausalGraph& g = vf.model().graph();
  for (const FrozenRow& row : kDoPhi) {
    const std::vector<double> x = config_x(row.a, row.e, row.s);
    const ShapleyReport rep = exact_shapley(vf, g, x);
    REQUIRE(rep.labels == std::vector<std::string>{"A", "E", "S"});
    CHECK(std::abs(rep.phi[0] - row.phi_a) < 1e-14);
    CHECK(std::abs(rep.phi[1] - row.phi_e) < 1e-14);
    CHECK(std::abs(rep.phi[2] - row.phi_s) < 1e-14);
    CHECK(rep.base_value == 0.3925);
    CHECK(std::abs(rep.efficiency_residual) < 1e-14);
    CHECK(rep.phi_sum() == doctest::Approx(rep.full_value - rep.base_value).epsilon(1e-12));
    CHECK(rep.permutations == 0);
    CHECK(rep.value_function == "do[exact]");
  }
}

TEST_CASE("marginal-reference attributions miss the indirect age effect") {
  const Scm m = make_salary_scm();
  const auto vf = ReferenceValueFunction::population(ReferenceValueFunction::Kind::marginal, m);
  EngineOptions opts;
  opts.cache = CacheMode::plain;  // reference values have no causal reduction
  for (const FrozenRow& row : kDoPhi) {
    const ShapleyReport rep = exact_shapley(vf, m.graph(), config_x(row.a, row.e, row.s), opts);
    CHECK(rep.phi[0] == 0.0);  // age acts only through E and S: invisible here
    const double want_e = row.e ? 0.3125 : -0.1875;
    const double want_s = row.s ? 0.195 : -0.105;
    CHECK(std::abs(rep.phi[1] - want_e) < 1e-14);
    CHECK(std::abs(rep.phi[2] - want_s) < 1e-14);
  }
}

TEST_CASE("evaluation accounting and reduction transparency, exact backend") {
  const DoValueFunction vf = DoValueFunction::exact(make_salary_scm());
  const CausalGraph& g = vf.model().graph();
  const std::vector<double> x = config_x(1, 1, 1);

  EngineOptions fra;
  fra.cache = CacheMode::fra;
  const ShapleyReport rf = exact_shapley(vf, g, x, fra);
  CHECK(rf.nu_requests == 8);
  CHECK(rf.nu_evaluations == 7);  // {A,E,S} collapses onto {E,S}
  CHECK(rf.fra_reductions == 1);
  CHECK(rf.cache_hits == 1);
  CHECK(rf.cache_mode == CacheMode::fra);

  EngineOptions plain;
  plain.cache = CacheMode::plain;
  const ShapleyReport rp = exact_shapley(vf, g, x, plain);
  CHECK(rp.nu_evaluations == 8);
  CHECK(rp.fra_reductions == 0);

  // Reduction changes the work, never the attribution (exact values).
  for (int i = 0; i < 3; ++i) CHECK(rf.phi[i] == rp.phi[i]);
  CHECK(rf.full_value == rp.full_value);
}

TEST_CASE("reduction transparency within sampling error, Monte-Carlo backend") {
  const DoValueFunction vf = DoValueFunction::sampled(make_salary_scm(), 20000, 5);
  const CausalGraph& g = vf.model().graph();
  const std::vector<double> x = config_x(1, 0, 1);

  EngineOptions a, b;
  a.cache = CacheMode::fra;
  b.cache = CacheMode::plain;
  const ShapleyReport rf = exact_shapley(vf, g, x, a);
  const ShapleyReport rp = exact_shapley(vf, g, x, b);
  for (int i = 0; i < 3; ++i) {
    const double pooled = std::hypot(rf.phi_se[i], rp.phi_se[i]);
    CHECK(std::abs(rf.phi[i] - rp.phi[i]) <= 5.0 * pooled + 1e-12);
  }
}

TEST_CASE("set-function laws: efficiency, dummy player, symmetry, linearity") {
  const CausalGraph g = star_graph(3);
  EngineOptions opts;
  opts.cache = CacheMode::plain;
  const std::vector<double> x = {0, 0, 0};

  const auto f = [](std::uint64_t m) {
    return 1.5 * static_cast<double>(m & 1u) + ((m & 6u) == 6u ? 2.0 : 0.0);
  };
  const auto gfn = [](std::uint64_t m) { return static_cast<double>(__builtin_popcountll(m)); };

  const MaskValueFunction vf_f(g, f), vf_g(g, gfn);
  const ShapleyReport rf = exact_shapley(vf_f, g, x, opts);
  const ShapleyReport rg = exact_shapley(vf_g, g, x, opts);

  // f: feature 0 contributes 1.5 alone; 1 and 2 split their joint 2.0.
  CHECK(rf.phi[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(rf.phi[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rf.phi[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(rf.phi_sum() - (rf.full_value - rf.base_value)) < 1e-14);

  // g: fully symmetric, one unit each.
  for (int i = 0; i < 3; ++i) CHECK(rg.phi[i] == doctest::Approx(1.0).epsilon(1e-15));

  // A feature the function never reads gets exactly zero.
  const MaskValueFunction vf_dummy(g, [](std::uint64_t m) { return static_cast<double>(m & 3u); });
  const ShapleyReport rd = exact_shapley(vf_dummy, g, x, opts);
  CHECK(rd.phi[2] == 0.0);

  // Linearity: attribution of 2f + 3g is the matching combination.
  const MaskValueFunction vf_mix(
      g, [&](std::uint64_t m) { return 2.0 * f(m) + 3.0 * gfn(m); });
  const ShapleyReport rm = exact_shapley(vf_mix, g, x, opts);
  for (int i = 0; i < 3; ++i)
    CHECK(rm.phi[i] == doctest::Approx(2.0 * rf.phi[i] + 3.0 * rg.phi[i]).epsilon(1e-12));
}

TEST_CASE("single-feature model collapses to one difference") {
  GraphSpec spec;
  spec.nodes = {"V0", "Y"};
  spec.edges = {{"V0", "Y"}};
  spec.target = "Y";
  const CausalGraph g = CausalGraph::build(spec);
  const MaskValueFunction vf(g, [](std::uint64_t m) { return m & 1u ? 2.5 : 1.0; });
  const ShapleyReport rep = exact_shapley(vf, g, std::vector<double>{0.0});
  REQUIRE(rep.phi.size() == 1);
  CHECK(rep.phi[0] == 1.5);
  CHECK(rep.base_value == 1.0);
  CHECK(rep.full_value == 2.5);
}

TEST_CASE("exact enumeration refuses oversized feature sets") {
  const CausalGraph g = star_graph(21);
  const MaskValueFunction vf(g, [](std::uint64_t) { return 0.0; });
  const std::vector<double> x(21, 0.0);
  CHECK_THROWS_AS(exact_shapley(vf, g, x), TooManyFeatures);
  EngineOptions tight;
  tight.feature_cap = 4;
  const CausalGraph g5 = star_graph(5);
  const MaskValueFunction vf5(g5, [](std::uint64_t) { return 0.0; });
  CHECK_THROWS_AS(exact_shapley(vf5, g5, std::vector<double>(5, 0.0), tight), TooManyFeatures);
}

TEST_CASE("permutation sampling converges to the exact attribution") {
  const DoValueFunction vf = DoValueFunction::exact(make_salary_scm());
  const CausalGraph& g = vf.model().graph();
  const std::vector<double> x = config_x(0, 1, 1);
  const ShapleyReport exact = exact_shapley(vf, g, x);

  EngineOptions opts;
  opts.seed = 99;
  const ShapleyReport approx = approx_shapley(vf, g, x, 200, opts);
  CHECK(approx.permutations == 200);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(approx.phi[i] - exact.phi[i]) <= 4.0 * approx.phi_se[i] + 1e-12);
  // Telescoping across each permutation keeps efficiency for the estimate.
  CHECK(std::abs(approx.phi_sum() - (approx.full_value - approx.base_value)) < 1e-12);
  CHECK_THROWS_AS(approx_shapley(vf, g, x, 0, opts), Error);
}

TEST_CASE("permutation sampling is deterministic and thread-count invariant") {
  const DoValueFunction exact_vf = DoValueFunction::exact(make_salary_scm());
  const DoValueFunction mc_vf = DoValueFunction::sampled(make_salary_scm(), 500, 7);
  const CausalGraph g = make_salary_scm().graph();
  const std::vector<double> x = config_x(1, 1, 0);

  for (const ValueFunction* vf : {static_cast<const ValueFunction*>(&exact_vf),
                                  static_cast<const ValueFunction*>(&mc_vf)}) {
    EngineOptions serial;
    serial.seed = 3;
    serial.threads = 1;
    EngineOptions pooled = serial;
    pooled.threads = 4;
    const ShapleyReport r1 = approx_shapley(*vf, g, x, 64, serial);
    const ShapleyReport r2 = approx_shapley(*vf, g, x, 64, serial);
    const ShapleyReport r4 = approx_shapley(*vf, g, x, 64, pooled);
    CHECK(r1.phi == r2.phi);
    CHECK(r1.phi == r4.phi);
    CHECK(r1.phi_se == r4.phi_se);

    EngineOptions other = serial;
    other.seed = 4;
    const ShapleyReport r3 = approx_shapley(*vf, g, x, 64, other);
    CHECK(r1.phi != r3.phi);
  }
}

TEST_CASE("cache layering strictly reduces distinct evaluations") {
  const DoValueFunction vf = DoValueFunction::sampled(make_salary_scm(), 50, 13);
  const CausalGraph g = make_salary_scm().graph();
  const std::vector<double> x = config_x(1, 1, 1);
  const std::int64_t n_perms = 40;

  std::int64_t evals[3];
  int idx = 0;
  for (const CacheMode mode : {CacheMode::none, CacheMode::plain, CacheMode::fra}) {
    EngineOptions opts;
    opts.cache = mode;
    opts.seed = 1;
    const ShapleyReport rep = approx_shapley(vf, g, x, n_perms, opts);
    evals[idx++] = rep.nu_evaluations;
    CHECK(rep.nu_requests == n_perms * 4 + 2);
  }
  CHECK(evals[0] == n_perms * 4 + 2);  // no cache: every request evaluates
  CHECK(evals[1] < evals[0]);
  CHECK(evals[2] < evals[1]);  // the salary model has one reducible coalition
  CHECK(evals[2] == 7);
  CHECK(evals[1] == 8);
}

TEST_CASE("a shared frontier cache persists across explanations") {
  const DoValueFunction vf = DoValueFunction::exact(make_salary_scm());
  const CausalGraph& g = vf.model().graph();
  FrontierCache frontier;
  exact_shapley(vf, g, config_x(0, 0, 0), {}, &frontier);
  const std::size_t after_first = frontier.size();
  CHECK(after_first > 0);
  exact_shapley(vf, g, config_x(1, 1, 1), {}, &frontier);
  CHECK(frontier.size() == after_first);  // nothing new to learn
}

TEST_CASE("identifiability gate: graph-level modes") {
  const Scm semi = make_synthetic_semimarkovian();
  const DoValueFunction vf = DoValueFunction::sampled(semi, 10, 1);
  const std::vector<double> x(5, 0.5);

  EngineOptions strict;  // markovian_trivial, not ground truth
  strict.cache = CacheMode::plain;
  CHECK_THROWS_AS(exact_shapley(vf, semi.graph(), x, strict), IdentifiabilityError);

  EngineOptions truth = strict;
  truth.ground_truth = true;
  CHECK_NOTHROW(exact_shapley(vf, semi.graph(), x, truth));

  EngineOptions asserted = strict;
  asserted.gate = IdentifiabilityGate::Mode::user_asserted;
  CHECK_NOTHROW(exact_shapley(vf, semi.graph(), x, asserted));

  // Confounder-free graphs pass the strict mode wholesale.
  const DoValueFunction okvf = DoValueFunction::exact(make_salary_scm());
  CHECK_NOTHROW(exact_shapley(okvf, okvf.model().graph(), config_x(0, 0, 0)));
}

TEST_CASE("identifiability gate: per-coalition verdicts") {
  const Scm semi = make_synthetic_semimarkovian();
  const CausalGraph& g = semi.graph();
  const std::size_t n = static_cast<std::size_t>(g.node_count());
  const std::size_t X = static_cast<std::size_t>(g.node("X"));
  const std::size_t B = static_cast<std::size_t>(g.node("B"));
  const std::size_t A = static_cast<std::size_t>(g.node("A"));

  // Intervening on either endpoint severs the hidden common cause.
  CHECK(trivially_identifiable(g, Bitset::single(n, X)));
  CHECK(trivially_identifiable(g, Bitset::single(n, B)));
  // No intervention at all is just the observational expectation.
  CHECK(trivially_identifiable(g, Bitset(n)));
  // Intervening elsewhere leaves the hidden common cause active.
  CHECK_FALSE(trivially_identifiable(g, Bitset::single(n, A)));
  // Unconfounded graphs are trivially fine for any coalition.
  const Scm salary = make_salary_scm();
  CHECK(trivially_identifiable(salary.graph(), Bitset(4)));
  CHECK(trivially_identifiable(salary.graph(), Bitset::single(4, 0)));

  const IdentifiabilityGate gate(IdentifiabilityGate::Mode::halt_on_unknown, false);
  CHECK_NOTHROW(gate.check_coalition(g, Bitset::single(n, X)));
  CHECK_NOTHROW(gate.check_coalition(g, Bitset(n)));
  CHECK_THROWS_AS(gate.check_coalition(g, Bitset::single(n, A)), IdentifiabilityError);

  // A full run always touches the empty coalition, so it halts.
  const DoValueFunction vf = DoValueFunction::sampled(semi, 10, 1);
  EngineOptions opts;
  opts.cache = CacheMode::plain;
  opts.gate = IdentifiabilityGate::Mode::halt_on_unknown;
  CHECK_THROWS_AS(exact_shapley(vf, g, std::vector<double>(5, 0.5), opts), IdentifiabilityError);
}

TEST_CASE("permutation cache mathematics: pinned values") {
  CHECK(expected_uncached_ratio(1, 2) == 1.0);
  CHECK(expected_uncached_ratio(1, 9) == 1.0);
  CHECK(expected_uncached_ratio(2, 2) == 1.0 / 6.0);
  CHECK(expected_coverage(1, 2) == 0.75);

  CHECK(budget_for_coverage(0.5, 5) == 5);
  CHECK(budget_for_coverage(0.5, 6) == 9);
  CHECK(budget_for_coverage(0.5, 8) == 31);
  CHECK(budget_for_coverage(0.5, 12) == 407);
  CHECK(budget_for_coverage(0.5, 13) == 781);

  CHECK_THROWS_AS(budget_for_coverage(0.0, 5), Error);
  CHECK_THROWS_AS(budget_for_coverage(1.0, 5), Error);

  // Coverage grows with the budget and the budget with the target.
  for (int n = 1; n < 40; ++n) CHECK(expected_coverage(n + 1, 6) >= expected_coverage(n, 6));
  CHECK(budget_for_coverage(0.9, 8) > budget_for_coverage(0.5, 8));
  CHECK(expected_coverage(10000, 5) > 1.0 - 1e-6);
  // The budget is tight: one fewer permutation undershoots the target.
  for (const int k : {5, 8, 12}) {
    const std::int64_t n = budget_for_coverage(0.5, k);
    CHECK(expected_coverage(n, k) >= 0.5);
    if (n > 1) CHECK(expected_coverage(n - 1, k) < 0.5);
  }
  // Large widths stay finite and ordered in log space.
  CHECK(expected_coverage(1000, 40) > 0.0);
  CHECK(expected_coverage(1000, 40) < 1.0);
}

TEST_CASE("permutation cache mathematics matches simulation") {
  const int k = 5, streams = 2000, horizon = 10;
  double covered = 0.0, fresh_at_5 = 0.0;
  for (int r = 0; r < streams; ++r) {
    std::vector<char> seen(std::size_t{1} << k, 0);
    RngStream rng(derive_seed(12345, {static_cast<std::uint64_t>(r)}));
    std::vector<int> perm(k);
    for (int t = 1; t <= horizon; ++t) {
      for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
      rng.shuffle(perm);
      std::uint64_t mask = 0;
      int fresh = 0;
      if (!seen[0]) {
        seen[0] = 1;
        ++fresh;
      }
      for (const int i : perm) {
        mask |= std::uint64_t{1} << i;
        if (!seen[mask]) {
          seen[mask] = 1;
          ++fresh;
        }
      }
      if (t == 5) fresh_at_5 += static_cast<double>(fresh) / (k + 1);
    }
    int c = 0;
    for (const char s : seen) c += s;
    covered += static_cast<double>(c) / static_cast<double>(std::size_t{1} << k);
  }
  CHECK(std::abs(covered / streams - expected_coverage(horizon, k)) < 0.02);
  CHECK(std::abs(fresh_at_5 / streams - expected_uncached_ratio(5, k)) < 0.03);
}

TEST_CASE("mean absolute-attribution shares") {
  const FeatureImportance fi = feature_importance({{1, 1, 0}, {0, 2, 2}});
  REQUIRE(fi.fi.size() == 3);
  CHECK(fi.fi[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(fi.fi[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(fi.fi[2] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(fi.skipped == 0);

  const FeatureImportance with_zero = feature_importance({{1, 1, 0}, {0, 0, 0}, {0, 2, 2}});
  CHECK(with_zero.fi[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(with_zero.skipped == 1);

  CHECK(feature_importance({{3.2}}).fi == std::vector<double>{1.0});
  CHECK_THROWS_AS(feature_importance({{0, 0}, {0, 0}}), AllZeroAttribution);
  CHECK_THROWS_AS(feature_importance({}), Error);  // no rows at all: usage error
  // Signs do not matter, magnitudes do.
  const FeatureImportance sgn = feature_importance({{-1, 1}});
  CHECK(sgn.fi[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("mean squared attribution distance") {
  CHECK(shap_loss({{0, 1}, {1, 0}}, {{1, 1}, {1, 1}}) == 0.5);
  CHECK(shap_loss({{2, 3}}, {{2, 3}}) == 0.0);
  CHECK_THROWS_AS(shap_loss({{0, 1}}, {{0, 1}, {1, 0}}), ShapeMismatch);
  CHECK_THROWS_AS(shap_loss({{0, 1}}, {{0}}), ShapeMismatch);
}

TEST_CASE("report serialization exposes the audit fields") {
  const DoValueFunction vf = DoValueFunction::exact(make_salary_scm());
  const ShapleyReport rep = exact_shapley(vf, vf.model().graph(), config_x(1, 1, 1));
  const nlohmann::json j = rep.to_json();
  REQUIRE(j.contains("phi"));
  for (const char* label : {"A", "E", "S"}) {
    REQUIRE(j["phi"].contains(label));
    CHECK(j["phi"][label].contains("value"));
    CHECK(j["phi"][label].contains("stderr"));
  }
  CHECK(j["phi"]["E"]["value"].get<double>() == rep.phi[1]);
  for (const char* key : {"nu_evals", "cache_hits", "fra_reductions", "permutations",
                          "timings_ms", "efficiency_residual", "base_value", "full_value"})
    CHECK(j.contains(key));
  CHECK(j["timings_ms"].contains("total"));
  CHECK(j["timings_ms"].contains("values"));
  CHECK(j["cache_mode"] == "fra");
  CHECK(to_string(CacheMode::none) == "none");
  CHECK(to_string(CacheMode::plain) == "plain");
}
