#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doshap/dgps.hpp"
#include "doshap/errors.hpp"
#include "doshap/value_function.hpp"
#include "helpers.hpp"

using namespace doshap;
using testutil::bits_of_mask;

namespace {

std::vector<double> config_x(int a, int e, int s) {
  return {static_cast<double>(a), static_cast<double>(e), static_cast<double>(s)};
}

}  // namespace

TEST_CASE("feature index maps nodes both ways") {
  const Scm m = make_salary_scm();
  const FeatureIndex fi = FeatureIndex::of(m.graph());
  CHECK(fi.count() == 3);
  CHECK(fi.nodes == std::vector<NodeId>{0, 1, 2});
  CHECK(fi.of_node == std::vector<int>{0, 1, 2, -1});
}

TEST_CASE("interventional values, exact backend") {
  const DoValueFunction vf = DoValueFunction::exact(make_salary_scm());
  CHECK(vf.name() == "do[exact]");
  CHECK(vf.is_exact());
  CHECK(vf.num_features() == 3);

  const std::vector<double> x = config_x(1, 1, 1);
  const ValueEstimate empty = vf.evaluate(bits_of_mask(3, 0), x);
  CHECK(empty.value == 0.3925);
  CHECK(empty.se == 0.0);
  CHECK(vf.evaluate(bits_of_mask(3, 0b010), x).value == 0.79875);  // pin E
  CHECK(vf.evaluate(bits_of_mask(3, 0b001), x).value == 0.6925);   // pin A
  CHECK(vf.evaluate(bits_of_mask(3, 0b111), x).value == 0.9);

  const std::vector<double> frac = {0.5, 1, 1};
  CHECK_THROWS_AS(vf.evaluate(bits_of_mask(3, 0b001), frac), InvalidIntervention);
}

TEST_CASE("interventional values, sampled backend: caller-independent streams") {
  const DoValueFunction vf = DoValueFunction::sampled(make_salary_scm(), 20000, 17);
  CHECK(vf.name() == "do[mc]");
  const std::vector<double> x = config_x(1, 1, 1);

  const ValueEstimate a = vf.evaluate(bits_of_mask(3, 0b010), x);
  const ValueEstimate b = vf.evaluate(bits_of_mask(3, 0b010), x);
  CHECK(a.value == b.value);  // same coalition, same derived stream
  CHECK(a.se == b.se);
  CHECK(a.samples == 20000);
  CHECK(std::abs(a.value - 0.79875) <= 4.0 * a.se);

  const ValueEstimate full = vf.evaluate(bits_of_mask(3, 0b111), x);
  CHECK(full.value != a.value);
  CHECK(std::abs(full.value - 0.9) <= 4.0 * full.se);
}

TEST_CASE("population references reproduce hand-computed mixtures") {
  const Scm m = make_salary_scm();
  const auto marg = ReferenceValueFunction::population(ReferenceValueFunction::Kind::marginal, m);
  const auto cond =
      ReferenceValueFunction::population(ReferenceValueFunction::Kind::conditional, m);
  CHECK(marg.name() == "marginal[population]");
  CHECK(cond.name() == "conditional[population]");

  const std::vector<double> x = config_x(1, 1, 1);
  // Pinning E = 1 marginally: E[p_Y(1, S)] with S from its untouched joint.
  CHECK(marg.evaluate(bits_of_mask(3, 0b010), x).value == 0.705);
  // Conditioning on S = 1 instead re-weights E: a different number.
  CHECK(cond.evaluate(bits_of_mask(3, 0b100), x).value == 0.7883928571428571);
  // The empty coalition is the plain observational mean either way.
  CHECK(marg.evaluate(bits_of_mask(3, 0), x).value == 0.3925);
  CHECK(cond.evaluate(bits_of_mask(3, 0), x).value == 0.3925);
}

TEST_CASE("which coalitions hide the causal/observational gap differs by regime") {
  const Scm m = make_salary_scm();
  const DoValueFunction dovf = DoValueFunction::exact(m);
  const auto marg = ReferenceValueFunction::population(ReferenceValueFunction::Kind::marginal, m);
  const auto cond =
      ReferenceValueFunction::population(ReferenceValueFunction::Kind::conditional, m);

  // Coalitions (bit 0 = age A, bit 1 = education E, bit 2 = seniority S)
  // whose value coincides with the interventional one at every configuration.
  const std::set<std::uint64_t> marg_equal = {0b000, 0b100, 0b110, 0b111};
  const std::set<std::uint64_t> cond_equal = {0b000, 0b001, 0b011, 0b110, 0b111};

  for (std::uint64_t mask = 0; mask < 8; ++mask) {
    double max_marg = 0.0, max_cond = 0.0;
    bool marg_all_eq = true, cond_all_eq = true;
    for (int a = 0; a < 2; ++a)
      for (int e = 0; e < 2; ++e)
        for (int s = 0; s < 2; ++s) {
          const std::vector<double> x = config_x(a, e, s);
          const Bitset c = bits_of_mask(3, mask);
          const double dov = dovf.evaluate(c, x).value;
          const double mg = marg.evaluate(c, x).value;
          const double cd = cond.evaluate(c, x).value;
          marg_all_eq = marg_all_eq && mg == dov;  // exact: all rational-backed
          cond_all_eq = cond_all_eq && cd == dov;
          max_marg = std::max(max_marg, std::abs(mg - dov));
          max_cond = std::max(max_cond, std::abs(cd - dov));
        }
    CHECK(marg_all_eq == (marg_equal.count(mask) > 0));
    CHECK(cond_all_eq == (cond_equal.count(mask) > 0));
    if (!marg_all_eq) CHECK(max_marg > 1e-9);
    if (!cond_all_eq) CHECK(max_cond > 1e-9);
  }
}

TEST_CASE("empirical references converge to the population ones") {
  const Scm m = make_salary_scm();
  const SampleTable background = m.sample(20000, 71);
  const Predictor f = scm_mean_predictor(m);
  const auto marg = ReferenceValueFunction::empirical(ReferenceValueFunction::Kind::marginal,
                                                      m.graph(), background, f);
  const auto cond = ReferenceValueFunction::empirical(ReferenceValueFunction::Kind::conditional,
                                                      m.graph(), background, f);
  CHECK(marg.name() == "marginal[empirical]");
  CHECK(cond.name() == "conditional[empirical]");

  const std::vector<double> x = config_x(1, 1, 1);
  CHECK(std::abs(marg.evaluate(bits_of_mask(3, 0b010), x).value - 0.705) < 0.02);

  const ValueEstimate ce = cond.evaluate(bits_of_mask(3, 0b100), x);
  CHECK(std::abs(ce.value - 0.7883928571428571) < 0.03);
  // About 35% of the background has S = 1.
  CHECK(ce.samples > 5000);
  CHECK(ce.samples < 9000);

  // The empty coalition averages the predictor over the whole background.
  double want = 0.0;
  for (const auto& row : background.rows)
    want += f(std::vector<double>{row[0], row[1], row[2]});
  want /= static_cast<double>(background.row_count());
  CHECK(marg.evaluate(bits_of_mask(3, 0), x).value == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("empirical references validate their inputs") {
  const Scm m = make_salary_scm();
  const Predictor f = scm_mean_predictor(m);

  SampleTable empty;
  empty.columns = {"A", "E", "S", "Y"};
  CHECK_THROWS_AS(ReferenceValueFunction::empirical(ReferenceValueFunction::Kind::marginal,
                                                    m.graph(), empty, f),
                  EmptyBackground);

  SampleTable missing;
  missing.columns = {"A", "E", "Y"};
  missing.rows = {{0, 0, 0}};
  CHECK_THROWS_AS(ReferenceValueFunction::empirical(ReferenceValueFunction::Kind::marginal,
                                                    m.graph(), missing, f),
                  ShapeMismatch);

  SampleTable only_a0;
  only_a0.columns = {"A", "E", "S"};
  only_a0.rows = {{0, 0, 0}, {0, 1, 0}, {0, 1, 1}};
  const auto cond = ReferenceValueFunction::empirical(ReferenceValueFunction::Kind::conditional,
                                                      m.graph(), only_a0, f);
  const std::vector<double> x = config_x(1, 1, 1);
  CHECK_THROWS_AS(cond.evaluate(bits_of_mask(3, 0b001), x), NoMatchingBackground);

  const std::vector<double> frac = {0.5, 1, 1};
  CHECK_THROWS_AS(cond.evaluate(bits_of_mask(3, 0b001), frac), ContinuousConditioning);
}

TEST_CASE("conditioning on continuous backgrounds is refused, mixing is not") {
  const Scm m = make_linear_random(3, 0.5, 81);
  const SampleTable background = m.sample(500, 82);
  const Predictor f = [](std::span<const double> v) { return v[0] + v[1] + v[2]; };
  const auto cond = ReferenceValueFunction::empirical(ReferenceValueFunction::Kind::conditional,
                                                      m.graph(), background, f);
  const auto marg = ReferenceValueFunction::empirical(ReferenceValueFunction::Kind::marginal,
                                                      m.graph(), background, f);
  const std::vector<double> x = {0.1, -0.2, 0.3};
  CHECK_THROWS_AS(cond.evaluate(bits_of_mask(3, 0b001), x), ContinuousConditioning);
  CHECK_NOTHROW(marg.evaluate(bits_of_mask(3, 0b001), x));

  const Scm salary = make_salary_scm();
  const auto pop_marg =
      ReferenceValueFunction::population(ReferenceValueFunction::Kind::marginal, salary);
  const std::vector<double> frac = {0.5, 1, 1};
  CHECK_THROWS_AS(pop_marg.evaluate(bits_of_mask(3, 0b001), frac), UnsupportedContinuous);
}

TEST_CASE("shape validation on every backend") {
  const DoValueFunction vf = DoValueFunction::exact(make_salary_scm());
  const std::vector<double> x3 = config_x(0, 0, 0);
  const std::vector<double> x2 = {0, 0};
  CHECK_THROWS_AS(vf.evaluate(bits_of_mask(4, 0), x3), ShapeMismatch);  // wrong width
  CHECK_THROWS_AS(vf.evaluate(bits_of_mask(3, 0), x2), ShapeMismatch);  // wrong length
}

TEST_CASE("the model's own conditional mean as a predictor") {
  const Predictor f = scm_mean_predictor(make_salary_scm());
  CHECK(f(config_x(1, 1, 1)) == 0.9);
  CHECK(f(config_x(0, 0, 0)) == doctest::Approx(0.1).epsilon(1e-15));
}
