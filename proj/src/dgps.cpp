#include "doshap/dgps.hpp"

#include <cmath>
#include <utility>

#include "doshap/errors.hpp"

namespace doshap {
namespace {

constexpr NodeId kSalaryA = 0, kSalaryE = 1, kSalaryS = 2;

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (const double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

}  // namespace

Scm make_salary_scm() {
  GraphSpec spec;
  spec.nodes = {"A", "E", "S", "Y"};
  spec.edges = {{"A", "E"}, {"A", "S"}, {"E", "S"}, {"E", "Y"}, {"S", "Y"}};
  spec.target = "Y";
  CausalGraph g = CausalGraph::build(spec);

  std::vector<LatentSpec> latents = {
      {"eps_A", Dist::uniform01()},
      {"eps_E", Dist::uniform01()},
      {"eps_S", Dist::uniform01()},
      {"eps_Y", Dist::uniform01()},
  };

  std::vector<Mechanism> mechs(4);
  mechs[kSalaryA] = Mechanism::bernoulli({}, 0, [](std::span<const int>) {
    return Rational(1, 4);
  });
  mechs[kSalaryE] = Mechanism::bernoulli({kSalaryA}, 1, [](std::span<const int> pa) {
    return Rational(pa[0], 2) + Rational(1, 4);
  });
  mechs[kSalaryS] = Mechanism::bernoulli({kSalaryA, kSalaryE}, 2, [](std::span<const int> pa) {
    return Rational(pa[0], 4) + Rational(pa[1], 2) + Rational(1, 10);
  });
  mechs[3] = Mechanism::bernoulli({kSalaryE, kSalaryS}, 3, [](std::span<const int> pa) {
    return Rational(pa[0], 2) + Rational(3 * pa[1], 10) + Rational(1, 10);
  });

  return Scm(std::move(g), std::move(latents), std::move(mechs));
}

namespace {

// Shared continuous mechanisms of the six-variable synthetic model.  The
// hidden-cause value u reaches each mechanism either as a latent draw
// (semi-Markovian) or as a measured parent (Markovian); `z`, `a`, etc. are
// always measured parents.
double mech_x(double z, double u, double eps_x) { return std::abs(z * (u - 5.0) + eps_x); }
double mech_a(double x, double eps1, double eps2) { return std::abs(std::sqrt(x) + eps1 + eps2); }
double mech_b(double a, double u, double eps_b) { return 5.0 * std::sin(a) - u / 10.0 + eps_b; }
double mech_c_mean(double b) { return std::log1p(b * b); }
double mech_y_mean(double z, double x, double c) {
  return std::log(z / (1.0 - z)) + (x / 10.0) * (x / 10.0) + c;
}

std::vector<LatentSpec> synthetic_noise_tail() {
  return {
      {"eps_Z", Dist::beta(2.0, 5.0)},     {"eps_X", Dist::normal(0.0, 0.1)},
      {"eps_A1", Dist::exponential(1.0)},  {"eps_A2", Dist::normal(0.0, 0.1)},
      {"eps_B", Dist::normal(0.0, 1.0)},   {"eps_C", Dist::normal(0.0, 0.5)},
      {"eps_Y", Dist::normal(0.0, 0.5)},
  };
}

}  // namespace

Scm make_synthetic_semimarkovian() {
  GraphSpec spec;
  spec.nodes = {"Z", "X", "A", "B", "C", "Y"};
  spec.edges = {{"Z", "X"}, {"X", "A"}, {"A", "B"}, {"B", "C"},
                {"Z", "Y"}, {"X", "Y"}, {"C", "Y"}};
  spec.confounders = {{"X", "B"}};
  spec.target = "Y";
  CausalGraph g = CausalGraph::build(spec);
  const NodeId Z = 0, X = 1, A = 2, B = 3, C = 4;

  std::vector<LatentSpec> latents = {{"u", Dist::chi_squared(10.0)}};
  for (auto& l : synthetic_noise_tail()) latents.push_back(std::move(l));
  // Latent indices: u=0, eps_Z=1, eps_X=2, eps_A1=3, eps_A2=4, eps_B=5,
  // eps_C=6, eps_Y=7.

  std::vector<Mechanism> mechs(6);
  mechs[Z] = Mechanism::continuous({}, {1}, [](std::span<const double>, std::span<const double> n) {
    return n[0];
  });
  mechs[X] = Mechanism::continuous({Z}, {0, 2},
                                   [](std::span<const double> pa, std::span<const double> n) {
                                     return mech_x(pa[0], n[0], n[1]);
                                   });
  mechs[A] = Mechanism::continuous({X}, {3, 4},
                                   [](std::span<const double> pa, std::span<const double> n) {
                                     return mech_a(pa[0], n[0], n[1]);
                                   });
  mechs[B] = Mechanism::continuous({A}, {0, 5},
                                   [](std::span<const double> pa, std::span<const double> n) {
                                     return mech_b(pa[0], n[0], n[1]);
                                   });
  mechs[C] = Mechanism::continuous(
      {B}, {6},
      [](std::span<const double> pa, std::span<const double> n) {
        return mech_c_mean(pa[0]) + n[0];
      },
      [](std::span<const double> pa) { return mech_c_mean(pa[0]); }, /*additive=*/true);
  mechs[5] = Mechanism::continuous(
      {Z, X, C}, {7},
      [](std::span<const double> pa, std::span<const double> n) {
        return mech_y_mean(pa[0], pa[1], pa[2]) + n[0];
      },
      [](std::span<const double> pa) { return mech_y_mean(pa[0], pa[1], pa[2]); },
      /*additive=*/true);

  return Scm(std::move(g), std::move(latents), std::move(mechs));
}

Scm make_synthetic_markovian() {
  GraphSpec spec;
  spec.nodes = {"U", "Z", "X", "A", "B", "C", "Y"};
  spec.edges = {{"U", "X"}, {"U", "B"}, {"Z", "X"}, {"X", "A"}, {"A", "B"},
                {"B", "C"}, {"Z", "Y"}, {"X", "Y"}, {"C", "Y"}};
  spec.target = "Y";
  CausalGraph g = CausalGraph::build(spec);
  const NodeId U = 0, Z = 1, X = 2, A = 3, B = 4, C = 5;

  std::vector<LatentSpec> latents = {{"eps_U", Dist::chi_squared(10.0)}};
  for (auto& l : synthetic_noise_tail()) latents.push_back(std::move(l));

  std::vector<Mechanism> mechs(7);
  mechs[U] = Mechanism::continuous({}, {0}, [](std::span<const double>, std::span<const double> n) {
    return n[0];
  });
  mechs[Z] = Mechanism::continuous({}, {1}, [](std::span<const double>, std::span<const double> n) {
    return n[0];
  });
  mechs[X] = Mechanism::continuous({Z, U}, {2},
                                   [](std::span<const double> pa, std::span<const double> n) {
                                     return mech_x(pa[0], pa[1], n[0]);
                                   });
  mechs[A] = Mechanism::continuous({X}, {3, 4},
                                   [](std::span<const double> pa, std::span<const double> n) {
                                     return mech_a(pa[0], n[0], n[1]);
                                   });
  mechs[B] = Mechanism::continuous({A, U}, {5},
                                   [](std::span<const double> pa, std::span<const double> n) {
                                     return mech_b(pa[0], pa[1], n[0]);
                                   });
  mechs[C] = Mechanism::continuous(
      {B}, {6},
      [](std::span<const double> pa, std::span<const double> n) {
        return mech_c_mean(pa[0]) + n[0];
      },
      [](std::span<const double> pa) { return mech_c_mean(pa[0]); }, /*additive=*/true);
  mechs[6] = Mechanism::continuous(
      {Z, X, C}, {7},
      [](std::span<const double> pa, std::span<const double> n) {
        return mech_y_mean(pa[0], pa[1], pa[2]) + n[0];
      },
      [](std::span<const double> pa) { return mech_y_mean(pa[0], pa[1], pa[2]); },
      /*additive=*/true);

  return Scm(std::move(g), std::move(latents), std::move(mechs));
}

Scm make_linear_gaussian(CausalGraph g) {
  if (g.confounded())
    throw UnsupportedContinuous(
        "linear-Gaussian mechanisms have one private noise per node and cannot "
        "realize declared confounder pairs");
  const int n = g.node_count();

  std::vector<LatentSpec> latents;
  latents.reserve(static_cast<std::size_t>(n));
  std::vector<Mechanism> mechs(static_cast<std::size_t>(n));
  for (NodeId v = 0; v < n; ++v) {
    latents.push_back({"eps_" + g.label(v), Dist::normal(0.0, 1.0)});
    std::vector<NodeId> parents;
    g.parents(v).for_each([&](std::size_t p) { parents.push_back(static_cast<NodeId>(p)); });
    mechs[static_cast<std::size_t>(v)] = Mechanism::continuous(
        std::move(parents), {static_cast<int>(v)},
        [](std::span<const double> pa, std::span<const double> noise) {
          return mean_of(pa) + noise[0];
        },
        [](std::span<const double> pa) { return mean_of(pa); }, /*additive=*/true);
  }
  return Scm(std::move(g), std::move(latents), std::move(mechs));
}

Scm make_linear_random(int k, double p, std::uint64_t seed) {
  return make_linear_gaussian(sample_random_graph(k, p, seed).graph);
}

Scm builtin_dgp(const std::string& name, int k, double p, std::uint64_t seed) {
  if (name == "salary") return make_salary_scm();
  if (name == "synthetic_semimarkovian") return make_synthetic_semimarkovian();
  if (name == "synthetic_markovian") return make_synthetic_markovian();
  if (name == "linear_random") return make_linear_random(k, p, seed);
  throw UnknownDgp("no built-in data-generating process named '" + name + "'");
}

}  // namespace doshap
