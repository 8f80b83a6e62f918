#pragma once

#include <cstdint>
#include <string>

#include "doshap/scm.hpp"

namespace doshap {

// Four-node binary hiring model (age bracket A, education E, seniority S,
// salary bracket Y) with Bernoulli mechanisms, exact rational conditional
// probabilities, and finite support throughout.  Node ids: A=0, E=1, S=2,
// Y=3; edges A->E, A->S, E->S, E->Y, S->Y.
Scm make_salary_scm();

// Six-node continuous model (Z, X, A, B, C, Y = 0..5) with non-linear
// mechanisms and a hidden common cause u ~ chi^2(10) shared by X and B,
// declared as the bidirected pair X<->B.
Scm make_synthetic_semimarkovian();

// Same mechanisms with the common cause promoted to a measured root node U,
// giving a seven-node confounder-free model (U=0, Z=1, ..., Y=6).
Scm make_synthetic_markovian();

// Equips an arbitrary confounder-free graph with linear mechanisms: every
// node is the mean of its parents (0 for roots) plus standard normal noise.
Scm make_linear_gaussian(CausalGraph g);

// Random K-feature DAG (every feature an ancestor of Y, edge density p)
// where each node is the mean of its parents plus standard normal noise.
Scm make_linear_random(int k, double p, std::uint64_t seed);

// Factory by name: "salary", "synthetic_semimarkovian",
// "synthetic_markovian", or "linear_random" (which consumes k/p/seed).
// Throws UnknownDgp for anything else.
Scm builtin_dgp(const std::string& name, int k = 0, double p = 0.0, std::uint64_t seed = 0);

}  // namespace doshap
