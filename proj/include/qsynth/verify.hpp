#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qsynth/abstraction.hpp"
#include "qsynth/arena.hpp"
#include "qsynth/games.hpp"
#include "qsynth/rational.hpp"

namespace qsynth {

struct CorpusOptions {
  std::uint64_t seed = 1;
  std::size_t count = 200;
  /* total node count, min plus max */
  std::size_t max_nodes = 8;
  /* weights are whole cost units 0..max_weight */
  std::int64_t max_weight = 10;
  std::size_t max_degree = 3;
};

/* total bipartite arena, at least one node per side */
Arena random_arena(std::mt19937_64& rng, const CorpusOptions& options);
std::vector<Arena> random_corpus(const CorpusOptions& options);

/* number of memoryless strategy pairs; the brute-force oracles enumerate them all */
std::uint64_t strategy_pair_count(const Arena& arena);

/*
 * exhaustive oracles: value(v) = min over sigma_min of max over sigma_max of
 * the payoff of the lasso from v. MPG values are exact micro-units per round,
 * DPG values are in cost units
 */
std::vector<Rational> brute_force_mpg(const Arena& arena);
std::vector<double> brute_force_dpg(const Arena& arena, const Rational& lambda);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

CheckResult check_mpg_oracle(const std::vector<Arena>& corpus);
CheckResult check_dpg_oracle(const std::vector<Arena>& corpus, const std::vector<Rational>& lambdas, double tol);
/* residuals of every sweep shrink at least by the factor lambda */
CheckResult check_dpg_contraction(const std::vector<Arena>& corpus, const std::vector<Rational>& lambdas);
/* gaps |V_l - nu| non-increasing along lambdas and below rel_bound * weight range at the last lambda */
CheckResult check_limit(const std::vector<Arena>& corpus, const std::vector<Rational>& lambdas, double rel_bound);

struct SoundnessOptions {
  std::uint64_t seed = 1;
  std::size_t samples = 10000;
  /* disturbance pieces per sampling period */
  std::size_t pieces = 4;
  int substeps = 5;
};

/*
 * random (state in cell, input, piecewise constant disturbance in [-w, w])
 * triples: the disturbed endpoint must quantize into F^(cell, input), unless
 * the pair is blocked
 */
CheckResult check_abstraction_soundness(const ControlSystemSpec& sys, const SymbolicModel& model,
                                        const SoundnessOptions& options);

}  // namespace qsynth
