#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "qsynth/arena.hpp"
#include "qsynth/rational.hpp"

namespace qsynth {

/* memoryless strategies: successor node id per min node and per max node */
struct Strategy {
  std::vector<std::uint32_t> sigma_min;  // min node -> max node
  std::vector<std::uint32_t> sigma_max;  // max node -> min node

  std::uint64_t hash() const;
  friend bool operator==(const Strategy&, const Strategy&) = default;
};

struct DpgOptions {
  double tol = 1e-9;
  unsigned workers = 1;
  std::size_t max_sweeps = 100000000;
  /* optional starting values per min node, e.g. the solution for a nearby lambda */
  const std::vector<double>* warm_start = nullptr;
};

struct DpgResult {
  Rational lambda;
  std::vector<double> values;      // per min node, cost units
  Strategy strategy;
  std::vector<double> residuals;   // sup-norm change per sweep
  double max_value() const;
};

/*
 * function: solve_dpg
 *
 * Jacobi value iteration on the per-round Shapley operator
 *   Vmin(v) = min_m (1-l) w(v,m) + l Vmax(m),  Vmax(m) = max_v' Vmin(v')
 * until residual * l / (1-l) < tol. ties go to the lowest node id
 */
DpgResult solve_dpg(const Arena& arena, const Rational& lambda, const DpgOptions& options = {});

/* Vmax(m) = max over successors of the min node values */
std::vector<double> max_node_values(const Arena& arena, const std::vector<double>& min_values);

struct MpgOptions {
  unsigned workers = 1;
  std::size_t max_iterations = 1000000;
  /* solve by energy lifting if policy iteration hits the cap or fails its certificate */
  bool allow_fallback = true;
  /* starting strategies, e.g. from a discounted game with lambda close to 1 */
  const Strategy* initial = nullptr;
};

struct MpgResult {
  std::vector<Rational> values;    // per min node, micro-units per round
  Strategy strategy;
  std::size_t iterations = 0;
  bool used_fallback = false;

  double value(std::size_t v) const { return values[v].to_double() / kMicroUnitsPerCost; }
  Rational max_value() const;      // micro-units
  double max_value_cost() const { return max_value().to_double() / kMicroUnitsPerCost; }
};

/*
 * function: solve_mpg
 *
 * exact mean payoff per round. min-max policy iteration with a multichain
 * Howard loop for the max player; the fixed point is checked against the
 * optimality equations of both players before strategies are read off
 */
MpgResult solve_mpg(const Arena& arena, const MpgOptions& options = {});

/* divide and conquer over thresholds, each decided by energy progress-measure lifting */
MpgResult solve_mpg_energy(const Arena& arena);

/* mean payoff per round of each min node when sigma_min is fixed and max answers optimally */
std::vector<Rational> mpg_values_against(const Arena& arena, const std::vector<std::uint32_t>& sigma_min);

/* exact per-round mean of the play from each min node under a strategy pair */
std::vector<Rational> play_values(const Arena& arena, const Strategy& strategy);

struct LimitCheckReport {
  std::vector<Rational> lambdas;
  std::vector<std::vector<double>> gaps;  // per lambda, per min node |V_l - nu| in cost units

  double max_gap(std::size_t i) const;
  /* gap of every node non-increasing along lambdas, within tol */
  bool monotone(double tol) const;
};

LimitCheckReport dpg_mpg_limit_check(const Arena& arena, const std::vector<Rational>& lambdas,
                                     const DpgOptions& options = {});

/* values in cost units and strategy of one solved game, plus exact values for lambda = 1 */
struct GameSolution {
  Rational lambda;
  std::vector<double> values;
  std::vector<Rational> exact_values;  // micro-units, MPG only
  Strategy strategy;

  static GameSolution from(const DpgResult& r);
  static GameSolution from(const MpgResult& r);
  friend bool operator==(const GameSolution&, const GameSolution&) = default;
};

void save_solution(const GameSolution& s, std::uint64_t arena_hash, std::uint64_t cost_key,
                   const std::filesystem::path& path);
/* throws ConfigError when the file was produced for another arena, cost or lambda */
GameSolution load_solution(const std::filesystem::path& path, std::uint64_t arena_hash, std::uint64_t cost_key,
                           const Rational& lambda);

/* kind,node,cell,input,value,successor */
void export_solution_csv(const GameSolution& s, const Arena& arena, std::ostream& out);

}  // namespace qsynth
