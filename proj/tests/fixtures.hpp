#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "qsynth/arena.hpp"
#include "qsynth/core.hpp"
#include "qsynth/refine_sim.hpp"

namespace qsynth::test {

/* x' = drift + gain * u on [lo, hi], one state, unconstrained safe set = the grid box */
inline ControlSystemSpec line(double drift, double gain, double lo, double hi, double eta, double tau,
                              std::vector<Vec> inputs = {{0.0}}, double w = 0.0) {
  ControlSystemSpec s;
  s.name = "line";
  s.f = [drift, gain](std::span<const double>, std::span<const double> u, std::span<double> dx) {
    dx[0] = drift + gain * u[0];
  };
  s.jacobian_bound = Matrix(1, 1, {0.0});
  s.w = {w};
  s.inputs = std::move(inputs);
  s.tau = tau;
  s.grid = Grid(Box({lo}, {hi}), {eta});
  s.safe_set.state = Box({lo}, {hi});
  s.disturbance_map = Matrix(1, 1, {1.0});
  s.disturbance_range = {w};
  return s;
}

inline CostSpec is_cost() {
  CostSpec c;
  c.kind = CostKind::IS;
  return c;
}

inline std::int64_t units(std::int64_t cost) { return cost * 1'000'000; }

/* arena from min edges (v, m, cost units) and max edges (m, v) */
inline Arena arena(std::size_t n0, std::size_t n1, std::vector<std::tuple<std::uint32_t, std::uint32_t, std::int64_t>> emin,
                   std::vector<std::pair<std::uint32_t, std::uint32_t>> emax) {
  for (auto& e : emin)
    std::get<2>(e) = units(std::get<2>(e));
  return Arena::from_edges(n0, n1, emin, emax);
}

}  // namespace qsynth::test
