#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "qsynth/abstraction.hpp"
#include "qsynth/arena.hpp"
#include "qsynth/errors.hpp"
#include "qsynth/games.hpp"
#include "qsynth/refine_sim.hpp"
#include "qsynth/safety.hpp"

using namespace qsynth;

namespace {

struct Loop {
  ControlSystemSpec sys;
  SymbolicModel model;
  Controller controller;
  Arena arena;
};

/* x' = 0.2 u + omega on [-1, 1], safe set [-0.8, 0.8] */
Loop loop(double w, const CostSpec& cost) {
  Loop l;
  l.sys = test::line(0.0, 0.2, -1.0, 1.0, 0.1, 0.5, {{-1.0}, {0.0}, {1.0}}, w);
  l.sys.safe_set.state = Box({-0.8}, {0.8});
  l.model = build_symbolic_model(l.sys);
  l.controller = solve_safety(l.model, make_safety_spec(l.sys)).controller;
  REQUIRE_FALSE(l.controller.empty());
  l.arena = build_arena(l.model, l.controller, cost);
  return l;
}

CostSpec dr() {
  CostSpec c;
  c.kind = CostKind::DR;
  c.reference = {0.0};
  c.projection = {0};
  return c;
}

SimulationOptions opts(std::size_t steps, Rational lambda = Rational(1)) {
  SimulationOptions o;
  o.steps = steps;
  o.lambda = lambda;
  return o;
}

}  // namespace

TEST_CASE("refine: lookup follows sigma_min and stays inside K^") {
  const Loop l = loop(0.02, dr());
  const MpgResult r = solve_mpg(l.arena);
  const Implementation impl = refine(l.arena, r.strategy, l.controller);
  for (std::size_t v = 0; v < l.arena.num_min(); ++v) {
    const std::uint32_t next = impl.lookup(l.arena.min_cell[v], l.arena.min_input[v]);
    REQUIRE(next == l.arena.max_input[r.strategy.sigma_min[v]]);
    REQUIRE(l.controller.allows(l.arena.min_cell[v], next));
  }
  for (std::uint32_t c = 0; c < l.controller.num_cells(); ++c)
    REQUIRE(impl.defined(CellId{c}) == l.controller.in_domain(CellId{c}));
  CHECK_THROWS_AS(impl.lookup(CellId{0}, 0), ContractViolation);  // cell 0 is outside Z

  /* rebuilding and re-solving reproduces the table */
  const Loop again = loop(0.02, dr());
  CHECK(refine(again.arena, solve_mpg(again.arena).strategy, again.controller) == impl);
}

TEST_CASE("refine: single input gives a constant lookup") {
  auto sys = test::line(0.0, 0.0, 0.0, 1.0, 0.25, 1.0);
  const SymbolicModel m = build_symbolic_model(sys);
  const Controller k = solve_safety(m, make_safety_spec(sys)).controller;
  const Arena a = build_arena(m, k, test::is_cost());
  const Implementation impl = refine(a, solve_dpg(a, Rational(1, 2)).strategy, k);
  for (std::uint32_t c = 0; c < 4; ++c)
    CHECK(impl.lookup(CellId{c}, 0) == 0);
}

TEST_CASE("refine: mismatched strategy is rejected") {
  const Loop l = loop(0.02, dr());
  Strategy bad = solve_mpg(l.arena).strategy;
  bad.sigma_min.pop_back();
  CHECK_THROWS_AS(refine(l.arena, bad, l.controller), ContractViolation);
}

TEST_CASE("simulate: constant cost and zero dynamics") {
  auto sys = test::line(0.0, 0.0, 0.0, 1.0, 0.25, 1.0, {{0.0}, {1.0}});
  const SymbolicModel m = build_symbolic_model(sys);
  const Controller k = solve_safety(m, make_safety_spec(sys)).controller;
  const Implementation stay = first_enabled(k);

  const SimulationReport is = simulate(sys, stay, Vec{0.3}, DisturbanceSignal::none(), test::is_cost(), opts(50));
  CHECK(is.safe);
  CHECK(is.average == 0.0);
  CHECK(is.steps == 50);

  /* EC with u0 = -1 and input 0 always: cost 1 at every step */
  CostSpec ec;
  ec.kind = CostKind::EC;
  ec.u0 = {-1.0};
  const SimulationReport one = simulate(sys, stay, Vec{0.3}, DisturbanceSignal::none(), ec, opts(40, Rational(1, 2)));
  for (double c : one.costs)
    CHECK(c == 1.0);
  CHECK(one.average == 1.0);
  CHECK(one.discounted == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("simulate: average is the mean of the recorded costs") {
  const Loop l = loop(0.05, dr());
  const Implementation impl = refine(l.arena, solve_mpg(l.arena).strategy, l.controller);
  const auto sig = DisturbanceSignal::sinusoid("s", {0.05}, 0.7);
  const SimulationReport r = simulate(l.sys, impl, Vec{0.33}, sig, dr(), opts(300));
  REQUIRE(r.safe);
  double sum = 0.0;
  for (double c : r.costs)
    sum += c;
  CHECK(r.average == sum / static_cast<double>(r.costs.size()));
  CHECK(r.states.size() == 300);
  CHECK(r.inputs.size() == 300);
}

TEST_CASE("simulate: leaving the domain is a safety violation") {
  auto sys = test::line(1.0, 0.0, 0.0, 1.0, 0.25, 0.5);
  const SymbolicModel m = build_symbolic_model(sys);
  Controller k(m.num_cells(), 1);
  for (std::uint32_t c = 0; c < 4; ++c)
    k.set(CellId{c}, 0, true);  // deliberately not a safety controller
  const Implementation impl = first_enabled(k);
  CHECK_THROWS_AS(simulate(sys, impl, Vec{0.1}, DisturbanceSignal::none(), test::is_cost(), opts(10)),
                  SafetyViolation);
  SimulationOptions soft = opts(10);
  soft.throw_on_violation = false;
  const SimulationReport r = simulate(sys, impl, Vec{0.1}, DisturbanceSignal::none(), test::is_cost(), soft);
  CHECK_FALSE(r.safe);
  REQUIRE(r.violation_step.has_value());
  CHECK(*r.violation_step == 2);
}

TEST_CASE("closed loop: safe and within the MPG guarantee for every lambda") {
  const Loop l = loop(0.05, dr());
  const MpgResult mpg = solve_mpg(l.arena);
  const double nu = mpg.max_value_cost();
  const std::vector<DisturbanceSignal> signals{DisturbanceSignal::none(), DisturbanceSignal::constant("c", {0.05}),
                                               DisturbanceSignal::sinusoid("s", {0.05}, 0.3)};
  for (const Rational& lambda : {Rational(0), Rational(1, 2), Rational(15, 16), Rational(1)}) {
    const Strategy s = lambda == Rational(1) ? mpg.strategy : solve_dpg(l.arena, lambda).strategy;
    const Implementation impl = refine(l.arena, s, l.controller);
    for (const auto& sig : signals)
      for (double x0 = -0.75; x0 <= 0.75; x0 += 0.1) {
        const SimulationReport r = simulate(l.sys, impl, Vec{x0}, sig, dr(), opts(2000, lambda));
        REQUIRE(r.safe);
        REQUIRE(window_average(r, 1000) <= nu + 1e-6);
      }
  }
}

TEST_CASE("closed loop: discounted sum below the DPG value at the start node") {
  const Loop l = loop(0.05, dr());
  const Rational lambda(3, 4);
  const DpgResult d = solve_dpg(l.arena, lambda);
  const Implementation impl = refine(l.arena, d.strategy, l.controller);
  for (double x0 = -0.75; x0 <= 0.75; x0 += 0.1) {
    const CellId c = l.sys.grid.quantize(Vec{x0});
    const auto it = std::lower_bound(l.arena.min_cell.begin(), l.arena.min_cell.end(), c);
    const auto v = static_cast<std::size_t>(it - l.arena.min_cell.begin());  // previous input 0
    const SimulationReport r =
        simulate(l.sys, impl, Vec{x0}, DisturbanceSignal::sinusoid("s", {0.05}, 0.3), dr(), opts(200, lambda));
    REQUIRE(r.discounted <= d.values[v] + 1e-6);
  }
}

TEST_CASE("disturbance: saturated to [-w, w]") {
  auto sys = test::line(0.0, 0.0, -1.0, 1.0, 0.5, 1.0, {{0.0}}, 0.1);
  const Disturbance omega = state_disturbance(sys, DisturbanceSignal::sinusoid("big", {3.0}, 1.0));
  double o = 0.0;
  for (double t = 0.0; t < 10.0; t += 0.01) {
    omega(t, std::span<double>(&o, 1));
    REQUIRE(std::abs(o) <= 0.1 + 1e-15);
  }
}

TEST_CASE("limit_average_converged: examples") {
  SimulationReport r;
  r.costs.assign(2000, 0.25);
  r.steps = 2000;
  CHECK(limit_average_converged(r, 1000, 1e-4));
  r.costs.clear();
  for (int t = 0; t < 2000; ++t)
    r.costs.push_back(t % 2);
  CHECK(limit_average_converged(r, 1000, 1e-4));
  CHECK(window_average(r, 1000) == doctest::Approx(0.5));
  r.costs.clear();
  for (int t = 0; t < 3000; ++t)
    r.costs.push_back(t % 100);
  r.steps = 3000;
  CHECK(limit_average_converged(r, 1000, 1e-4));
  CHECK(window_average(r, 1000) == doctest::Approx(49.5).epsilon(1e-4));
  r.costs.assign(2000, 0.0);
  for (int t = 1000; t < 2000; ++t)
    r.costs[t] = 1.0;
  CHECK_FALSE(limit_average_converged(r, 1000, 1e-4));
}

TEST_CASE("adversary_probe: deterministic model is always feasible") {
  /* stationary dynamics: every F^(cell, u) is the cell itself */
  auto still = test::line(0.0, 0.0, 0.0, 4.0, 1.0, 1.0, {{0.0}, {1.0}});
  const SymbolicModel sm = build_symbolic_model(still);
  const Controller sk = solve_safety(sm, make_safety_spec(still)).controller;
  const Arena a = build_arena(sm, sk, test::is_cost());
  const MpgResult r = solve_mpg(a);
  const Implementation impl = refine(a, r.strategy, sk);
  const ProbeReport p = adversary_probe(a, r.strategy, still, impl, Vec{1.5}, 0, 200, 1.0);
  CHECK(p.steps == 200);
  CHECK(p.fraction() == 1.0);
}

TEST_CASE("adversary_probe: spurious successors are infeasible") {
  /* no disturbance, but the growth bound (w > 0 in the model only) blurs the successor set */
  auto model_sys = test::line(0.0, 1.0, -4.0, 4.0, 0.5, 1.0, {{-1.0}, {0.0}, {1.0}}, 0.6);
  auto real_sys = model_sys;
  real_sys.w = {0.0};
  real_sys.disturbance_range = {0.0};
  const SymbolicModel m = build_symbolic_model(model_sys);
  const Controller k = solve_safety(m, make_safety_spec(model_sys)).controller;
  REQUIRE_FALSE(k.empty());
  /* max gains by moving to the far cells, which the undisturbed system never reaches */
  const Arena a = build_arena(m, k, dr());
  const MpgResult r = solve_mpg(a);
  const Implementation impl = refine(a, r.strategy, k);
  const ProbeReport p = adversary_probe(a, r.strategy, real_sys, impl, Vec{0.1}, 0, 100, 1.0);
  CHECK(p.fraction() < 1.0);
}

TEST_CASE("trace csv: header and one line per step") {
  const Loop l = loop(0.02, dr());
  const Implementation impl = refine(l.arena, solve_mpg(l.arena).strategy, l.controller);
  const SimulationReport r = simulate(l.sys, impl, Vec{0.2}, DisturbanceSignal::none(), dr(), opts(25));
  std::ostringstream out;
  write_trace_csv(r, l.sys, Rational(1), out);
  const std::string s = out.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 26);
  CHECK(s.rfind("t,x1,", 0) == 0);
}
