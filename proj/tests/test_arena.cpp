#include <doctest.h>

#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "qsynth/abstraction.hpp"
#include "qsynth/arena.hpp"
#include "qsynth/errors.hpp"
#include "qsynth/safety.hpp"

using namespace qsynth;

namespace {

struct Setup {
  ControlSystemSpec sys;
  SymbolicModel model;
  Controller controller;
};

/* x' = 0.2 u + omega on [-1, 1], safe set [-0.8, 0.8]; a small realizable system. with one input
 * and no disturbance the safe set is the whole grid, so that the last (closed) cell anchors it */
Setup setup(std::vector<Vec> inputs = {{-1.0}, {0.0}, {1.0}}) {
  Setup s;
  const bool single = inputs.size() == 1;
  s.sys = test::line(0.0, 0.2, -1.0, 1.0, 0.1, 0.5, std::move(inputs), single ? 0.0 : 0.02);
  if (!single)
    s.sys.safe_set.state = Box({-0.8}, {0.8});
  s.model = build_symbolic_model(s.sys);
  s.controller = solve_safety(s.model, make_safety_spec(s.sys)).controller;
  REQUIRE_FALSE(s.controller.empty());
  return s;
}

CostSpec spec(CostKind kind) {
  CostSpec c;
  c.kind = kind;
  c.reference = {0.0};
  c.projection = {0};
  c.u0 = {0.0};
  return c;
}

}  // namespace

TEST_CASE("to_micro_units: round half up") {
  CHECK(to_micro_units(0.1234567) == 123457);
  CHECK(to_micro_units(0.0000005) == 1);
  CHECK(to_micro_units(0.0) == 0);
  CHECK(to_micro_units(3.0) == 3'000'000);
}

TEST_CASE("build_arena: node counts and totality") {
  const Setup s = setup();
  const Arena a = build_arena(s.model, s.controller, spec(CostKind::DR));
  a.validate();
  CHECK(a.num_min() == s.controller.domain_size() * s.model.num_inputs());
  CHECK(a.num_max() == s.controller.num_pairs());
  for (std::size_t v = 0; v < a.num_min(); ++v)
    REQUIRE(a.min_offsets[v + 1] > a.min_offsets[v]);
  for (std::size_t m = 0; m < a.num_max(); ++m)
    REQUIRE(a.max_offsets[m + 1] > a.max_offsets[m]);
  /* bipartite and consistent with K^ and F^ */
  for (std::size_t v = 0; v < a.num_min(); ++v)
    for (std::uint64_t e = a.min_offsets[v]; e < a.min_offsets[v + 1]; ++e) {
      const std::uint32_t m = a.min_targets[e];
      REQUIRE(a.max_cell[m] == a.min_cell[v]);
      REQUIRE(s.controller.allows(a.max_cell[m], a.max_input[m]));
    }
  for (std::size_t m = 0; m < a.num_max(); ++m)
    for (std::uint64_t e = a.max_offsets[m]; e < a.max_offsets[m + 1]; ++e) {
      const std::uint32_t v = a.max_targets[e];
      REQUIRE(a.min_input[v] == a.max_input[m]);
      const auto succ = s.model.successors(a.max_cell[m], a.max_input[m]);
      REQUIRE(std::binary_search(succ.begin(), succ.end(), a.min_cell[v]));
    }
}

TEST_CASE("build_arena: IS weights are 0 or one unit") {
  const Setup s = setup();
  const Arena a = build_arena(s.model, s.controller, spec(CostKind::IS));
  for (std::size_t v = 0; v < a.num_min(); ++v)
    for (std::uint64_t e = a.min_offsets[v]; e < a.min_offsets[v + 1]; ++e) {
      const bool same = a.max_input[a.min_targets[e]] == a.min_input[v];
      REQUIRE(a.weights[e] == (same ? 0 : 1'000'000));
    }
}

TEST_CASE("build_arena: weights bound the concrete cost") {
  const Setup s = setup();
  CostSpec cc = spec(CostKind::CC);
  cc.normalizers = compute_normalizers(s.model, s.controller, cc).values;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (CostKind kind : {CostKind::DR, CostKind::EC, CostKind::ID, CostKind::CC}) {
    CostSpec c = cc;
    c.kind = kind;
    const Arena a = build_arena(s.model, s.controller, c);
    for (int k = 0; k < 1000; ++k) {
      const std::size_t v = rng() % a.num_min();
      const std::uint64_t e = a.min_offsets[v] + rng() % (a.min_offsets[v + 1] - a.min_offsets[v]);
      const Box box = s.model.grid.cell_box(a.min_cell[v]);
      const Vec x{box.lower[0] + unit(rng) * (box.upper[0] - box.lower[0])};
      const double concrete =
          cost(c, s.model.inputs[a.min_input[v]], x, s.model.inputs[a.max_input[a.min_targets[e]]]);
      REQUIRE(concrete <= static_cast<double>(a.weights[e]) / 1e6 + 1e-6);
    }
  }
}

TEST_CASE("compute_normalizers: examples") {
  const Setup s = setup({{-5.0}, {0.0}, {5.0}});
  const NormalizerReport r = compute_normalizers(s.model, s.controller, spec(CostKind::CC));
  CHECK(r.values.ec == doctest::Approx(25.0));
  CHECK(r.values.id == doctest::Approx(100.0));
  CHECK_FALSE(r.ec_replaced);

  const Setup single = setup({{0.0}});
  const NormalizerReport one = compute_normalizers(single.model, single.controller, spec(CostKind::CC));
  CHECK(one.id_replaced);
  CHECK(one.ec_replaced);
  CHECK(one.values.id == 1.0);

  /* DR over dom(K^): the farthest surviving cell corner from 0 */
  double worst = 0.0;
  for (std::uint32_t c = 0; c < s.controller.num_cells(); ++c)
    if (s.controller.in_domain(CellId{c})) {
      const Box b = s.model.grid.cell_box(CellId{c});
      worst = std::max({worst, b.lower[0] * b.lower[0], b.upper[0] * b.upper[0]});
    }
  CHECK(r.values.dr == doctest::Approx(worst));

  CHECK_THROWS_AS(compute_normalizers(s.model, Controller(s.model.num_cells(), 3), spec(CostKind::CC)),
                  Unrealizable);
}

TEST_CASE("arena: topology independent of the cost, weights swap through files") {
  const Setup s = setup();
  const Arena dr = build_arena(s.model, s.controller, spec(CostKind::DR));
  const Arena is = build_arena(s.model, s.controller, spec(CostKind::IS));
  CHECK(dr.topology_hash() == is.topology_hash());
  CHECK(dr.weights_hash() != is.weights_hash());

  const auto dir = std::filesystem::temp_directory_path() / "qsynth-test-arena";
  std::filesystem::create_directories(dir);
  save_arena_topology(dr, dir / "a.qsat");
  save_arena_weights(dr, cost_hash(spec(CostKind::DR)), dir / "dr.qsaw");
  save_arena_weights(is, cost_hash(spec(CostKind::IS)), dir / "is.qsaw");
  Arena loaded = load_arena_topology(dir / "a.qsat");
  CHECK(loaded.topology_hash() == dr.topology_hash());
  load_arena_weights(loaded, cost_hash(spec(CostKind::IS)), dir / "is.qsaw");
  CHECK(loaded.weights == is.weights);
  load_arena_weights(loaded, cost_hash(spec(CostKind::DR)), dir / "dr.qsaw");
  CHECK(loaded.weights == dr.weights);
  CHECK_THROWS_AS(load_arena_weights(loaded, cost_hash(spec(CostKind::IS)), dir / "dr.qsaw"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("build_arena: controller from another model is rejected") {
  const Setup s = setup();
  CHECK_THROWS_AS(build_arena(s.model, Controller(s.model.num_cells(), 7), spec(CostKind::IS)), ContractViolation);
}
