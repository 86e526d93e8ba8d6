#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "qsynth/abstraction.hpp"
#include "qsynth/casestudies.hpp"
#include "qsynth/errors.hpp"
#include "qsynth/verify.hpp"

using namespace qsynth;

namespace {

void decay(std::span<const double> x, std::span<const double>, std::span<double> dx) { dx[0] = -x[0]; }
void still(std::span<const double>, std::span<const double>, std::span<double> dx) { dx[0] = 0.0; }
void unit_drift(std::span<const double>, std::span<const double>, std::span<double> dx) { dx[0] = 1.0; }

}  // namespace

TEST_CASE("rk4_step: examples") {
  const Vec u{0.0};
  CHECK(rk4_step(decay, Vec{1.0}, u, 0.1, 1)[0] == doctest::Approx(std::exp(-0.1)).epsilon(1e-6));
  CHECK(rk4_step(still, Vec{0.42}, u, 3.0, 2)[0] == 0.42);
  CHECK(rk4_step(unit_drift, Vec{0.0}, u, 0.35, 1)[0] == doctest::Approx(0.35));
  CHECK_THROWS_AS(rk4_step(decay, Vec{1.0}, u, 0.0, 1), ContractViolation);
}

TEST_CASE("rk4_step: non-finite state is reported") {
  auto blow = [](std::span<const double> x, std::span<const double>, std::span<double> dx) { dx[0] = x[0] * x[0]; };
  CHECK_THROWS_AS(rk4_step(blow, Vec{1e200}, Vec{0.0}, 1.0, 1), NumericalBlowup);
}

TEST_CASE("growth_bound: examples") {
  CHECK(growth_bound(Matrix(1, 1, {0.0}), Vec{1.0}, Vec{0.0}, 0.1, 5)[0] == doctest::Approx(0.1));
  CHECK(growth_bound(Matrix(1, 1, {0.0}), Vec{0.0}, Vec{0.3}, 17.0, 5)[0] == doctest::Approx(0.3));
  CHECK(growth_bound(Matrix(1, 1, {-1.0}), Vec{0.0}, Vec{1.0}, 0.1, 5)[0] ==
        doctest::Approx(std::exp(-0.1)).epsilon(1e-6));
  CHECK_THROWS_AS(growth_bound(Matrix(2, 2, {0.0, -1.0, 0.0, 0.0}), Vec{0.0, 0.0}, Vec{1.0, 1.0}, 1.0, 5),
                  ConfigError);
}

TEST_CASE("build_symbolic_model: stationary and drifting lines") {
  /* the closed box around a half-open cell touches the upper neighbour; the clipped last cell is closed */
  const SymbolicModel still_model = build_symbolic_model(test::line(0.0, 0.0, 0.0, 1.0, 0.5, 1.0, {{0.0}, {1.0}}));
  for (std::uint32_t u = 0; u < 2; ++u) {
    const auto s0 = still_model.successors(CellId{0}, u);
    CHECK(std::vector<CellId>(s0.begin(), s0.end()) == std::vector<CellId>{CellId{0}, CellId{1}});
    const auto s1 = still_model.successors(CellId{1}, u);
    CHECK(std::vector<CellId>(s1.begin(), s1.end()) == std::vector<CellId>{CellId{1}});
  }

  const SymbolicModel drift = build_symbolic_model(test::line(1.0, 0.0, 0.0, 1.0, 0.5, 0.5));
  const auto s0 = drift.successors(CellId{0}, 0);
  CHECK(std::find(s0.begin(), s0.end(), CellId{1}) != s0.end());
  for (CellId c : s0)
    CHECK((c == CellId{0} || c == CellId{1}));
  CHECK(drift.blocked(CellId{1}, 0));
  const auto s1 = drift.successors(CellId{1}, 0);
  REQUIRE(s1.size() == 1);
  CHECK(s1[0].is_sink());
}

TEST_CASE("build_symbolic_model: successor lists sorted and duplicate free") {
  const CaseStudy cs = cartpole_desk();
  const SymbolicModel m = build_symbolic_model(cs.system);
  for (std::uint64_t p = 0; p < m.num_pairs(); ++p)
    for (std::uint64_t i = m.offsets[p] + 1; i < m.offsets[p + 1]; ++i)
      REQUIRE(m.successor_table[i - 1] < m.successor_table[i]);
  for (std::uint64_t p = 0; p < m.num_pairs(); ++p) {
    const std::uint64_t n = m.offsets[p + 1] - m.offsets[p];
    REQUIRE(n >= 1);
    bool sink = false;
    for (std::uint64_t i = m.offsets[p]; i < m.offsets[p + 1]; ++i)
      sink |= m.successor_table[i].is_sink();
    if (sink)
      REQUIRE(n == 1);
  }
}

TEST_CASE("build_symbolic_model: deterministic and round trips through the binary format") {
  const auto sys = test::line(0.3, 1.0, -2.0, 2.0, 0.1, 0.4, {{-1.0}, {0.0}, {1.0}}, 0.2);
  AbstractionOptions par;
  par.workers = 3;
  const SymbolicModel a = build_symbolic_model(sys);
  const SymbolicModel b = build_symbolic_model(sys, par);
  CHECK(a == b);
  std::stringstream buf;
  save_model(a, buf);
  const SymbolicModel c = load_model(buf);
  CHECK(a == c);
  std::stringstream bad("not a model");
  CHECK_THROWS_AS(load_model(bad), ConfigError);
}

TEST_CASE("build_symbolic_model: enlarging w never removes a successor") {
  const auto small = build_symbolic_model(test::line(0.2, 1.0, -2.0, 2.0, 0.1, 0.4, {{-1.0}, {1.0}}, 0.05));
  const auto large = build_symbolic_model(test::line(0.2, 1.0, -2.0, 2.0, 0.1, 0.4, {{-1.0}, {1.0}}, 0.5));
  for (std::uint32_t c = 0; c < small.num_cells(); ++c)
    for (std::uint32_t u = 0; u < 2; ++u) {
      const auto big = large.successors(CellId{c}, u);
      if (big.size() == 1 && big[0].is_sink())
        continue;
      for (CellId s : small.successors(CellId{c}, u))
        REQUIRE(std::binary_search(big.begin(), big.end(), s));
    }
}

TEST_CASE("abstraction soundness: random disturbed trajectories") {
  SoundnessOptions o;
  o.samples = 2000;
  const auto sys = test::line(0.2, 1.0, -2.0, 2.0, 0.1, 0.4, {{-1.0}, {0.0}, {1.0}}, 0.3);
  const CheckResult line = check_abstraction_soundness(sys, build_symbolic_model(sys), o);
  CHECK_MESSAGE(line.passed, line.detail);

  const CaseStudy cs = cartpole_desk();
  const CheckResult cp = check_abstraction_soundness(cs.system, build_symbolic_model(cs.system), o);
  CHECK_MESSAGE(cp.passed, cp.detail);
}

TEST_CASE("abstraction soundness: an understated Jacobian bound is caught") {
  /* x' = x: the true L is 1, claiming 0 under-approximates the reachable set */
  ControlSystemSpec s = test::line(0.0, 0.0, -4.0, 4.0, 0.5, 1.0);
  s.f = [](std::span<const double> x, std::span<const double>, std::span<double> dx) { dx[0] = x[0]; };
  SoundnessOptions o;
  o.samples = 2000;
  CHECK_FALSE(check_abstraction_soundness(s, build_symbolic_model(s), o).passed);
}
