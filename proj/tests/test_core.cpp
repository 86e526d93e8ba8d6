#include <doctest.h>

#include <cmath>
#include <random>

#include "qsynth/core.hpp"
#include "qsynth/errors.hpp"
#include "qsynth/rational.hpp"

using namespace qsynth;

TEST_CASE("quantize: examples") {
  const Grid g(Box({0.0}, {1.0}), {0.5});
  CHECK(g.quantize(Vec{0.74}) == CellId{1});
  CHECK(g.quantize(Vec{1.5}).is_sink());
  CHECK(g.quantize(Vec{-0.01}).is_sink());
  CHECK(g.quantize(Vec{1.0}) == CellId{1});  // upper face belongs to the last cell

  const Grid g2(Box({-1.0, -5.0}, {1.0, 5.0}), {0.2, 1.0});
  CHECK(g2.quantize(Vec{-1.0, -5.0}) == CellId{0});
  CHECK(g2.cells_per_dim() == std::vector<std::uint32_t>{10, 10});
  CHECK_THROWS_AS(g2.quantize(Vec{0.0}), ContractViolation);
}

TEST_CASE("grid: clipped last cell") {
  const Grid g(Box({0.0}, {1.0}), {0.3});
  CHECK(g.num_cells() == 4);
  const Box last = g.cell_box(CellId{3});
  CHECK(last.lower[0] == doctest::Approx(0.9));
  CHECK(last.upper[0] == doctest::Approx(1.0));
  CHECK(g.cell_center(CellId{3})[0] == doctest::Approx(0.95));
}

TEST_CASE("cell_center: examples") {
  const Grid g(Box({0.0}, {1.0}), {0.5});
  CHECK(g.cell_center(CellId{1})[0] == doctest::Approx(0.75));
  CHECK(g.cell_center(CellId{0})[0] == doctest::Approx(0.25));
  CHECK_THROWS_AS(g.cell_center(CellId::sink()), ContractViolation);

  const Grid g2(Box({0.0, 0.0}, {4.0, 4.0}), {1.0, 2.0});
  const std::uint32_t coords[2] = {0, 1};
  const Vec c = g2.cell_center(g2.from_coords(coords));
  CHECK(c[0] == doctest::Approx(0.5));
  CHECK(c[1] == doctest::Approx(3.0));
}

TEST_CASE("grid: center round trip and containment") {
  const Grid g(Box({-1.0, -5.0, 0.0}, {1.0, 5.0, 0.7}), {0.2, 1.0, 0.25});
  for (std::uint32_t i = 0; i < g.num_cells(); ++i)
    REQUIRE(g.quantize(g.cell_center(CellId{i})) == CellId{i});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(-1.0, 1.0), uy(-5.0, 5.0), uz(0.0, 0.7);
  for (int k = 0; k < 5000; ++k) {
    const Vec x{ux(rng), uy(rng), uz(rng)};
    const CellId c = g.quantize(x);
    REQUIRE_FALSE(c.is_sink());
    REQUIRE(g.cell_box(c).contains(x));
  }
}

TEST_CASE("cost: examples") {
  CostSpec is;
  is.kind = CostKind::IS;
  CHECK(cost(is, Vec{0.0, 0.0}, Vec{0.0}, Vec{0.0, 0.0}) == 0.0);
  CHECK(cost(is, Vec{0.0, 0.0}, Vec{0.0}, Vec{25.0, 0.0}) == 1.0);

  CostSpec dr;
  dr.kind = CostKind::DR;
  dr.reference = {0.0, 0.0};
  dr.projection = {0, 2};
  CHECK(cost(dr, Vec{0.0}, Vec{1.0, 7.0, 3.0, 9.0}, Vec{0.0}) == 10.0);

  CostSpec ec;
  ec.kind = CostKind::EC;
  ec.u0 = {-25.0, -50.0};
  CHECK(cost(ec, Vec{0.0, 0.0}, Vec{0.0}, Vec{0.0, 0.0}) == 3125.0);

  CostSpec cc = ec;
  cc.kind = CostKind::CC;
  CHECK_THROWS_AS(cost(cc, Vec{0.0, 0.0}, Vec{0.0}, Vec{0.0, 0.0}), ConfigError);
}

TEST_CASE("cell_cost: examples") {
  CostSpec dr;
  dr.kind = CostKind::DR;
  dr.reference = {0.0};
  dr.projection = {0};
  CHECK(cell_cost(dr, Vec{0.0}, Box({0.0}, {0.2}), Vec{0.0}) == doctest::Approx(0.04));
  CHECK(cell_cost(dr, Vec{0.0}, Box({-0.1}, {0.1}), Vec{0.0}) == doctest::Approx(0.01));
  CostSpec is;
  is.kind = CostKind::IS;
  CHECK(cell_cost(is, Vec{1.0}, Box({-3.0}, {3.0}), Vec{2.0}) == 1.0);
}

TEST_CASE("cell_cost bounds cost on random samples") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CostSpec cc;
  cc.kind = CostKind::CC;
  cc.reference = {0.5, -1.0};
  cc.projection = {0, 1};
  cc.u0 = {-1.0};
  cc.normalizers = Normalizers{30.0, 40.0, 16.0};
  const Box cell({-2.0, -1.5, 0.0}, {-1.6, 1.0, 3.0});
  for (int k = 0; k < 1000; ++k) {
    const Vec u{4.0 * unit(rng) - 2.0}, u2{4.0 * unit(rng) - 2.0};
    const double bound = cell_cost(cc, u, cell, u2);
    for (CostKind kind : {CostKind::DR, CostKind::CC}) {
      CostSpec s = cc;
      s.kind = kind;
      Vec x(3);
      for (int d = 0; d < 3; ++d)
        x[d] = cell.lower[d] + unit(rng) * (cell.upper[d] - cell.lower[d]);
      REQUIRE(cost(s, u, x, u2) <= cell_cost(s, u, cell, u2) + 1e-12);
    }
    REQUIRE(bound >= 0.0);
  }
}

TEST_CASE("cost: IS is 0/1 and CC stays in [0,1] under true maxima") {
  CostSpec cc;
  cc.kind = CostKind::CC;
  cc.reference = {0.0};
  cc.projection = {0};
  cc.u0 = {0.0};
  /* domain x in [-1, 1], inputs in {-1, 0, 1}: max DR 1, max EC 1, max ID 4 */
  cc.normalizers = Normalizers{1.0, 1.0, 4.0};
  CostSpec is;
  is.kind = CostKind::IS;
  for (double u : {-1.0, 0.0, 1.0})
    for (double u2 : {-1.0, 0.0, 1.0})
      for (double x = -1.0; x <= 1.0; x += 0.125) {
        const double c = cost(cc, Vec{u}, Vec{x}, Vec{u2});
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
        const double i = cost(is, Vec{u}, Vec{x}, Vec{u2});
        CHECK((i == 0.0 || i == 1.0));
      }
}

TEST_CASE("controller: domain and pairs") {
  Controller k(4, 3);
  CHECK(k.empty());
  k.set(CellId{1}, 0, true);
  k.set(CellId{1}, 2, true);
  k.set(CellId{3}, 1, true);
  CHECK(k.domain_size() == 2);
  CHECK(k.num_pairs() == 3);
  CHECK(k.inputs(CellId{1}) == std::vector<std::uint32_t>{0, 2});
  CHECK_FALSE(k.in_domain(CellId::sink()));
  k.set(CellId{3}, 1, false);
  CHECK_FALSE(k.in_domain(CellId{3}));
}

TEST_CASE("rational: parse and order") {
  CHECK(Rational::parse("15/16") == Rational(15, 16));
  CHECK(Rational::parse("0.5") == Rational(1, 2));
  CHECK(Rational::parse("1") == Rational(1));
  CHECK(Rational(2, -4) == Rational(-1, 2));
  CHECK(Rational(1, 3) < Rational(1, 2));
  CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
  CHECK(Rational(255, 256).to_string() == "255/256");
  CHECK_THROWS(Rational::parse("abc"));
  CHECK_THROWS(Rational::parse("1/0"));
}
