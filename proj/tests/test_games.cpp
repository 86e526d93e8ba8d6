#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "qsynth/errors.hpp"
#include "qsynth/games.hpp"
#include "qsynth/verify.hpp"

using namespace qsynth;
using test::arena;
using test::units;

namespace {

/* the same arena with every min node except `keep` restricted to the edge chosen by sigma_min,
 * and `keep` forced onto `edge` */
Arena fix_min(const Arena& a, const std::vector<std::uint32_t>& sigma_min, std::uint32_t keep, std::uint64_t edge) {
  std::vector<std::tuple<std::uint32_t, std::uint32_t, std::int64_t>> emin;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> emax;
  for (std::uint32_t v = 0; v < a.num_min(); ++v)
    for (std::uint64_t e = a.min_offsets[v]; e < a.min_offsets[v + 1]; ++e) {
      const bool chosen = v == keep ? e == edge : a.min_targets[e] == sigma_min[v];
      if (chosen)
        emin.emplace_back(v, a.min_targets[e], a.weights[e]);
    }
  for (std::uint32_t m = 0; m < a.num_max(); ++m)
    for (std::uint64_t e = a.max_offsets[m]; e < a.max_offsets[m + 1]; ++e)
      emax.emplace_back(m, a.max_targets[e]);
  return Arena::from_edges(a.num_min(), a.num_max(), emin, emax);
}

std::vector<Arena> small_corpus(std::size_t n) {
  CorpusOptions o;
  o.count = n;
  o.seed = 99;
  return random_corpus(o);
}

}  // namespace

TEST_CASE("solve_dpg: constant self loop") {
  const Arena a = arena(1, 1, {{0, 0, 3}}, {{0, 0}});
  for (const Rational& l : {Rational(0), Rational(1, 2), Rational(15, 16), Rational(255, 256)}) {
    const DpgResult r = solve_dpg(a, l);
    CHECK(r.values[0] == doctest::Approx(3.0).epsilon(1e-9));
  }
}

TEST_CASE("solve_dpg: lambda 0 is the greedy one-step minimum") {
  /* min 0 chooses max 0 (cost 4) or max 1 (cost 1); max nodes lead to min 1 (cost 7) or min 0 */
  const Arena a = arena(2, 2, {{0, 0, 4}, {0, 1, 1}, {1, 0, 7}}, {{0, 0}, {0, 1}, {1, 1}});
  const DpgResult r = solve_dpg(a, Rational(0));
  CHECK(r.values[0] == doctest::Approx(1.0));
  CHECK(r.values[1] == doctest::Approx(7.0));
  CHECK(r.strategy.sigma_min[0] == 1);
}

TEST_CASE("solve_dpg: contract checks") {
  const Arena a = arena(1, 1, {{0, 0, 3}}, {{0, 0}});
  CHECK_THROWS_AS(solve_dpg(a, Rational(1)), ContractViolation);
  DpgOptions bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(solve_dpg(a, Rational(1, 2), bad), ContractViolation);
}

TEST_CASE("solve_mpg: examples") {
  /* one cycle of two rounds with costs 1 and 3 */
  const Arena cycle = arena(2, 2, {{0, 0, 1}, {1, 1, 3}}, {{0, 1}, {1, 0}});
  const MpgResult r = solve_mpg(cycle);
  CHECK(r.values[0] == Rational(2'000'000));
  CHECK(r.values[1] == Rational(2'000'000));

  /* min node with self cycles of cost 5 and 2 */
  const Arena choice = arena(1, 2, {{0, 0, 5}, {0, 1, 2}}, {{0, 0}, {1, 0}});
  const MpgResult c = solve_mpg(choice);
  CHECK(c.values[0] == Rational(2'000'000));
  CHECK(c.strategy.sigma_min[0] == 1);
  CHECK(c.value(0) == doctest::Approx(2.0));
}

TEST_CASE("solve_mpg: exact against the brute-force oracle") {
  const auto corpus = small_corpus(60);
  for (const Arena& a : corpus) {
    const auto oracle = brute_force_mpg(a);
    REQUIRE(solve_mpg(a).values == oracle);
    REQUIRE(solve_mpg_energy(a).values == oracle);
  }
}

TEST_CASE("solve_mpg: strategies realize the values") {
  for (const Arena& a : small_corpus(60)) {
    const MpgResult r = solve_mpg(a);
    REQUIRE(play_values(a, r.strategy) == r.values);
    REQUIRE(mpg_values_against(a, r.strategy.sigma_min) == r.values);
  }
}

TEST_CASE("solve_mpg: values are cycle means with small denominators") {
  for (const Arena& a : small_corpus(60)) {
    const MpgResult r = solve_mpg(a);
    for (const Rational& v : r.values)
      REQUIRE(v.den() <= static_cast<std::int64_t>(a.num_min()));
  }
}

TEST_CASE("solve_mpg: scaling weights by k scales values and keeps strategies") {
  for (const Arena& a : small_corpus(40)) {
    Arena b = a;
    for (auto& w : b.weights)
      w *= 3;
    const MpgResult ra = solve_mpg(a), rb = solve_mpg(b);
    for (std::size_t v = 0; v < ra.values.size(); ++v)
      REQUIRE(rb.values[v] == ra.values[v] * Rational(3));
    REQUIRE(ra.strategy == rb.strategy);
  }
}

TEST_CASE("solve_dpg: matches the brute-force oracle") {
  const auto corpus = small_corpus(60);
  const auto res = check_dpg_oracle(corpus, {Rational(0), Rational(1, 2), Rational(15, 16)}, 1e-6);
  CHECK_MESSAGE(res.passed, res.detail);
}

TEST_CASE("solve_dpg: residuals contract by lambda") {
  const auto res = check_dpg_contraction(small_corpus(60), {Rational(1, 2), Rational(15, 16), Rational(63, 64)});
  CHECK_MESSAGE(res.passed, res.detail);
}

TEST_CASE("solve_dpg: values stay within the weight range") {
  for (const Arena& a : small_corpus(40)) {
    const DpgResult r = solve_dpg(a, Rational(7, 8));
    const double hi = static_cast<double>(*std::max_element(a.weights.begin(), a.weights.end())) / 1e6;
    for (double v : r.values) {
      REQUIRE(v >= -1e-9);
      REQUIRE(v <= hi + 1e-9);
    }
  }
}

TEST_CASE("solve_dpg: no single-node deviation of sigma_min helps") {
  std::mt19937_64 rng(4);
  const auto corpus = small_corpus(100);
  const Rational l(3, 4);
  DpgOptions o;
  o.tol = 1e-10;
  for (int k = 0; k < 100; ++k) {
    const Arena& a = corpus[rng() % corpus.size()];
    const DpgResult best = solve_dpg(a, l, o);
    const auto v = static_cast<std::uint32_t>(rng() % a.num_min());
    const std::uint64_t e = a.min_offsets[v] + rng() % (a.min_offsets[v + 1] - a.min_offsets[v]);
    const DpgResult dev = solve_dpg(fix_min(a, best.strategy.sigma_min, v, e), l, o);
    for (std::size_t u = 0; u < a.num_min(); ++u)
      REQUIRE(dev.values[u] >= best.values[u] - 1e-8);
  }
}

TEST_CASE("dpg_mpg_limit_check: examples") {
  const Arena constant = arena(2, 2, {{0, 0, 4}, {0, 1, 4}, {1, 1, 4}}, {{0, 1}, {1, 0}, {1, 1}});
  const auto flat = dpg_mpg_limit_check(constant, {Rational(15, 16), Rational(63, 64), Rational(255, 256)});
  for (std::size_t i = 0; i < flat.lambdas.size(); ++i)
    CHECK(flat.max_gap(i) < 1e-8);

  /* cycle 1, 3: V_l(0) = (1 + 3l) / (1 + l), nu = 2 */
  const Arena cycle = arena(2, 2, {{0, 0, 1}, {1, 1, 3}}, {{0, 1}, {1, 0}});
  const std::vector<Rational> ls{Rational(15, 16), Rational(63, 64), Rational(255, 256)};
  const auto rep = dpg_mpg_limit_check(cycle, ls);
  CHECK(rep.monotone(1e-9));
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const double l = ls[i].to_double();
    CHECK(rep.gaps[i][0] == doctest::Approx(std::abs((1 + 3 * l) / (1 + l) - 2.0)).epsilon(1e-6));
  }
  CHECK(rep.max_gap(2) < rep.max_gap(0));

  const auto res = check_limit(small_corpus(30), ls, 0.05);
  CHECK_MESSAGE(res.passed, res.detail);
}

TEST_CASE("solutions: binary round trip keyed by arena, cost and lambda") {
  const Arena a = small_corpus(1).front();
  const GameSolution d = GameSolution::from(solve_dpg(a, Rational(1, 2)));
  const GameSolution m = GameSolution::from(solve_mpg(a));
  const auto dir = std::filesystem::temp_directory_path() / "qsynth-test-games";
  std::filesystem::create_directories(dir);
  save_solution(d, 1, 2, dir / "d.qsgs");
  save_solution(m, 1, 2, dir / "m.qsgs");
  CHECK(load_solution(dir / "d.qsgs", 1, 2, Rational(1, 2)) == d);
  CHECK(load_solution(dir / "m.qsgs", 1, 2, Rational(1)) == m);
  CHECK_THROWS_AS(load_solution(dir / "d.qsgs", 1, 3, Rational(1, 2)), ConfigError);
  CHECK_THROWS_AS(load_solution(dir / "d.qsgs", 1, 2, Rational(3, 4)), ConfigError);
  std::ostringstream csv;
  export_solution_csv(d, a, csv);
  CHECK(csv.str().find("min") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("brute force oracles: lasso arithmetic") {
  const Arena cycle = arena(2, 2, {{0, 0, 1}, {1, 1, 3}}, {{0, 1}, {1, 0}});
  CHECK(brute_force_mpg(cycle) == std::vector<Rational>{Rational(2'000'000), Rational(2'000'000)});
  const auto v = brute_force_dpg(cycle, Rational(1, 2));
  CHECK(v[0] == doctest::Approx((1 + 3 * 0.5) / 1.5));
  CHECK(v[1] == doctest::Approx((3 + 1 * 0.5) / 1.5));
}
