#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qsynth/abstraction.hpp"
#include "qsynth/casestudies.hpp"
#include "qsynth/errors.hpp"

using namespace qsynth;

TEST_CASE("builtin: input counts") {
  CHECK(hvac().system.inputs.size() == 12);
  CHECK(cartpole().system.inputs.size() == 101);
  CHECK(cartpole_desk().system.inputs.size() == 11);
  CHECK(builtin("hvac").system.name == "hvac");
  CHECK_THROWS_AS(builtin("pendulum"), ConfigError);
  for (const char* n : {"hvac", "cartpole", "cartpole-desk"})
    CHECK_NOTHROW(builtin(n).system.validate());
}

TEST_CASE("hvac: disturbance bound is |B (10,10)|") {
  const Vec w = hvac().system.w;
  const Vec expect{25e-4, 58e-4, 16.2e-4, 23e-4};
  REQUIRE(w.size() == 4);
  for (int i = 0; i < 4; ++i)
    CHECK(w[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("hvac: parameters") {
  const CaseStudy cs = hvac();
  CHECK(cs.system.tau == 100.0);
  CHECK(cs.system.grid.eta() == Vec{0.2, 1.0, 0.4, 10.0});
  CHECK(cs.ec.u0 == Vec{-25.0, -50.0});
  CHECK(cs.dr.projection == std::vector<std::size_t>{0, 2});
  CHECK(cs.system.safe_set.state.lower[0] == -1.0);
  CHECK(cs.system.safe_set.state.upper[2] == 5.0);
  CHECK_NOTHROW(cs.disturbance("dsin"));
  CHECK_NOTHROW(cs.disturbance("dcon"));
  CHECK_THROWS_AS(cs.disturbance("gust"), ConfigError);
  const CaseStudy wide = hvac(HvacOptions{20.0, 40.0});
  CHECK(wide.system.grid.domain().upper[1] == 20.0);
  CHECK(wide.system.grid.domain().upper[3] == 40.0);
}

TEST_CASE("hvac: dynamics are linear") {
  const CaseStudy cs = hvac();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  const auto& f = cs.system.f;
  for (int k = 0; k < 200; ++k) {
    Vec x(4), y(4), xy(4), u{d(rng), d(rng)};
    for (int i = 0; i < 4; ++i) {
      x[i] = d(rng);
      y[i] = d(rng);
      xy[i] = x[i] + y[i];
    }
    Vec fx(4), fxy(4), ay(4), zero(2, 0.0), fy(4), f0(4, 0.0);
    f(x, u, fx);
    f(xy, u, fxy);
    f(y, zero, fy);
    f(Vec(4, 0.0), zero, f0);
    for (int i = 0; i < 4; ++i)
      REQUIRE(fxy[i] - fx[i] == doctest::Approx(fy[i] - f0[i]).epsilon(1e-9));
  }
}

TEST_CASE("cartpole: structure and Jacobian bound") {
  const CaseStudy cs = cartpole();
  const auto& s = cs.system;
  CHECK(s.tau == 0.35);
  CHECK(s.grid.eta() == Vec{0.05, 0.1, 0.1, 0.1});
  CHECK(s.inputs.front()[0] == -5.0);
  CHECK(s.inputs.back()[0] == 5.0);
  CHECK(s.inputs[1][0] - s.inputs[0][0] == doctest::Approx(0.1));
  CHECK(cs.dr.reference[0] == doctest::Approx(std::numbers::pi));

  std::mt19937_64 rng(2);
  const Box b = s.grid.domain();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = 1e-6;
  for (int k = 0; k < 10000; ++k) {
    Vec x(4);
    for (int i = 0; i < 4; ++i)
      x[i] = b.lower[i] + unit(rng) * (b.upper[i] - b.lower[i]);
    const Vec& u = s.inputs[rng() % s.inputs.size()];
    Vec fx(4);
    s.f(x, u, fx);
    REQUIRE(fx[2] == x[3]);
    REQUIRE(fx[3] == u[0]);
    const Matrix L = s.jacobian_bound_for(u);
    for (int j = 0; j < 4; ++j) {
      Vec xp = x;
      xp[j] += h;
      Vec fp(4);
      s.f(xp, u, fp);
      for (int i = 0; i < 4; ++i) {
        const double dfdx = (fp[i] - fx[i]) / h;
        if (i == j)
          REQUIRE(dfdx <= L(i, j) + 1e-4);
        else
          REQUIRE(std::abs(dfdx) <= L(i, j) + 1e-4);
      }
    }
  }
}

TEST_CASE("cartpole: per-input bound never exceeds the global bound") {
  const auto& s = cartpole().system;
  for (const Vec& u : s.inputs) {
    const Matrix L = s.jacobian_bound_for(u);
    for (std::size_t i = 0; i < L.data.size(); ++i)
      REQUIRE(L.data[i] <= s.jacobian_bound.data[i]);
  }
}

TEST_CASE("cartpole-desk: desk scale grid") {
  const CaseStudy cs = cartpole_desk();
  CHECK(cs.system.grid.num_cells() <= 200000);
  CHECK(cs.system.grid.eta() == Vec{0.2, 0.4, 0.4, 0.4});
  CHECK(cs.system.inputs[1][0] - cs.system.inputs[0][0] == doctest::Approx(1.0));
}
