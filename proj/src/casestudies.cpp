#include "qsynth/casestudies.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "qsynth/errors.hpp"

namespace qsynth {

namespace {

CostSpec make_cost(CostKind kind, Vec reference, std::vector<std::size_t> projection, Vec u0) {
  CostSpec c;
  c.kind = kind;
  c.reference = std::move(reference);
  c.projection = std::move(projection);
  c.u0 = std::move(u0);
  return c;
}

void fill_costs(CaseStudy& cs, const Vec& reference, const std::vector<std::size_t>& projection, const Vec& u0) {
  cs.is = make_cost(CostKind::IS, reference, projection, u0);
  cs.dr = make_cost(CostKind::DR, reference, projection, u0);
  cs.ec = make_cost(CostKind::EC, reference, projection, u0);
  cs.id = make_cost(CostKind::ID, reference, projection, u0);
  cs.cc = make_cost(CostKind::CC, reference, projection, u0);
}

/* A, B scaled by 1e-4 */
const double kHvacA[16] = {-28, -5.6, 0, 0, 0, -8.3, 0, 0, 0, 0, -17, 1, 0, 0, 0, -2.8};
const double kHvacB[8] = {-0.8, -1.7, 0, 5.8, -1.7, 0.08, 0, 2.3};

CaseStudy make_cartpole(Vec eta, std::size_t num_inputs) {
  constexpr double pi = std::numbers::pi;
  constexpr double alpha = 1.0, beta = 0.0125;
  CaseStudy cs;
  ControlSystemSpec& s = cs.system;
  s.name = "cartpole";
  s.f = [](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    dx[0] = x[1];
    dx[1] = -(alpha * alpha * std::sin(x[0]) + u[0] * std::cos(x[0])) - 2.0 * beta * u[0];
    dx[2] = x[3];
    dx[3] = u[0];
  };
  const double umax = 5.0;
  /* |df2/dx1| = |cos x1 - u sin x1| <= alpha^2 + |u| */
  auto bound = [](double a) { return Matrix(4, 4, {0, 1, 0, 0, a, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0}); };
  s.jacobian_bound = bound(alpha * alpha + umax);
  s.input_jacobian_bound = [bound](std::span<const double> u) { return bound(alpha * alpha + std::abs(u[0])); };
  s.w = Vec(4, 0.0);
  for (std::size_t i = 0; i < num_inputs; ++i)
    s.inputs.push_back({-umax + 2.0 * umax * static_cast<double>(i) / static_cast<double>(num_inputs - 1)});
  s.tau = 0.35;
  Box box({pi / 2, -1.0, -2.4, -1.4}, {3 * pi / 2, 1.0, 2.4, 1.4});
  s.grid = Grid(box, std::move(eta));
  s.safe_set.state = box;
  s.disturbance_map = Matrix(4, 0);
  fill_costs(cs, {pi, 0.0}, {0, 2}, {0.0});
  cs.disturbances = {DisturbanceSignal::none()};
  cs.u_init = 0;
  cs.steps = 1000;
  return cs;
}

}  // namespace

CostSpec CaseStudy::preset(CostKind kind) const {
  switch (kind) {
  case CostKind::IS: return is;
  case CostKind::DR: return dr;
  case CostKind::EC: return ec;
  case CostKind::ID: return id;
  case CostKind::CC: return cc;
  }
  return is;
}

const DisturbanceSignal& CaseStudy::disturbance(std::string_view name) const {
  for (const auto& d : disturbances)
    if (d.name == name)
      return d;
  throw ConfigError(system.name + ": unknown disturbance '" + std::string(name) + "'");
}

CaseStudy hvac(const HvacOptions& options) {
  if (!(options.x2_bound > 0.0) || !(options.x4_bound > 0.0))
    throw ConfigError("hvac: velocity bounds must be positive");
  CaseStudy cs;
  ControlSystemSpec& s = cs.system;
  s.name = "hvac";
  Matrix A(4, 4, Vec(kHvacA, kHvacA + 16));
  Matrix B(4, 2, Vec(kHvacB, kHvacB + 8));
  for (double& v : A.data)
    v *= 1e-4;
  for (double& v : B.data)
    v *= 1e-4;
  s.f = [A, B](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    for (std::size_t i = 0; i < 4; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 4; ++j)
        acc += A(i, j) * x[j];
      dx[i] = acc + B(i, 0) * u[0] + B(i, 1) * u[1];
    }
  };
  s.jacobian_bound = A;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j)
        s.jacobian_bound(i, j) = std::abs(A(i, j));
  /* w = |B (10, 10)| */
  s.w = B.apply(Vec{10.0, 10.0});
  for (double& v : s.w)
    v = std::abs(v);
  for (double u1 : {-25.0, 0.0, 25.0, 50.0})
    for (double u2 : {-50.0, 0.0, 50.0})
      s.inputs.push_back({u1, u2});
  s.tau = 100.0;
  s.grid = Grid(Box({-1.0, -options.x2_bound, -5.0, -options.x4_bound}, {1.0, options.x2_bound, 5.0, options.x4_bound}),
                {0.2, 1.0, 0.4, 10.0});
  const double inf = std::numeric_limits<double>::infinity();
  s.safe_set.state = Box({-1.0, -inf, -5.0, -inf}, {1.0, inf, 5.0, inf});
  s.disturbance_map = B;
  s.disturbance_range = {10.0, 10.0};
  fill_costs(cs, {0.0, 0.0}, {0, 2}, {-25.0, -50.0});
  const double rate = 1.0 / (2.0 * std::numbers::pi * s.tau);
  cs.disturbances = {DisturbanceSignal::sinusoid("dsin", {10.0, -10.0}, rate),
                     DisturbanceSignal::constant("dcon", {10.0, -10.0}), DisturbanceSignal::none()};
  cs.u_init = 0;
  cs.steps = 10000;
  return cs;
}

CaseStudy cartpole() { return make_cartpole({0.05, 0.1, 0.1, 0.1}, 101); }

CaseStudy cartpole_desk() {
  CaseStudy cs = make_cartpole({0.2, 0.4, 0.4, 0.4}, 11);
  cs.system.name = "cartpole-desk";
  return cs;
}

CaseStudy builtin(std::string_view name) {
  if (name == "hvac")
    return hvac();
  if (name == "cartpole")
    return cartpole();
  if (name == "cartpole-desk")
    return cartpole_desk();
  throw ConfigError("unknown built-in system '" + std::string(name) + "'");
}

}  // namespace qsynth
