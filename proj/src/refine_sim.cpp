#include "qsynth/refine_sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "qsynth/abstraction.hpp"
#include "qsynth/errors.hpp"
#include "qsynth/io.hpp"

namespace qsynth {

Implementation::Implementation(std::uint64_t num_cells, std::uint32_t num_inputs)
    : num_cells_(num_cells), num_inputs_(num_inputs), table_(num_cells * num_inputs, kUndefined) {}

bool Implementation::defined(CellId c) const {
  if (c.is_sink() || c.index >= num_cells_ || num_inputs_ == 0)
    return false;
  return table_[static_cast<std::uint64_t>(c.index) * num_inputs_] != kUndefined;
}

std::uint32_t Implementation::lookup(CellId c, std::uint32_t previous) const {
  require(!c.is_sink() && c.index < num_cells_ && previous < num_inputs_, "Implementation: index out of range");
  const std::uint32_t u = table_[static_cast<std::uint64_t>(c.index) * num_inputs_ + previous];
  if (u == kUndefined)
    throw ContractViolation("Implementation: lookup outside the controller domain");
  return u;
}

void Implementation::set(CellId c, std::uint32_t previous, std::uint32_t next) {
  require(!c.is_sink() && c.index < num_cells_ && previous < num_inputs_ && next < num_inputs_,
          "Implementation: index out of range");
  table_[static_cast<std::uint64_t>(c.index) * num_inputs_ + previous] = next;
}

std::uint64_t Implementation::hash() const {
  Hasher h;
  h.u64(num_cells_).u64(num_inputs_);
  h.bytes(table_.data(), table_.size() * sizeof(std::uint32_t));
  return h.value();
}

Implementation refine(const Arena& arena, const Strategy& strategy, const Controller& controller) {
  require(strategy.sigma_min.size() == arena.num_min(), "refine: strategy does not match the arena");
  require(arena.num_inputs == controller.num_inputs(), "refine: arena does not match the controller");
  Implementation impl(controller.num_cells(), controller.num_inputs());
  for (std::size_t v = 0; v < arena.num_min(); ++v) {
    const std::uint32_t m = strategy.sigma_min[v];
    require(m < arena.num_max(), "refine: strategy picks an unknown node");
    const CellId cell = arena.min_cell[v];
    require(arena.max_cell[m] == cell, "refine: strategy picks an edge that leaves the cell");
    require(controller.allows(cell, arena.max_input[m]), "refine: strategy picks an input outside the controller");
    impl.set(cell, arena.min_input[v], arena.max_input[m]);
  }
  for (std::uint64_t c = 0; c < controller.num_cells(); ++c) {
    const CellId cell{static_cast<std::uint32_t>(c)};
    if (controller.in_domain(cell))
      for (std::uint32_t u = 0; u < controller.num_inputs(); ++u)
        require(impl.table()[c * controller.num_inputs() + u] != Implementation::kUndefined,
                "refine: strategy does not cover the controller domain");
  }
  return impl;
}

Implementation first_enabled(const Controller& controller) {
  Implementation impl(controller.num_cells(), controller.num_inputs());
  for (std::uint64_t c = 0; c < controller.num_cells(); ++c) {
    const CellId cell{static_cast<std::uint32_t>(c)};
    auto inputs = controller.inputs(cell);
    if (inputs.empty())
      continue;
    for (std::uint32_t u = 0; u < controller.num_inputs(); ++u)
      impl.set(cell, u, inputs.front());
  }
  return impl;
}

DisturbanceSignal DisturbanceSignal::none() { return {}; }

DisturbanceSignal DisturbanceSignal::constant(std::string name, Vec value) {
  DisturbanceSignal d;
  d.kind = Kind::constant;
  d.name = std::move(name);
  d.amplitude = std::move(value);
  return d;
}

DisturbanceSignal DisturbanceSignal::sinusoid(std::string name, Vec amplitude, double rate) {
  DisturbanceSignal d;
  d.kind = Kind::sinusoid;
  d.name = std::move(name);
  d.amplitude = std::move(amplitude);
  d.rate = rate;
  return d;
}

DisturbanceSignal DisturbanceSignal::custom(std::string name, std::function<void(double, std::span<double>)> signal) {
  require(static_cast<bool>(signal), "DisturbanceSignal: empty custom signal");
  DisturbanceSignal d;
  d.kind = Kind::custom;
  d.name = std::move(name);
  d.signal = std::move(signal);
  return d;
}

void DisturbanceSignal::evaluate(double t, std::span<double> d) const {
  switch (kind) {
  case Kind::none:
    std::fill(d.begin(), d.end(), 0.0);
    return;
  case Kind::constant:
    require(amplitude.size() == d.size(), "DisturbanceSignal: dimension mismatch");
    std::copy(amplitude.begin(), amplitude.end(), d.begin());
    return;
  case Kind::sinusoid: {
    require(amplitude.size() == d.size(), "DisturbanceSignal: dimension mismatch");
    const double s = std::sin(rate * t);
    for (std::size_t i = 0; i < d.size(); ++i)
      d[i] = amplitude[i] * s;
    return;
  }
  case Kind::custom:
    std::fill(d.begin(), d.end(), 0.0);
    signal(t, d);
    return;
  }
}

namespace {

void saturate(std::span<double> omega, const Vec& w) {
  for (std::size_t i = 0; i < omega.size(); ++i)
    omega[i] = std::clamp(omega[i], -w[i], w[i]);
}

Disturbance constant_disturbance(const ControlSystemSpec& sys, const Vec& d) {
  Vec omega = sys.disturbance_map.apply(d);
  saturate(omega, sys.w);
  return [omega](double, std::span<double> out) { std::copy(omega.begin(), omega.end(), out.begin()); };
}

void violation(SimulationReport& r, const SimulationOptions& o, std::size_t step, const std::string& what) {
  if (o.throw_on_violation)
    throw SafetyViolation(step, what + " at step " + std::to_string(step));
  r.safe = false;
  r.violation_step = step;
}

/* first node with (cell, input), nodes being sorted by cell and then input */
std::size_t find_node(const std::vector<CellId>& cells, const std::vector<std::uint32_t>& inputs, CellId c,
                      std::uint32_t u) {
  auto it = std::lower_bound(cells.begin(), cells.end(), c);
  for (; it != cells.end() && *it == c; ++it) {
    const std::size_t i = static_cast<std::size_t>(it - cells.begin());
    if (inputs[i] == u)
      return i;
  }
  throw ContractViolation("arena has no node for the current cell and input");
}

}  // namespace

Disturbance state_disturbance(const ControlSystemSpec& sys, const DisturbanceSignal& signal) {
  if (signal.kind == DisturbanceSignal::Kind::none)
    return {};
  if (sys.disturbance_map.cols == 0)
    throw ConfigError(sys.name + ": system has no disturbance input");
  const Matrix map = sys.disturbance_map;
  const Vec w = sys.w;
  return [map, w, signal](double t, std::span<double> omega) {
    Vec d(map.cols);
    signal.evaluate(t, d);
    Vec o = map.apply(d);
    saturate(o, w);
    std::copy(o.begin(), o.end(), omega.begin());
  };
}

SimulationReport simulate(const ControlSystemSpec& sys, const Implementation& impl, std::span<const double> x0,
                          const DisturbanceSignal& disturbance, const CostSpec& cost_spec,
                          const SimulationOptions& options) {
  sys.validate();
  require(x0.size() == sys.state_dim(), "simulate: initial state has the wrong dimension");
  require(options.u_init < sys.inputs.size(), "simulate: initial input out of range");
  require(impl.num_inputs() == sys.inputs.size() && impl.num_cells() == sys.grid.num_cells(),
          "simulate: implementation does not match the system");
  require(options.lambda >= Rational(0) && options.lambda <= Rational(1), "simulate: lambda must lie in [0, 1]");
  const Disturbance omega = state_disturbance(sys, disturbance);
  const double lambda = options.lambda.to_double();
  const bool average_only = options.lambda == Rational(1);

  SimulationReport r;
  r.costs.reserve(options.steps);
  r.inputs.reserve(options.steps);
  Vec x(x0.begin(), x0.end());
  std::uint32_t prev = options.u_init;
  double sum = 0.0, discounted = 0.0, weight = 1.0 - lambda;
  for (std::size_t t = 0; t <= options.steps; ++t) {
    if (!sys.safe_set.state.contains(x)) {
      violation(r, options, t, "state left the safe set");
      break;
    }
    const CellId cell = sys.grid.quantize(x);
    if (!impl.defined(cell)) {
      violation(r, options, t, "state left the controller domain");
      break;
    }
    if (t == options.steps)
      break;
    const std::uint32_t u = impl.lookup(cell, prev);
    const double c = cost(cost_spec, sys.inputs[prev], x, sys.inputs[u]);
    if (options.record_trajectory)
      r.states.push_back(x);
    r.inputs.push_back(u);
    r.costs.push_back(c);
    sum += c;
    if (!average_only) {
      discounted += weight * c;
      weight *= lambda;
    }
    x = rk4_step_disturbed(sys.f, x, sys.inputs[u], sys.tau, options.substeps, omega,
                           static_cast<double>(t) * sys.tau);
    prev = u;
  }
  r.steps = r.costs.size();
  r.average = r.steps ? sum / static_cast<double>(r.steps) : 0.0;
  r.discounted = average_only ? r.average : discounted;
  return r;
}

double window_average(const SimulationReport& report, std::size_t window) {
  require(window > 0 && window <= report.costs.size(), "window_average: window exceeds the run");
  double s = 0.0;
  for (std::size_t i = report.costs.size() - window; i < report.costs.size(); ++i)
    s += report.costs[i];
  return s / static_cast<double>(window);
}

bool limit_average_converged(const SimulationReport& report, std::size_t window, double eps) {
  require(window > 0 && 2 * window <= report.costs.size(), "limit_average_converged: run shorter than two windows");
  const std::size_t n = report.costs.size();
  double last = 0.0, before = 0.0;
  for (std::size_t i = n - window; i < n; ++i)
    last += report.costs[i];
  for (std::size_t i = n - 2 * window; i < n - window; ++i)
    before += report.costs[i];
  return std::abs(last - before) / static_cast<double>(window) < eps;
}

void write_trace_csv(const SimulationReport& report, const ControlSystemSpec& sys, const Rational& lambda,
                     std::ostream& out) {
  require(report.states.size() == report.steps, "write_trace_csv: trajectory was not recorded");
  const std::size_t n = sys.state_dim(), m = sys.input_dim();
  out << "t";
  for (std::size_t i = 0; i < n; ++i)
    out << ",x" << i + 1;
  out << ",input";
  for (std::size_t i = 0; i < m; ++i)
    out << ",u" << i + 1;
  out << ",cost,average,discounted\n";
  out.precision(17);
  const double l = lambda.to_double();
  const bool average_only = lambda == Rational(1);
  double sum = 0.0, disc = 0.0, weight = 1.0 - l;
  for (std::size_t t = 0; t < report.steps; ++t) {
    sum += report.costs[t];
    if (!average_only) {
      disc += weight * report.costs[t];
      weight *= l;
    }
    const double avg = sum / static_cast<double>(t + 1);
    out << t;
    for (double v : report.states[t])
      out << ',' << v;
    out << ',' << report.inputs[t];
    for (double v : sys.inputs[report.inputs[t]])
      out << ',' << v;
    out << ',' << report.costs[t] << ',' << avg << ',' << (average_only ? avg : disc) << '\n';
  }
}

ProbeReport adversary_probe(const Arena& arena, const Strategy& strategy, const ControlSystemSpec& sys,
                            const Implementation& impl, std::span<const double> x0, std::uint32_t u_init,
                            std::size_t steps, double lattice_step, int substeps) {
  sys.validate();
  require(strategy.sigma_max.size() == arena.num_max(), "adversary_probe: strategy does not match the arena");
  require(x0.size() == sys.state_dim() && u_init < sys.inputs.size(), "adversary_probe: bad initial condition");
  require(lattice_step > 0.0, "adversary_probe: lattice step must be positive");

  /* lattice of constant disturbances in the disturbance coordinates */
  const std::size_t k = sys.disturbance_map.cols;
  std::vector<std::vector<double>> axes(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double range = sys.disturbance_range[i];
    const auto count = static_cast<std::size_t>(std::floor(2.0 * range / lattice_step + 1e-9)) + 1;
    for (std::size_t j = 0; j < count; ++j)
      axes[i].push_back(-range + static_cast<double>(j) * lattice_step);
  }
  std::vector<Disturbance> lattice;
  std::vector<std::size_t> idx(k, 0);
  while (true) {
    Vec d(k);
    for (std::size_t i = 0; i < k; ++i)
      d[i] = axes[i][idx[i]];
    lattice.push_back(k ? constant_disturbance(sys, d) : Disturbance{});
    std::size_t i = k;
    while (i > 0 && ++idx[i - 1] == axes[i - 1].size())
      idx[--i] = 0;
    if (i == 0)
      break;
  }

  ProbeReport report;
  Vec x(x0.begin(), x0.end());
  std::uint32_t prev = u_init;
  for (std::size_t t = 0; t < steps; ++t) {
    const CellId cell = sys.grid.quantize(x);
    if (!impl.defined(cell) || !sys.safe_set.state.contains(x))
      throw SafetyViolation(t, "adversary probe: state left the controller domain at step " + std::to_string(t));
    const std::uint32_t u = impl.lookup(cell, prev);
    const std::size_t m = find_node(arena.max_cell, arena.max_input, cell, u);
    const CellId target = arena.min_cell[strategy.sigma_max[m]];
    const double t0 = static_cast<double>(t) * sys.tau;
    bool found = false;
    for (const Disturbance& omega : lattice) {
      Vec y = rk4_step_disturbed(sys.f, x, sys.inputs[u], sys.tau, substeps, omega, t0);
      if (sys.grid.quantize(y) == target) {
        x = std::move(y);
        found = true;
        break;
      }
    }
    if (!found)
      x = rk4_step(sys.f, x, sys.inputs[u], sys.tau, substeps);
    report.feasible += found ? 1 : 0;
    ++report.steps;
    prev = u;
  }
  return report;
}

}  // namespace qsynth
