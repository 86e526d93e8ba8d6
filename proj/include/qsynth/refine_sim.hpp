#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsynth/arena.hpp"
#include "qsynth/core.hpp"
#include "qsynth/games.hpp"
#include "qsynth/rational.hpp"

namespace qsynth {

/*
 * class: Implementation
 *
 * single-valued selection of the safety controller: next input as a function
 * of (cell, previous input). Pairs outside dom(K^) x U^ are undefined.
 */
class Implementation {
public:
  static constexpr std::uint32_t kUndefined = 0xffffffffu;

  Implementation() = default;
  Implementation(std::uint64_t num_cells, std::uint32_t num_inputs);

  std::uint64_t num_cells() const noexcept { return num_cells_; }
  std::uint32_t num_inputs() const noexcept { return num_inputs_; }

  bool defined(CellId c) const;
  /* throws ContractViolation for undefined pairs */
  std::uint32_t lookup(CellId c, std::uint32_t previous) const;
  void set(CellId c, std::uint32_t previous, std::uint32_t next);

  const std::vector<std::uint32_t>& table() const noexcept { return table_; }
  std::uint64_t hash() const;

  friend bool operator==(const Implementation&, const Implementation&) = default;

private:
  std::uint64_t num_cells_ = 0;
  std::uint32_t num_inputs_ = 0;
  std::vector<std::uint32_t> table_;
};

/* lookup(x,u) = input of the max node sigma_min picks at (x,u) */
Implementation refine(const Arena& arena, const Strategy& strategy, const Controller& controller);

/* every enabled pair of the controller, choosing the lowest enabled input; previous input ignored */
Implementation first_enabled(const Controller& controller);

/*
 * class: DisturbanceSignal
 *
 * disturbance d(t) in the coordinates of the system's disturbance map; the
 * state sees omega = map * d, clipped component-wise to [-w, w]
 */
struct DisturbanceSignal {
  enum class Kind { none, constant, sinusoid, custom };

  Kind kind = Kind::none;
  std::string name = "none";
  Vec amplitude;   // constant value, or sinusoid amplitude per component
  double rate = 0.0;  // sinusoid: d(t) = amplitude * sin(rate * t)
  std::function<void(double t, std::span<double> d)> signal;

  static DisturbanceSignal none();
  static DisturbanceSignal constant(std::string name, Vec value);
  static DisturbanceSignal sinusoid(std::string name, Vec amplitude, double rate);
  static DisturbanceSignal custom(std::string name, std::function<void(double, std::span<double>)> signal);

  void evaluate(double t, std::span<double> d) const;
};

/* omega(t) as seen by the state equation, including saturation to [-w, w] */
Disturbance state_disturbance(const ControlSystemSpec& sys, const DisturbanceSignal& signal);

struct SimulationOptions {
  std::size_t steps = 10000;
  std::uint32_t u_init = 0;
  Rational lambda{1};
  int substeps = 5;
  bool record_trajectory = true;
  /* false: stop at the first violation and report safe = false instead of throwing */
  bool throw_on_violation = true;
};

struct SimulationReport {
  std::vector<Vec> states;              // x(0) .. x(T-1) when recorded
  std::vector<std::uint32_t> inputs;    // input chosen at step t
  std::vector<double> costs;            // c(u(t-1), x(t), u(t))
  double average = 0.0;                 // mean of costs
  double discounted = 0.0;              // (1-lambda) sum lambda^t c_t, the mean for lambda = 1
  bool safe = true;
  std::size_t steps = 0;
  std::optional<std::size_t> violation_step;
};

/*
 * function: simulate
 *
 * sample-and-hold closed loop: quantize, look up the input, integrate the
 * disturbed ODE over tau. throws SafetyViolation when the state leaves the
 * safe set or the controller domain
 */
SimulationReport simulate(const ControlSystemSpec& sys, const Implementation& impl, std::span<const double> x0,
                          const DisturbanceSignal& disturbance, const CostSpec& cost,
                          const SimulationOptions& options);

/* mean of the last `window` step costs */
double window_average(const SimulationReport& report, std::size_t window);

/* the means of the last two disjoint windows differ by less than eps */
bool limit_average_converged(const SimulationReport& report, std::size_t window, double eps);

void write_trace_csv(const SimulationReport& report, const ControlSystemSpec& sys, const Rational& lambda,
                     std::ostream& out);

struct ProbeReport {
  std::size_t steps = 0;
  std::size_t feasible = 0;
  double fraction() const { return steps == 0 ? 0.0 : static_cast<double>(feasible) / static_cast<double>(steps); }
};

/*
 * function: adversary_probe
 *
 * replays sigma_max on the concrete system: each step searches the lattice of
 * constant disturbances (spacing lattice_step within the disturbance range)
 * for one whose endpoint lands in the cell sigma_max picks, follows it when
 * found and applies zero disturbance otherwise
 */
ProbeReport adversary_probe(const Arena& arena, const Strategy& strategy, const ControlSystemSpec& sys,
                            const Implementation& impl, std::span<const double> x0, std::uint32_t u_init,
                            std::size_t steps, double lattice_step, int substeps = 5);

}  // namespace qsynth
